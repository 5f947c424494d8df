#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "stackparse/keyvalue.h"
#include "stackparse/parser.h"
#include "stackparse/stacking.h"
#include "stackparse/tagger.h"
#include "stackparse/training.h"

namespace stackparse::cli {

enum class ModelKind { kTagger, kParser, kStackedTagger, kStackedParser };

// Validated run configuration. Values come from a config file and are
// overridden by command-line flags; unknown keys and out-of-range values are
// rejected.
class RunConfig {
 public:
  RunConfig() = default;
  explicit RunConfig(KeyValues values);
  static RunConfig from_file(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value);
  const KeyValues& values() const { return values_; }

  TaggerConfig tagger() const;
  ParserConfig parser() const;
  StackedTaggerConfig stacked_tagger() const;
  StackedParserConfig stacked_parser() const;
  StackingOptions stacking() const;
  TrainOptions training() const;
  std::uint64_t seed() const;
  Decoder decoder() const;
  bool include_punct() const;
  std::size_t k(std::size_t fallback) const;
  double dev_fraction() const;
  std::size_t lm_order() const;

  // The keys that govern training `kind`, defaults filled in.
  KeyValues effective(ModelKind kind) const;

 private:
  void validate() const;
  KeyValues values_;
};

// Runs one command line (args exclude the program name). Returns the exit
// status; diagnostics go to `err`, reports to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace stackparse::cli

#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace stackparse {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// UTF-8 "key = value" lines; '#' starts a comment, blank lines ignored.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::string_view text, std::string_view origin = "<config>");
KeyValues read_key_values(const std::filesystem::path& path);
std::string format_key_values(const KeyValues& values);
void write_key_values(const std::filesystem::path& path, const KeyValues& values);

// Typed accessors; a missing key yields the fallback, a malformed value throws.
std::size_t get_size(const KeyValues& kv, const std::string& key, std::size_t fallback);
double get_double(const KeyValues& kv, const std::string& key, double fallback);
bool get_bool(const KeyValues& kv, const std::string& key, bool fallback);
std::string get_string(const KeyValues& kv, const std::string& key, const std::string& fallback);

std::string format_double(double v);

}  // namespace stackparse

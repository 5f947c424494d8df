#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "stackparse/num/graph.h"
#include "stackparse/num/parameter.h"
#include "stackparse/num/rng.h"

namespace stackparse::num {

enum class LstmVariant {
  // Input, forget and output gates see the cell state through diagonal
  // peephole weights.
  kPeephole,
  // Coupled input-forget gate: forget = 1 - input, no peepholes.
  kCoupled,
};

// Parameters of one LSTM direction, held in a ParameterStore.
//   peephole gate rows: [input, forget, candidate, output]
//   coupled gate rows:  [input, candidate, output]
struct LstmCell {
  LstmVariant variant = LstmVariant::kPeephole;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;
  ParamId w_input = 0;   // (gates*H x input_dim)
  ParamId w_hidden = 0;  // (gates*H x H)
  ParamId bias = 0;      // (gates*H)
  ParamId peephole = 0;  // (3H): input, forget, output; peephole variant only

  std::size_t gate_count() const { return variant == LstmVariant::kPeephole ? 4 : 3; }
};

LstmCell make_lstm_cell(ParameterStore& store, const std::string& prefix, LstmVariant variant,
                        std::size_t input_dim, std::size_t hidden_dim, Rng& rng);

struct LstmStepValues {
  std::vector<Real> h, c;
  std::vector<Real> input_gate, forget_gate, output_gate, candidate;
};

// Plain forward evaluation of one step, outside any graph.
LstmStepValues lstm_step_values(const LstmCell& cell, const ParameterStore& store,
                                std::span<const Real> x, std::span<const Real> h_prev,
                                std::span<const Real> c_prev);

struct LstmState {
  Expr h;
  Expr c;
};

// One recurrence step as a single fused graph node.
LstmState lstm_step(Graph& g, ParameterStore& store, const LstmCell& cell, Expr x, Expr h_prev,
                    Expr c_prev);

struct BiLstmLayer {
  LstmCell forward;
  LstmCell backward;
};

std::vector<BiLstmLayer> make_bilstm(ParameterStore& store, const std::string& prefix,
                                     LstmVariant variant, std::size_t input_dim,
                                     std::size_t hidden_dim, std::size_t layers, Rng& rng);

// Runs a stacked bi-LSTM; output t of each layer is concat(forward h_t,
// backward h_t) and feeds the next layer. `dropout_rate` is applied to every
// layer's outputs.
std::vector<Expr> bilstm_encode(Graph& g, ParameterStore& store, std::span<const BiLstmLayer> layers,
                                std::span<const Expr> inputs, Real dropout_rate = Real(0));

}  // namespace stackparse::num

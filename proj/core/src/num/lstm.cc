#include "stackparse/num/lstm.h"

#include <cmath>

#include "stackparse/num/init.h"
#include "stackparse/num/ops.h"

namespace stackparse::num {
namespace {

Real sigm(Real x) {
  if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
  const Real e = std::exp(x);
  return e / (Real(1) + e);
}

void check_dims(const LstmCell& cell, std::size_t x, std::size_t h, std::size_t c) {
  if (x != cell.input_dim || h != cell.hidden_dim || c != cell.hidden_dim) {
    throw ShapeError("lstm_step: expected input " + std::to_string(cell.input_dim) + " hidden " +
                     std::to_string(cell.hidden_dim) + ", got " + std::to_string(x) + "/" +
                     std::to_string(h) + "/" + std::to_string(c));
  }
}

}  // namespace

LstmCell make_lstm_cell(ParameterStore& store, const std::string& prefix, LstmVariant variant,
                        std::size_t input_dim, std::size_t hidden_dim, Rng& rng) {
  LstmCell cell;
  cell.variant = variant;
  cell.input_dim = input_dim;
  cell.hidden_dim = hidden_dim;
  const std::size_t gates = cell.gate_count();
  const std::size_t H = hidden_dim;

  Tensor wx({gates * H, input_dim});
  Tensor wh({gates * H, H});
  for (std::size_t k = 0; k < gates; ++k) {
    Tensor block = glorot_uniform(H, input_dim, rng);
    std::copy(block.data().begin(), block.data().end(), wx.data().begin() + k * H * input_dim);
    Tensor rec = orthogonal(H, rng);
    std::copy(rec.data().begin(), rec.data().end(), wh.data().begin() + k * H * H);
  }
  cell.w_input = store.add(prefix + "/w_input", std::move(wx));
  cell.w_hidden = store.add(prefix + "/w_hidden", std::move(wh));
  cell.bias = store.add(prefix + "/bias", Tensor::vector(gates * H));
  if (variant == LstmVariant::kPeephole) {
    cell.peephole = store.add(prefix + "/peephole", Tensor::vector(3 * H));
  }
  return cell;
}

LstmStepValues lstm_step_values(const LstmCell& cell, const ParameterStore& store,
                                std::span<const Real> x, std::span<const Real> h_prev,
                                std::span<const Real> c_prev) {
  check_dims(cell, x.size(), h_prev.size(), c_prev.size());
  const std::size_t H = cell.hidden_dim;
  const std::size_t gates = cell.gate_count();
  const Tensor& wx = store[cell.w_input].value;
  const Tensor& wh = store[cell.w_hidden].value;
  const Tensor& b = store[cell.bias].value;

  std::vector<Real> z(gates * H);
  for (std::size_t r = 0; r < gates * H; ++r) {
    Real acc = b[r];
    auto wr = wx.row(r);
    for (std::size_t k = 0; k < x.size(); ++k) acc += wr[k] * x[k];
    auto hr = wh.row(r);
    for (std::size_t k = 0; k < H; ++k) acc += hr[k] * h_prev[k];
    z[r] = acc;
  }

  LstmStepValues out;
  out.h.resize(H);
  out.c.resize(H);
  out.input_gate.resize(H);
  out.forget_gate.resize(H);
  out.output_gate.resize(H);
  out.candidate.resize(H);
  if (cell.variant == LstmVariant::kPeephole) {
    const Tensor& p = store[cell.peephole].value;
    for (std::size_t j = 0; j < H; ++j) {
      const Real i = sigm(z[j] + p[j] * c_prev[j]);
      const Real f = sigm(z[H + j] + p[H + j] * c_prev[j]);
      const Real gc = std::tanh(z[2 * H + j]);
      const Real c = f * c_prev[j] + i * gc;
      const Real o = sigm(z[3 * H + j] + p[2 * H + j] * c);
      out.input_gate[j] = i;
      out.forget_gate[j] = f;
      out.candidate[j] = gc;
      out.output_gate[j] = o;
      out.c[j] = c;
      out.h[j] = o * std::tanh(c);
    }
  } else {
    for (std::size_t j = 0; j < H; ++j) {
      const Real i = sigm(z[j]);
      const Real f = Real(1) - i;
      const Real gc = std::tanh(z[H + j]);
      const Real c = f * c_prev[j] + i * gc;
      const Real o = sigm(z[2 * H + j]);
      out.input_gate[j] = i;
      out.forget_gate[j] = f;
      out.candidate[j] = gc;
      out.output_gate[j] = o;
      out.c[j] = c;
      out.h[j] = o * std::tanh(c);
    }
  }
  return out;
}

LstmState lstm_step(Graph& g, ParameterStore& store, const LstmCell& cell, Expr x, Expr h_prev,
                    Expr c_prev) {
  const std::size_t H = cell.hidden_dim;
  LstmStepValues v = lstm_step_values(cell, store, x.value().data(), h_prev.value().data(),
                                      c_prev.value().data());
  Expr wx = g.param(store[cell.w_input]);
  Expr wh = g.param(store[cell.w_hidden]);
  Expr b = g.param(store[cell.bias]);
  const bool peep = cell.variant == LstmVariant::kPeephole;
  Expr p = peep ? g.param(store[cell.peephole]) : b;

  Tensor out({2 * H, 1});
  std::copy(v.h.begin(), v.h.end(), out.data().begin());
  std::copy(v.c.begin(), v.c.end(), out.data().begin() + H);

  struct Ids {
    int x, h, c, wx, wh, b, p;
  } ids{x.id, h_prev.id, c_prev.id, wx.id, wh.id, b.id, p.id};

  auto backward = [ids, H, peep, v = std::move(v)](Graph& g, int self) {
    const Tensor& go = g.grad(self);
    const Tensor& cp = g.value(ids.c);
    const std::size_t gates = peep ? 4 : 3;
    std::vector<Real> dz(gates * H);
    std::vector<Real> dc_prev(H);
    std::vector<Real> dpeep(peep ? 3 * H : 0);
    const Tensor* pv = peep ? &g.value(ids.p) : nullptr;
    for (std::size_t j = 0; j < H; ++j) {
      const Real dh = go[j];
      const Real dc = go[H + j];
      const Real i = v.input_gate[j], f = v.forget_gate[j], o = v.output_gate[j];
      const Real gc = v.candidate[j], c = v.c[j];
      const Real tc = std::tanh(c);
      const Real dzo = dh * tc * o * (1 - o);
      Real dct = dc + dh * o * (1 - tc * tc);
      if (peep) {
        const Tensor& p = *pv;
        dct += dzo * p[2 * H + j];
        const Real dzi = dct * gc * i * (1 - i);
        const Real dzf = dct * cp[j] * f * (1 - f);
        const Real dzg = dct * i * (1 - gc * gc);
        dz[j] = dzi;
        dz[H + j] = dzf;
        dz[2 * H + j] = dzg;
        dz[3 * H + j] = dzo;
        dc_prev[j] = dct * f + dzi * p[j] + dzf * p[H + j];
        dpeep[j] = dzi * cp[j];
        dpeep[H + j] = dzf * cp[j];
        dpeep[2 * H + j] = dzo * c;
      } else {
        const Real dzi = dct * (gc - cp[j]) * i * (1 - i);
        const Real dzg = dct * i * (1 - gc * gc);
        dz[j] = dzi;
        dz[H + j] = dzg;
        dz[2 * H + j] = dzo;
        dc_prev[j] = dct * f;
      }
    }

    auto outer = [&](int w_id, int in_id) {
      const Tensor& in = g.value(in_id);
      const std::size_t k = in.size();
      if (g.requires_grad(w_id)) {
        Tensor& gw = g.grad(w_id);
        for (std::size_t r = 0; r < dz.size(); ++r) {
          if (dz[r] == 0) continue;
          Real* dst = gw.data().data() + r * k;
          for (std::size_t c = 0; c < k; ++c) dst[c] += dz[r] * in[c];
        }
      }
      if (g.requires_grad(in_id)) {
        const Tensor& w = g.value(w_id);
        Tensor& gin = g.grad(in_id);
        for (std::size_t r = 0; r < dz.size(); ++r) {
          if (dz[r] == 0) continue;
          const Real* wr = w.data().data() + r * k;
          for (std::size_t c = 0; c < k; ++c) gin[c] += dz[r] * wr[c];
        }
      }
    };
    outer(ids.wx, ids.x);
    outer(ids.wh, ids.h);
    if (g.requires_grad(ids.b)) {
      Tensor& gb = g.grad(ids.b);
      for (std::size_t r = 0; r < dz.size(); ++r) gb[r] += dz[r];
    }
    if (peep && g.requires_grad(ids.p)) {
      Tensor& gp = g.grad(ids.p);
      for (std::size_t r = 0; r < dpeep.size(); ++r) gp[r] += dpeep[r];
    }
    if (g.requires_grad(ids.c)) {
      Tensor& gc = g.grad(ids.c);
      for (std::size_t j = 0; j < H; ++j) gc[j] += dc_prev[j];
    }
  };

  std::vector<Expr> inputs{x, h_prev, c_prev, wx, wh, b};
  if (peep) inputs.push_back(p);
  Expr hc = g.add(std::move(out), inputs, std::move(backward), "lstm_step");
  return LstmState{slice(hc, 0, H), slice(hc, H, H)};
}

std::vector<BiLstmLayer> make_bilstm(ParameterStore& store, const std::string& prefix,
                                     LstmVariant variant, std::size_t input_dim,
                                     std::size_t hidden_dim, std::size_t layers, Rng& rng) {
  std::vector<BiLstmLayer> out;
  std::size_t in = input_dim;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string base = prefix + "/" + std::to_string(l);
    BiLstmLayer layer;
    layer.forward = make_lstm_cell(store, base + "/fw", variant, in, hidden_dim, rng);
    layer.backward = make_lstm_cell(store, base + "/bw", variant, in, hidden_dim, rng);
    out.push_back(layer);
    in = 2 * hidden_dim;
  }
  return out;
}

std::vector<Expr> bilstm_encode(Graph& g, ParameterStore& store, std::span<const BiLstmLayer> layers,
                                std::span<const Expr> inputs, Real dropout_rate) {
  if (inputs.empty()) throw ShapeError("bilstm_encode: empty sequence");
  std::vector<Expr> current(inputs.begin(), inputs.end());
  const std::size_t n = current.size();
  for (const BiLstmLayer& layer : layers) {
    const std::size_t H = layer.forward.hidden_dim;
    Expr zero = g.constant(Tensor::vector(H));
    std::vector<Expr> fw(n), bw(n);
    LstmState s{zero, zero};
    for (std::size_t t = 0; t < n; ++t) {
      s = lstm_step(g, store, layer.forward, current[t], s.h, s.c);
      fw[t] = s.h;
    }
    s = LstmState{zero, zero};
    for (std::size_t t = n; t-- > 0;) {
      s = lstm_step(g, store, layer.backward, current[t], s.h, s.c);
      bw[t] = s.h;
    }
    for (std::size_t t = 0; t < n; ++t) {
      const Expr pair[] = {fw[t], bw[t]};
      current[t] = dropout(concat(pair), dropout_rate);
    }
  }
  return current;
}

}  // namespace stackparse::num

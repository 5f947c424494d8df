#include "stackparse/num/ops.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace stackparse::num {
namespace {

Graph& graph_of(Expr e) { return *e.graph; }

void require_same_size(Expr a, Expr b, const char* op) {
  if (a.value().size() != b.value().size()) {
    throw ShapeError(std::string(op) + ": size mismatch " + a.value().shape_string() + " vs " +
                     b.value().shape_string());
  }
}

Tensor column(std::size_t n) { return Tensor({n, 1}); }

// Applies dst[i] += f(i) when the node needs a gradient.
template <typename F>
void accumulate(Graph& g, int id, F&& f) {
  if (!g.requires_grad(id)) return;
  Tensor& dst = g.grad(id);
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += f(i);
}

Real sigmoid_scalar(Real x) {
  if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
  const Real e = std::exp(x);
  return e / (Real(1) + e);
}

}  // namespace

Expr operator+(Expr a, Expr b) {
  require_same_size(a, b, "add");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return graph_of(a).add(std::move(out), {a, b},
                         [a = a.id, b = b.id](Graph& g, int self) {
                           const Tensor& go = g.grad(self);
                           accumulate(g, a, [&](std::size_t i) { return go[i]; });
                           accumulate(g, b, [&](std::size_t i) { return go[i]; });
                         },
                         "add");
}

Expr operator-(Expr a, Expr b) {
  require_same_size(a, b, "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return graph_of(a).add(std::move(out), {a, b},
                         [a = a.id, b = b.id](Graph& g, int self) {
                           const Tensor& go = g.grad(self);
                           accumulate(g, a, [&](std::size_t i) { return go[i]; });
                           accumulate(g, b, [&](std::size_t i) { return -go[i]; });
                         },
                         "sub");
}

Expr cmul(Expr a, Expr b) {
  require_same_size(a, b, "cmul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return graph_of(a).add(std::move(out), {a, b},
                         [a = a.id, b = b.id](Graph& g, int self) {
                           const Tensor& go = g.grad(self);
                           const Tensor& av = g.value(a);
                           const Tensor& bv = g.value(b);
                           accumulate(g, a, [&](std::size_t i) { return go[i] * bv[i]; });
                           accumulate(g, b, [&](std::size_t i) { return go[i] * av[i]; });
                         },
                         "cmul");
}

Expr scale(Expr a, Real c) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
  return graph_of(a).add(std::move(out), {a},
                         [a = a.id, c](Graph& g, int self) {
                           const Tensor& go = g.grad(self);
                           accumulate(g, a, [&](std::size_t i) { return go[i] * c; });
                         },
                         "scale");
}

Expr sum(std::span<const Expr> xs) {
  if (xs.empty()) throw ShapeError("sum of no terms");
  Tensor out = xs[0].value();
  for (std::size_t k = 1; k < xs.size(); ++k) {
    require_same_size(xs[0], xs[k], "sum");
    const Tensor& v = xs[k].value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
  }
  std::vector<int> ids;
  ids.reserve(xs.size());
  for (const Expr& x : xs) ids.push_back(x.id);
  return graph_of(xs[0]).add(std::move(out), xs,
                             [ids = std::move(ids)](Graph& g, int self) {
                               const Tensor& go = g.grad(self);
                               for (int id : ids) {
                                 accumulate(g, id, [&](std::size_t i) { return go[i]; });
                               }
                             },
                             "sum");
}

Expr affine(Expr bias, std::span<const std::pair<Expr, Expr>> terms) {
  Tensor out = bias.value();
  const std::size_t m = out.size();
  std::vector<Expr> inputs{bias};
  std::vector<std::pair<int, int>> ids;
  for (const auto& [w, x] : terms) {
    const Tensor& wv = w.value();
    const Tensor& xv = x.value();
    if (wv.rows() != m || wv.cols() != xv.size()) {
      throw ShapeError("affine: weight " + wv.shape_string() + " vs input " + xv.shape_string() +
                       " and output " + std::to_string(m));
    }
    const std::size_t k = xv.size();
    const Real* wp = wv.data().data();
    const Real* xp = xv.data().data();
    for (std::size_t r = 0; r < m; ++r) {
      Real acc = 0;
      const Real* wr = wp + r * k;
      for (std::size_t c = 0; c < k; ++c) acc += wr[c] * xp[c];
      out[r] += acc;
    }
    inputs.push_back(w);
    inputs.push_back(x);
    ids.emplace_back(w.id, x.id);
  }
  return graph_of(bias).add(
      std::move(out), inputs,
      [b = bias.id, ids = std::move(ids)](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        accumulate(g, b, [&](std::size_t i) { return go[i]; });
        for (const auto& [w, x] : ids) {
          const Tensor& wv = g.value(w);
          const Tensor& xv = g.value(x);
          const std::size_t m = wv.rows();
          const std::size_t k = wv.cols();
          if (g.requires_grad(w)) {
            Tensor& gw = g.grad(w);
            for (std::size_t r = 0; r < m; ++r) {
              const Real gr = go[r];
              if (gr == 0) continue;
              Real* dst = gw.data().data() + r * k;
              for (std::size_t c = 0; c < k; ++c) dst[c] += gr * xv[c];
            }
          }
          if (g.requires_grad(x)) {
            Tensor& gx = g.grad(x);
            for (std::size_t r = 0; r < m; ++r) {
              const Real gr = go[r];
              if (gr == 0) continue;
              const Real* wr = wv.data().data() + r * k;
              for (std::size_t c = 0; c < k; ++c) gx[c] += gr * wr[c];
            }
          }
        }
      },
      "affine");
}

Expr affine(Expr bias, Expr w, Expr x) {
  const std::pair<Expr, Expr> term{w, x};
  return affine(bias, std::span<const std::pair<Expr, Expr>>(&term, 1));
}

Expr matvec(Expr w, Expr x) {
  Expr zero = graph_of(w).constant(column(w.value().rows()));
  return affine(zero, w, x);
}

Expr tanh(Expr x) {
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
  return graph_of(x).add(std::move(out), {x},
                         [x = x.id](Graph& g, int self) {
                           const Tensor& go = g.grad(self);
                           const Tensor& y = g.value(self);
                           accumulate(g, x, [&](std::size_t i) { return go[i] * (1 - y[i] * y[i]); });
                         },
                         "tanh");
}

Expr sigmoid(Expr x) {
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(out[i]);
  return graph_of(x).add(std::move(out), {x},
                         [x = x.id](Graph& g, int self) {
                           const Tensor& go = g.grad(self);
                           const Tensor& y = g.value(self);
                           accumulate(g, x, [&](std::size_t i) { return go[i] * y[i] * (1 - y[i]); });
                         },
                         "sigmoid");
}

Expr leaky_relu(Expr x, Real slope) {
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] < 0) out[i] *= slope;
  }
  return graph_of(x).add(std::move(out), {x},
                         [x = x.id, slope](Graph& g, int self) {
                           const Tensor& go = g.grad(self);
                           const Tensor& xv = g.value(x);
                           accumulate(g, x, [&](std::size_t i) {
                             return xv[i] < 0 ? go[i] * slope : go[i];
                           });
                         },
                         "leaky_relu");
}

Expr one_minus(Expr x) {
  Tensor out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = Real(1) - out[i];
  return graph_of(x).add(std::move(out), {x},
                         [x = x.id](Graph& g, int self) {
                           const Tensor& go = g.grad(self);
                           accumulate(g, x, [&](std::size_t i) { return -go[i]; });
                         },
                         "one_minus");
}

Expr concat(std::span<const Expr> xs) {
  if (xs.empty()) throw ShapeError("concat of no terms");
  std::size_t n = 0;
  for (const Expr& x : xs) n += x.value().size();
  Tensor out = column(n);
  std::vector<std::pair<int, std::size_t>> parts;
  std::size_t off = 0;
  for (const Expr& x : xs) {
    const Tensor& v = x.value();
    std::copy(v.data().begin(), v.data().end(), out.data().begin() + off);
    parts.emplace_back(x.id, off);
    off += v.size();
  }
  return graph_of(xs[0]).add(std::move(out), xs,
                             [parts = std::move(parts)](Graph& g, int self) {
                               const Tensor& go = g.grad(self);
                               for (const auto& [id, start] : parts) {
                                 accumulate(g, id, [&, s = start](std::size_t i) { return go[s + i]; });
                               }
                             },
                             "concat");
}

Expr slice(Expr x, std::size_t start, std::size_t length) {
  const Tensor& v = x.value();
  if (start + length > v.size()) throw ShapeError("slice out of range");
  Tensor out = column(length);
  std::copy_n(v.data().begin() + start, length, out.data().begin());
  return graph_of(x).add(std::move(out), {x},
                         [x = x.id, start, length](Graph& g, int self) {
                           if (!g.requires_grad(x)) return;
                           const Tensor& go = g.grad(self);
                           Tensor& gx = g.grad(x);
                           for (std::size_t i = 0; i < length; ++i) gx[start + i] += go[i];
                         },
                         "slice");
}

Expr pick(Expr x, std::size_t index) { return slice(x, index, 1); }

Expr dot(Expr a, Expr b) {
  require_same_size(a, b, "dot");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Real acc = 0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  return graph_of(a).add(Tensor({1, 1}, acc), {a, b},
                         [a = a.id, b = b.id](Graph& g, int self) {
                           const Real go = g.grad(self)[0];
                           const Tensor& av = g.value(a);
                           const Tensor& bv = g.value(b);
                           accumulate(g, a, [&](std::size_t i) { return go * bv[i]; });
                           accumulate(g, b, [&](std::size_t i) { return go * av[i]; });
                         },
                         "dot");
}

Real log_sum_exp(std::span<const Real> xs) {
  Real m = -std::numeric_limits<Real>::infinity();
  for (Real v : xs) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  Real s = 0;
  for (Real v : xs) s += std::exp(v - m);
  return m + std::log(s);
}

Expr softmax(Expr x) {
  const Tensor& v = x.value();
  Tensor out = column(v.size());
  const Real lse = log_sum_exp(v.data());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::exp(v[i] - lse);
  return graph_of(x).add(std::move(out), {x},
                         [x = x.id](Graph& g, int self) {
                           const Tensor& go = g.grad(self);
                           const Tensor& y = g.value(self);
                           Real inner = 0;
                           for (std::size_t i = 0; i < y.size(); ++i) inner += go[i] * y[i];
                           accumulate(g, x, [&](std::size_t i) { return y[i] * (go[i] - inner); });
                         },
                         "softmax");
}

Expr pick_neg_log_softmax(Expr x, std::size_t index, std::ptrdiff_t excluded) {
  const Tensor& v = x.value();
  if (index >= v.size() || static_cast<std::ptrdiff_t>(index) == excluded) {
    throw ShapeError("pick_neg_log_softmax: bad target index");
  }
  Real m = -std::numeric_limits<Real>::infinity();
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (static_cast<std::ptrdiff_t>(i) != excluded) m = std::max(m, v[i]);
  }
  Real s = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (static_cast<std::ptrdiff_t>(i) != excluded) s += std::exp(v[i] - m);
  }
  const Real lse = m + std::log(s);
  return graph_of(x).add(
      Tensor({1, 1}, lse - v[index]), {x},
      [x = x.id, index, excluded, lse](Graph& g, int self) {
        const Real go = g.grad(self)[0];
        const Tensor& v = g.value(x);
        accumulate(g, x, [&](std::size_t i) {
          if (static_cast<std::ptrdiff_t>(i) == excluded) return Real(0);
          Real p = std::exp(v[i] - lse);
          return go * (p - (i == index ? Real(1) : Real(0)));
        });
      },
      "pick_neg_log_softmax");
}

Expr columns(std::span<const Expr> xs) {
  if (xs.empty()) throw ShapeError("columns of no vectors");
  const std::size_t d = xs[0].value().size();
  const std::size_t m = xs.size();
  Tensor out({d, m});
  std::vector<int> ids;
  for (std::size_t j = 0; j < m; ++j) {
    const Tensor& v = xs[j].value();
    if (v.size() != d) throw ShapeError("columns: ragged inputs");
    for (std::size_t i = 0; i < d; ++i) out.at(i, j) = v[i];
    ids.push_back(xs[j].id);
  }
  return graph_of(xs[0]).add(std::move(out), xs,
                             [ids = std::move(ids)](Graph& g, int self) {
                               const Tensor& go = g.grad(self);
                               for (std::size_t j = 0; j < ids.size(); ++j) {
                                 accumulate(g, ids[j], [&](std::size_t i) { return go.at(i, j); });
                               }
                             },
                             "columns");
}

Expr rows(std::span<const Expr> xs) {
  if (xs.empty()) throw ShapeError("rows of no vectors");
  const std::size_t d = xs[0].value().size();
  const std::size_t m = xs.size();
  Tensor out({m, d});
  std::vector<int> ids;
  for (std::size_t j = 0; j < m; ++j) {
    const Tensor& v = xs[j].value();
    if (v.size() != d) throw ShapeError("rows: ragged inputs");
    std::copy(v.data().begin(), v.data().end(), out.row(j).begin());
    ids.push_back(xs[j].id);
  }
  return graph_of(xs[0]).add(std::move(out), xs,
                             [ids = std::move(ids)](Graph& g, int self) {
                               const Tensor& go = g.grad(self);
                               for (std::size_t j = 0; j < ids.size(); ++j) {
                                 auto r = go.row(j);
                                 accumulate(g, ids[j], [&](std::size_t i) { return r[i]; });
                               }
                             },
                             "rows");
}

Expr row(Expr m, std::size_t r) {
  const Tensor& v = m.value();
  if (r >= v.rows()) throw ShapeError("row index out of range");
  auto src = v.row(r);
  Tensor out({src.size(), 1}, std::vector<Real>(src.begin(), src.end()));
  return graph_of(m).add(std::move(out), {m},
                         [m = m.id, r](Graph& g, int self) {
                           if (!g.requires_grad(m)) return;
                           const Tensor& go = g.grad(self);
                           auto dst = g.grad(m).row(r);
                           for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += go[i];
                         },
                         "row");
}

Expr matmul(Expr a, Expr b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
  if (bv.rows() != k) throw ShapeError("matmul: " + av.shape_string() + " x " + bv.shape_string());
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const Real aip = av.at(i, p);
      if (aip == 0) continue;
      auto br = bv.row(p);
      auto orow = out.row(i);
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * br[j];
    }
  }
  return graph_of(a).add(std::move(out), {a, b},
                         [a = a.id, b = b.id](Graph& g, int self) {
                           const Tensor& go = g.grad(self);
                           const Tensor& av = g.value(a);
                           const Tensor& bv = g.value(b);
                           const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
                           if (g.requires_grad(a)) {
                             Tensor& ga = g.grad(a);
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t p = 0; p < k; ++p) {
                                 Real acc = 0;
                                 for (std::size_t j = 0; j < n; ++j) acc += go.at(i, j) * bv.at(p, j);
                                 ga.at(i, p) += acc;
                               }
                           }
                           if (g.requires_grad(b)) {
                             Tensor& gb = g.grad(b);
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t p = 0; p < k; ++p) {
                                 const Real aip = av.at(i, p);
                                 if (aip == 0) continue;
                                 for (std::size_t j = 0; j < n; ++j) gb.at(p, j) += aip * go.at(i, j);
                               }
                           }
                         },
                         "matmul");
}

Expr matmul_nt(Expr a, Expr b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
  if (bv.cols() != k) throw ShapeError("matmul_nt: " + av.shape_string() + " x " + bv.shape_string() + "^T");
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    auto ar = av.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      auto br = bv.row(j);
      Real acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += ar[p] * br[p];
      out.at(i, j) = acc;
    }
  }
  return graph_of(a).add(std::move(out), {a, b},
                         [a = a.id, b = b.id](Graph& g, int self) {
                           const Tensor& go = g.grad(self);
                           const Tensor& av = g.value(a);
                           const Tensor& bv = g.value(b);
                           const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
                           const bool need_a = g.requires_grad(a);
                           const bool need_b = g.requires_grad(b);
                           for (std::size_t i = 0; i < m; ++i)
                             for (std::size_t j = 0; j < n; ++j) {
                               const Real gij = go.at(i, j);
                               if (gij == 0) continue;
                               if (need_a) {
                                 auto ga = g.grad(a).row(i);
                                 auto br = bv.row(j);
                                 for (std::size_t p = 0; p < k; ++p) ga[p] += gij * br[p];
                               }
                               if (need_b) {
                                 auto gb = g.grad(b).row(j);
                                 auto ar = av.row(i);
                                 for (std::size_t p = 0; p < k; ++p) gb[p] += gij * ar[p];
                               }
                             }
                         },
                         "matmul_nt");
}

Expr bilinear(Expr u, Expr w, Expr v) {
  const Tensor& uv = u.value();
  const Tensor& wv = w.value();
  const Tensor& vv = v.value();
  if (wv.rows() != uv.size() || wv.cols() != vv.size()) {
    throw ShapeError("bilinear: " + uv.shape_string() + " / " + wv.shape_string() + " / " +
                     vv.shape_string());
  }
  Real acc = 0;
  for (std::size_t i = 0; i < uv.size(); ++i) {
    Real inner = 0;
    for (std::size_t j = 0; j < vv.size(); ++j) inner += wv.at(i, j) * vv[j];
    acc += uv[i] * inner;
  }
  return graph_of(u).add(Tensor({1, 1}, acc), {u, w, v},
                         [u = u.id, w = w.id, v = v.id](Graph& g, int self) {
                           const Real go = g.grad(self)[0];
                           const Tensor& uv = g.value(u);
                           const Tensor& wv = g.value(w);
                           const Tensor& vv = g.value(v);
                           const std::size_t a = uv.size(), b = vv.size();
                           if (g.requires_grad(u)) {
                             Tensor& gu = g.grad(u);
                             for (std::size_t i = 0; i < a; ++i) {
                               Real inner = 0;
                               for (std::size_t j = 0; j < b; ++j) inner += wv.at(i, j) * vv[j];
                               gu[i] += go * inner;
                             }
                           }
                           if (g.requires_grad(w)) {
                             Tensor& gw = g.grad(w);
                             for (std::size_t i = 0; i < a; ++i)
                               for (std::size_t j = 0; j < b; ++j) gw.at(i, j) += go * uv[i] * vv[j];
                           }
                           if (g.requires_grad(v)) {
                             Tensor& gv = g.grad(v);
                             for (std::size_t j = 0; j < b; ++j) {
                               Real inner = 0;
                               for (std::size_t i = 0; i < a; ++i) inner += uv[i] * wv.at(i, j);
                               gv[j] += go * inner;
                             }
                           }
                         },
                         "bilinear");
}

Expr bilinear_labels(Expr u, Expr w, Expr v) {
  const Tensor& uv = u.value();
  const Tensor& wv = w.value();
  const Tensor& vv = v.value();
  if (wv.rank() != 3 || wv.dim(1) != uv.size() || wv.dim(2) != vv.size()) {
    throw ShapeError("bilinear_labels: " + uv.shape_string() + " / " + wv.shape_string() + " / " +
                     vv.shape_string());
  }
  const std::size_t labels = wv.dim(0), a = uv.size(), b = vv.size();
  Tensor out = column(labels);
  for (std::size_t l = 0; l < labels; ++l) {
    Real acc = 0;
    for (std::size_t i = 0; i < a; ++i) {
      const Real ui = uv[i];
      if (ui == 0) continue;
      auto wr = wv.row(l * a + i);
      Real inner = 0;
      for (std::size_t j = 0; j < b; ++j) inner += wr[j] * vv[j];
      acc += ui * inner;
    }
    out[l] = acc;
  }
  return graph_of(u).add(
      std::move(out), {u, w, v},
      [u = u.id, w = w.id, v = v.id](Graph& g, int self) {
        const Tensor& go = g.grad(self);
        const Tensor& uv = g.value(u);
        const Tensor& wv = g.value(w);
        const Tensor& vv = g.value(v);
        const std::size_t labels = wv.dim(0), a = uv.size(), b = vv.size();
        const bool need_u = g.requires_grad(u);
        const bool need_w = g.requires_grad(w);
        const bool need_v = g.requires_grad(v);
        for (std::size_t l = 0; l < labels; ++l) {
          const Real gl = go[l];
          if (gl == 0) continue;
          for (std::size_t i = 0; i < a; ++i) {
            auto wr = wv.row(l * a + i);
            if (need_u) {
              Real inner = 0;
              for (std::size_t j = 0; j < b; ++j) inner += wr[j] * vv[j];
              g.grad(u)[i] += gl * inner;
            }
            const Real ui = uv[i];
            if (ui == 0) continue;
            if (need_w) {
              auto gw = g.grad(w).row(l * a + i);
              for (std::size_t j = 0; j < b; ++j) gw[j] += gl * ui * vv[j];
            }
            if (need_v) {
              Tensor& gv = g.grad(v);
              for (std::size_t j = 0; j < b; ++j) gv[j] += gl * ui * wr[j];
            }
          }
        }
      },
      "bilinear_labels");
}

Expr dropout(Expr x, Real rate) {
  Graph& g = graph_of(x);
  if (rate <= 0 || !g.training()) return x;
  if (rate >= 1) throw std::invalid_argument("dropout rate must be < 1");
  if (g.rng() == nullptr) throw std::logic_error("dropout in training mode needs an rng");
  Tensor mask(x.value().shape());
  const Real keep_scale = Real(1) / (Real(1) - rate);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = g.rng()->uniform() < rate ? Real(0) : keep_scale;
  }
  return cmul(x, g.constant(std::move(mask)));
}

Expr attention_pool(Expr scores, std::span<const Expr> items) {
  if (scores.value().size() != items.size()) throw ShapeError("attention_pool: score count mismatch");
  Expr weights = softmax(scores);
  return matvec(columns(items), weights);
}

}  // namespace stackparse::num

#include "stackparse/decode.h"

#include <limits>
#include <stdexcept>

#include "stackparse/treebank.h"

namespace stackparse {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

using Matrix = std::vector<std::vector<double>>;  // [head][dependent]

// Best head for every non-root node; ties to the smaller index.
std::vector<std::size_t> best_heads(const Matrix& w) {
  const std::size_t m = w.size();
  std::vector<std::size_t> head(m, 0);
  for (std::size_t d = 1; d < m; ++d) {
    double best = kNegInf;
    std::size_t arg = d == 0 ? 1 : 0;
    bool found = false;
    for (std::size_t h = 0; h < m; ++h) {
      if (h == d) continue;
      if (!found || w[h][d] > best) {
        best = w[h][d];
        arg = h;
        found = true;
      }
    }
    head[d] = arg;
  }
  return head;
}

// Returns the nodes of some cycle in `head`, or empty.
std::vector<std::size_t> find_cycle(const std::vector<std::size_t>& head) {
  const std::size_t m = head.size();
  std::vector<int> state(m, 0);
  state[0] = 2;
  for (std::size_t start = 1; start < m; ++start) {
    std::vector<std::size_t> path;
    std::size_t v = start;
    while (state[v] == 0) {
      state[v] = 1;
      path.push_back(v);
      v = head[v];
    }
    if (state[v] == 1) {
      std::vector<std::size_t> cycle;
      std::size_t u = v;
      do {
        cycle.push_back(u);
        u = head[u];
      } while (u != v);
      return cycle;
    }
    for (std::size_t u : path) state[u] = 2;
  }
  return {};
}

// Chu-Liu/Edmonds on a dense matrix; returns head per node (head[0] unused).
std::vector<std::size_t> chu_liu_edmonds(const Matrix& w) {
  const std::size_t m = w.size();
  std::vector<std::size_t> head = best_heads(w);
  const std::vector<std::size_t> cycle = find_cycle(head);
  if (cycle.empty()) return head;

  std::vector<bool> in_cycle(m, false);
  for (std::size_t v : cycle) in_cycle[v] = true;
  // New node ids: non-cycle nodes keep their order, the cycle becomes the last.
  std::vector<std::size_t> id(m);
  std::vector<std::size_t> outside;
  for (std::size_t v = 0; v < m; ++v) {
    if (!in_cycle[v]) {
      id[v] = outside.size();
      outside.push_back(v);
    }
  }
  const std::size_t c = outside.size();
  for (std::size_t v : cycle) id[v] = c;

  Matrix sub(c + 1, std::vector<double>(c + 1, kNegInf));
  std::vector<std::size_t> enter(c + 1, 0);  // cycle node entered from outside node
  std::vector<std::size_t> leave(c + 1, 0);  // cycle node an outgoing arc leaves from
  for (std::size_t a = 0; a < c; ++a) {
    const std::size_t u = outside[a];
    for (std::size_t b = 0; b < c; ++b) {
      if (a != b) sub[a][b] = w[u][outside[b]];
    }
    bool first = true;
    for (std::size_t v : cycle) {
      const double s = w[u][v] - w[head[v]][v];
      if (first || s > sub[a][c]) {
        sub[a][c] = s;
        enter[a] = v;
        first = false;
      }
    }
  }
  for (std::size_t b = 1; b < c; ++b) {
    bool first = true;
    for (std::size_t u : cycle) {
      if (first || w[u][outside[b]] > sub[c][b]) {
        sub[c][b] = w[u][outside[b]];
        leave[b] = u;
        first = false;
      }
    }
  }

  const std::vector<std::size_t> sub_head = chu_liu_edmonds(sub);
  std::vector<std::size_t> result(head);
  for (std::size_t b = 1; b < c; ++b) {
    const std::size_t h = sub_head[b];
    result[outside[b]] = h == c ? leave[b] : outside[h];
  }
  const std::size_t from = sub_head[c];
  result[enter[from]] = outside[from];
  return result;
}

Matrix to_head_major(const num::Tensor& scores) {
  const std::size_t m = scores.rows();
  if (scores.shape().size() != 2 || scores.cols() != m || m < 2) {
    throw std::invalid_argument("arc scores must be a square matrix over root + >= 1 tokens");
  }
  Matrix w(m, std::vector<double>(m, kNegInf));
  for (std::size_t d = 1; d < m; ++d) {
    for (std::size_t h = 0; h < m; ++h) {
      if (h != d) w[h][d] = static_cast<double>(scores.at(d, h));
    }
  }
  return w;
}

std::vector<std::size_t> token_heads(const std::vector<std::size_t>& head) {
  return {head.begin() + 1, head.end()};
}

}  // namespace

GreedyDecode decode_greedy(const num::Tensor& scores) {
  const Matrix w = to_head_major(scores);
  GreedyDecode out;
  out.heads = token_heads(best_heads(w));
  out.is_tree = is_tree(out.heads);
  return out;
}

double tree_score(const num::Tensor& scores, std::span<const std::size_t> heads) {
  double total = 0;
  for (std::size_t d = 1; d <= heads.size(); ++d) total += static_cast<double>(scores.at(d, heads[d - 1]));
  return total;
}

std::vector<std::size_t> decode_mst(const num::Tensor& scores, bool single_root) {
  const Matrix w = to_head_major(scores);
  std::vector<std::size_t> best = token_heads(chu_liu_edmonds(w));
  if (!single_root) return best;
  std::size_t root_children = 0;
  for (std::size_t h : best) root_children += h == 0;
  if (root_children == 1) return best;

  const std::size_t m = w.size();
  double best_score = kNegInf;
  bool found = false;
  for (std::size_t r = 1; r < m; ++r) {
    Matrix constrained = w;
    for (std::size_t d = 1; d < m; ++d) {
      if (d != r) constrained[0][d] = kNegInf;
    }
    // Every other node must have a non-root head candidate.
    if (m > 2) {
      bool feasible = true;
      for (std::size_t d = 1; d < m && feasible; ++d) {
        if (d == r) continue;
        bool any = false;
        for (std::size_t h = 1; h < m; ++h) any = any || (h != d && constrained[h][d] > kNegInf);
        feasible = any;
      }
      if (!feasible) continue;
    }
    auto heads = token_heads(chu_liu_edmonds(constrained));
    const double s = tree_score(scores, heads);
    if (!found || s > best_score) {
      best_score = s;
      best = std::move(heads);
      found = true;
    }
  }
  return best;
}

}  // namespace stackparse

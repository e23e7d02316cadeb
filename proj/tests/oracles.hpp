#pragma once

// Independent reference implementations used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <span>
#include <vector>

#include "darkfarseer/autodiff.hpp"
#include "darkfarseer/graphs.hpp"
#include "darkfarseer/sgds.hpp"

namespace oracle {

using darkfarseer::graphs::Adjacency;

// Random symmetric weights in (0, 1], each pair present with probability `p_edge`.
inline Adjacency random_graph(std::size_t n, double p_edge, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Adjacency a(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (u(rng) < p_edge) a.set_symmetric(i, j, std::max(1e-3, u(rng)));
  return a;
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

// Biconnected components by exhaustive separator search. Two edges share a
// block iff, after subdividing both, no single original vertex separates the
// two subdivision points (Menger). Components sorted like find_bccs output.
inline std::vector<std::vector<std::size_t>> brute_force_bccs(const Adjacency& a, double mu) {
  const std::size_t n = a.size();
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (a(i, j) > mu) edges.emplace_back(i, j);

  // Reachability from edge e to edge f avoiding vertex `removed` (n = none).
  auto connected = [&](std::size_t e, std::size_t f, std::size_t removed) {
    std::vector<bool> seen(n, false);
    std::queue<std::size_t> q;
    for (auto v : {edges[e].first, edges[e].second})
      if (v != removed && !seen[v]) seen[v] = true, q.push(v);
    while (!q.empty()) {
      auto v = q.front();
      q.pop();
      for (std::size_t w = 0; w < n; ++w) {
        if (w == removed || seen[w] || !(a(v, w) > mu)) continue;
        seen[w] = true;
        q.push(w);
      }
    }
    return (edges[f].first != removed && seen[edges[f].first]) || (edges[f].second != removed && seen[edges[f].second]);
  };
  auto same_block = [&](std::size_t e, std::size_t f) {
    if (!connected(e, f, n)) return false;
    for (std::size_t v = 0; v < n; ++v)
      if (!connected(e, f, v)) return false;
    return true;
  };

  UnionFind uf(edges.size());
  std::vector<std::size_t> reps;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    bool placed = false;
    for (auto r : reps) {
      if (same_block(e, r)) {
        uf.unite(e, r);
        placed = true;
        break;
      }
    }
    if (!placed) reps.push_back(e);
  }
  std::vector<std::vector<std::size_t>> out;
  for (auto r : reps) {
    std::set<std::size_t> nodes;
    for (std::size_t e = 0; e < edges.size(); ++e)
      if (uf.find(e) == uf.find(r)) nodes.insert(edges[e].first), nodes.insert(edges[e].second);
    out.emplace_back(nodes.begin(), nodes.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// Central differences of a scalar function of leaf tensors, by perturbing
// leaf storage in place.
inline std::vector<std::vector<double>> finite_difference(
    const std::function<double()>& f, const std::vector<darkfarseer::ad::Tensor*>& leaves, double step) {
  std::vector<std::vector<double>> out;
  for (auto* t : leaves) {
    auto data = t->mutable_data();
    std::vector<double> g(data.size());
    for (std::size_t k = 0; k < data.size(); ++k) {
      const double x = data[k];
      data[k] = x + step;
      const double up = f();
      data[k] = x - step;
      const double down = f();
      data[k] = x;
      g[k] = (up - down) / (2.0 * step);
    }
    out.push_back(std::move(g));
  }
  return out;
}

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(numeric));
}

// Per-node Bottom-K neighbours by similarity, via a full stable sort with
// plain cosines. Returns each virtual node's chosen neighbours.
inline std::vector<std::vector<std::size_t>> bottom_k(const Adjacency& a,
                                                      const darkfarseer::sgds::NodePrototypes& nodes,
                                                      const std::vector<std::size_t>& virt, double beta,
                                                      double alpha) {
  auto cos = [](std::span<const double> x, std::span<const double> y) {
    double dot = 0, xx = 0, yy = 0;
    for (std::size_t k = 0; k < x.size(); ++k) dot += x[k] * y[k], xx += x[k] * x[k], yy += y[k] * y[k];
    return dot / std::sqrt(xx * yy);
  };
  std::vector<std::vector<std::size_t>> out;
  for (auto i : virt) {
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t j = 0; j < a.size(); ++j) {
      if (j == i || a(i, j) == 0.0) continue;
      scored.emplace_back(alpha * cos(nodes.prototype(i), nodes.prototype(j)) +
                              (1 - alpha) * cos(nodes.hidden(i), nodes.hidden(j)),
                          j);
    }
    std::stable_sort(scored.begin(), scored.end(), [](auto& x, auto& y) { return x.first < y.first; });
    const auto k = static_cast<std::size_t>(std::floor(static_cast<double>(scored.size()) * beta));
    std::vector<std::size_t> chosen;
    for (std::size_t r = 0; r < k; ++r) chosen.push_back(scored[r].second);
    out.push_back(std::move(chosen));
  }
  return out;
}

// Four triangles chained by shared nodes: A={0,1,2}, B={2,3,5}, C={5,6,7},
// D={6,8,9}. Node 6 lies in C and D, node 5 links C to B, and A touches
// only B. Component indices in find_bccs order are A=0, B=1, C=2, D=3.
inline Adjacency overlapping_regions() {
  Adjacency a(10);
  const std::size_t tri[4][3] = {{0, 1, 2}, {2, 3, 5}, {5, 6, 7}, {6, 8, 9}};
  for (const auto& t : tri) {
    a.set_symmetric(t[0], t[1], 0.9);
    a.set_symmetric(t[1], t[2], 0.9);
    a.set_symmetric(t[0], t[2], 0.9);
  }
  return a;
}

}  // namespace oracle

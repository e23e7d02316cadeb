#include "darkfarseer/graphs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace darkfarseer::graphs {

Adjacency::Adjacency(std::size_t n, std::vector<double> weights) : n_(n), w_(std::move(weights)) {
  if (w_.size() != n * n) {
    throw GraphError("adjacency for " + std::to_string(n) + " nodes needs " + std::to_string(n * n) +
                     " weights, got " + std::to_string(w_.size()));
  }
}

std::vector<std::size_t> Adjacency::neighbors(std::size_t i) const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < n_; ++j) {
    if (j != i && (*this)(i, j) != 0.0) out.push_back(j);
  }
  return out;
}

std::size_t Adjacency::edge_count() const {
  std::size_t count = 0;
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) {
      if ((*this)(i, j) != 0.0) ++count;
    }
  }
  return count;
}

bool Adjacency::is_symmetric() const {
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = i + 1; j < n_; ++j) {
      if ((*this)(i, j) != (*this)(j, i)) return false;
    }
  }
  return true;
}

bool Adjacency::has_zero_diagonal() const {
  for (std::size_t i = 0; i < n_; ++i) {
    if ((*this)(i, i) != 0.0) return false;
  }
  return true;
}

void validate_adjacency(const Adjacency& a) {
  for (double w : a.values()) {
    if (!std::isfinite(w) || w < 0.0) throw GraphError("adjacency weights must be finite and non-negative");
  }
  if (!a.has_zero_diagonal()) throw GraphError("adjacency must have a zero diagonal");
  if (!a.is_symmetric()) throw GraphError("adjacency must be symmetric");
}

SensorGraph::SensorGraph(Adjacency adjacency, GraphKind kind, std::vector<Coordinate> coordinates, bool normalized)
    : adjacency_(std::move(adjacency)), kind_(kind), coordinates_(std::move(coordinates)), normalized_(normalized) {
  if (adjacency_.size() == 0) throw GraphError("graph must have at least one node");
  validate_adjacency(adjacency_);
  if (kind_ == GraphKind::spg && coordinates_.empty()) throw GraphError("spatial proximity graph requires coordinates");
  if (!coordinates_.empty() && coordinates_.size() != adjacency_.size()) {
    throw GraphError("coordinate count " + std::to_string(coordinates_.size()) + " does not match node count " +
                     std::to_string(adjacency_.size()));
  }
}

double haversine_km(const Coordinate& a, const Coordinate& b) {
  constexpr double kEarthRadiusKm = 6371.0088;
  constexpr double kRad = std::numbers::pi / 180.0;
  const double dlat = (b.lat - a.lat) * kRad;
  const double dlon = (b.lon - a.lon) * kRad;
  const double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(a.lat * kRad) * std::cos(b.lat * kRad) * std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

double kernel_weight(double distance, double sigma_dist) {
  if (!(sigma_dist > 0)) throw GraphError("sigma_dist must be positive");
  return std::exp(-std::abs(distance)) / sigma_dist;
}

bool keeps(double weight, double epsilon, ThresholdMode mode) {
  return mode == ThresholdMode::keep_below ? weight < epsilon : weight >= epsilon;
}

namespace {

void check_epsilon(double epsilon) {
  if (!(epsilon > 0)) throw GraphError("epsilon must be positive or +inf");
}

}  // namespace

SensorGraph build_pcg(std::size_t n_nodes, std::span<const Edge> edges) {
  if (n_nodes == 0) throw GraphError("graph must have at least one node");
  Adjacency a(n_nodes);
  for (const auto& e : edges) {
    if (e.i >= n_nodes || e.j >= n_nodes) {
      throw GraphError("edge (" + std::to_string(e.i) + ", " + std::to_string(e.j) + ") references a node outside [0, " +
                       std::to_string(n_nodes) + ")");
    }
    if (e.i == e.j) throw GraphError("self-loop on node " + std::to_string(e.i));
    if (!(e.d > 0) || !std::isfinite(e.d)) {
      throw GraphError("edge (" + std::to_string(e.i) + ", " + std::to_string(e.j) + ") needs a positive distance");
    }
    const double existing = a(e.i, e.j);
    if (existing != 0.0 && existing != e.d) {
      throw GraphError("duplicate edge (" + std::to_string(e.i) + ", " + std::to_string(e.j) +
                       ") with conflicting distances");
    }
    a.set_symmetric(e.i, e.j, e.d);
  }
  return SensorGraph(std::move(a), GraphKind::pcg);
}

SensorGraph build_spg(std::span<const Coordinate> coordinates, double sigma_dist, double epsilon, ThresholdMode mode) {
  if (coordinates.size() < 2) throw GraphError("spatial proximity graph needs at least 2 coordinates");
  if (!(sigma_dist > 0)) throw GraphError("sigma_dist must be positive");
  check_epsilon(epsilon);
  const std::size_t n = coordinates.size();
  Adjacency a(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double w = kernel_weight(haversine_km(coordinates[i], coordinates[j]), sigma_dist);
      if (keeps(w, epsilon, mode)) a.set_symmetric(i, j, w);
    }
  }
  return SensorGraph(std::move(a), GraphKind::spg, {coordinates.begin(), coordinates.end()}, true);
}

SensorGraph normalize_adjacency(const SensorGraph& graph, double sigma_dist, double epsilon, ThresholdMode mode) {
  if (graph.kind() != GraphKind::pcg) throw GraphError("normalize_adjacency expects a pairwise connectivity graph");
  if (graph.normalized()) throw GraphError("adjacency is already normalized");
  if (!(sigma_dist > 0)) throw GraphError("sigma_dist must be positive");
  check_epsilon(epsilon);
  const auto& src = graph.adjacency();
  Adjacency a(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    for (std::size_t j = i + 1; j < src.size(); ++j) {
      if (src(i, j) == 0.0) continue;
      const double w = kernel_weight(src(i, j), sigma_dist);
      if (keeps(w, epsilon, mode)) a.set_symmetric(i, j, w);
    }
  }
  return SensorGraph(std::move(a), GraphKind::pcg, graph.coordinates(), true);
}

double density(const Adjacency& adjacency) {
  const std::size_t n = adjacency.size();
  if (n < 2) throw GraphError("density requires at least 2 nodes");
  const double nn = static_cast<double>(n);
  return static_cast<double>(adjacency.edge_count()) / (nn * std::log(nn));
}

Adjacency induced(const Adjacency& adjacency, std::span<const std::size_t> sorted_keep) {
  Adjacency out(sorted_keep.size());
  for (std::size_t a = 0; a < sorted_keep.size(); ++a) {
    for (std::size_t b = 0; b < sorted_keep.size(); ++b) out(a, b) = adjacency(sorted_keep[a], sorted_keep[b]);
  }
  return out;
}

Subgraph subgraph(const SensorGraph& graph, std::span<const std::size_t> keep) {
  if (keep.empty()) throw GraphError("subgraph requires a nonempty node set");
  std::vector<std::size_t> ids(keep.begin(), keep.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.back() >= graph.n_nodes()) throw GraphError("subgraph node " + std::to_string(ids.back()) + " out of range");

  std::vector<Coordinate> coords;
  if (graph.has_coordinates()) {
    for (auto id : ids) coords.push_back(graph.coordinates()[id]);
  }
  SensorGraph g(induced(graph.adjacency(), ids), graph.kind(), std::move(coords), graph.normalized());
  return {std::move(g), std::move(ids)};
}

std::vector<std::size_t> BccDecomposition::articulation_nodes() const {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < membership.size(); ++v) {
    if (membership[v].size() > 1) out.push_back(v);
  }
  return out;
}

namespace {

// Tarjan's lowpoint DFS with an edge stack. Each time a child's lowpoint
// does not reach above its parent, the edges pushed since the tree edge
// (parent, child) form one biconnected component.
class TarjanBcc {
 public:
  TarjanBcc(const Adjacency& a, double mu) : n_(a.size()), adj_(a.size()) {
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        if (i != j && a(i, j) > mu) adj_[i].push_back(j);
      }
    }
  }

  std::vector<std::vector<std::size_t>> run() {
    disc_.assign(n_, kUnvisited);
    low_.assign(n_, 0);
    for (std::size_t v = 0; v < n_; ++v) {
      if (disc_[v] == kUnvisited && !adj_[v].empty()) visit(v);
    }
    return std::move(components_);
  }

 private:
  static constexpr std::size_t kUnvisited = static_cast<std::size_t>(-1);

  struct Frame {
    std::size_t v;
    std::size_t parent;
    std::size_t next = 0;
  };

  void visit(std::size_t root) {
    std::vector<Frame> stack;
    disc_[root] = low_[root] = timer_++;
    stack.push_back({root, kUnvisited});
    while (!stack.empty()) {
      Frame& f = stack.back();
      if (f.next < adj_[f.v].size()) {
        const std::size_t w = adj_[f.v][f.next++];
        if (disc_[w] == kUnvisited) {
          edges_.emplace_back(f.v, w);
          disc_[w] = low_[w] = timer_++;
          stack.push_back({w, f.v});
        } else if (w != f.parent && disc_[w] < disc_[f.v]) {
          edges_.emplace_back(f.v, w);
          low_[f.v] = std::min(low_[f.v], disc_[w]);
        }
        continue;
      }
      const std::size_t v = f.v;
      const std::size_t parent = f.parent;
      stack.pop_back();
      if (parent == kUnvisited) continue;
      low_[parent] = std::min(low_[parent], low_[v]);
      if (low_[v] >= disc_[parent]) pop_component(parent, v);
    }
  }

  void pop_component(std::size_t u, std::size_t v) {
    std::vector<std::size_t> nodes;
    while (!edges_.empty()) {
      const auto [a, b] = edges_.back();
      edges_.pop_back();
      nodes.push_back(a);
      nodes.push_back(b);
      if (a == u && b == v) break;
    }
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    components_.push_back(std::move(nodes));
  }

  std::size_t n_;
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<std::size_t> disc_;
  std::vector<std::size_t> low_;
  std::size_t timer_ = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  std::vector<std::vector<std::size_t>> components_;
};

}  // namespace

BccDecomposition find_bccs(const Adjacency& adjacency, double mu) {
  if (!(mu >= 0)) throw GraphError("mu must be non-negative");
  BccDecomposition out;
  out.threshold = mu;
  out.components = TarjanBcc(adjacency, mu).run();
  std::sort(out.components.begin(), out.components.end());
  out.membership.assign(adjacency.size(), {});
  for (std::size_t c = 0; c < out.components.size(); ++c) {
    for (auto v : out.components[c]) out.membership[v].push_back(c);
  }
  return out;
}

}  // namespace darkfarseer::graphs

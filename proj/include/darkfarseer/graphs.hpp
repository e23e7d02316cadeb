#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace darkfarseer::graphs {

class GraphError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class GraphKind { pcg, spg };

/// Which side of epsilon survives the kernel threshold. keep_below is the
/// literal rule (w < epsilon); keep_above is the sparsifying reading (w >= epsilon).
enum class ThresholdMode { keep_below, keep_above };

struct Coordinate {
  double lat = 0.0;
  double lon = 0.0;
};

struct Edge {
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
};

/// Dense symmetric N x N weight matrix, row-major.
class Adjacency {
 public:
  Adjacency() = default;
  explicit Adjacency(std::size_t n) : n_(n), w_(n * n, 0.0) {}
  Adjacency(std::size_t n, std::vector<double> weights);

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return w_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return w_[i * n_ + j]; }
  void set_symmetric(std::size_t i, std::size_t j, double w) {
    w_[i * n_ + j] = w;
    w_[j * n_ + i] = w;
  }
  std::span<const double> values() const { return w_; }

  /// Nodes j != i with a nonzero weight, ascending.
  std::vector<std::size_t> neighbors(std::size_t i) const;
  /// Undirected edges with nonzero weight.
  std::size_t edge_count() const;
  bool is_symmetric() const;
  bool has_zero_diagonal() const;

  bool operator==(const Adjacency& other) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> w_;
};

/// Throws GraphError unless the matrix is symmetric, zero-diagonal, finite and non-negative.
void validate_adjacency(const Adjacency& a);

class SensorGraph {
 public:
  SensorGraph() = default;
  SensorGraph(Adjacency adjacency, GraphKind kind, std::vector<Coordinate> coordinates = {},
              bool normalized = false);

  std::size_t n_nodes() const { return adjacency_.size(); }
  const Adjacency& adjacency() const { return adjacency_; }
  GraphKind kind() const { return kind_; }
  const std::vector<Coordinate>& coordinates() const { return coordinates_; }
  bool has_coordinates() const { return !coordinates_.empty(); }
  /// Weights have already been passed through the exponential kernel.
  bool normalized() const { return normalized_; }

 private:
  Adjacency adjacency_;
  GraphKind kind_ = GraphKind::pcg;
  std::vector<Coordinate> coordinates_;
  bool normalized_ = false;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Great-circle distance in kilometres.
double haversine_km(const Coordinate& a, const Coordinate& b);

/// exp(-d) / sigma.
double kernel_weight(double distance, double sigma_dist);

/// Whether a kernel weight survives the epsilon threshold.
bool keeps(double weight, double epsilon, ThresholdMode mode);

SensorGraph build_pcg(std::size_t n_nodes, std::span<const Edge> edges);

SensorGraph build_spg(std::span<const Coordinate> coordinates, double sigma_dist, double epsilon,
                      ThresholdMode mode = ThresholdMode::keep_below);

/// Replaces PCG distances with kernel weights, then applies the threshold.
SensorGraph normalize_adjacency(const SensorGraph& graph, double sigma_dist, double epsilon,
                                ThresholdMode mode = ThresholdMode::keep_below);

/// |E| / (N ln N).
double density(const Adjacency& adjacency);
inline double density(const SensorGraph& graph) { return density(graph.adjacency()); }

struct Subgraph {
  SensorGraph graph;
  /// index_map[k] is the original id of node k.
  std::vector<std::size_t> index_map;
};

/// Induced subgraph on `keep`, re-indexed densely in ascending original order.
Subgraph subgraph(const SensorGraph& graph, std::span<const std::size_t> keep);
Adjacency induced(const Adjacency& adjacency, std::span<const std::size_t> sorted_keep);

struct BccDecomposition {
  /// Each component's nodes in ascending order; components ordered by
  /// their node lists (smallest contained node first).
  std::vector<std::vector<std::size_t>> components;
  /// membership[v] lists component indices containing v, ascending.
  std::vector<std::vector<std::size_t>> membership;
  double threshold = 0.0;

  std::size_t size() const { return components.size(); }
  bool empty() const { return components.empty(); }
  /// Nodes belonging to more than one component.
  std::vector<std::size_t> articulation_nodes() const;
};

/// Biconnected components of the graph formed by edges with weight > mu.
BccDecomposition find_bccs(const Adjacency& adjacency, double mu);
inline BccDecomposition find_bccs(const SensorGraph& graph, double mu) { return find_bccs(graph.adjacency(), mu); }

}  // namespace darkfarseer::graphs

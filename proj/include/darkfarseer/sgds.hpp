#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "darkfarseer/autodiff.hpp"
#include "darkfarseer/graphs.hpp"
#include "darkfarseer/rscl.hpp"

// Similarity-based graph denoising. For each virtual node the neighbours
// with the weakest blended prototype/feature similarity get their edge
// weight replaced by a small constant.
namespace darkfarseer::sgds {

struct DenoiseConfig {
  double beta = 0.2;    // fraction of a virtual node's edges to downweight
  double omega = 0.01;  // replacement weight
  double activation_threshold = 1.0;

  void validate() const;
};

/// 1 / D. Not clamped; may exceed 1 on sparse graphs.
double blend_coefficient(double graph_density);
double blend_coefficient(const graphs::SensorGraph& graph);

/// Per-node prototype lookup used by the similarity score.
class NodePrototypes {
 public:
  /// `hidden` is [N, p, phi]; prototypes rows are flattened component means.
  NodePrototypes(const ad::Tensor& hidden, const rscl::PrototypeSet& prototypes,
                 const std::vector<std::vector<std::size_t>>& membership);

  /// Mean of the node's component prototypes, or its own hidden row when it is in none.
  std::span<const double> prototype(std::size_t node) const;
  std::span<const double> hidden(std::size_t node) const;
  std::size_t width() const { return width_; }

 private:
  std::size_t width_ = 0;
  std::vector<double> hidden_;
  std::vector<double> node_prototypes_;
};

/// alpha * s(P_i, P_j) + (1 - alpha) * s(H'_i, H'_j), alpha clamped to [0, 1].
/// Throws unless j is a neighbour of i in `adjacency`.
double edge_similarity(std::size_t i, std::size_t j, const graphs::Adjacency& adjacency, const NodePrototypes& nodes,
                       double alpha);

/// Cosine similarity with the same epsilon guard as the differentiable primitive.
double cosine(std::span<const double> a, std::span<const double> b);

struct DenoiseResult {
  graphs::Adjacency adjacency;
  bool activated = false;
  /// Undirected edges set to omega, as (min, max) pairs, ascending.
  std::vector<std::pair<std::size_t, std::size_t>> downweighted;
};

/// When graph_density exceeds the activation threshold, each virtual node's
/// floor(|N(i)| * beta) lowest-similarity edges (ties to the lower neighbour
/// index) are set to omega on both triangle entries. Neighbourhoods and
/// similarities are taken from the input adjacency.
DenoiseResult denoise(const graphs::Adjacency& adjacency, const NodePrototypes& nodes,
                      std::span<const std::size_t> virtual_nodes, const DenoiseConfig& config, double graph_density);

}  // namespace darkfarseer::sgds

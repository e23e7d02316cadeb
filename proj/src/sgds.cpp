#include "darkfarseer/sgds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace darkfarseer::sgds {

void DenoiseConfig::validate() const {
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("beta must lie in (0, 1)");
  if (!(omega >= 0.0) || !std::isfinite(omega)) throw std::invalid_argument("omega must be finite and non-negative");
  if (!std::isfinite(activation_threshold)) throw std::invalid_argument("activation threshold must be finite");
}

double blend_coefficient(double graph_density) {
  if (!(graph_density > 0)) throw std::invalid_argument("blend coefficient is undefined for a graph without edges");
  return 1.0 / graph_density;
}

double blend_coefficient(const graphs::SensorGraph& graph) { return blend_coefficient(graphs::density(graph)); }

NodePrototypes::NodePrototypes(const ad::Tensor& hidden, const rscl::PrototypeSet& prototypes,
                               const std::vector<std::vector<std::size_t>>& membership) {
  const std::size_t n = hidden.shape()[0];
  width_ = hidden.size() / n;
  hidden_.assign(hidden.data().begin(), hidden.data().end());
  node_prototypes_ = hidden_;
  if (prototypes.size() == 0) return;
  const auto protos = prototypes.prototypes.data();
  if (prototypes.prototypes.size() != prototypes.size() * width_) {
    throw ad::ShapeError("prototype width does not match the hidden state");
  }
  for (std::size_t v = 0; v < n && v < membership.size(); ++v) {
    const auto& comps = membership[v];
    if (comps.empty()) continue;
    double* dst = node_prototypes_.data() + v * width_;
    std::fill_n(dst, width_, 0.0);
    for (auto c : comps) {
      for (std::size_t k = 0; k < width_; ++k) dst[k] += protos[c * width_ + k];
    }
    const double inv = 1.0 / static_cast<double>(comps.size());
    for (std::size_t k = 0; k < width_; ++k) dst[k] *= inv;
  }
}

std::span<const double> NodePrototypes::prototype(std::size_t node) const {
  return {node_prototypes_.data() + node * width_, width_};
}

std::span<const double> NodePrototypes::hidden(std::size_t node) const {
  return {hidden_.data() + node * width_, width_};
}

double cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return dot / (std::max(std::sqrt(aa), ad::kCosineEps) * std::max(std::sqrt(bb), ad::kCosineEps));
}

double edge_similarity(std::size_t i, std::size_t j, const graphs::Adjacency& adjacency, const NodePrototypes& nodes,
                       double alpha) {
  if (i == j || adjacency(i, j) == 0.0) {
    throw std::invalid_argument("edge_similarity: node " + std::to_string(j) + " is not a neighbour of " +
                                std::to_string(i));
  }
  const double a = std::clamp(alpha, 0.0, 1.0);
  return a * cosine(nodes.prototype(i), nodes.prototype(j)) + (1.0 - a) * cosine(nodes.hidden(i), nodes.hidden(j));
}

DenoiseResult denoise(const graphs::Adjacency& adjacency, const NodePrototypes& nodes,
                      std::span<const std::size_t> virtual_nodes, const DenoiseConfig& config, double graph_density) {
  config.validate();
  DenoiseResult out{adjacency, false, {}};
  if (!(graph_density > config.activation_threshold)) return out;
  out.activated = true;
  const double alpha = blend_coefficient(graph_density);

  for (auto i : virtual_nodes) {
    const auto neighbors = adjacency.neighbors(i);
    const auto k = static_cast<std::size_t>(std::floor(static_cast<double>(neighbors.size()) * config.beta));
    if (k == 0) continue;
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(neighbors.size());
    for (auto j : neighbors) scored.emplace_back(edge_similarity(i, j, adjacency, nodes, alpha), j);
    // Lowest gamma first, lower index on ties.
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end());
    for (std::size_t r = 0; r < k; ++r) {
      const std::size_t j = scored[r].second;
      out.adjacency.set_symmetric(i, j, config.omega);
      out.downweighted.emplace_back(std::min(i, j), std::max(i, j));
    }
  }
  std::sort(out.downweighted.begin(), out.downweighted.end());
  out.downweighted.erase(std::unique(out.downweighted.begin(), out.downweighted.end()), out.downweighted.end());
  return out;
}

}  // namespace darkfarseer::sgds

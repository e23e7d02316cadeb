#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "darkfarseer/autodiff.hpp"
#include "darkfarseer/graphs.hpp"
#include "darkfarseer/series.hpp"

// Regional contrastive learning: virtual-node anchors are pulled towards the
// prototypes of the biconnected components they belong to and pushed away
// from components that share no node with those.
namespace darkfarseer::rscl {

using ad::Tensor;

struct TemporalAugmentation {
  SeriesWindow window;
  /// dropped[node * p + t] is true where an observed reading was zeroed.
  std::vector<bool> dropped;
};

/// Zeroes each observed reading independently with probability p_t.
TemporalAugmentation augment_temporal(const SeriesWindow& window, double p_t, std::mt19937_64& rng);

/// Adds a symmetric edge between each unconnected pair with probability p_s.
/// New edges carry the mean of the existing nonzero weights (1 when there are none).
graphs::Adjacency augment_topology(const graphs::Adjacency& adjacency, double p_s, std::mt19937_64& rng);

struct PrototypeSet {
  Tensor prototypes;  // [m, p * phi]
  std::vector<std::vector<std::size_t>> components;

  std::size_t size() const { return components.size(); }
};

/// P_c = mean of the flattened hidden states of component c's members.
PrototypeSet compute_prototypes(const Tensor& hidden, const graphs::BccDecomposition& bccs);

struct ContrastAssignment {
  std::size_t anchor = 0;
  std::vector<std::size_t> positives;
  std::vector<std::size_t> negatives;
  /// Components sharing a node with a positive; neither positive nor negative.
  std::vector<std::size_t> excluded;
};

ContrastAssignment select_samples(std::size_t anchor, const graphs::BccDecomposition& bccs);

/// Mean over positives k of -log(e_k / (e_k + sum_j e_j)), e = exp(cos(h, P) / tau).
Tensor info_nce(const Tensor& anchor, std::span<const Tensor> positives, std::span<const Tensor> negatives, double tau);

struct ContrastiveLoss {
  Tensor loss;
  std::size_t anchors_used = 0;
  /// Every anchor lacked a positive; loss is a constant zero.
  bool all_skipped = false;
};

/// Mean info_nce over virtual anchors that have at least one positive.
/// Anchors come from `hidden_main`, prototypes from `hidden_aug`.
ContrastiveLoss rscl_loss(const Tensor& hidden_main, const Tensor& hidden_aug, const graphs::BccDecomposition& bccs,
                          std::span<const std::size_t> virtual_nodes, double tau);

}  // namespace darkfarseer::rscl

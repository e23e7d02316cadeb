#include "darkfarseer/rscl.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace darkfarseer::rscl {

namespace {

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(name) + " must lie in [0, 1]");
}

bool draw(std::mt19937_64& rng, double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; }

bool intersects(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  // Both sorted ascending.
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) return true;
    a[i] < b[j] ? ++i : ++j;
  }
  return false;
}

}  // namespace

TemporalAugmentation augment_temporal(const SeriesWindow& window, double p_t, std::mt19937_64& rng) {
  check_probability(p_t, "p_t");
  const std::size_t n = window.n_nodes(), p = window.window_length();
  std::vector<double> values = window.values();
  std::vector<bool> dropped(n * p, false);
  for (std::size_t node = 0; node < n; ++node) {
    if (!window.observed(node)) continue;
    for (std::size_t t = 0; t < p; ++t) {
      if (draw(rng, p_t)) {
        values[node * p + t] = 0.0;
        dropped[node * p + t] = true;
      }
    }
  }
  return {SeriesWindow(n, p, std::move(values), window.observed_mask()), std::move(dropped)};
}

graphs::Adjacency augment_topology(const graphs::Adjacency& adjacency, double p_s, std::mt19937_64& rng) {
  check_probability(p_s, "p_s");
  const std::size_t n = adjacency.size();
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (adjacency(i, j) != 0.0) {
        sum += adjacency(i, j);
        ++count;
      }
    }
  }
  const double fill = count ? sum / static_cast<double>(count) : 1.0;
  graphs::Adjacency out = adjacency;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (adjacency(i, j) == 0.0 && draw(rng, p_s)) out.set_symmetric(i, j, fill);
    }
  }
  return out;
}

PrototypeSet compute_prototypes(const Tensor& hidden, const graphs::BccDecomposition& bccs) {
  if (bccs.empty()) throw std::invalid_argument("compute_prototypes: no components");
  const std::size_t n = hidden.shape()[0];
  const std::size_t width = hidden.size() / n;
  const std::size_t m = bccs.size();
  // Pooling matrix with 1/|C| on member columns.
  std::vector<double> pool(m * n, 0.0);
  for (std::size_t c = 0; c < m; ++c) {
    const auto& members = bccs.components[c];
    if (members.empty()) throw std::invalid_argument("compute_prototypes: empty component");
    for (auto v : members) {
      if (v >= n) {
        throw std::out_of_range("compute_prototypes: component references node " + std::to_string(v) +
                                " outside the hidden state of " + std::to_string(n) + " nodes");
      }
      pool[c * n + v] = 1.0 / static_cast<double>(members.size());
    }
  }
  PrototypeSet out;
  out.prototypes = ad::matmul(Tensor::from({m, n}, std::move(pool)), ad::reshape(hidden, {n, width}));
  out.components = bccs.components;
  return out;
}

ContrastAssignment select_samples(std::size_t anchor, const graphs::BccDecomposition& bccs) {
  ContrastAssignment a;
  a.anchor = anchor;
  if (anchor < bccs.membership.size()) a.positives = bccs.membership[anchor];
  if (a.positives.empty()) return a;
  for (std::size_t c = 0; c < bccs.size(); ++c) {
    if (std::binary_search(a.positives.begin(), a.positives.end(), c)) continue;
    const bool shares = std::any_of(a.positives.begin(), a.positives.end(), [&](std::size_t k) {
      return intersects(bccs.components[c], bccs.components[k]);
    });
    (shares ? a.excluded : a.negatives).push_back(c);
  }
  return a;
}

Tensor info_nce(const Tensor& anchor, std::span<const Tensor> positives, std::span<const Tensor> negatives,
                double tau) {
  if (positives.empty()) throw std::invalid_argument("info_nce: at least one positive sample is required");
  if (!(tau > 0)) throw std::invalid_argument("info_nce: temperature must be positive");
  if (negatives.empty()) return Tensor::scalar(0.0);  // -log(1) for every positive

  const double inv_tau = 1.0 / tau;
  auto score = [&](const Tensor& proto) { return ad::exp(ad::scale(ad::cosine_similarity(anchor, proto), inv_tau)); };
  Tensor negative_mass = score(negatives[0]);
  for (std::size_t j = 1; j < negatives.size(); ++j) negative_mass = negative_mass + score(negatives[j]);

  Tensor total;
  for (std::size_t k = 0; k < positives.size(); ++k) {
    const Tensor pos = score(positives[k]);
    const Tensor term = ad::log(ad::divide(pos, pos + negative_mass));
    total = k == 0 ? term : total + term;
  }
  return ad::scale(total, -1.0 / static_cast<double>(positives.size()));
}

ContrastiveLoss rscl_loss(const Tensor& hidden_main, const Tensor& hidden_aug, const graphs::BccDecomposition& bccs,
                          std::span<const std::size_t> virtual_nodes, double tau) {
  if (virtual_nodes.empty()) throw std::invalid_argument("rscl_loss: no virtual nodes");
  ContrastiveLoss out;
  if (bccs.empty()) {
    out.loss = Tensor::scalar(0.0);
    out.all_skipped = true;
    return out;
  }
  const std::size_t n = hidden_main.shape()[0];
  const std::size_t width = hidden_main.size() / n;
  const Tensor anchors = ad::reshape(hidden_main, {n, width});
  const PrototypeSet protos = compute_prototypes(hidden_aug, bccs);

  Tensor sum;
  for (auto v : virtual_nodes) {
    const ContrastAssignment a = select_samples(v, bccs);
    if (a.positives.empty()) continue;
    std::vector<Tensor> pos, neg;
    for (auto k : a.positives) pos.push_back(ad::gather_rows(protos.prototypes, {k}));
    for (auto k : a.negatives) neg.push_back(ad::gather_rows(protos.prototypes, {k}));
    const Tensor cl = info_nce(ad::gather_rows(anchors, {v}), pos, neg, tau);
    sum = out.anchors_used == 0 ? cl : sum + cl;
    ++out.anchors_used;
  }
  if (out.anchors_used == 0) {
    out.loss = Tensor::scalar(0.0);
    out.all_skipped = true;
    return out;
  }
  out.loss = ad::scale(sum, 1.0 / static_cast<double>(out.anchors_used));
  return out;
}

}  // namespace darkfarseer::rscl

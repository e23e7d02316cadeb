#include "darkfarseer/sets.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace darkfarseer::sets {

using ad::Shape;

namespace {

Tensor glorot(Shape shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> v(ad::shape_size(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor::from(std::move(shape), std::move(v), true);
}

void expect_shape(const Tensor& t, const Shape& shape, const char* name) {
  if (t.shape() != shape) {
    throw ad::ShapeError(std::string(name) + " has shape " + ad::to_string(t.shape()) + ", expected " +
                         ad::to_string(shape));
  }
}

}  // namespace

SetsParams SetsParams::init(std::size_t p, std::size_t phi, std::size_t kernel, std::mt19937_64& rng) {
  SetsParams s;
  s.window_length = p;
  s.hidden_dim = phi;
  s.kernel = kernel;
  s.lift_weight = glorot({1, phi}, 1, phi, rng);
  s.lift_bias = Tensor::zeros({phi}, true);
  s.trend_weight = glorot({p, p}, p, p, rng);
  s.trend_bias = Tensor::zeros({p}, true);
  s.seasonal_weight = glorot({p, p}, p, p, rng);
  s.seasonal_bias = Tensor::zeros({p}, true);
  s.self_weight = glorot({phi, phi}, phi, phi, rng);
  s.self_bias = Tensor::zeros({phi}, true);
  s.neighbor_weight = glorot({phi, phi}, phi, phi, rng);
  s.neighbor_bias = Tensor::zeros({phi}, true);
  s.decoder_weight = glorot({phi, 1}, phi, 1, rng);
  s.decoder_bias = Tensor::zeros({1}, true);
  return s;
}

SetsParams SetsParams::zeros(std::size_t p, std::size_t phi, std::size_t kernel) {
  SetsParams s;
  s.window_length = p;
  s.hidden_dim = phi;
  s.kernel = kernel;
  s.lift_weight = Tensor::zeros({1, phi}, true);
  s.lift_bias = Tensor::zeros({phi}, true);
  s.trend_weight = Tensor::zeros({p, p}, true);
  s.trend_bias = Tensor::zeros({p}, true);
  s.seasonal_weight = Tensor::zeros({p, p}, true);
  s.seasonal_bias = Tensor::zeros({p}, true);
  s.self_weight = Tensor::zeros({phi, phi}, true);
  s.self_bias = Tensor::zeros({phi}, true);
  s.neighbor_weight = Tensor::zeros({phi, phi}, true);
  s.neighbor_bias = Tensor::zeros({phi}, true);
  s.decoder_weight = Tensor::zeros({phi, 1}, true);
  s.decoder_bias = Tensor::zeros({1}, true);
  return s;
}

std::vector<std::pair<std::string, Tensor*>> SetsParams::named() {
  return {{"lift_weight", &lift_weight},         {"lift_bias", &lift_bias},
          {"trend_weight", &trend_weight},       {"trend_bias", &trend_bias},
          {"seasonal_weight", &seasonal_weight}, {"seasonal_bias", &seasonal_bias},
          {"self_weight", &self_weight},         {"self_bias", &self_bias},
          {"neighbor_weight", &neighbor_weight}, {"neighbor_bias", &neighbor_bias},
          {"decoder_weight", &decoder_weight},   {"decoder_bias", &decoder_bias}};
}

std::vector<std::pair<std::string, const Tensor*>> SetsParams::named() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] : const_cast<SetsParams*>(this)->named()) out.emplace_back(name, t);
  return out;
}

void SetsParams::validate() const {
  const std::size_t p = window_length, phi = hidden_dim;
  if (p == 0 || phi == 0) throw std::invalid_argument("window length and hidden dimension must be positive");
  if (kernel % 2 == 0 || kernel >= p) throw std::invalid_argument("moving-average kernel must be odd and below p");
  expect_shape(lift_weight, {1, phi}, "lift_weight");
  expect_shape(lift_bias, {phi}, "lift_bias");
  expect_shape(trend_weight, {p, p}, "trend_weight");
  expect_shape(trend_bias, {p}, "trend_bias");
  expect_shape(seasonal_weight, {p, p}, "seasonal_weight");
  expect_shape(seasonal_bias, {p}, "seasonal_bias");
  expect_shape(self_weight, {phi, phi}, "self_weight");
  expect_shape(self_bias, {phi}, "self_bias");
  expect_shape(neighbor_weight, {phi, phi}, "neighbor_weight");
  expect_shape(neighbor_bias, {phi}, "neighbor_bias");
  expect_shape(decoder_weight, {phi, 1}, "decoder_weight");
  expect_shape(decoder_bias, {1}, "decoder_bias");
}

Decomposition decompose_series(std::span<const double> x, std::size_t kernel) {
  const std::size_t p = x.size();
  if (kernel % 2 == 0) throw std::invalid_argument("moving-average kernel must be odd");
  if (kernel >= p) throw std::invalid_argument("moving-average kernel must be shorter than the series");
  const auto half = static_cast<std::ptrdiff_t>(kernel / 2);
  const auto last = static_cast<std::ptrdiff_t>(p) - 1;
  Decomposition d;
  d.trend.resize(p);
  d.remainder.resize(p);
  for (std::size_t t = 0; t < p; ++t) {
    double sum = 0.0;
    for (std::ptrdiff_t o = -half; o <= half; ++o) {
      sum += x[static_cast<std::size_t>(std::clamp(static_cast<std::ptrdiff_t>(t) + o, std::ptrdiff_t{0}, last))];
    }
    d.trend[t] = sum / static_cast<double>(kernel);
    d.remainder[t] = x[t] - d.trend[t];
  }
  return d;
}

Tensor moving_average_operator(std::size_t p, std::size_t kernel) {
  if (kernel % 2 == 0 || kernel >= p) throw std::invalid_argument("moving-average kernel must be odd and below p");
  const auto half = static_cast<std::ptrdiff_t>(kernel / 2);
  const auto last = static_cast<std::ptrdiff_t>(p) - 1;
  std::vector<double> m(p * p, 0.0);
  const double w = 1.0 / static_cast<double>(kernel);
  for (std::size_t t = 0; t < p; ++t) {
    for (std::ptrdiff_t o = -half; o <= half; ++o) {
      const auto src = static_cast<std::size_t>(std::clamp(static_cast<std::ptrdiff_t>(t) + o, std::ptrdiff_t{0}, last));
      m[src * p + t] += w;
    }
  }
  return Tensor::from({p, p}, std::move(m));
}

Tensor style_encode(const Tensor& x_neighbors, const SetsParams& params) {
  const std::size_t p = params.window_length;
  if (x_neighbors.rank() != 2 || x_neighbors.shape()[1] != p) {
    throw ad::ShapeError("style_encode: neighbour block " + ad::to_string(x_neighbors.shape()) +
                         " does not have p = " + std::to_string(p) + " columns");
  }
  for (double v : x_neighbors.data()) {
    if (!std::isfinite(v)) throw ad::NonFiniteError("style_encode: non-finite input reading");
  }
  const Tensor trend = ad::matmul(x_neighbors, moving_average_operator(p, params.kernel));
  const Tensor remainder = x_neighbors - trend;
  const Tensor pre = ad::matmul(trend, params.trend_weight) + params.trend_bias +
                     ad::matmul(remainder, params.seasonal_weight) + params.seasonal_bias;
  return ad::sigmoid(pre);
}

std::vector<std::size_t> virtual_neighbors(const graphs::Adjacency& adjacency, const std::vector<bool>& observed) {
  if (observed.size() != adjacency.size()) throw std::invalid_argument("mask length does not match adjacency size");
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < adjacency.size(); ++j) {
    if (!observed[j]) continue;
    for (std::size_t i = 0; i < adjacency.size(); ++i) {
      if (!observed[i] && adjacency(i, j) != 0.0) {
        out.push_back(j);
        break;
      }
    }
  }
  return out;
}

StyleSequences encode_neighbor_styles(const SeriesWindow& window, const graphs::Adjacency& adjacency,
                                      const SetsParams& params) {
  StyleSequences s;
  s.nodes = virtual_neighbors(adjacency, window.observed_mask());
  if (s.nodes.empty()) return s;
  const std::size_t p = window.window_length();
  std::vector<double> block;
  block.reserve(s.nodes.size() * p);
  for (auto j : s.nodes) {
    for (std::size_t t = 0; t < p; ++t) block.push_back(window(j, t));
  }
  s.values = style_encode(Tensor::from({s.nodes.size(), p}, std::move(block)), params);
  return s;
}

Tensor embed_inputs(const SeriesWindow& window, const SetsParams& params) {
  const std::size_t n = window.n_nodes(), p = window.window_length(), phi = params.hidden_dim;
  if (p != params.window_length) {
    throw ad::ShapeError("embed_inputs: window length " + std::to_string(p) + " does not match parameters (" +
                         std::to_string(params.window_length) + ")");
  }
  const Tensor x = Tensor::from({n * p, 1}, window.values());
  const Tensor lifted = ad::matmul(x, params.lift_weight) + params.lift_bias;
  return ad::reshape(lifted, {n, p, phi});
}

Tensor style_fuse(const Tensor& h, const StyleSequences& styles, std::span<const std::size_t> allowed_nodes) {
  if (styles.nodes.empty()) return h;
  if (h.rank() != 3) throw ad::ShapeError("style_fuse: hidden state must be [N, p, phi], got " + ad::to_string(h.shape()));
  const std::size_t n = h.shape()[0], p = h.shape()[1];
  for (auto j : styles.nodes) {
    if (std::find(allowed_nodes.begin(), allowed_nodes.end(), j) == allowed_nodes.end()) {
      throw std::invalid_argument("style_fuse: node " + std::to_string(j) + " is not a neighbour of a virtual node");
    }
  }
  if (styles.values.shape() != Shape{styles.nodes.size(), p}) {
    throw ad::ShapeError("style_fuse: styles " + ad::to_string(styles.values.shape()) + " do not match " +
                         std::to_string(styles.nodes.size()) + " nodes of length " + std::to_string(p));
  }
  // gate = S_j on styled rows and exactly 1 elsewhere.
  std::vector<double> pass(n * p, 1.0);
  for (auto j : styles.nodes) std::fill_n(pass.begin() + static_cast<std::ptrdiff_t>(j * p), p, 0.0);
  const Tensor gate = ad::scatter_rows(styles.values, styles.nodes, n) + Tensor::from({n, p}, std::move(pass));
  return h * ad::reshape(gate, {n, p, 1});
}

Tensor row_normalize(const graphs::Adjacency& adjacency) {
  const std::size_t n = adjacency.size();
  std::vector<double> a(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += adjacency(i, j);
    if (sum == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) a[i * n + j] = adjacency(i, j) / sum;
  }
  return Tensor::from({n, n}, std::move(a));
}

Tensor message_pass(const Tensor& h, const graphs::Adjacency& adjacency, const SetsParams& params) {
  if (h.rank() != 3) throw ad::ShapeError("message_pass: hidden state must be [N, p, phi], got " + ad::to_string(h.shape()));
  const std::size_t n = h.shape()[0], p = h.shape()[1], phi = h.shape()[2];
  if (adjacency.size() != n) {
    throw ad::ShapeError("message_pass: adjacency of " + std::to_string(adjacency.size()) + " nodes for hidden state " +
                         ad::to_string(h.shape()));
  }
  const Tensor rows = ad::reshape(h, {n * p, phi});
  const Tensor self = ad::matmul(rows, params.self_weight) + params.self_bias;
  const Tensor msg = ad::reshape(ad::matmul(rows, params.neighbor_weight) + params.neighbor_bias, {n, p * phi});
  const Tensor agg = ad::reshape(ad::matmul(row_normalize(adjacency), msg), {n * p, phi});
  return ad::reshape(ad::relu(self + agg), {n, p, phi});
}

Tensor decode(const Tensor& hidden, const SetsParams& params) {
  if (hidden.rank() != 3 || hidden.shape()[2] != params.hidden_dim) {
    throw ad::ShapeError("decode: hidden state " + ad::to_string(hidden.shape()) + " does not end in phi = " +
                         std::to_string(params.hidden_dim));
  }
  const std::size_t n = hidden.shape()[0], p = hidden.shape()[1];
  const Tensor rows = ad::reshape(hidden, {n * p, params.hidden_dim});
  return ad::reshape(ad::matmul(rows, params.decoder_weight) + params.decoder_bias, {n, p});
}

graphs::Adjacency observed_senders(const graphs::Adjacency& adjacency, const std::vector<bool>& observed) {
  const std::size_t n = adjacency.size();
  if (observed.size() != n) throw ad::ShapeError("observed_senders: mask size differs from the adjacency");
  graphs::Adjacency out = adjacency;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!observed[j]) out(i, j) = 0.0;
    }
  }
  return out;
}

namespace {

const graphs::Adjacency& message_graph(const graphs::Adjacency& adjacency, const SeriesWindow& window,
                                       Senders senders, graphs::Adjacency& scratch) {
  if (senders == Senders::all) return adjacency;
  scratch = observed_senders(adjacency, window.observed_mask());
  return scratch;
}

}  // namespace

SetsOutput sets_forward(const SeriesWindow& window, const graphs::Adjacency& adjacency, const SetsParams& params,
                        const graphs::Adjacency* denoised, Senders senders) {
  if (adjacency.size() != window.n_nodes()) {
    throw ad::ShapeError("sets_forward: adjacency of " + std::to_string(adjacency.size()) + " nodes for a window of " +
                         std::to_string(window.n_nodes()));
  }
  if (denoised && denoised->size() != adjacency.size()) {
    throw ad::ShapeError("sets_forward: denoised adjacency size differs from the adjacency");
  }
  // Temporal first: styles come from each node's own series before any mixing.
  const Tensor h = embed_inputs(window, params);
  const StyleSequences styles = encode_neighbor_styles(window, adjacency, params);
  SetsOutput out;
  out.fused = style_fuse(h, styles, styles.nodes);
  graphs::Adjacency scratch;
  out.hidden = message_pass(out.fused, message_graph(adjacency, window, senders, scratch), params);
  if (denoised) return reencode(std::move(out), *denoised, params, window, senders);
  out.predictions = decode(out.hidden, params);
  return out;
}

SetsOutput reencode(SetsOutput first, const graphs::Adjacency& denoised, const SetsParams& params,
                    const SeriesWindow& window, Senders senders) {
  graphs::Adjacency scratch;
  first.hidden_denoised = message_pass(first.fused, message_graph(denoised, window, senders, scratch), params);
  first.predictions = decode(*first.hidden_denoised, params);
  return first;
}

}  // namespace darkfarseer::sets

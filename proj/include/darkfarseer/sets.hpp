#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "darkfarseer/autodiff.hpp"
#include "darkfarseer/graphs.hpp"
#include "darkfarseer/series.hpp"

// Style-enhanced temporal-spatial encoder: per-node temporal style
// extraction, style fusion on the observed neighbours of virtual nodes,
// one message-passing layer and a per-step readout.
namespace darkfarseer::sets {

using ad::Tensor;

struct SetsParams {
  std::size_t window_length = 0;  // p
  std::size_t hidden_dim = 0;     // phi
  std::size_t kernel = 5;         // moving-average length of the trend/seasonal split

  Tensor lift_weight;  // [1, phi]
  Tensor lift_bias;    // [phi]
  Tensor trend_weight;     // [p, p]
  Tensor trend_bias;       // [p]
  Tensor seasonal_weight;  // [p, p]
  Tensor seasonal_bias;    // [p]
  Tensor self_weight;      // [phi, phi]
  Tensor self_bias;        // [phi]
  Tensor neighbor_weight;  // [phi, phi]
  Tensor neighbor_bias;    // [phi]
  Tensor decoder_weight;   // [phi, 1]
  Tensor decoder_bias;     // [1]

  /// Glorot-uniform weights, zero biases. Every tensor requires a gradient.
  static SetsParams init(std::size_t window_length, std::size_t hidden_dim, std::size_t kernel, std::mt19937_64& rng);
  /// All tensors zero.
  static SetsParams zeros(std::size_t window_length, std::size_t hidden_dim, std::size_t kernel);

  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;
  /// Throws unless shapes agree with window_length/hidden_dim and entries are finite.
  void validate() const;
};

struct Decomposition {
  std::vector<double> trend;
  std::vector<double> remainder;
};

/// Centred moving average with edge replication; remainder = x - trend.
Decomposition decompose_series(std::span<const double> x, std::size_t kernel);

/// p x p matrix M with trend_row = x_row * M, matching decompose_series.
Tensor moving_average_operator(std::size_t p, std::size_t kernel);

/// Per-node style sequences, one row of p values per node, in (0,1).
/// Broadcast over the hidden dimension when fused.
struct StyleSequences {
  std::vector<std::size_t> nodes;
  Tensor values;  // [K, p]
};

/// sigmoid(trend * W_t + b_t + remainder * W_s + b_s), row by row with shared weights.
Tensor style_encode(const Tensor& x_neighbors, const SetsParams& params);

/// Observed nodes adjacent to at least one unobserved node, ascending.
std::vector<std::size_t> virtual_neighbors(const graphs::Adjacency& adjacency, const std::vector<bool>& observed);

/// Styles for every virtual neighbour of the window under `adjacency`.
StyleSequences encode_neighbor_styles(const SeriesWindow& window, const graphs::Adjacency& adjacency,
                                      const SetsParams& params);

/// H [N, p, phi]: each reading lifted through input_lift.
Tensor embed_inputs(const SeriesWindow& window, const SetsParams& params);

/// H_j <- H_j * S_j for each styled node j; other rows pass through unchanged.
/// Every styled node must appear in `allowed_nodes`.
Tensor style_fuse(const Tensor& h, const StyleSequences& styles, std::span<const std::size_t> allowed_nodes);

/// Row-normalised adjacency (rows sum to one, empty rows stay zero).
Tensor row_normalize(const graphs::Adjacency& adjacency);

/// relu(H_i W_self + b_self + sum_j A_ij (H_j W_nb + b_nb)) at every time step.
Tensor message_pass(const Tensor& h, const graphs::Adjacency& adjacency, const SetsParams& params);

/// [N, p] readout through the phi -> 1 decoder.
Tensor decode(const Tensor& hidden, const SetsParams& params);

struct SetsOutput {
  Tensor predictions;  // [N, p]
  Tensor fused;        // H after style fusion
  Tensor hidden;       // H' over `adjacency`
  std::optional<Tensor> hidden_denoised;
};

/// Which nodes send messages. `all` aggregates every neighbour, including
/// zero-filled unobserved rows; `observed` drops messages from unobserved
/// nodes before row normalisation.
enum class Senders { all, observed };

/// Copy of `adjacency` with the columns of unobserved nodes zeroed (not symmetric).
graphs::Adjacency observed_senders(const graphs::Adjacency& adjacency, const std::vector<bool>& observed);

SetsOutput sets_forward(const SeriesWindow& window, const graphs::Adjacency& adjacency, const SetsParams& params,
                        const graphs::Adjacency* denoised = nullptr, Senders senders = Senders::all);

/// Second pass of an existing forward over a different adjacency, decoding from it.
SetsOutput reencode(SetsOutput first, const graphs::Adjacency& denoised, const SetsParams& params,
                    const SeriesWindow& window, Senders senders = Senders::all);

}  // namespace darkfarseer::sets

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "darkfarseer/autodiff.hpp"
#include "darkfarseer/graphs.hpp"
#include "darkfarseer/series.hpp"
#include "darkfarseer/sets.hpp"
#include "darkfarseer/sgds.hpp"

namespace darkfarseer::training {

using ad::Tensor;

/// Observed-to-virtual ratio o:v.
struct Ratio {
  std::size_t observed = 3;
  std::size_t virtual_ = 1;

  bool operator==(const Ratio&) const = default;
};

struct MaskSpec {
  std::vector<std::size_t> virtual_nodes;   // ascending
  std::vector<std::size_t> observed_nodes;  // ascending
  Ratio ratio;

  std::size_t n_nodes() const { return virtual_nodes.size() + observed_nodes.size(); }
  std::vector<bool> observed_mask() const;
  bool operator==(const MaskSpec&) const = default;
};

/// |V^u| = floor(n * v / (o + v)), drawn uniformly without replacement.
MaskSpec sample_decrement_mask(std::size_t n_observed, Ratio ratio, std::mt19937_64& rng);

/// Mask with the given virtual set over n nodes.
MaskSpec make_mask(std::size_t n_nodes, std::vector<std::size_t> virtual_nodes, Ratio ratio = {});

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  double eta = 0.1;
  double learning_rate = 1e-3;
  std::size_t epochs = 300;  // upper bound; early stopping usually ends sooner
  std::size_t batch_size = 4;
  std::size_t window = 24;
  double tau = 0.5;
  double mu = 0.1;
  double beta = 0.2;
  double omega = 0.01;
  double p_t = 0.2;
  double p_s = 0.003;
  std::uint64_t seed = 0;
  std::size_t moving_average_kernel = 5;
  std::size_t hidden_dim = 16;
  Ratio ratio{};
  std::size_t patience = 10;
  bool rscl = true;  // compute the contrastive term (its weight is eta)
  bool sgds = true;
  double sgds_threshold = 1.0;
  /// Unobserved rows send no messages (see sets::Senders).
  bool observed_senders = true;

  void validate() const;
  sgds::DenoiseConfig denoise_config() const { return {beta, omega, sgds_threshold}; }
  sets::Senders senders() const { return observed_senders ? sets::Senders::observed : sets::Senders::all; }

  /// Every field as key=value strings, in a fixed order.
  std::vector<std::pair<std::string, std::string>> entries() const;
  /// Sets one field from its string form. Unknown keys and bad values throw.
  void set(const std::string& key, const std::string& value);

  bool operator==(const TrainConfig&) const = default;
};

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);
double parse_double(const std::string& text);

struct NormStats {
  double mean = 0.0;
  double std = 1.0;

  double normalize(double x) const { return (x - mean) / std; }
  double denormalize(double z) const { return z * std + mean; }
  bool operator==(const NormStats&) const = default;
};

/// Mean MSE over virtual rows plus eta * l_rs. `predictions` is [N, p].
Tensor joint_loss(const Tensor& predictions, const SeriesWindow& targets, const MaskSpec& mask, const Tensor& l_rs,
                  double eta);

/// Adaptive moment estimation over a fixed parameter list.
class Adam {
 public:
  Adam(std::vector<Tensor*> params, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double epsilon = 1e-8);
  void step(const ad::Gradients& grads);
  std::size_t steps() const { return t_; }

 private:
  std::vector<Tensor*> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, b1_, b2_, eps_;
  std::size_t t_ = 0;
};

/// Independent copy of every parameter tensor.
sets::SetsParams clone(const sets::SetsParams& params);

/// Everything one forward pass on a working graph needs besides the window.
struct GraphContext {
  graphs::Adjacency adjacency;
  graphs::BccDecomposition bccs;
  double density = 0.0;

  GraphContext(graphs::Adjacency adjacency, double mu);
};

struct StepLoss {
  double total = 0.0;
  double mse = 0.0;
  double contrastive = 0.0;
  bool denoised = false;
};

/// Forward and loss for one window and mask; `augment_rng` drives the second view.
struct WindowLoss {
  Tensor loss;
  StepLoss parts;
};
WindowLoss window_loss(const SeriesWindow& truth, const MaskSpec& mask, const GraphContext& graph,
                       const sets::SetsParams& params, const TrainConfig& config, std::mt19937_64& augment_rng);

/// Prediction for a masked window (rows of V^u zero-filled) with SGDs applied when active.
Tensor predict(const SeriesWindow& masked, const GraphContext& graph, const sets::SetsParams& params,
               const TrainConfig& config);

/// Normalized train/validation series over the working-graph nodes.
struct TrainingData {
  TimeSeries train;
  TimeSeries validation;
};

struct TrainedModel {
  sets::SetsParams params;
  NormStats stats;
  TrainConfig config;
  std::size_t epochs_run = 0;
  double best_validation_mae = 0.0;  // normalized units
};

/// One optimizer per working graph; exposes single steps for inspection.
class Trainer {
 public:
  Trainer(TrainingData data, graphs::Adjacency working_graph, TrainConfig config);
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  /// One gradient step over the windows starting at `starts`, all sharing `mask`.
  /// Returns the mean loss before the update.
  StepLoss step(std::span<const std::size_t> starts, const MaskSpec& mask);
  /// One step with a freshly sampled mask.
  StepLoss step(std::span<const std::size_t> starts);

  /// Full schedule with early stopping; restores the best parameters.
  void fit();

  /// Fixed masks drawn once per trainer for early stopping.
  static constexpr std::size_t kValidationMasks = 4;

  /// MAE over the virtual rows of non-overlapping validation windows, pooled
  /// over the fixed validation masks.
  double validation_mae(const sets::SetsParams& params) const;

  const sets::SetsParams& params() const { return params_; }
  const TrainConfig& config() const { return config_; }
  const GraphContext& graph() const { return graph_; }
  std::vector<std::size_t> train_window_starts() const;
  std::size_t epochs_run() const { return epochs_run_; }
  double best_validation_mae() const { return best_mae_; }
  const std::vector<double>& loss_history() const { return history_; }

 private:
  TrainingData data_;
  GraphContext graph_;
  TrainConfig config_;
  std::mt19937_64 rng_;
  std::mt19937_64 augment_rng_;
  std::vector<MaskSpec> validation_masks_;
  sets::SetsParams params_;
  Adam optimizer_;
  std::size_t steps_ = 0;
  std::size_t epochs_run_ = 0;
  double best_mae_ = 0.0;
  std::vector<double> history_;
};

/// Trains on `data` over `working_graph` and packages the best parameters.
TrainedModel train(TrainingData data, const graphs::Adjacency& working_graph, const TrainConfig& config,
                   NormStats stats);

struct Inference {
  std::vector<std::size_t> virtual_nodes;
  /// Node-major |V^u| x p, de-normalized.
  std::vector<double> values;
  std::size_t window_length = 0;

  double operator()(std::size_t k, std::size_t t) const { return values[k * window_length + t]; }
};

/// `readings` holds raw values; rows of nodes not in `observed` are ignored.
/// `graph` is the full adjacency including virtual nodes.
Inference infer(const SeriesWindow& readings, const graphs::Adjacency& graph, const TrainedModel& model);
/// Same, reusing a prepared context for the full graph.
Inference infer(const SeriesWindow& readings, const GraphContext& graph, const TrainedModel& model);

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void save_checkpoint(const TrainedModel& model, std::ostream& out);
void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_checkpoint(std::istream& in);
TrainedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace darkfarseer::training

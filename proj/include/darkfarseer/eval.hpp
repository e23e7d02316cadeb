#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "darkfarseer/data.hpp"
#include "darkfarseer/graphs.hpp"
#include "darkfarseer/series.hpp"
#include "darkfarseer/training.hpp"

namespace darkfarseer::eval {

struct MetricsReport {
  double mae = 0.0;
  double rmse = 0.0;
  /// Sum |err| / sum |target|; empty when every target is zero.
  std::optional<double> mre;
  std::size_t n_evaluated = 0;
};

/// Streaming accumulator over (prediction, target) pairs.
class MetricsAccumulator {
 public:
  void add(double prediction, double target);
  void add(std::span<const double> predictions, std::span<const double> targets);
  MetricsReport report() const;
  std::size_t size() const { return n_; }

 private:
  double abs_ = 0.0, sq_ = 0.0, target_abs_ = 0.0;
  std::size_t n_ = 0;
};

/// Metrics over the evaluated pairs; predictions[k] is compared with targets[k].
MetricsReport metrics(std::span<const double> predictions, std::span<const double> targets);

/// Node-major |V^u| x p predictions for the unobserved rows of `window`.
struct Predictions {
  std::vector<std::size_t> virtual_nodes;
  std::vector<double> values;
  std::size_t window_length = 0;

  double operator()(std::size_t k, std::size_t t) const { return values[k * window_length + t]; }
};

/// Per step, the mean over observed nodes.
Predictions baseline_mean(const SeriesWindow& window);

/// Weight-weighted mean over the k observed neighbours with the largest
/// weights (ties to the lower index); nodes without observed neighbours use
/// baseline_mean.
Predictions baseline_knn(const SeriesWindow& window, const graphs::Adjacency& adjacency, std::size_t k);

struct ExperimentConfig {
  training::TrainConfig train;
  data::SplitRatios split;
  /// Kernel settings for unnormalized (distance) graphs.
  double sigma_dist = 1.0;
  double epsilon = graphs::kInfinity;
  graphs::ThresholdMode threshold_mode = graphs::ThresholdMode::keep_below;
  std::size_t knn_k = 3;
};

/// Kernel-normalized graph; already-normalized graphs pass through.
graphs::SensorGraph prepare_graph(const graphs::SensorGraph& graph, const ExperimentConfig& config);

/// The test mask drawn for `seed` under `ratio` on n nodes.
training::MaskSpec test_mask(std::size_t n_nodes, training::Ratio ratio, std::uint64_t seed);

struct Evaluation {
  MetricsReport model;
  MetricsReport mean;
  MetricsReport knn;
};

struct ExperimentResult {
  training::MaskSpec mask;
  MetricsReport model;  // test split
  MetricsReport mean;
  MetricsReport knn;
  std::optional<Evaluation> validation;  // absent when the validation split is shorter than a window
  training::TrainedModel trained;
  double seconds = 0.0;
};

/// Inductive evaluation of a trained model and both baselines on rows
/// [begin, end) of `dataset`, in non-overlapping windows, with `mask`
/// hiding the virtual nodes. Metrics cover virtual nodes only, in raw units.
Evaluation evaluate(const data::Dataset& dataset, const graphs::SensorGraph& prepared,
                    const training::TrainedModel& model, const training::MaskSpec& mask, std::size_t begin,
                    std::size_t end, std::size_t knn_k);

/// Split, train on the observed subgraph, evaluate on the test split.
ExperimentResult run_experiment(const data::Dataset& dataset, const ExperimentConfig& config);

struct Scenario {
  std::string name;
  training::Ratio ratio;
  std::vector<std::uint64_t> seeds;
};

struct SeedRow {
  std::uint64_t seed = 0;
  MetricsReport model;
  MetricsReport mean;
  MetricsReport knn;
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation across seeds
};

struct ScenarioResult {
  Scenario scenario;
  std::vector<SeedRow> rows;
  Summary mae, rmse, mre;
};

Summary summarize(std::span<const double> values);

/// Trains and evaluates one model per (scenario, seed). The seed sets both
/// the test mask and the training seed.
std::vector<ScenarioResult> masking_scenarios(const data::Dataset& dataset, const ExperimentConfig& config,
                                              std::span<const Scenario> scenarios);

/// key=value lines, one metric per line, each prefixed with `prefix`.
void write_report(const MetricsReport& report, const std::string& prefix, std::ostream& out);
/// Sweep table with columns scenario,seed,mae,rmse,mre.
void write_sweep_table(std::span<const ScenarioResult> results, std::ostream& out);

}  // namespace darkfarseer::eval

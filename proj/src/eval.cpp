#include "darkfarseer/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace darkfarseer::eval {

void MetricsAccumulator::add(double prediction, double target) {
  const double e = prediction - target;
  abs_ += std::abs(e);
  sq_ += e * e;
  target_abs_ += std::abs(target);
  ++n_;
}

void MetricsAccumulator::add(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size()) throw std::invalid_argument("metrics: size mismatch");
  for (std::size_t i = 0; i < predictions.size(); ++i) add(predictions[i], targets[i]);
}

MetricsReport MetricsAccumulator::report() const {
  if (n_ == 0) throw std::invalid_argument("metrics: nothing to evaluate");
  MetricsReport r;
  r.n_evaluated = n_;
  r.mae = abs_ / static_cast<double>(n_);
  r.rmse = std::sqrt(sq_ / static_cast<double>(n_));
  if (target_abs_ > 0.0) r.mre = abs_ / target_abs_;
  return r;
}

MetricsReport metrics(std::span<const double> predictions, std::span<const double> targets) {
  MetricsAccumulator acc;
  acc.add(predictions, targets);
  return acc.report();
}

// ---------------------------------------------------------------------------
// baselines

Predictions baseline_mean(const SeriesWindow& window) {
  const auto observed = window.observed_nodes();
  if (observed.empty()) throw std::invalid_argument("baseline_mean: no observed nodes");
  const std::size_t p = window.window_length();
  std::vector<double> step_mean(p, 0.0);
  for (std::size_t t = 0; t < p; ++t) {
    for (auto v : observed) step_mean[t] += window(v, t);
    step_mean[t] /= static_cast<double>(observed.size());
  }
  Predictions out;
  out.window_length = p;
  out.virtual_nodes = window.unobserved_nodes();
  for (std::size_t k = 0; k < out.virtual_nodes.size(); ++k) out.values.insert(out.values.end(), step_mean.begin(), step_mean.end());
  return out;
}

Predictions baseline_knn(const SeriesWindow& window, const graphs::Adjacency& adjacency, std::size_t k) {
  if (k == 0) throw std::invalid_argument("baseline_knn: k must be at least 1");
  if (adjacency.size() != window.n_nodes()) throw std::invalid_argument("baseline_knn: graph/window size mismatch");
  const std::size_t p = window.window_length();
  Predictions out;
  out.window_length = p;
  out.virtual_nodes = window.unobserved_nodes();
  std::optional<Predictions> fallback;
  for (std::size_t r = 0; r < out.virtual_nodes.size(); ++r) {
    const std::size_t i = out.virtual_nodes[r];
    std::vector<std::pair<double, std::size_t>> cand;
    for (auto j : adjacency.neighbors(i)) {
      if (window.observed(j)) cand.emplace_back(-adjacency(i, j), j);
    }
    if (cand.empty()) {
      if (!fallback) fallback = baseline_mean(window);
      out.values.insert(out.values.end(), fallback->values.begin() + static_cast<std::ptrdiff_t>(r * p),
                        fallback->values.begin() + static_cast<std::ptrdiff_t>((r + 1) * p));
      continue;
    }
    std::sort(cand.begin(), cand.end());
    cand.resize(std::min(k, cand.size()));
    double total = 0.0;
    for (const auto& c : cand) total += -c.first;
    for (std::size_t t = 0; t < p; ++t) {
      double v = 0.0;
      for (const auto& [negw, j] : cand) v += -negw * window(j, t);
      out.values.push_back(v / total);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// experiments

graphs::SensorGraph prepare_graph(const graphs::SensorGraph& graph, const ExperimentConfig& config) {
  if (graph.normalized()) return graph;
  return graphs::normalize_adjacency(graph, config.sigma_dist, config.epsilon, config.threshold_mode);
}

training::MaskSpec test_mask(std::size_t n_nodes, training::Ratio ratio, std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x7e57u};
  std::mt19937_64 rng(seq);
  return training::sample_decrement_mask(n_nodes, ratio, rng);
}

Evaluation evaluate(const data::Dataset& dataset, const graphs::SensorGraph& prepared,
                    const training::TrainedModel& model, const training::MaskSpec& mask, std::size_t begin,
                    std::size_t end, std::size_t knn_k) {
  const std::size_t n = dataset.n_nodes();
  if (prepared.n_nodes() != n || mask.n_nodes() != n) {
    throw std::invalid_argument("evaluate: dataset has " + std::to_string(n) + " nodes, graph " +
                                std::to_string(prepared.n_nodes()) + ", mask " + std::to_string(mask.n_nodes()));
  }
  const std::size_t p = model.config.window;
  end = std::min(end, dataset.n_steps());
  const training::GraphContext context(prepared.adjacency(), model.config.mu);
  const auto observed = mask.observed_mask();
  MetricsAccumulator m_model, m_mean, m_knn;
  for (std::size_t s = begin; s + p <= end; s += p) {
    const SeriesWindow truth = SeriesWindow::from_series(dataset.readings, s, p, std::vector<bool>(n, true));
    const SeriesWindow visible = truth.with_mask(observed);
    const auto inf = training::infer(visible, context, model);
    const auto mean = baseline_mean(visible);
    const auto knn = baseline_knn(visible, prepared.adjacency(), knn_k);
    for (std::size_t k = 0; k < mask.virtual_nodes.size(); ++k) {
      const std::size_t v = mask.virtual_nodes[k];
      for (std::size_t t = 0; t < p; ++t) {
        m_model.add(inf(k, t), truth(v, t));
        m_mean.add(mean(k, t), truth(v, t));
        m_knn.add(knn(k, t), truth(v, t));
      }
    }
  }
  if (m_model.size() == 0) throw std::invalid_argument("evaluate: fewer rows than one window");
  return {m_model.report(), m_mean.report(), m_knn.report()};
}

ExperimentResult run_experiment(const data::Dataset& dataset, const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  config.train.validate();
  dataset.validate(config.train.window);
  const graphs::SensorGraph prepared = prepare_graph(dataset.graph, config);
  ExperimentResult result;
  result.mask = test_mask(dataset.n_nodes(), config.train.ratio, config.train.seed);
  const data::Splits splits = data::split_and_normalize(dataset.readings, config.split, result.mask);

  // The model only ever sees the observed nodes and the edges among them.
  const auto& keep = result.mask.observed_nodes;
  const graphs::Adjacency working = graphs::induced(prepared.adjacency(), keep);
  training::TrainingData data{splits.train.columns(keep), splits.validation.columns(keep)};
  result.trained = training::train(std::move(data), working, config.train, splits.stats);

  const data::SplitBounds bounds{splits.train_end, splits.validation_end, dataset.n_steps()};
  const auto [vb, ve] = data::part_range(bounds, data::Part::validation);
  if (ve - vb >= config.train.window) {
    result.validation = evaluate(dataset, prepared, result.trained, result.mask, vb, ve, config.knn_k);
  }
  const auto [tb, te] = data::part_range(bounds, data::Part::test);
  const Evaluation ev = evaluate(dataset, prepared, result.trained, result.mask, tb, te, config.knn_k);
  result.model = ev.model;
  result.mean = ev.mean;
  result.knn = ev.knn;
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

Summary summarize(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("summarize: no values");
  Summary s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  for (double v : values) s.std += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(s.std / static_cast<double>(values.size()));
  return s;
}

std::vector<ScenarioResult> masking_scenarios(const data::Dataset& dataset, const ExperimentConfig& config,
                                              std::span<const Scenario> scenarios) {
  std::vector<ScenarioResult> out;
  for (const auto& sc : scenarios) {
    if (sc.seeds.empty()) throw std::invalid_argument("scenario '" + sc.name + "' has no seeds");
    ScenarioResult res;
    res.scenario = sc;
    std::vector<double> mae, rmse, mre;
    for (auto seed : sc.seeds) {
      ExperimentConfig c = config;
      c.train.ratio = sc.ratio;
      c.train.seed = seed;
      const ExperimentResult r = run_experiment(dataset, c);
      res.rows.push_back({seed, r.model, r.mean, r.knn});
      mae.push_back(r.model.mae);
      rmse.push_back(r.model.rmse);
      mre.push_back(r.model.mre.value_or(std::nan("")));
    }
    res.mae = summarize(mae);
    res.rmse = summarize(rmse);
    res.mre = summarize(mre);
    out.push_back(std::move(res));
  }
  return out;
}

void write_report(const MetricsReport& report, const std::string& prefix, std::ostream& out) {
  out << prefix << "mae=" << training::format_double(report.mae) << '\n';
  out << prefix << "rmse=" << training::format_double(report.rmse) << '\n';
  out << prefix << "mre=" << (report.mre ? training::format_double(*report.mre) : std::string("undefined")) << '\n';
  out << prefix << "n_evaluated=" << report.n_evaluated << '\n';
}

void write_sweep_table(std::span<const ScenarioResult> results, std::ostream& out) {
  out << "scenario,seed,mae,rmse,mre\n";
  for (const auto& r : results) {
    for (const auto& row : r.rows) {
      out << r.scenario.name << ',' << row.seed << ',' << training::format_double(row.model.mae) << ','
          << training::format_double(row.model.rmse) << ','
          << (row.model.mre ? training::format_double(*row.model.mre) : std::string("undefined")) << '\n';
    }
  }
}

}  // namespace darkfarseer::eval

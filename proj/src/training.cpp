#include "darkfarseer/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "darkfarseer/rscl.hpp"

namespace darkfarseer::training {

namespace {

constexpr const char* kMagic = "darkfarseer-checkpoint 1";

std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw std::invalid_argument("config key '" + key + "': not an integer: " + text);
  return v;
}

double parse_real(const std::string& key, const std::string& text) {
  try {
    return parse_double(text);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument("config key '" + key + "': not a number: " + text);
  }
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw std::invalid_argument("config key '" + key + "': expected true or false, got " + text);
}

Ratio parse_ratio(const std::string& key, const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("config key '" + key + "': expected o:v, got " + text);
  return {static_cast<std::size_t>(parse_unsigned(key, text.substr(0, colon))),
          static_cast<std::size_t>(parse_unsigned(key, text.substr(colon + 1)))};
}

void require_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(name) + " must lie in [0, 1]");
}

std::vector<std::size_t> block_starts(std::size_t steps, std::size_t p) {
  std::vector<std::size_t> out;
  for (std::size_t s = 0; s + p <= steps; s += p) out.push_back(s);
  return out;
}

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

}  // namespace

std::vector<bool> MaskSpec::observed_mask() const {
  std::vector<bool> mask(n_nodes(), true);
  for (auto v : virtual_nodes) mask.at(v) = false;
  return mask;
}

MaskSpec sample_decrement_mask(std::size_t n_observed, Ratio ratio, std::mt19937_64& rng) {
  if (ratio.observed == 0 || ratio.virtual_ == 0) throw std::invalid_argument("ratio terms must be positive");
  const std::size_t sum = ratio.observed + ratio.virtual_;
  if (n_observed < sum) {
    throw std::invalid_argument("decrement mask needs at least " + std::to_string(sum) + " observed nodes, got " +
                                std::to_string(n_observed));
  }
  const std::size_t n_virtual = n_observed * ratio.virtual_ / sum;
  std::vector<std::size_t> order(n_observed);
  std::iota(order.begin(), order.end(), 0);
  // Partial Fisher-Yates: the first n_virtual slots are a uniform sample.
  for (std::size_t i = 0; i < n_virtual; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n_observed - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_virtual));
  return make_mask(n_observed, std::move(chosen), ratio);
}

MaskSpec make_mask(std::size_t n_nodes, std::vector<std::size_t> virtual_nodes, Ratio ratio) {
  std::sort(virtual_nodes.begin(), virtual_nodes.end());
  if (std::adjacent_find(virtual_nodes.begin(), virtual_nodes.end()) != virtual_nodes.end()) {
    throw std::invalid_argument("duplicate virtual node");
  }
  if (!virtual_nodes.empty() && virtual_nodes.back() >= n_nodes) throw std::out_of_range("virtual node out of range");
  MaskSpec m;
  m.ratio = ratio;
  m.virtual_nodes = std::move(virtual_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    if (!std::binary_search(m.virtual_nodes.begin(), m.virtual_nodes.end(), i)) m.observed_nodes.push_back(i);
  }
  return m;
}

// ---------------------------------------------------------------------------
// config

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

double parse_double(const std::string& text) {
  double v = 0.0;
  const auto* begin = text.data();
  const auto* end = begin + text.size();
  if (begin != end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || begin == end) throw std::invalid_argument("not a number: " + text);
  return v;
}

void TrainConfig::validate() const {
  if (!(eta >= 0.0) || !std::isfinite(eta)) throw std::invalid_argument("eta must be finite and non-negative");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  if (window < 2) throw std::invalid_argument("window must be at least 2");
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be positive");
  if (!(mu >= 0.0)) throw std::invalid_argument("mu must be non-negative");
  require_probability(p_t, "p_t");
  require_probability(p_s, "p_s");
  if (hidden_dim == 0) throw std::invalid_argument("hidden_dim must be positive");
  if (moving_average_kernel == 0) throw std::invalid_argument("moving_average_kernel must be positive");
  if (ratio.observed == 0 || ratio.virtual_ == 0) throw std::invalid_argument("ratio terms must be positive");
  denoise_config().validate();
}

std::vector<std::pair<std::string, std::string>> TrainConfig::entries() const {
  auto b = [](bool x) { return std::string(x ? "true" : "false"); };
  return {
      {"eta", format_double(eta)},
      {"learning_rate", format_double(learning_rate)},
      {"epochs", std::to_string(epochs)},
      {"batch_size", std::to_string(batch_size)},
      {"window", std::to_string(window)},
      {"tau", format_double(tau)},
      {"mu", format_double(mu)},
      {"beta", format_double(beta)},
      {"omega", format_double(omega)},
      {"p_t", format_double(p_t)},
      {"p_s", format_double(p_s)},
      {"seed", std::to_string(seed)},
      {"moving_average_kernel", std::to_string(moving_average_kernel)},
      {"hidden_dim", std::to_string(hidden_dim)},
      {"ratio", std::to_string(ratio.observed) + ":" + std::to_string(ratio.virtual_)},
      {"patience", std::to_string(patience)},
      {"rscl", b(rscl)},
      {"sgds", b(sgds)},
      {"sgds_threshold", format_double(sgds_threshold)},
      {"observed_senders", b(observed_senders)},
  };
}

void TrainConfig::set(const std::string& key, const std::string& value) {
  auto sz = [&] { return static_cast<std::size_t>(parse_unsigned(key, value)); };
  if (key == "eta") eta = parse_real(key, value);
  else if (key == "learning_rate") learning_rate = parse_real(key, value);
  else if (key == "epochs") epochs = sz();
  else if (key == "batch_size") batch_size = sz();
  else if (key == "window") window = sz();
  else if (key == "tau") tau = parse_real(key, value);
  else if (key == "mu") mu = parse_real(key, value);
  else if (key == "beta") beta = parse_real(key, value);
  else if (key == "omega") omega = parse_real(key, value);
  else if (key == "p_t") p_t = parse_real(key, value);
  else if (key == "p_s") p_s = parse_real(key, value);
  else if (key == "seed") seed = parse_unsigned(key, value);
  else if (key == "moving_average_kernel") moving_average_kernel = sz();
  else if (key == "hidden_dim") hidden_dim = sz();
  else if (key == "ratio") ratio = parse_ratio(key, value);
  else if (key == "patience") patience = sz();
  else if (key == "rscl") rscl = parse_bool(key, value);
  else if (key == "sgds") sgds = parse_bool(key, value);
  else if (key == "sgds_threshold") sgds_threshold = parse_real(key, value);
  else if (key == "observed_senders") observed_senders = parse_bool(key, value);
  else throw std::invalid_argument("unknown config key '" + key + "'");
}

// ---------------------------------------------------------------------------
// loss and optimizer

Tensor joint_loss(const Tensor& predictions, const SeriesWindow& targets, const MaskSpec& mask, const Tensor& l_rs,
                  double eta) {
  if (mask.virtual_nodes.empty()) throw std::invalid_argument("joint_loss: no virtual nodes");
  if (!(eta >= 0.0)) throw std::invalid_argument("joint_loss: eta must be non-negative");
  const std::size_t n = targets.n_nodes(), p = targets.window_length();
  if (predictions.shape() != ad::Shape{n, p}) {
    throw ad::ShapeError("joint_loss: predictions " + ad::to_string(predictions.shape()) + " vs targets [" +
                         std::to_string(n) + ", " + std::to_string(p) + "]");
  }
  const std::size_t u = mask.virtual_nodes.size();
  std::vector<double> truth;
  truth.reserve(u * p);
  for (auto v : mask.virtual_nodes) {
    if (v >= n) throw std::out_of_range("joint_loss: virtual node out of range");
    for (std::size_t t = 0; t < p; ++t) truth.push_back(targets(v, t));
  }
  const Tensor diff = ad::gather_rows(predictions, mask.virtual_nodes) - Tensor::from({u, p}, std::move(truth));
  const Tensor mse = ad::scale(ad::sum_all(diff * diff), 1.0 / static_cast<double>(u * p));
  if (eta == 0.0) return mse;
  return mse + ad::scale(l_rs, eta);
}

Adam::Adam(std::vector<Tensor*> params, double learning_rate, double beta1, double beta2, double epsilon)
    : params_(std::move(params)), lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(epsilon) {
  for (auto* p : params_) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

void Adam::step(const ad::Gradients& grads) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    const std::vector<double> g = grads.of(*params_[k]);
    auto w = params_[k]->mutable_data();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = b1_ * m[i] + (1.0 - b1_) * g[i];
      v[i] = b2_ * v[i] + (1.0 - b2_) * g[i] * g[i];
      w[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

sets::SetsParams clone(const sets::SetsParams& params) {
  sets::SetsParams out = params;
  auto dst = out.named();
  const auto src = params.named();
  for (std::size_t k = 0; k < dst.size(); ++k) {
    const Tensor& s = *src[k].second;
    *dst[k].second = Tensor::from(s.shape(), std::vector<double>(s.data().begin(), s.data().end()), true);
  }
  return out;
}

// ---------------------------------------------------------------------------
// forward passes

GraphContext::GraphContext(graphs::Adjacency adj, double mu)
    : adjacency(std::move(adj)), bccs(graphs::find_bccs(adjacency, mu)), density(graphs::density(adjacency)) {}

namespace {

sets::SetsOutput forward_main(const SeriesWindow& masked, const GraphContext& graph, const sets::SetsParams& params,
                              const TrainConfig& config, bool* denoised) {
  sets::SetsOutput out = sets::sets_forward(masked, graph.adjacency, params, nullptr, config.senders());
  const auto virtual_nodes = masked.unobserved_nodes();
  if (config.sgds && graph.density > config.sgds_threshold && !virtual_nodes.empty()) {
    const Tensor h = out.hidden.detach();
    rscl::PrototypeSet protos;
    if (!graph.bccs.empty()) protos = rscl::compute_prototypes(h, graph.bccs);
    const sgds::NodePrototypes nodes(h, protos, graph.bccs.membership);
    const auto drop = sgds::denoise(graph.adjacency, nodes, virtual_nodes, config.denoise_config(), graph.density);
    out = sets::reencode(std::move(out), drop.adjacency, params, masked, config.senders());
    if (denoised) *denoised = true;
  }
  return out;
}

}  // namespace

Tensor predict(const SeriesWindow& masked, const GraphContext& graph, const sets::SetsParams& params,
               const TrainConfig& config) {
  return forward_main(masked, graph, params, config, nullptr).predictions;
}

WindowLoss window_loss(const SeriesWindow& truth, const MaskSpec& mask, const GraphContext& graph,
                       const sets::SetsParams& params, const TrainConfig& config, std::mt19937_64& augment_rng) {
  const SeriesWindow masked = truth.with_mask(mask.observed_mask());
  WindowLoss out;
  const sets::SetsOutput main = forward_main(masked, graph, params, config, &out.parts.denoised);

  Tensor l_rs = Tensor::scalar(0.0);
  if (config.rscl) {
    const auto aug = rscl::augment_temporal(masked, config.p_t, augment_rng);
    const auto aug_adj = rscl::augment_topology(graph.adjacency, config.p_s, augment_rng);
    const Tensor h_aug = sets::sets_forward(aug.window, aug_adj, params, nullptr, config.senders()).hidden;
    l_rs = rscl::rscl_loss(main.hidden, h_aug, graph.bccs, mask.virtual_nodes, config.tau).loss;
  }
  out.loss = joint_loss(main.predictions, truth, mask, l_rs, config.eta);
  out.parts.total = out.loss.item();
  out.parts.contrastive = l_rs.item();
  out.parts.mse = out.parts.total - config.eta * out.parts.contrastive;
  return out;
}

// ---------------------------------------------------------------------------
// trainer

Trainer::Trainer(TrainingData data, graphs::Adjacency working_graph, TrainConfig config)
    : data_(std::move(data)),
      graph_(std::move(working_graph), config.mu),
      config_(std::move(config)),
      rng_(config_.seed),
      augment_rng_(derived_rng(config_.seed, 1)),
      params_(),
      optimizer_({}, 1.0) {
  config_.validate();
  const std::size_t n = graph_.adjacency.size();
  if (data_.train.nodes() != n || data_.validation.nodes() != n) {
    throw std::invalid_argument("training data has " + std::to_string(data_.train.nodes()) +
                                " nodes but the working graph has " + std::to_string(n));
  }
  if (data_.train.steps() < config_.window) throw std::invalid_argument("training series shorter than one window");
  params_ = sets::SetsParams::init(config_.window, config_.hidden_dim, config_.moving_average_kernel, rng_);
  std::vector<Tensor*> ptrs;
  for (auto& [name, t] : params_.named()) ptrs.push_back(t);
  optimizer_ = Adam(std::move(ptrs), config_.learning_rate);
  auto vrng = derived_rng(config_.seed, 2);
  for (std::size_t k = 0; k < kValidationMasks; ++k) validation_masks_.push_back(sample_decrement_mask(n, config_.ratio, vrng));
}

std::vector<std::size_t> Trainer::train_window_starts() const { return block_starts(data_.train.steps(), config_.window); }

StepLoss Trainer::step(std::span<const std::size_t> starts) {
  const MaskSpec mask = sample_decrement_mask(graph_.adjacency.size(), config_.ratio, rng_);
  return step(starts, mask);
}

StepLoss Trainer::step(std::span<const std::size_t> starts, const MaskSpec& mask) {
  if (starts.empty()) throw std::invalid_argument("step: empty batch");
  ++steps_;
  StepLoss mean;
  Tensor total;
  try {
    for (std::size_t b = 0; b < starts.size(); ++b) {
      const SeriesWindow truth =
          SeriesWindow::from_series(data_.train, starts[b], config_.window, std::vector<bool>(mask.n_nodes(), true));
      WindowLoss wl = window_loss(truth, mask, graph_, params_, config_, augment_rng_);
      total = b == 0 ? wl.loss : total + wl.loss;
      mean.mse += wl.parts.mse;
      mean.contrastive += wl.parts.contrastive;
      mean.denoised = mean.denoised || wl.parts.denoised;
    }
  } catch (const ad::NonFiniteError& e) {
    throw DivergenceError("non-finite value at training step " + std::to_string(steps_) + ": " + e.what());
  }
  const double inv = 1.0 / static_cast<double>(starts.size());
  const Tensor loss = ad::scale(total, inv);
  mean.total = loss.item();
  mean.mse *= inv;
  mean.contrastive *= inv;
  if (!std::isfinite(mean.total)) {
    throw DivergenceError("non-finite loss at training step " + std::to_string(steps_));
  }
  optimizer_.step(ad::backward(loss));
  history_.push_back(mean.total);
  return mean;
}

double Trainer::validation_mae(const sets::SetsParams& params) const {
  const auto starts = block_starts(data_.validation.steps(), config_.window);
  if (starts.empty()) return std::numeric_limits<double>::quiet_NaN();
  double err = 0.0;
  std::size_t count = 0;
  for (const auto& mask : validation_masks_) {
    const auto observed = mask.observed_mask();
    for (auto s : starts) {
      const SeriesWindow truth = SeriesWindow::from_series(data_.validation, s, config_.window,
                                                           std::vector<bool>(observed.size(), true));
      const Tensor pred = predict(truth.with_mask(observed), graph_, params, config_);
      for (auto v : mask.virtual_nodes) {
        for (std::size_t t = 0; t < config_.window; ++t) {
          err += std::abs(pred[v * config_.window + t] - truth(v, t));
          ++count;
        }
      }
    }
  }
  return err / static_cast<double>(count);
}

void Trainer::fit() {
  std::vector<std::size_t> starts = train_window_starts();
  sets::SetsParams best = clone(params_);
  best_mae_ = validation_mae(params_);
  const bool can_stop = std::isfinite(best_mae_);
  std::size_t stale = 0;
  for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
    std::shuffle(starts.begin(), starts.end(), rng_);
    for (std::size_t b = 0; b < starts.size(); b += config_.batch_size) {
      const std::size_t e = std::min(starts.size(), b + config_.batch_size);
      step(std::span<const std::size_t>(starts.data() + b, e - b));
    }
    ++epochs_run_;
    if (!can_stop) continue;
    const double mae = validation_mae(params_);
    if (mae < best_mae_) {
      best_mae_ = mae;
      best = clone(params_);
      stale = 0;
    } else if (++stale >= config_.patience) {
      break;
    }
  }
  if (can_stop) {
    auto dst = params_.named();
    const auto src = best.named();
    for (std::size_t k = 0; k < dst.size(); ++k) *dst[k].second = *src[k].second;
  }
}

TrainedModel train(TrainingData data, const graphs::Adjacency& working_graph, const TrainConfig& config,
                   NormStats stats) {
  if (!(stats.std > 0.0)) throw std::invalid_argument("normalization std must be positive");
  Trainer trainer(std::move(data), working_graph, config);
  trainer.fit();
  TrainedModel model;
  model.params = clone(trainer.params());
  model.stats = stats;
  model.config = config;
  model.epochs_run = trainer.epochs_run();
  model.best_validation_mae = trainer.best_validation_mae();
  return model;
}

// ---------------------------------------------------------------------------
// inference

Inference infer(const SeriesWindow& readings, const graphs::Adjacency& graph, const TrainedModel& model) {
  return infer(readings, GraphContext(graph, model.config.mu), model);
}

Inference infer(const SeriesWindow& readings, const GraphContext& graph, const TrainedModel& model) {
  const std::size_t n = readings.n_nodes(), p = readings.window_length();
  if (graph.adjacency.size() != n) {
    throw std::invalid_argument("infer: graph has " + std::to_string(graph.adjacency.size()) +
                                " nodes but the window has " + std::to_string(n));
  }
  if (p != model.params.window_length) {
    throw std::invalid_argument("infer: window length " + std::to_string(p) + " but the model expects " +
                                std::to_string(model.params.window_length));
  }
  std::vector<double> z(readings.values());
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t t = 0; t < p; ++t) z[v * p + t] = readings.observed(v) ? model.stats.normalize(z[v * p + t]) : 0.0;
  }
  const SeriesWindow normalized(n, p, std::move(z), readings.observed_mask());
  const Tensor pred = predict(normalized, graph, model.params, model.config);
  Inference out;
  out.window_length = p;
  out.virtual_nodes = readings.unobserved_nodes();
  for (auto v : out.virtual_nodes) {
    for (std::size_t t = 0; t < p; ++t) out.values.push_back(model.stats.denormalize(pred[v * p + t]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// checkpoint

void save_checkpoint(const TrainedModel& model, std::ostream& out) {
  out << kMagic << '\n';
  for (const auto& [k, v] : model.config.entries()) out << "config " << k << '=' << v << '\n';
  out << "stats " << format_double(model.stats.mean) << ' ' << format_double(model.stats.std) << '\n';
  out << "epochs_run " << model.epochs_run << '\n';
  out << "best_validation_mae " << format_double(model.best_validation_mae) << '\n';
  for (const auto& [name, t] : model.params.named()) {
    out << "tensor " << name << ' ' << t->rank();
    for (auto d : t->shape()) out << ' ' << d;
    out << '\n';
    const auto data = t->data();
    for (std::size_t i = 0; i < data.size(); ++i) out << (i ? " " : "") << format_double(data[i]);
    out << '\n';
  }
  out << "end\n";
  if (!out) throw CheckpointError("failed to write checkpoint");
}

void save_checkpoint(const TrainedModel& model, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw CheckpointError("cannot open " + path.string() + " for writing");
  save_checkpoint(model, f);
}

TrainedModel load_checkpoint(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> std::string& {
    if (!std::getline(in, line)) throw CheckpointError("checkpoint truncated after line " + std::to_string(line_no));
    ++line_no;
    return line;
  };
  auto fail = [&](const std::string& what) -> CheckpointError {
    return CheckpointError("checkpoint line " + std::to_string(line_no) + ": " + what);
  };

  if (next() != kMagic) throw fail("not a checkpoint");
  TrainedModel model;
  std::vector<std::pair<std::string, Tensor>> tensors;
  try {
    while (next() != "end") {
      std::istringstream ls(line);
      std::string tag;
      ls >> tag;
      if (tag == "config") {
        std::string kv;
        ls >> kv;
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw fail("malformed config entry");
        model.config.set(kv.substr(0, eq), kv.substr(eq + 1));
      } else if (tag == "stats") {
        std::string m, s;
        ls >> m >> s;
        model.stats = {parse_double(m), parse_double(s)};
      } else if (tag == "epochs_run") {
        ls >> model.epochs_run;
      } else if (tag == "best_validation_mae") {
        std::string v;
        ls >> v;
        model.best_validation_mae = parse_double(v);
      } else if (tag == "tensor") {
        std::string name;
        std::size_t rank = 0;
        ls >> name >> rank;
        ad::Shape shape(rank);
        for (auto& d : shape) ls >> d;
        if (!ls) throw fail("malformed tensor header");
        std::istringstream vs(next());
        std::vector<double> values;
        std::string tok;
        while (vs >> tok) values.push_back(parse_double(tok));
        if (values.size() != ad::shape_size(shape)) throw fail("tensor '" + name + "' has the wrong number of values");
        tensors.emplace_back(name, Tensor::from(shape, std::move(values), true));
      } else {
        throw fail("unknown record '" + tag + "'");
      }
    }
  } catch (const std::invalid_argument& e) {
    throw fail(e.what());
  }

  model.config.validate();
  model.params = sets::SetsParams::zeros(model.config.window, model.config.hidden_dim,
                                         model.config.moving_average_kernel);
  auto slots = model.params.named();
  if (tensors.size() != slots.size()) throw CheckpointError("checkpoint has the wrong number of tensors");
  for (std::size_t k = 0; k < slots.size(); ++k) {
    if (tensors[k].first != slots[k].first) {
      throw CheckpointError("expected tensor '" + slots[k].first + "', found '" + tensors[k].first + "'");
    }
    *slots[k].second = tensors[k].second;
  }
  model.params.validate();
  if (!(model.stats.std > 0.0)) throw CheckpointError("checkpoint normalization std must be positive");
  return model;
}

TrainedModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw CheckpointError("cannot open checkpoint " + path.string());
  return load_checkpoint(f);
}

}  // namespace darkfarseer::training

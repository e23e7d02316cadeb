#include "commands.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "darkfarseer/data.hpp"
#include "darkfarseer/eval.hpp"
#include "darkfarseer/graphs.hpp"

namespace darkfarseer::cli {

namespace fs = std::filesystem;
using training::format_double;

namespace {

struct Shared {
  std::uint64_t seed = 0;
  std::string out = "out";
};

struct GraphOptions {
  double sigma = 1.0;
  std::string epsilon = "inf";
  std::string mode = "keep_below";

  double epsilon_value() const { return training::parse_double(epsilon); }
  graphs::ThresholdMode mode_value() const {
    if (mode == "keep_below") return graphs::ThresholdMode::keep_below;
    if (mode == "keep_above") return graphs::ThresholdMode::keep_above;
    throw std::invalid_argument("threshold mode must be keep_below or keep_above, got " + mode);
  }
};

struct DataOptions {
  bool synthetic = false;
  std::size_t nodes = 24;
  std::size_t steps = 2880;
  std::string process = "diffusion";
  std::uint64_t data_seed = 0;
  std::string readings;
  std::string graph;
  std::string graph_format = "edge_list";
};

struct TrainOptions {
  training::TrainConfig config;
  std::string ratio = "3:1";
  bool no_sgds = false;
  bool no_rscl = false;
  bool all_senders = false;
  std::size_t knn_k = 3;
};

data::GraphFormat parse_format(const std::string& s) {
  if (s == "edge_list") return data::GraphFormat::edge_list;
  if (s == "coordinates") return data::GraphFormat::coordinates;
  if (s == "weighted") return data::GraphFormat::weighted_edge_list;
  throw std::invalid_argument("graph format must be edge_list, coordinates or weighted, got " + s);
}

void add_graph_options(CLI::App* cmd, GraphOptions& g) {
  cmd->add_option("--sigma", g.sigma, "Kernel normaliser sigma")->capture_default_str();
  cmd->add_option("--epsilon", g.epsilon, "Weight threshold (inf keeps every edge)")->capture_default_str();
  cmd->add_option("--mode", g.mode, "keep_below or keep_above")->capture_default_str();
}

void add_data_options(CLI::App* cmd, DataOptions& d) {
  cmd->add_flag("--synthetic", d.synthetic, "Use a generated dataset");
  cmd->add_option("--nodes", d.nodes, "Synthetic node count")->capture_default_str();
  cmd->add_option("--steps", d.steps, "Synthetic step count")->capture_default_str();
  cmd->add_option("--process", d.process, "diffusion or seasonal")->capture_default_str();
  cmd->add_option("--data-seed", d.data_seed, "Seed of the synthetic dataset")->capture_default_str();
  cmd->add_option("--readings", d.readings, "Readings table (rows = steps, columns = nodes)");
  cmd->add_option("--graph", d.graph, "Graph file");
  cmd->add_option("--graph-format", d.graph_format, "edge_list, coordinates or weighted")->capture_default_str();
}

void add_train_options(CLI::App* cmd, TrainOptions& t) {
  auto& c = t.config;
  cmd->add_option("--eta", c.eta, "Contrastive loss weight")->capture_default_str();
  cmd->add_option("--lr", c.learning_rate, "Learning rate")->capture_default_str();
  cmd->add_option("--epochs", c.epochs, "Maximum epochs")->capture_default_str();
  cmd->add_option("--batch-size", c.batch_size, "Windows per step")->capture_default_str();
  cmd->add_option("--window", c.window, "Window length p")->capture_default_str();
  cmd->add_option("--tau", c.tau, "InfoNCE temperature")->capture_default_str();
  cmd->add_option("--mu", c.mu, "BCC edge threshold")->capture_default_str();
  cmd->add_option("--beta", c.beta, "Share of virtual-node edges to downweight")->capture_default_str();
  cmd->add_option("--omega", c.omega, "Downweighted edge value")->capture_default_str();
  cmd->add_option("--p-t", c.p_t, "Temporal augmentation drop rate")->capture_default_str();
  cmd->add_option("--p-s", c.p_s, "Topology augmentation edge rate")->capture_default_str();
  cmd->add_option("--kernel", c.moving_average_kernel, "Moving-average length")->capture_default_str();
  cmd->add_option("--hidden-dim", c.hidden_dim, "Hidden dimension phi")->capture_default_str();
  cmd->add_option("--patience", c.patience, "Early-stopping patience in epochs")->capture_default_str();
  cmd->add_option("--sgds-threshold", c.sgds_threshold, "Density above which SGDs runs")->capture_default_str();
  cmd->add_option("--ratio", t.ratio, "Observed:virtual ratio, e.g. 3:1 or 25%")->capture_default_str();
  cmd->add_flag("--no-sgds", t.no_sgds, "Disable graph denoising");
  cmd->add_flag("--no-rscl", t.no_rscl, "Skip the contrastive branch entirely");
  cmd->add_flag("--all-senders", t.all_senders, "Let zero-filled virtual rows send messages");
  cmd->add_option("--knn-k", t.knn_k, "Neighbours used by the KNN baseline")->capture_default_str();
}

data::Dataset load_data(const DataOptions& d, const GraphOptions& g) {
  if (d.synthetic) {
    if (!d.readings.empty() || !d.graph.empty()) throw std::invalid_argument("--synthetic excludes --readings/--graph");
    data::Process p;
    if (d.process == "diffusion") p = data::Process::diffusion;
    else if (d.process == "seasonal") p = data::Process::seasonal_field;
    else throw std::invalid_argument("process must be diffusion or seasonal, got " + d.process);
    return data::generate_synthetic(d.nodes, d.steps, p, d.data_seed);
  }
  if (d.readings.empty() || d.graph.empty()) throw std::invalid_argument("give --synthetic or both --readings and --graph");
  return data::load_dataset(d.readings, d.graph, parse_format(d.graph_format), g.sigma, g.epsilon_value());
}

eval::ExperimentConfig experiment_config(const TrainOptions& t, const GraphOptions& g, std::uint64_t seed) {
  eval::ExperimentConfig e;
  e.train = t.config;
  e.train.seed = seed;
  e.train.ratio = parse_ratio(t.ratio);
  e.train.sgds = !t.no_sgds;
  e.train.rscl = !t.no_rscl;
  e.train.observed_senders = !t.all_senders;
  e.train.validate();
  e.sigma_dist = g.sigma;
  e.epsilon = g.epsilon_value();
  e.threshold_mode = g.mode_value();
  e.knn_k = t.knn_k;
  return e;
}

fs::path prepare_out(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << content;
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

void write_manifest(const fs::path& dir, const CLI::App& app, const std::string& command) {
  std::ostringstream m;
  m << "# command: " << command << '\n';
  // Only top-level and this command's options, so the file reloads via --config.
  std::istringstream all(app.config_to_str(true, false));
  for (std::string line; std::getline(all, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq);
    if (line.substr(eq + 1) == "\"\"") continue;
    if (key.find('.') == std::string::npos || key.rfind(command + ".", 0) == 0) m << line << '\n';
  }
  write_file(dir / "manifest.txt", m.str());
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string bcc_report(const graphs::SensorGraph& graph, double mu) {
  const auto bccs = graphs::find_bccs(graph, mu);
  std::ostringstream r;
  r << "n_nodes=" << graph.n_nodes() << '\n';
  r << "mu=" << format_double(mu) << '\n';
  r << "components=" << bccs.size() << '\n';
  for (std::size_t c = 0; c < bccs.size(); ++c) {
    r << "component " << c << ":";
    for (auto v : bccs.components[c]) r << ' ' << v;
    r << '\n';
  }
  const auto art = bccs.articulation_nodes();
  r << "articulation_nodes=" << art.size() << '\n';
  r << "articulation:";
  for (auto v : art) r << ' ' << v;
  r << '\n';
  for (std::size_t v = 0; v < bccs.membership.size(); ++v) r << "membership " << v << '=' << bccs.membership[v].size() << '\n';
  return r.str();
}

std::string evaluation_report(const eval::Evaluation& ev, const std::string& prefix) {
  std::ostringstream r;
  eval::write_report(ev.model, prefix + "model_", r);
  eval::write_report(ev.mean, prefix + "mean_", r);
  eval::write_report(ev.knn, prefix + "knn_", r);
  return r.str();
}

}  // namespace

training::Ratio parse_ratio(const std::string& text) {
  const auto colon = text.find(':');
  if (colon != std::string::npos) {
    training::Ratio r;
    r.observed = static_cast<std::size_t>(std::stoull(text.substr(0, colon)));
    r.virtual_ = static_cast<std::size_t>(std::stoull(text.substr(colon + 1)));
    if (r.observed == 0 || r.virtual_ == 0) throw std::invalid_argument("ratio terms must be positive: " + text);
    return r;
  }
  double share = 0.0;
  if (!text.empty() && text.back() == '%') {
    share = training::parse_double(text.substr(0, text.size() - 1)) / 100.0;
  } else {
    share = training::parse_double(text);
  }
  if (!(share > 0.0 && share < 1.0)) throw std::invalid_argument("virtual share must lie in (0, 1): " + text);
  // Percentages with at most two decimals reduce to an exact ratio.
  const auto v = static_cast<std::size_t>(std::llround(share * 10000.0));
  const std::size_t o = 10000 - v;
  const std::size_t g = std::gcd(o, v);
  return {o / g, v / g};
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, out, err);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Inductive spatio-temporal kriging experiments", "darkfarseer"};
  app.require_subcommand(1);
  app.allow_config_extras(false);
  app.fallthrough();
  app.set_config("--config", "", "key=value config file; [command] sections hold command options");

  Shared shared;
  app.add_option("--seed", shared.seed, "Random seed")->capture_default_str();
  app.add_option("--out", shared.out, "Output directory")->capture_default_str();

  // make-graph
  auto* mg = app.add_subcommand("make-graph", "Build a normalised adjacency from an edge list or coordinates");
  std::string mg_edges, mg_coords;
  GraphOptions mg_graph;
  mg->add_option("--edges", mg_edges, "Edge list i,j,distance");
  mg->add_option("--coords", mg_coords, "Coordinates node_id,lat,lon");
  add_graph_options(mg, mg_graph);

  // inspect-bcc
  auto* ib = app.add_subcommand("inspect-bcc", "List biconnected components above a weight threshold");
  std::string ib_graph, ib_format = "weighted";
  GraphOptions ib_opts;
  double ib_mu = training::TrainConfig{}.mu;
  ib->add_option("--graph", ib_graph, "Graph file")->required();
  ib->add_option("--graph-format", ib_format, "edge_list, coordinates or weighted")->capture_default_str();
  ib->add_option("--mu", ib_mu, "Edges must weigh more than mu")->capture_default_str();
  add_graph_options(ib, ib_opts);

  // train
  auto* tr = app.add_subcommand("train", "Train a model and report validation and test metrics");
  DataOptions tr_data;
  GraphOptions tr_graph;
  TrainOptions tr_opts;
  add_data_options(tr, tr_data);
  add_graph_options(tr, tr_graph);
  add_train_options(tr, tr_opts);

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on held-out virtual nodes");
  DataOptions ev_data;
  GraphOptions ev_graph;
  std::string ev_checkpoint, ev_ratio, ev_split = "test";
  std::optional<std::uint64_t> ev_mask_seed;
  std::size_t ev_knn = 3;
  ev->add_option("--checkpoint", ev_checkpoint, "Checkpoint written by train")->required();
  ev->add_option("--mask-seed", ev_mask_seed, "Seed of the virtual-node mask (default: the checkpoint seed)");
  ev->add_option("--ratio", ev_ratio, "Observed:virtual ratio (default: the checkpoint ratio)");
  ev->add_option("--split", ev_split, "train, validation or test")->capture_default_str();
  ev->add_option("--knn-k", ev_knn, "Neighbours used by the KNN baseline")->capture_default_str();
  add_data_options(ev, ev_data);
  add_graph_options(ev, ev_graph);

  // sweep
  auto* sw = app.add_subcommand("sweep", "Masking-ratio and parameter sweeps with mean and std over seeds");
  DataOptions sw_data;
  GraphOptions sw_graph;
  TrainOptions sw_opts;
  std::string sw_ratios = "3:1,1:1", sw_seeds = "0,1,2,3", sw_param, sw_values;
  sw->add_option("--ratios", sw_ratios, "Comma-separated ratios")->capture_default_str();
  sw->add_option("--seeds", sw_seeds, "Comma-separated seeds")->capture_default_str();
  sw->add_option("--param", sw_param, "Config key to sweep (e.g. eta, beta, mu)");
  sw->add_option("--values", sw_values, "Comma-separated values for --param");
  add_data_options(sw, sw_data);
  add_graph_options(sw, sw_graph);
  add_train_options(sw, sw_opts);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (mg->parsed()) {
      if (mg_edges.empty() == mg_coords.empty()) throw std::invalid_argument("give exactly one of --edges or --coords");
      graphs::SensorGraph g;
      if (!mg_edges.empty()) {
        const auto list = data::read_edge_list(fs::path(mg_edges));
        g = graphs::normalize_adjacency(graphs::build_pcg(list.n_nodes, list.edges), mg_graph.sigma,
                                        mg_graph.epsilon_value(), mg_graph.mode_value());
      } else {
        g = graphs::build_spg(data::read_coordinates(fs::path(mg_coords)), mg_graph.sigma, mg_graph.epsilon_value(),
                              mg_graph.mode_value());
      }
      const auto dir = prepare_out(shared.out);
      std::ostringstream edges;
      data::write_weighted_edge_list(g, edges);
      write_file(dir / "graph.csv", edges.str());
      std::ostringstream r;
      r << "n_nodes=" << g.n_nodes() << '\n';
      r << "edges=" << g.adjacency().edge_count() << '\n';
      r << "density=" << format_double(graphs::density(g)) << '\n';
      out << r.str();
      write_manifest(dir, app, "make-graph");
      return 0;
    }

    if (ib->parsed()) {
      graphs::SensorGraph g = data::load_graph(ib_graph, parse_format(ib_format), ib_opts.sigma, ib_opts.epsilon_value());
      if (!g.normalized()) g = graphs::normalize_adjacency(g, ib_opts.sigma, ib_opts.epsilon_value(), ib_opts.mode_value());
      const std::string report = bcc_report(g, ib_mu);
      const auto dir = prepare_out(shared.out);
      write_file(dir / "bcc.txt", report);
      out << report;
      write_manifest(dir, app, "inspect-bcc");
      return 0;
    }

    if (tr->parsed()) {
      const data::Dataset ds = load_data(tr_data, tr_graph);
      const eval::ExperimentConfig cfg = experiment_config(tr_opts, tr_graph, shared.seed);
      const eval::ExperimentResult r = eval::run_experiment(ds, cfg);
      const auto dir = prepare_out(shared.out);
      training::save_checkpoint(r.trained, dir / "checkpoint.txt");
      std::ostringstream m;
      m << "epochs_run=" << r.trained.epochs_run << '\n';
      m << "virtual_nodes=" << r.mask.virtual_nodes.size() << '\n';
      if (r.validation) m << evaluation_report(*r.validation, "validation_");
      m << evaluation_report({r.model, r.mean, r.knn}, "test_");
      write_file(dir / "metrics.txt", m.str());
      out << m.str();
      write_manifest(dir, app, "train");
      return 0;
    }

    if (ev->parsed()) {
      const training::TrainedModel model = training::load_checkpoint(fs::path(ev_checkpoint));
      const data::Dataset ds = load_data(ev_data, ev_graph);
      eval::ExperimentConfig cfg;
      cfg.sigma_dist = ev_graph.sigma;
      cfg.epsilon = ev_graph.epsilon_value();
      cfg.threshold_mode = ev_graph.mode_value();
      const graphs::SensorGraph prepared = eval::prepare_graph(ds.graph, cfg);
      if (prepared.n_nodes() != ds.n_nodes()) throw std::invalid_argument("graph and readings disagree on node count");
      const training::Ratio ratio = ev_ratio.empty() ? model.config.ratio : parse_ratio(ev_ratio);
      const auto mask = eval::test_mask(ds.n_nodes(), ratio, ev_mask_seed.value_or(model.config.seed));
      data::Part part;
      if (ev_split == "train") part = data::Part::train;
      else if (ev_split == "validation") part = data::Part::validation;
      else if (ev_split == "test") part = data::Part::test;
      else throw std::invalid_argument("split must be train, validation or test, got " + ev_split);
      const auto [b, e] = data::part_range(data::split_bounds(ds.n_steps(), cfg.split), part);
      const eval::Evaluation res = eval::evaluate(ds, prepared, model, mask, b, e, ev_knn);
      std::ostringstream m;
      m << "virtual_nodes=" << mask.virtual_nodes.size() << '\n';
      m << evaluation_report(res, "");
      const auto dir = prepare_out(shared.out);
      write_file(dir / "metrics.txt", m.str());
      out << m.str();
      write_manifest(dir, app, "eval");
      return 0;
    }

    if (sw->parsed()) {
      const data::Dataset ds = load_data(sw_data, sw_graph);
      const eval::ExperimentConfig base = experiment_config(sw_opts, sw_graph, shared.seed);
      std::vector<std::uint64_t> seeds;
      for (const auto& s : split_list(sw_seeds)) seeds.push_back(std::stoull(s));
      std::vector<std::string> values = sw_param.empty() ? std::vector<std::string>{""} : split_list(sw_values);
      if (!sw_param.empty() && values.empty()) throw std::invalid_argument("--param needs --values");
      std::vector<eval::ScenarioResult> results;
      for (const auto& value : values) {
        eval::ExperimentConfig cfg = base;
        if (!sw_param.empty()) {
          cfg.train.set(sw_param, value);
          cfg.train.validate();
        }
        std::vector<eval::Scenario> scenarios;
        for (const auto& r : split_list(sw_ratios)) {
          std::string name = "ratio=" + r;
          if (!sw_param.empty()) name += ";" + sw_param + "=" + value;
          scenarios.push_back({name, parse_ratio(r), seeds});
        }
        auto part = eval::masking_scenarios(ds, cfg, scenarios);
        results.insert(results.end(), part.begin(), part.end());
      }
      const auto dir = prepare_out(shared.out);
      std::ostringstream table;
      eval::write_sweep_table(results, table);
      write_file(dir / "sweep.csv", table.str());
      std::ostringstream summary;
      for (const auto& r : results) {
        summary << r.scenario.name << " mae=" << format_double(r.mae.mean) << "±" << format_double(r.mae.std)
                << " rmse=" << format_double(r.rmse.mean) << "±" << format_double(r.rmse.std)
                << " mre=" << format_double(r.mre.mean) << "±" << format_double(r.mre.std) << '\n';
      }
      write_file(dir / "summary.txt", summary.str());
      out << summary.str();
      write_manifest(dir, app, "sweep");
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace darkfarseer::cli

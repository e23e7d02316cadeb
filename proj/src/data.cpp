#include "darkfarseer/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace darkfarseer::data {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  const bool delimited = line.find_first_of(",;") != std::string::npos;
  const char* seps = delimited ? ",;" : " \t\r";
  std::size_t pos = 0;
  while (pos <= line.size()) {
    const auto next = std::min(line.find_first_of(seps, pos), line.size());
    std::string field = line.substr(pos, next - pos);
    const auto b = field.find_first_not_of(" \t\r");
    field = b == std::string::npos ? "" : field.substr(b, field.find_last_not_of(" \t\r") - b + 1);
    if (delimited || !field.empty()) out.push_back(std::move(field));
    pos = next + 1;
  }
  return out;
}

bool blank_or_comment(const std::string& line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

bool try_number(const std::string& s, double& out) {
  try {
    out = training::parse_double(s);
    return std::isfinite(out);
  } catch (const std::invalid_argument&) {
    return false;
  }
}

bool try_index(const std::string& s, std::size_t& out) {
  double v = 0;
  if (!try_number(s, v) || v < 0 || v != std::floor(v) || v > 1e12) return false;
  out = static_cast<std::size_t>(v);
  return true;
}

std::ifstream open(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ParseError(path.string(), 0, "cannot open file");
  return f;
}

std::vector<graphs::Edge> random_geometric_edges(const std::vector<Position>& pos, double radius, double scale) {
  const std::size_t n = pos.size();
  auto dist = [&](std::size_t a, std::size_t b) { return std::hypot(pos[a].x - pos[b].x, pos[a].y - pos[b].y); };
  std::vector<graphs::Edge> edges;
  std::vector<bool> linked(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = dist(i, j);
      if (d <= radius && d > 0) {
        edges.push_back({i, j, d * scale});
        linked[i] = linked[j] = true;
      }
    }
  }
  // Isolated nodes are tied to their nearest node so every sensor has a neighbour.
  for (std::size_t i = 0; i < n; ++i) {
    if (linked[i]) continue;
    std::size_t best = i == 0 ? 1 : 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && dist(i, j) < dist(i, best)) best = j;
    }
    edges.push_back({std::min(i, best), std::max(i, best), std::max(dist(i, best), 1e-9) * scale});
    linked[i] = linked[best] = true;
  }
  return edges;
}

}  // namespace

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& what)
    : std::runtime_error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " + what), line_(line) {}

void Dataset::validate(std::size_t window) const {
  if (readings.nodes() != graph.n_nodes()) {
    throw std::invalid_argument("dataset '" + name + "': readings have " + std::to_string(readings.nodes()) +
                                " columns but the graph has " + std::to_string(graph.n_nodes()) + " nodes");
  }
  if (readings.steps() < 3 * window) {
    throw std::invalid_argument("dataset '" + name + "': " + std::to_string(readings.steps()) +
                                " steps is fewer than three windows of " + std::to_string(window));
  }
}

// ---------------------------------------------------------------------------
// synthetic data

Dataset generate_synthetic(std::size_t n_nodes, std::size_t n_steps, Process process, std::uint64_t seed,
                           const SyntheticOptions& options) {
  if (n_nodes < 8) throw std::invalid_argument("generate_synthetic: need at least 8 nodes");
  if (n_steps < 3 * 24) throw std::invalid_argument("generate_synthetic: need at least 72 steps");
  if (!(options.noise >= 0) || !(options.radius > 0) || !(options.distance_scale > 0)) {
    throw std::invalid_argument("generate_synthetic: invalid options");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Dataset ds;
  ds.name = process == Process::diffusion ? "synthetic-diffusion" : "synthetic-seasonal";
  ds.positions.resize(n_nodes);
  for (auto& p : ds.positions) p = {unit(rng), unit(rng)};
  const auto edges = random_geometric_edges(ds.positions, options.radius, options.distance_scale);
  ds.graph = graphs::build_pcg(n_nodes, edges);

  constexpr double two_pi = 2.0 * std::numbers::pi;
  TimeSeries x(n_steps, n_nodes);

  if (process == Process::diffusion) {
    // Forcing whose level, amplitude and phase drift smoothly across the square.
    std::vector<double> level(n_nodes), amp_day(n_nodes), phase_day(n_nodes), amp_week(n_nodes), phase_week(n_nodes);
    const double tilt = unit(rng) * two_pi;
    for (std::size_t i = 0; i < n_nodes; ++i) {
      const auto [px, py] = ds.positions[i];
      const double u = px * std::cos(tilt) + py * std::sin(tilt);
      level[i] = 2.0 * u + std::sin(std::numbers::pi * py);
      amp_day[i] = 1.0 + 0.5 * std::sin(std::numbers::pi * px);
      phase_day[i] = 1.5 * std::numbers::pi * u;
      amp_week[i] = 0.5 + 0.3 * py;
      phase_week[i] = std::numbers::pi * px;
    }
    // Heat kernel on the same distances drives the diffusion term.
    const graphs::Adjacency& raw = ds.graph.adjacency();
    std::vector<double> w(n_nodes * n_nodes, 0.0), degree(n_nodes, 0.0);
    for (std::size_t i = 0; i < n_nodes; ++i) {
      for (std::size_t j = 0; j < n_nodes; ++j) {
        if (raw(i, j) > 0) {
          w[i * n_nodes + j] = std::exp(-raw(i, j));
          degree[i] += w[i * n_nodes + j];
        }
      }
    }
    const double kappa = 0.4 / std::max(1.0, *std::max_element(degree.begin(), degree.end()));
    constexpr double relax = 0.1;
    constexpr std::size_t burn_in = 168;
    std::vector<double> cur(level), next(n_nodes);
    for (std::size_t step = 0; step < burn_in + n_steps; ++step) {
      const double t = static_cast<double>(step);
      for (std::size_t i = 0; i < n_nodes; ++i) {
        double lap = 0.0;
        for (std::size_t j = 0; j < n_nodes; ++j) lap += w[i * n_nodes + j] * (cur[j] - cur[i]);
        const double forcing = level[i] + amp_day[i] * std::sin(two_pi * t / 24.0 + phase_day[i]) +
                               amp_week[i] * std::sin(two_pi * t / 168.0 + phase_week[i]);
        next[i] = cur[i] + kappa * lap - relax * (cur[i] - forcing) + options.noise * gauss(rng);
      }
      cur.swap(next);
      if (step >= burn_in) {
        for (std::size_t i = 0; i < n_nodes; ++i) x(step - burn_in, i) = cur[i];
      }
    }
  } else {
    // A few seasonal sources, mixed into each node by distance to the source.
    constexpr std::size_t n_sources = 4;
    constexpr double periods[n_sources] = {24.0, 168.0, 12.0, 48.0};
    std::vector<Position> src(n_sources);
    std::vector<double> phase(n_sources), amp(n_sources);
    for (std::size_t k = 0; k < n_sources; ++k) {
      src[k] = {unit(rng), unit(rng)};
      phase[k] = unit(rng) * two_pi;
      amp[k] = 0.5 + unit(rng);
    }
    std::vector<double> mix(n_nodes * n_sources);
    for (std::size_t i = 0; i < n_nodes; ++i) {
      double total = 0.0;
      for (std::size_t k = 0; k < n_sources; ++k) {
        const double d = std::hypot(ds.positions[i].x - src[k].x, ds.positions[i].y - src[k].y);
        mix[i * n_sources + k] = std::exp(-d / 0.3);
        total += mix[i * n_sources + k];
      }
      for (std::size_t k = 0; k < n_sources; ++k) mix[i * n_sources + k] /= total;
    }
    for (std::size_t t = 0; t < n_steps; ++t) {
      for (std::size_t i = 0; i < n_nodes; ++i) {
        double v = 0.0;
        for (std::size_t k = 0; k < n_sources; ++k) {
          v += mix[i * n_sources + k] * amp[k] * std::sin(two_pi * static_cast<double>(t) / periods[k] + phase[k]);
        }
        x(t, i) = v + options.noise * gauss(rng);
      }
    }
  }
  ds.readings = std::move(x);
  return ds;
}

// ---------------------------------------------------------------------------
// file formats

EdgeList read_edge_list(std::istream& in, const std::string& source) {
  EdgeList out;
  bool fixed_n = false;
  std::size_t max_index = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank_or_comment(line)) continue;
    if (line.rfind("n_nodes=", 0) == 0) {
      if (!try_index(line.substr(8), out.n_nodes)) throw ParseError(source, line_no, "bad node count");
      fixed_n = true;
      continue;
    }
    const auto f = split_fields(line);
    if (f.size() != 3) {
      throw ParseError(source, line_no, "expected 3 fields i,j,d but found " + std::to_string(f.size()));
    }
    graphs::Edge e;
    if (!try_index(f[0], e.i) || !try_index(f[1], e.j)) throw ParseError(source, line_no, "bad node index");
    if (!try_number(f[2], e.d)) throw ParseError(source, line_no, "bad value '" + f[2] + "'");
    max_index = std::max({max_index, e.i, e.j});
    out.edges.push_back(e);
  }
  if (out.edges.empty() && !fixed_n) throw ParseError(source, line_no, "no edges");
  if (!fixed_n) {
    out.n_nodes = max_index + 1;
  } else if (!out.edges.empty() && max_index >= out.n_nodes) {
    throw ParseError(source, 0, "edge references node " + std::to_string(max_index) + " but n_nodes=" +
                                    std::to_string(out.n_nodes));
  }
  return out;
}

EdgeList read_edge_list(const std::filesystem::path& path) {
  auto f = open(path);
  return read_edge_list(f, path.string());
}

std::vector<graphs::Coordinate> read_coordinates(std::istream& in, const std::string& source) {
  std::vector<std::pair<std::size_t, graphs::Coordinate>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank_or_comment(line)) continue;
    const auto f = split_fields(line);
    if (f.size() != 3) {
      throw ParseError(source, line_no, "expected 3 fields node_id,lat,lon but found " + std::to_string(f.size()));
    }
    std::size_t id = 0;
    graphs::Coordinate c;
    if (!try_index(f[0], id)) {
      if (rows.empty()) continue;  // header
      throw ParseError(source, line_no, "bad node id '" + f[0] + "'");
    }
    if (!try_number(f[1], c.lat) || !try_number(f[2], c.lon)) throw ParseError(source, line_no, "bad coordinate");
    if (std::abs(c.lat) > 90 || std::abs(c.lon) > 180) throw ParseError(source, line_no, "coordinate out of range");
    rows.emplace_back(id, c);
  }
  if (rows.empty()) throw ParseError(source, line_no, "no coordinates");
  std::vector<graphs::Coordinate> out(rows.size());
  std::vector<bool> seen(rows.size(), false);
  for (const auto& [id, c] : rows) {
    if (id >= rows.size() || seen[id]) {
      throw ParseError(source, 0, "node ids must be 0.." + std::to_string(rows.size() - 1) + " without repeats");
    }
    seen[id] = true;
    out[id] = c;
  }
  return out;
}

std::vector<graphs::Coordinate> read_coordinates(const std::filesystem::path& path) {
  auto f = open(path);
  return read_coordinates(f, path.string());
}

TimeSeries read_readings(std::istream& in, const std::string& source) {
  std::vector<double> values;
  std::size_t cols = 0, rows = 0;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank_or_comment(line)) continue;
    const auto f = split_fields(line);
    std::vector<double> row(f.size());
    bool numeric = true;
    for (std::size_t k = 0; k < f.size() && numeric; ++k) numeric = try_number(f[k], row[k]);
    if (!numeric) {
      if (first) {
        first = false;
        continue;  // header
      }
      for (std::size_t k = 0; k < f.size(); ++k) {
        if (!try_number(f[k], row[k])) {
          throw ParseError(source, line_no, "non-numeric cell '" + f[k] + "' in column " + std::to_string(k + 1));
        }
      }
    }
    first = false;
    if (cols == 0) cols = row.size();
    if (row.size() != cols) {
      throw ParseError(source, line_no,
                       "ragged row: " + std::to_string(row.size()) + " cells, expected " + std::to_string(cols));
    }
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) throw ParseError(source, line_no, "no readings");
  return TimeSeries(rows, cols, std::move(values));
}

TimeSeries read_readings(const std::filesystem::path& path) {
  auto f = open(path);
  return read_readings(f, path.string());
}

void write_readings(const TimeSeries& series, std::ostream& out) {
  for (std::size_t t = 0; t < series.steps(); ++t) {
    for (std::size_t n = 0; n < series.nodes(); ++n) out << (n ? "," : "") << training::format_double(series(t, n));
    out << '\n';
  }
}

void write_weighted_edge_list(const graphs::SensorGraph& graph, std::ostream& out) {
  const auto& a = graph.adjacency();
  out << "n_nodes=" << a.size() << '\n';
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      if (a(i, j) != 0.0) out << i << ',' << j << ',' << training::format_double(a(i, j)) << '\n';
    }
  }
}

graphs::SensorGraph read_weighted_edge_list(std::istream& in, const std::string& source) {
  const EdgeList list = read_edge_list(in, source);
  graphs::Adjacency a(list.n_nodes);
  for (const auto& e : list.edges) {
    if (e.i == e.j) throw ParseError(source, 0, "self-loop on node " + std::to_string(e.i));
    if (!(e.d > 0)) throw ParseError(source, 0, "edge weights must be positive");
    a.set_symmetric(e.i, e.j, e.d);
  }
  return graphs::SensorGraph(std::move(a), graphs::GraphKind::pcg, {}, true);
}

graphs::SensorGraph load_graph(const std::filesystem::path& path, GraphFormat format, double sigma_dist,
                               double epsilon) {
  switch (format) {
    case GraphFormat::edge_list: {
      const auto list = read_edge_list(path);
      try {
        return graphs::build_pcg(list.n_nodes, list.edges);
      } catch (const graphs::GraphError& e) {
        throw ParseError(path.string(), 0, e.what());
      }
    }
    case GraphFormat::coordinates:
      return graphs::build_spg(read_coordinates(path), sigma_dist, epsilon);
    case GraphFormat::weighted_edge_list: {
      auto f = open(path);
      return read_weighted_edge_list(f, path.string());
    }
  }
  throw std::logic_error("unhandled graph format");
}

Dataset load_dataset(const std::filesystem::path& readings_path, const std::filesystem::path& graph_path,
                     GraphFormat format, double sigma_dist, double epsilon) {
  Dataset ds;
  ds.readings = read_readings(readings_path);
  ds.graph = load_graph(graph_path, format, sigma_dist, epsilon);
  ds.name = readings_path.stem().string();
  if (ds.readings.nodes() != ds.graph.n_nodes()) {
    throw ParseError(readings_path.string(), 0,
                     "readings have " + std::to_string(ds.readings.nodes()) + " columns but the graph has " +
                         std::to_string(ds.graph.n_nodes()) + " nodes");
  }
  return ds;
}

// ---------------------------------------------------------------------------
// splitting

SplitBounds split_bounds(std::size_t steps, SplitRatios ratios) {
  if (!(ratios.train > 0) || !(ratios.validation >= 0) || !(ratios.test >= 0) ||
      std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must be non-negative, with a positive training share, and sum to 1");
  }
  SplitBounds b;
  b.steps = steps;
  b.train_end = static_cast<std::size_t>(std::llround(static_cast<double>(steps) * ratios.train));
  b.validation_end = std::min<std::size_t>(
      steps, static_cast<std::size_t>(std::llround(static_cast<double>(steps) * (ratios.train + ratios.validation))));
  if (b.train_end == 0) throw std::invalid_argument("training split is empty");
  return b;
}

std::pair<std::size_t, std::size_t> part_range(const SplitBounds& bounds, Part part) {
  switch (part) {
    case Part::train:
      return {0, bounds.train_end};
    case Part::validation:
      return {bounds.train_end, bounds.validation_end};
    case Part::test:
      return {bounds.validation_end, bounds.steps};
  }
  throw std::logic_error("unhandled split part");
}

Splits split_and_normalize(const TimeSeries& readings, SplitRatios ratios, const training::MaskSpec& mask) {
  if (mask.n_nodes() != readings.nodes()) throw std::invalid_argument("mask does not match the readings");
  if (mask.observed_nodes.empty()) throw std::invalid_argument("no observed nodes to normalize with");
  const std::size_t T = readings.steps();
  const SplitBounds bounds = split_bounds(T, ratios);
  Splits s;
  s.train_end = bounds.train_end;
  s.validation_end = bounds.validation_end;

  double sum = 0.0;
  for (std::size_t t = 0; t < s.train_end; ++t) {
    for (auto v : mask.observed_nodes) sum += readings(t, v);
  }
  const double count = static_cast<double>(s.train_end * mask.observed_nodes.size());
  const double mean = sum / count;
  double sq = 0.0;
  for (std::size_t t = 0; t < s.train_end; ++t) {
    for (auto v : mask.observed_nodes) sq += (readings(t, v) - mean) * (readings(t, v) - mean);
  }
  const double sd = std::sqrt(sq / count);
  if (!(sd > 0.0)) throw std::invalid_argument("training readings are constant; cannot normalize");
  s.stats = {mean, sd};

  auto norm = [&](std::size_t begin, std::size_t end) {
    TimeSeries part = readings.rows(begin, end);
    for (std::size_t t = 0; t < part.steps(); ++t) {
      for (std::size_t n = 0; n < part.nodes(); ++n) part(t, n) = s.stats.normalize(part(t, n));
    }
    return part;
  };
  s.train = norm(0, s.train_end);
  s.validation = norm(s.train_end, s.validation_end);
  s.test = norm(s.validation_end, T);
  return s;
}

}  // namespace darkfarseer::data

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "darkfarseer/graphs.hpp"
#include "darkfarseer/series.hpp"
#include "darkfarseer/training.hpp"

namespace darkfarseer::data {

/// Parse or validation failure; `line` is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct Position {
  double x = 0.0;
  double y = 0.0;
};

struct Dataset {
  TimeSeries readings;  // T x N
  graphs::SensorGraph graph;
  std::string name;
  /// Unit-square layout of synthetic nodes; empty for loaded data.
  std::vector<Position> positions;

  std::size_t n_nodes() const { return readings.nodes(); }
  std::size_t n_steps() const { return readings.steps(); }
  void validate(std::size_t window = 24) const;
};

enum class Process { diffusion, seasonal_field };

struct SyntheticOptions {
  double noise = 0.05;
  double radius = 0.35;
  /// Unit-square distances are multiplied by this before they become edge distances.
  double distance_scale = 10.0;
};

/// Random geometric graph on the unit square (raw distances, PCG) and a
/// spatially smooth periodic signal over it.
Dataset generate_synthetic(std::size_t n_nodes, std::size_t n_steps, Process process, std::uint64_t seed,
                           const SyntheticOptions& options = {});

enum class GraphFormat {
  edge_list,           // i,j,distance
  coordinates,         // node_id,lat,lon
  weighted_edge_list,  // i,j,weight as written by write_weighted_edge_list
};

/// Edges of an `i,j,d` file. A line `n_nodes=N` fixes the node count,
/// otherwise it is the largest index plus one. `#` starts a comment.
struct EdgeList {
  std::size_t n_nodes = 0;
  std::vector<graphs::Edge> edges;
};
EdgeList read_edge_list(std::istream& in, const std::string& source);
EdgeList read_edge_list(const std::filesystem::path& path);

/// `node_id,lat,lon` rows; ids must cover 0..N-1 exactly once.
std::vector<graphs::Coordinate> read_coordinates(std::istream& in, const std::string& source);
std::vector<graphs::Coordinate> read_coordinates(const std::filesystem::path& path);

/// Numeric table, rows = steps, columns = nodes; comma, semicolon, tab or
/// space separated; a non-numeric first row is a header.
TimeSeries read_readings(std::istream& in, const std::string& source);
TimeSeries read_readings(const std::filesystem::path& path);
void write_readings(const TimeSeries& series, std::ostream& out);

/// Normalized graph as `i,j,weight` lines preceded by `n_nodes=N`.
void write_weighted_edge_list(const graphs::SensorGraph& graph, std::ostream& out);
graphs::SensorGraph read_weighted_edge_list(std::istream& in, const std::string& source);

/// Graph file in the given format. Edge lists give an unnormalized PCG;
/// coordinates give an SPG built with sigma_dist and epsilon.
graphs::SensorGraph load_graph(const std::filesystem::path& path, GraphFormat format, double sigma_dist = 1.0,
                               double epsilon = graphs::kInfinity);

Dataset load_dataset(const std::filesystem::path& readings_path, const std::filesystem::path& graph_path,
                     GraphFormat format, double sigma_dist = 1.0, double epsilon = graphs::kInfinity);

struct SplitRatios {
  double train = 0.6;
  double validation = 0.2;
  double test = 0.2;
};

struct Splits {
  /// Normalized, all nodes.
  TimeSeries train;
  TimeSeries validation;
  TimeSeries test;
  /// Row boundaries in the original series: [0, train_end), [train_end, validation_end), rest.
  std::size_t train_end = 0;
  std::size_t validation_end = 0;
  training::NormStats stats;
};

struct SplitBounds {
  std::size_t train_end = 0;
  std::size_t validation_end = 0;
  std::size_t steps = 0;
};

enum class Part { train, validation, test };

/// Rounded chronological boundaries; throws when the ratios are invalid.
SplitBounds split_bounds(std::size_t steps, SplitRatios ratios);
/// Row range [first, second) of one part.
std::pair<std::size_t, std::size_t> part_range(const SplitBounds& bounds, Part part);

/// Chronological split; mean/std from observed columns of the training rows.
Splits split_and_normalize(const TimeSeries& readings, SplitRatios ratios, const training::MaskSpec& mask);

}  // namespace darkfarseer::data

#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace darkfarseer {

/// Time-major reading matrix: steps x nodes.
class TimeSeries {
 public:
  TimeSeries() = default;
  TimeSeries(std::size_t steps, std::size_t nodes) : steps_(steps), nodes_(nodes), values_(steps * nodes, 0.0) {}
  TimeSeries(std::size_t steps, std::size_t nodes, std::vector<double> values)
      : steps_(steps), nodes_(nodes), values_(std::move(values)) {
    if (values_.size() != steps * nodes) throw std::invalid_argument("time series size does not match steps x nodes");
  }

  std::size_t steps() const { return steps_; }
  std::size_t nodes() const { return nodes_; }
  double operator()(std::size_t t, std::size_t n) const { return values_[t * nodes_ + n]; }
  double& operator()(std::size_t t, std::size_t n) { return values_[t * nodes_ + n]; }
  const std::vector<double>& values() const { return values_; }

  /// Rows [begin, end).
  TimeSeries rows(std::size_t begin, std::size_t end) const;
  /// Columns listed in `nodes`, in that order.
  TimeSeries columns(const std::vector<std::size_t>& nodes) const;

  bool operator==(const TimeSeries&) const = default;

 private:
  std::size_t steps_ = 0;
  std::size_t nodes_ = 0;
  std::vector<double> values_;
};

/// Node-major N x p block of readings. Rows of unobserved nodes are held at zero.
class SeriesWindow {
 public:
  SeriesWindow() = default;
  SeriesWindow(std::size_t n_nodes, std::size_t window_length, std::vector<double> values,
               std::vector<bool> observed_mask);

  /// Window [start, start + p) of `series`, transposed to node-major.
  static SeriesWindow from_series(const TimeSeries& series, std::size_t start, std::size_t p,
                                  std::vector<bool> observed_mask);

  std::size_t n_nodes() const { return n_nodes_; }
  std::size_t window_length() const { return window_length_; }
  double operator()(std::size_t node, std::size_t t) const { return values_[node * window_length_ + t]; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<bool>& observed_mask() const { return observed_; }
  bool observed(std::size_t node) const { return observed_[node]; }
  std::vector<std::size_t> observed_nodes() const;
  std::vector<std::size_t> unobserved_nodes() const;

  /// Same readings with a different mask; newly unobserved rows are zeroed.
  SeriesWindow with_mask(std::vector<bool> observed_mask) const;

  bool operator==(const SeriesWindow&) const = default;

 private:
  std::size_t n_nodes_ = 0;
  std::size_t window_length_ = 0;
  std::vector<double> values_;
  std::vector<bool> observed_;
};

}  // namespace darkfarseer

#include "darkfarseer/series.hpp"

#include <string>

namespace darkfarseer {

TimeSeries TimeSeries::rows(std::size_t begin, std::size_t end) const {
  if (begin > end || end > steps_) throw std::out_of_range("time series row range out of bounds");
  std::vector<double> out(values_.begin() + static_cast<std::ptrdiff_t>(begin * nodes_),
                          values_.begin() + static_cast<std::ptrdiff_t>(end * nodes_));
  return TimeSeries(end - begin, nodes_, std::move(out));
}

TimeSeries TimeSeries::columns(const std::vector<std::size_t>& nodes) const {
  TimeSeries out(steps_, nodes.size());
  for (std::size_t t = 0; t < steps_; ++t) {
    for (std::size_t k = 0; k < nodes.size(); ++k) out(t, k) = (*this)(t, nodes.at(k));
  }
  return out;
}

SeriesWindow::SeriesWindow(std::size_t n_nodes, std::size_t window_length, std::vector<double> values,
                           std::vector<bool> observed_mask)
    : n_nodes_(n_nodes), window_length_(window_length), values_(std::move(values)), observed_(std::move(observed_mask)) {
  if (values_.size() != n_nodes * window_length) {
    throw std::invalid_argument("window holds " + std::to_string(values_.size()) + " values, expected " +
                                std::to_string(n_nodes * window_length));
  }
  if (observed_.size() != n_nodes) throw std::invalid_argument("observed mask length does not match node count");
  for (std::size_t n = 0; n < n_nodes_; ++n) {
    if (observed_[n]) continue;
    for (std::size_t t = 0; t < window_length_; ++t) values_[n * window_length_ + t] = 0.0;
  }
}

SeriesWindow SeriesWindow::from_series(const TimeSeries& series, std::size_t start, std::size_t p,
                                       std::vector<bool> observed_mask) {
  if (start + p > series.steps()) throw std::out_of_range("window extends past the end of the series");
  std::vector<double> values(series.nodes() * p);
  for (std::size_t n = 0; n < series.nodes(); ++n) {
    for (std::size_t t = 0; t < p; ++t) values[n * p + t] = series(start + t, n);
  }
  return SeriesWindow(series.nodes(), p, std::move(values), std::move(observed_mask));
}

std::vector<std::size_t> SeriesWindow::observed_nodes() const {
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n < n_nodes_; ++n) {
    if (observed_[n]) out.push_back(n);
  }
  return out;
}

std::vector<std::size_t> SeriesWindow::unobserved_nodes() const {
  std::vector<std::size_t> out;
  for (std::size_t n = 0; n < n_nodes_; ++n) {
    if (!observed_[n]) out.push_back(n);
  }
  return out;
}

SeriesWindow SeriesWindow::with_mask(std::vector<bool> observed_mask) const {
  return SeriesWindow(n_nodes_, window_length_, values_, std::move(observed_mask));
}

}  // namespace darkfarseer

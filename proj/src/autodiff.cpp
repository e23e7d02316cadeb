#include "darkfarseer/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>
#include <unordered_set>

namespace darkfarseer::ad {

namespace detail {

struct Node;

// gout is d(loss)/d(output); gin[k] accumulates d(loss)/d(input k) and is
// null when input k needs no gradient.
using BackwardRule =
    std::function<void(const Node& self, std::span<const double> gout, std::span<std::vector<double>*> gin)>;

struct Node {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::optional<std::vector<double>> grad;

  bool has_history = false;
  bool consumed = false;
  OpKind kind = OpKind::add;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardRule rule;
};

}  // namespace detail

using detail::Node;

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::subtract: return "subtract";
    case OpKind::elementwise_multiply: return "elementwise_multiply";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::relu: return "relu";
    case OpKind::mean_over_axis: return "mean_over_axis";
    case OpKind::sum_over_axis: return "sum_over_axis";
    case OpKind::concat: return "concat";
    case OpKind::slice: return "slice";
    case OpKind::transpose: return "transpose";
    case OpKind::scalar_multiply: return "scalar_multiply";
    case OpKind::divide: return "divide";
    case OpKind::exp: return "exp";
    case OpKind::log: return "log";
    case OpKind::l2_norm: return "l2_norm";
    case OpKind::cosine_similarity: return "cosine_similarity";
    case OpKind::reshape: return "reshape";
    case OpKind::gather_rows: return "gather_rows";
    case OpKind::scatter_rows: return "scatter_rows";
  }
  return "unknown";
}

namespace {

void validate_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one extent");
  for (auto e : shape) {
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + to_string(shape));
  }
}

void check_finite(std::span<const double> values, std::string_view what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NonFiniteError(std::string(what) + " produced a non-finite value");
  }
}

[[noreturn]] void shape_mismatch(OpKind kind, const Shape& a, const Shape& b) {
  throw ShapeError(std::string(op_name(kind)) + ": incompatible shapes " + to_string(a) + " and " + to_string(b));
}

void expect_arity(OpKind kind, std::span<const Tensor> inputs, std::size_t n) {
  if (inputs.size() != n) {
    throw std::invalid_argument(std::string(op_name(kind)) + " expects " + std::to_string(n) + " operand(s), got " +
                                std::to_string(inputs.size()));
  }
}

// Flat index into `rhs` for every flat index of `out`, numpy-style
// right-aligned broadcasting of rhs onto out. Empty when shapes are equal.
std::vector<std::size_t> broadcast_index(OpKind kind, const Shape& out, const Shape& rhs) {
  if (out == rhs) return {};
  const std::size_t n = shape_size(out);
  if (shape_size(rhs) == 1) return std::vector<std::size_t>(n, 0);
  if (rhs.size() > out.size()) shape_mismatch(kind, out, rhs);
  const std::size_t offset = out.size() - rhs.size();
  for (std::size_t d = 0; d < rhs.size(); ++d) {
    if (rhs[d] != out[d + offset] && rhs[d] != 1) shape_mismatch(kind, out, rhs);
  }
  // Strides of rhs expressed in out's dimensions (0 where broadcast).
  std::vector<std::size_t> stride(out.size(), 0);
  std::size_t s = 1;
  for (std::size_t d = rhs.size(); d-- > 0;) {
    stride[d + offset] = rhs[d] == 1 ? 0 : s;
    s *= rhs[d];
  }
  std::vector<std::size_t> map(n);
  std::vector<std::size_t> idx(out.size(), 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t r = 0;
    for (std::size_t d = 0; d < out.size(); ++d) r += idx[d] * stride[d];
    map[flat] = r;
    for (std::size_t d = out.size(); d-- > 0;) {
      if (++idx[d] < out[d]) break;
      idx[d] = 0;
    }
  }
  return map;
}

struct Forward {
  Shape shape;
  std::vector<double> data;
  detail::BackwardRule rule;
};

inline std::size_t bmap(const std::vector<std::size_t>& map, std::size_t i) { return map.empty() ? i : map[i]; }

Forward elementwise_binary(OpKind kind, const Tensor& a, const Tensor& b) {
  auto map = broadcast_index(kind, a.shape(), b.shape());
  const auto& x = a.data();
  const auto& y = b.data();
  const std::size_t n = a.size();
  std::vector<double> out(n);
  switch (kind) {
    case OpKind::add:
      for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + y[bmap(map, i)];
      break;
    case OpKind::subtract:
      for (std::size_t i = 0; i < n; ++i) out[i] = x[i] - y[bmap(map, i)];
      break;
    case OpKind::elementwise_multiply:
      for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[bmap(map, i)];
      break;
    case OpKind::divide:
      for (std::size_t i = 0; i < n; ++i) {
        const double d = y[bmap(map, i)];
        if (d == 0.0) throw DomainError("divide: zero denominator");
        out[i] = x[i] / d;
      }
      break;
    default:
      break;
  }
  auto rule = [kind, map = std::move(map)](const Node& self, std::span<const double> g,
                                           std::span<std::vector<double>*> gin) {
    const auto& x = self.inputs[0]->data;
    const auto& y = self.inputs[1]->data;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const std::size_t j = bmap(map, i);
      switch (kind) {
        case OpKind::add:
          if (gin[0]) (*gin[0])[i] += g[i];
          if (gin[1]) (*gin[1])[j] += g[i];
          break;
        case OpKind::subtract:
          if (gin[0]) (*gin[0])[i] += g[i];
          if (gin[1]) (*gin[1])[j] -= g[i];
          break;
        case OpKind::elementwise_multiply:
          if (gin[0]) (*gin[0])[i] += g[i] * y[j];
          if (gin[1]) (*gin[1])[j] += g[i] * x[i];
          break;
        case OpKind::divide:
          if (gin[0]) (*gin[0])[i] += g[i] / y[j];
          if (gin[1]) (*gin[1])[j] -= g[i] * x[i] / (y[j] * y[j]);
          break;
        default:
          break;
      }
    }
  };
  return {a.shape(), std::move(out), std::move(rule)};
}

Forward do_matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    shape_mismatch(OpKind::matmul, a.shape(), b.shape());
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  const auto x = a.data();
  const auto y = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double v = x[i * k + p];
      if (v == 0.0) continue;
      const double* brow = y.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += v * brow[j];
    }
  }
  auto rule = [m, k, n](const Node& self, std::span<const double> g, std::span<std::vector<double>*> gin) {
    const auto& x = self.inputs[0]->data;
    const auto& y = self.inputs[1]->data;
    if (gin[0]) {
      auto& ga = *gin[0];
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * y[p * n + j];
          ga[i * k + p] += acc;
        }
      }
    }
    if (gin[1]) {
      auto& gb = *gin[1];
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double v = x[i * k + p];
          if (v == 0.0) continue;
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += v * g[i * n + j];
        }
      }
    }
  };
  return {{m, n}, std::move(out), std::move(rule)};
}

Forward do_unary(OpKind kind, const Tensor& a) {
  const auto x = a.data();
  std::vector<double> out(x.size());
  switch (kind) {
    case OpKind::sigmoid:
      for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] >= 0 ? 1.0 / (1.0 + std::exp(-x[i])) : std::exp(x[i]) / (1.0 + std::exp(x[i]));
      }
      break;
    case OpKind::relu:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0 ? x[i] : 0.0;
      break;
    case OpKind::exp:
      for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::exp(x[i]);
      break;
    case OpKind::log:
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0)) throw DomainError("log: operand must be positive");
        out[i] = std::log(x[i]);
      }
      break;
    default:
      break;
  }
  auto rule = [kind](const Node& self, std::span<const double> g, std::span<std::vector<double>*> gin) {
    if (!gin[0]) return;
    auto& gx = *gin[0];
    const auto& x = self.inputs[0]->data;
    const auto& y = self.data;
    for (std::size_t i = 0; i < g.size(); ++i) {
      switch (kind) {
        case OpKind::sigmoid: gx[i] += g[i] * y[i] * (1.0 - y[i]); break;
        case OpKind::relu: gx[i] += x[i] > 0 ? g[i] : 0.0; break;
        case OpKind::exp: gx[i] += g[i] * y[i]; break;
        case OpKind::log: gx[i] += g[i] / x[i]; break;
        default: break;
      }
    }
  };
  return {a.shape(), std::move(out), std::move(rule)};
}

// Splits a shape around `axis` into (outer, extent, inner).
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(OpKind kind, const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError(std::string(op_name(kind)) + ": axis " + std::to_string(axis) + " out of range for shape " +
                     to_string(shape));
  }
  AxisSplit s;
  for (std::size_t d = 0; d < axis; ++d) s.outer *= shape[d];
  s.extent = shape[axis];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) s.inner *= shape[d];
  return s;
}

Forward do_reduce(OpKind kind, const Tensor& a, std::size_t axis) {
  const auto s = split_axis(kind, a.shape(), axis);
  Shape out_shape;
  for (std::size_t d = 0; d < a.rank(); ++d) {
    if (d != axis) out_shape.push_back(a.shape()[d]);
  }
  if (out_shape.empty()) out_shape = {1};
  const double factor = kind == OpKind::mean_over_axis ? 1.0 / static_cast<double>(s.extent) : 1.0;
  const auto x = a.data();
  std::vector<double> out(s.outer * s.inner, 0.0);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t e = 0; e < s.extent; ++e) {
      const double* src = x.data() + (o * s.extent + e) * s.inner;
      double* dst = out.data() + o * s.inner;
      for (std::size_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
  }
  if (factor != 1.0) {
    for (auto& v : out) v *= factor;
  }
  auto rule = [s, factor](const Node&, std::span<const double> g, std::span<std::vector<double>*> gin) {
    if (!gin[0]) return;
    auto& gx = *gin[0];
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t e = 0; e < s.extent; ++e) {
        for (std::size_t i = 0; i < s.inner; ++i) gx[(o * s.extent + e) * s.inner + i] += factor * g[o * s.inner + i];
      }
    }
  };
  return {std::move(out_shape), std::move(out), std::move(rule)};
}

Forward do_concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat expects at least one operand");
  const Shape& first = parts[0].shape();
  std::vector<AxisSplit> splits;
  Shape out_shape = first;
  out_shape.at(axis) = 0;
  for (const auto& p : parts) {
    if (p.rank() != first.size()) shape_mismatch(OpKind::concat, first, p.shape());
    for (std::size_t d = 0; d < first.size(); ++d) {
      if (d != axis && p.shape()[d] != first[d]) shape_mismatch(OpKind::concat, first, p.shape());
    }
    splits.push_back(split_axis(OpKind::concat, p.shape(), axis));
    out_shape[axis] += p.shape()[axis];
  }
  const auto os = split_axis(OpKind::concat, out_shape, axis);
  std::vector<double> out(shape_size(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    offsets.push_back(offset);
    const auto x = parts[k].data();
    const std::size_t chunk = splits[k].extent * splits[k].inner;
    for (std::size_t o = 0; o < os.outer; ++o) {
      std::copy_n(x.data() + o * chunk, chunk, out.data() + o * os.extent * os.inner + offset * os.inner);
    }
    offset += splits[k].extent;
  }
  auto rule = [splits, offsets, os](const Node&, std::span<const double> g, std::span<std::vector<double>*> gin) {
    for (std::size_t k = 0; k < gin.size(); ++k) {
      if (!gin[k]) continue;
      const std::size_t chunk = splits[k].extent * splits[k].inner;
      for (std::size_t o = 0; o < os.outer; ++o) {
        const double* src = g.data() + o * os.extent * os.inner + offsets[k] * os.inner;
        double* dst = gin[k]->data() + o * chunk;
        for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
      }
    }
  };
  return {std::move(out_shape), std::move(out), std::move(rule)};
}

Forward do_slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  const auto s = split_axis(OpKind::slice, a.shape(), axis);
  if (begin >= end || end > s.extent) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) + ") invalid for shape " +
                     to_string(a.shape()));
  }
  Shape out_shape = a.shape();
  out_shape[axis] = end - begin;
  const std::size_t width = (end - begin) * s.inner;
  const auto x = a.data();
  std::vector<double> out(s.outer * width);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(x.data() + (o * s.extent + begin) * s.inner, width, out.data() + o * width);
  }
  auto rule = [s, begin, width](const Node&, std::span<const double> g, std::span<std::vector<double>*> gin) {
    if (!gin[0]) return;
    for (std::size_t o = 0; o < s.outer; ++o) {
      double* dst = gin[0]->data() + (o * s.extent + begin) * s.inner;
      for (std::size_t i = 0; i < width; ++i) dst[i] += g[o * width + i];
    }
  };
  return {std::move(out_shape), std::move(out), std::move(rule)};
}

Forward do_transpose(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("transpose: expects a 2-D tensor, got " + to_string(a.shape()));
  const std::size_t r = a.shape()[0], c = a.shape()[1];
  const auto x = a.data();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
  }
  auto rule = [r, c](const Node&, std::span<const double> g, std::span<std::vector<double>*> gin) {
    if (!gin[0]) return;
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) (*gin[0])[i * c + j] += g[j * r + i];
    }
  };
  return {{c, r}, std::move(out), std::move(rule)};
}

Forward do_scale(const Tensor& a, double factor) {
  const auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = factor * x[i];
  auto rule = [factor](const Node&, std::span<const double> g, std::span<std::vector<double>*> gin) {
    if (!gin[0]) return;
    for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += factor * g[i];
  };
  return {a.shape(), std::move(out), std::move(rule)};
}

Forward do_l2_norm(const Tensor& a) {
  double ss = 0.0;
  for (double v : a.data()) ss += v * v;
  const double norm = std::sqrt(ss);
  auto rule = [norm](const Node& self, std::span<const double> g, std::span<std::vector<double>*> gin) {
    if (!gin[0] || norm == 0.0) return;
    const auto& x = self.inputs[0]->data;
    for (std::size_t i = 0; i < x.size(); ++i) (*gin[0])[i] += g[0] * x[i] / norm;
  };
  return {{1}, {norm}, std::move(rule)};
}

Forward do_cosine(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) shape_mismatch(OpKind::cosine_similarity, a.shape(), b.shape());
  const auto x = a.data();
  const auto y = b.data();
  double dot = 0.0, xx = 0.0, yy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += x[i] * y[i];
    xx += x[i] * x[i];
    yy += y[i] * y[i];
  }
  const double nx = std::sqrt(xx), ny = std::sqrt(yy);
  const double dx = std::max(nx, kCosineEps), dy = std::max(ny, kCosineEps);
  const double s = dot / (dx * dy);
  auto rule = [nx, ny, dx, dy, s](const Node& self, std::span<const double> g, std::span<std::vector<double>*> gin) {
    const auto& x = self.inputs[0]->data;
    const auto& y = self.inputs[1]->data;
    const double inv = 1.0 / (dx * dy);
    if (gin[0]) {
      const double cx = nx > kCosineEps ? s / (dx * nx) : 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) (*gin[0])[i] += g[0] * (y[i] * inv - cx * x[i]);
    }
    if (gin[1]) {
      const double cy = ny > kCosineEps ? s / (dy * ny) : 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) (*gin[1])[i] += g[0] * (x[i] * inv - cy * y[i]);
    }
  };
  return {{1}, {s}, std::move(rule)};
}

Forward do_reshape(const Tensor& a, const Shape& shape) {
  validate_shape(shape);
  if (shape_size(shape) != a.size()) shape_mismatch(OpKind::reshape, a.shape(), shape);
  std::vector<double> out(a.data().begin(), a.data().end());
  auto rule = [](const Node&, std::span<const double> g, std::span<std::vector<double>*> gin) {
    if (!gin[0]) return;
    for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
  };
  return {shape, std::move(out), std::move(rule)};
}

Forward do_gather(const Tensor& a, const std::vector<std::size_t>& rows) {
  if (rows.empty()) throw ShapeError("gather_rows: empty row list");
  const std::size_t n_rows = a.shape()[0];
  const std::size_t width = a.size() / n_rows;
  for (auto r : rows) {
    if (r >= n_rows) {
      throw ShapeError("gather_rows: row " + std::to_string(r) + " out of range for shape " + to_string(a.shape()));
    }
  }
  Shape out_shape = a.shape();
  out_shape[0] = rows.size();
  const auto x = a.data();
  std::vector<double> out(rows.size() * width);
  for (std::size_t k = 0; k < rows.size(); ++k) std::copy_n(x.data() + rows[k] * width, width, out.data() + k * width);
  auto rule = [rows, width](const Node&, std::span<const double> g, std::span<std::vector<double>*> gin) {
    if (!gin[0]) return;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      double* dst = gin[0]->data() + rows[k] * width;
      for (std::size_t i = 0; i < width; ++i) dst[i] += g[k * width + i];
    }
  };
  return {std::move(out_shape), std::move(out), std::move(rule)};
}

Forward do_scatter(const Tensor& a, const std::vector<std::size_t>& rows, std::size_t n_rows) {
  if (rows.size() != a.shape()[0]) {
    throw ShapeError("scatter_rows: " + std::to_string(rows.size()) + " target rows for shape " + to_string(a.shape()));
  }
  std::vector<bool> seen(n_rows, false);
  for (auto r : rows) {
    if (r >= n_rows) throw ShapeError("scatter_rows: target row " + std::to_string(r) + " out of range");
    if (seen[r]) throw ShapeError("scatter_rows: duplicate target row " + std::to_string(r));
    seen[r] = true;
  }
  const std::size_t width = a.size() / rows.size();
  Shape out_shape = a.shape();
  out_shape[0] = n_rows;
  const auto x = a.data();
  std::vector<double> out(n_rows * width, 0.0);
  for (std::size_t k = 0; k < rows.size(); ++k) std::copy_n(x.data() + k * width, width, out.data() + rows[k] * width);
  auto rule = [rows, width](const Node&, std::span<const double> g, std::span<std::vector<double>*> gin) {
    if (!gin[0]) return;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const double* src = g.data() + rows[k] * width;
      double* dst = gin[0]->data() + k * width;
      for (std::size_t i = 0; i < width; ++i) dst[i] += src[i];
    }
  };
  return {std::move(out_shape), std::move(out), std::move(rule)};
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor() : node_(std::make_shared<Node>()) {
  node_->shape = {1};
  node_->data = {0.0};
}

Tensor::Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
  validate_shape(shape);
  if (shape_size(shape) != data.size()) {
    throw ShapeError("tensor shape " + to_string(shape) + " holds " + std::to_string(shape_size(shape)) +
                     " values, got " + std::to_string(data.size()));
  }
  check_finite(data, "tensor construction");
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = shape_size(shape);
  return from(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::ones(Shape shape) { return full(std::move(shape), 1.0); }

Tensor Tensor::full(Shape shape, double value) {
  const auto n = shape_size(shape);
  return from(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::size() const { return node_->data.size(); }
std::span<const double> Tensor::data() const { return node_->data; }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on non-scalar tensor of shape " + to_string(shape()));
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::is_leaf() const { return !node_->has_history && !node_->consumed; }

const std::vector<double>* Tensor::grad() const { return node_->grad ? &*node_->grad : nullptr; }

std::span<double> Tensor::mutable_data() {
  if (!is_leaf()) throw TapeError("mutable_data() is only permitted on leaf tensors");
  return node_->data;
}

Tensor Tensor::detach() const { return from(shape(), node_->data, false); }

// ---------------------------------------------------------------------------
// apply

Tensor apply(OpKind kind, std::span<const Tensor> inputs, const OpAttrs& attrs) {
  Forward f;
  switch (kind) {
    case OpKind::matmul:
      expect_arity(kind, inputs, 2);
      f = do_matmul(inputs[0], inputs[1]);
      break;
    case OpKind::add:
    case OpKind::subtract:
    case OpKind::elementwise_multiply:
    case OpKind::divide:
      expect_arity(kind, inputs, 2);
      f = elementwise_binary(kind, inputs[0], inputs[1]);
      break;
    case OpKind::sigmoid:
    case OpKind::relu:
    case OpKind::exp:
    case OpKind::log:
      expect_arity(kind, inputs, 1);
      f = do_unary(kind, inputs[0]);
      break;
    case OpKind::mean_over_axis:
    case OpKind::sum_over_axis:
      expect_arity(kind, inputs, 1);
      f = do_reduce(kind, inputs[0], attrs.axis);
      break;
    case OpKind::concat:
      f = do_concat(inputs, attrs.axis);
      break;
    case OpKind::slice:
      expect_arity(kind, inputs, 1);
      f = do_slice(inputs[0], attrs.axis, attrs.begin, attrs.end);
      break;
    case OpKind::transpose:
      expect_arity(kind, inputs, 1);
      f = do_transpose(inputs[0]);
      break;
    case OpKind::scalar_multiply:
      expect_arity(kind, inputs, 1);
      f = do_scale(inputs[0], attrs.scalar);
      break;
    case OpKind::l2_norm:
      expect_arity(kind, inputs, 1);
      f = do_l2_norm(inputs[0]);
      break;
    case OpKind::cosine_similarity:
      expect_arity(kind, inputs, 2);
      f = do_cosine(inputs[0], inputs[1]);
      break;
    case OpKind::reshape:
      expect_arity(kind, inputs, 1);
      f = do_reshape(inputs[0], attrs.shape);
      break;
    case OpKind::gather_rows:
      expect_arity(kind, inputs, 1);
      f = do_gather(inputs[0], attrs.indices);
      break;
    case OpKind::scatter_rows:
      expect_arity(kind, inputs, 1);
      f = do_scatter(inputs[0], attrs.indices, attrs.rows);
      break;
  }
  check_finite(f.data, op_name(kind));

  auto node = std::make_shared<Node>();
  node->shape = std::move(f.shape);
  node->data = std::move(f.data);
  node->kind = kind;
  const bool tracked = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (tracked) {
    node->requires_grad = true;
    node->has_history = true;
    node->rule = std::move(f.rule);
    node->inputs.reserve(inputs.size());
    for (const auto& t : inputs) node->inputs.push_back(t.node_);
  }
  return Tensor(std::move(node));
}

// ---------------------------------------------------------------------------
// Tape

std::vector<double> Gradients::of(const Tensor& leaf) const {
  auto it = grads_.find(leaf.node_.get());
  if (it == grads_.end()) return std::vector<double>(leaf.size(), 0.0);
  return it->second;
}

bool Gradients::contains(const Tensor& leaf) const { return grads_.count(leaf.node_.get()) != 0; }

ComputationTape::ComputationTape(const Tensor& loss) : loss_(loss) {
  if (loss.size() != 1) throw ShapeError("backward: loss must be a scalar, got shape " + to_string(loss.shape()));
  const auto& root = loss.node_;
  if (root->consumed) throw TapeError("backward: tape already consumed");
  if (!root->requires_grad) return;

  // Iterative post-order DFS; entries end up in topological order.
  std::unordered_set<const Node*> visited;
  std::vector<std::pair<std::shared_ptr<Node>, std::size_t>> stack;
  stack.emplace_back(root, 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (node->consumed) throw TapeError("backward: tape already consumed");
    if (!node->has_history) {
      if (node->requires_grad) leaves_.push_back(node);
      stack.pop_back();
      continue;
    }
    if (next < node->inputs.size()) {
      auto child = node->inputs[next++];
      if (child->requires_grad && visited.insert(child.get()).second) stack.emplace_back(std::move(child), 0);
      continue;
    }
    entries_.push_back(node);
    stack.pop_back();
  }
}

bool ComputationTape::is_topologically_ordered() const {
  std::unordered_set<const Node*> produced;
  for (const auto& e : entries_) {
    for (const auto& in : e->inputs) {
      if (in->has_history && !produced.count(in.get())) return false;
    }
    produced.insert(e.get());
  }
  return true;
}

Gradients ComputationTape::run() {
  Gradients out;
  const auto& root = loss_.node_;
  if (root->consumed) throw TapeError("backward: tape already consumed");
  if (!root->requires_grad) return out;

  std::unordered_map<const Node*, std::vector<double>> acc;
  acc[root.get()] = {1.0};
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    Node& node = **it;
    if (node.consumed) throw TapeError("backward: tape already consumed");
    auto found = acc.find(&node);
    if (found == acc.end()) continue;
    const std::vector<double> g = std::move(found->second);
    acc.erase(found);
    std::vector<std::vector<double>*> gin(node.inputs.size(), nullptr);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      const auto& in = node.inputs[k];
      if (!in->requires_grad) continue;
      auto& slot = acc[in.get()];
      if (slot.empty()) slot.assign(in->data.size(), 0.0);
      gin[k] = &slot;
    }
    node.rule(node, g, gin);
  }
  for (const auto& leaf : leaves_) {
    auto found = acc.find(leaf.get());
    std::vector<double> g = found == acc.end() ? std::vector<double>(leaf->data.size(), 0.0) : found->second;
    leaf->grad = g;
    out.grads_.emplace(leaf.get(), std::move(g));
  }
  for (auto& e : entries_) {
    e->consumed = true;
    e->has_history = false;
    e->rule = nullptr;
    e->inputs.clear();
  }
  return out;
}

Gradients backward(const Tensor& loss) {
  ComputationTape tape(loss);
  return tape.run();
}

double grad_check(const ScalarFunction& function, std::span<const Tensor> inputs, double step) {
  if (!(step > 0)) throw std::invalid_argument("grad_check: step must be positive");
  std::vector<Tensor> leaves;
  for (const auto& t : inputs) leaves.push_back(Tensor::from(t.shape(), {t.data().begin(), t.data().end()}, true));
  const Tensor out = function(leaves);
  if (out.size() != 1) throw ShapeError("grad_check: function must return a scalar, got " + to_string(out.shape()));
  const Gradients grads = backward(out);

  double worst = 0.0;
  for (std::size_t k = 0; k < leaves.size(); ++k) {
    const auto analytic = grads.of(leaves[k]);
    for (std::size_t e = 0; e < leaves[k].size(); ++e) {
      auto evaluate = [&](double delta) {
        std::vector<Tensor> probe;
        for (std::size_t j = 0; j < leaves.size(); ++j) {
          std::vector<double> d(leaves[j].data().begin(), leaves[j].data().end());
          if (j == k) d[e] += delta;
          probe.push_back(Tensor::from(leaves[j].shape(), std::move(d), false));
        }
        return function(probe).item();
      };
      const double central = (evaluate(step) - evaluate(-step)) / (2.0 * step);
      const double err = std::abs(analytic[e] - central) / std::max(1e-8, std::abs(central));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Wrappers

namespace {
Tensor apply1(OpKind kind, const Tensor& x, const OpAttrs& attrs = {}) {
  const Tensor in[] = {x};
  return apply(kind, in, attrs);
}
Tensor apply2(OpKind kind, const Tensor& a, const Tensor& b) {
  const Tensor in[] = {a, b};
  return apply(kind, in);
}
}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) { return apply2(OpKind::matmul, a, b); }
Tensor add(const Tensor& a, const Tensor& b) { return apply2(OpKind::add, a, b); }
Tensor subtract(const Tensor& a, const Tensor& b) { return apply2(OpKind::subtract, a, b); }
Tensor multiply(const Tensor& a, const Tensor& b) { return apply2(OpKind::elementwise_multiply, a, b); }
Tensor divide(const Tensor& a, const Tensor& b) { return apply2(OpKind::divide, a, b); }
Tensor sigmoid(const Tensor& x) { return apply1(OpKind::sigmoid, x); }
Tensor relu(const Tensor& x) { return apply1(OpKind::relu, x); }
Tensor exp(const Tensor& x) { return apply1(OpKind::exp, x); }
Tensor log(const Tensor& x) { return apply1(OpKind::log, x); }

Tensor mean_over_axis(const Tensor& x, std::size_t axis) {
  OpAttrs a;
  a.axis = axis;
  return apply1(OpKind::mean_over_axis, x, a);
}

Tensor sum_over_axis(const Tensor& x, std::size_t axis) {
  OpAttrs a;
  a.axis = axis;
  return apply1(OpKind::sum_over_axis, x, a);
}

Tensor sum_all(const Tensor& x) { return sum_over_axis(x.rank() == 1 ? x : reshape(x, {x.size()}), 0); }

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  OpAttrs a;
  a.axis = axis;
  return apply(OpKind::concat, parts, a);
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  OpAttrs a;
  a.axis = axis;
  a.begin = begin;
  a.end = end;
  return apply1(OpKind::slice, x, a);
}

Tensor transpose(const Tensor& x) { return apply1(OpKind::transpose, x); }

Tensor scale(const Tensor& x, double factor) {
  OpAttrs a;
  a.scalar = factor;
  return apply1(OpKind::scalar_multiply, x, a);
}

Tensor l2_norm(const Tensor& x) { return apply1(OpKind::l2_norm, x); }
Tensor cosine_similarity(const Tensor& a, const Tensor& b) { return apply2(OpKind::cosine_similarity, a, b); }

Tensor reshape(const Tensor& x, Shape shape) {
  OpAttrs a;
  a.shape = std::move(shape);
  return apply1(OpKind::reshape, x, a);
}

Tensor gather_rows(const Tensor& x, std::vector<std::size_t> rows) {
  OpAttrs a;
  a.indices = std::move(rows);
  return apply1(OpKind::gather_rows, x, a);
}

Tensor scatter_rows(const Tensor& x, std::vector<std::size_t> rows, std::size_t n_rows) {
  OpAttrs a;
  a.indices = std::move(rows);
  a.rows = n_rows;
  return apply1(OpKind::scatter_rows, x, a);
}

}  // namespace darkfarseer::ad

// SPDX-License-Identifier: Apache-2.0
#include "hvsgnn/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <string>

#include "hvsgnn/error.hpp"

namespace hvsgnn {

struct Tensor::Impl {
  Shape shape;
  std::vector<double> values;
  bool requires_grad = false;
};

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

thread_local Tape* g_active_tape = nullptr;

std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

[[noreturn]] void shape_fail(std::string_view op, const std::string& detail) {
  throw ShapeError(std::string(op) + ": " + detail);
}

void require_rank2(std::string_view op, const Tensor& t) {
  if (t.rank() != 2) shape_fail(op, "expected a rank-2 tensor, got " + shape_str(t.shape()));
}

void require_same_shape(std::string_view op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    shape_fail(op, "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

/// Wraps a freshly computed value; records it when a tape is active and any
/// input carries gradient history.
Tensor finish(OpKind kind, std::vector<Tensor> inputs, Shape shape,
              std::vector<double> values, BackwardFn backward) {
  Tape* tape = Tape::active();
  const bool track =
      tape != nullptr && std::any_of(inputs.begin(), inputs.end(),
                                     [](const Tensor& t) { return t.requires_grad(); });
  Tensor out(std::move(shape), std::move(values), track);
  if (track) tape->record(kind, std::move(inputs), out, std::move(backward));
  return out;
}

template <typename Fn, typename Deriv>
Tensor unary(OpKind kind, const Tensor& a, Fn fn, Deriv deriv) {
  auto in = a.values();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fn(in[i]);
  return finish(kind, {a}, a.shape(), std::move(out),
                [a, deriv](std::span<const double> g, std::span<std::vector<double>*> gin) {
                  auto x = a.values();
                  auto& ga = *gin[0];
                  for (std::size_t i = 0; i < x.size(); ++i) ga[i] += g[i] * deriv(x[i]);
                });
}

double sigmoid_value(double x) {
  // Split by sign so exp never overflows.
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

// ---- Tensor ------------------------------------------------------------------

Tensor::Tensor() : impl_(std::make_shared<Impl>(Impl{{}, {0.0}, false})) {}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_size(shape) != values.size()) {
    throw ShapeError("tensor of shape " + shape_str(shape) + " given " +
                     std::to_string(values.size()) + " values");
  }
  impl_ = std::make_shared<Impl>(Impl{std::move(shape), std::move(values), requires_grad});
}

Tensor Tensor::scalar(double v, bool requires_grad) { return Tensor({}, {v}, requires_grad); }

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double v) {
  const std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return Tensor({rows, cols}, std::move(values), requires_grad);
}

Tensor Tensor::from_matrix(const Matrix& m, bool requires_grad) {
  return Tensor({m.rows, m.cols}, m.data, requires_grad);
}

const Shape& Tensor::shape() const { return impl_->shape; }
std::size_t Tensor::size() const { return impl_->values.size(); }

std::size_t Tensor::rows() const {
  const Shape& s = shape();
  if (s.size() == 2) return s[0];
  return 1;
}

std::size_t Tensor::cols() const {
  const Shape& s = shape();
  if (s.size() == 2) return s[1];
  if (s.size() == 1) return s[0];
  return 1;
}

std::span<const double> Tensor::values() const { return impl_->values; }
std::span<double> Tensor::mutable_values() { return impl_->values; }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on a tensor with " + std::to_string(size()) + " values");
  return impl_->values[0];
}

Matrix Tensor::to_matrix() const { return Matrix(rows(), cols(), impl_->values); }

bool Tensor::requires_grad() const { return impl_->requires_grad; }

Tensor Tensor::detach() const { return Tensor(shape(), impl_->values, false); }

// ---- Tape --------------------------------------------------------------------

std::ptrdiff_t Tape::find(const Tensor& t) const {
  auto it = index_.find(t.id());
  return it == index_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
}

void Tape::record(OpKind kind, std::vector<Tensor> inputs, const Tensor& output,
                  BackwardFn backward) {
  index_.emplace(output.id(), records_.size());
  records_.push_back(Record{kind, std::move(inputs), output, std::move(backward)});
}

Tape* Tape::active() { return g_active_tape; }

Tape::Scope::Scope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
Tape::Scope::~Scope() { g_active_tape = previous_; }

std::vector<double> GradientMap::at(const Tensor& t) const {
  if (const auto* g = find(t)) return *g;
  return std::vector<double>(t.size(), 0.0);
}

const std::vector<double>* GradientMap::find(const Tensor& t) const {
  auto it = grads_.find(t.id());
  return it == grads_.end() ? nullptr : &it->second;
}

std::vector<double>& GradientMap::slot(const Tensor& t) {
  auto [it, inserted] = grads_.try_emplace(t.id());
  if (inserted) it->second.assign(t.size(), 0.0);
  return it->second;
}

GradientMap backward(const Tape& tape, const Tensor& loss) {
  if (loss.size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));
  }
  const std::ptrdiff_t top = tape.find(loss);
  if (top < 0) throw Error("backward: loss is not on the tape");

  GradientMap grads;
  grads.slot(loss)[0] = 1.0;
  std::vector<std::vector<double>*> gin;
  for (std::ptrdiff_t i = top; i >= 0; --i) {
    const Tape::Record& rec = tape[static_cast<std::size_t>(i)];
    const std::vector<double>* gout = grads.find(rec.output);
    if (gout == nullptr) continue;
    gin.assign(rec.inputs.size(), nullptr);
    for (std::size_t k = 0; k < rec.inputs.size(); ++k) {
      if (rec.inputs[k].requires_grad()) gin[k] = &grads.slot(rec.inputs[k]);
    }
    rec.backward(*gout, gin);
  }
  return grads;
}

// ---- Primary ops -------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) {
    shape_fail("matmul", "inner dimensions differ: " + shape_str(a.shape()) + " x " +
                             shape_str(b.shape()));
  }
  std::vector<double> out(m * n);
  MutMap(out.data(), m, n).noalias() = ConstMap(a.values().data(), m, k) *
                                       ConstMap(b.values().data(), k, n);
  return finish(OpKind::kMatmul, {a, b}, {m, n}, std::move(out),
                [a, b, m, k, n](std::span<const double> g, std::span<std::vector<double>*> gin) {
                  ConstMap G(g.data(), m, n);
                  if (gin[0]) {
                    MutMap(gin[0]->data(), m, k).noalias() +=
                        G * ConstMap(b.values().data(), k, n).transpose();
                  }
                  if (gin[1]) {
                    MutMap(gin[1]->data(), k, n).noalias() +=
                        ConstMap(a.values().data(), m, k).transpose() * G;
                  }
                });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  auto x = a.values(), y = b.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return finish(OpKind::kAdd, {a, b}, a.shape(), std::move(out),
                [](std::span<const double> g, std::span<std::vector<double>*> gin) {
                  for (auto* gi : gin) {
                    if (!gi) continue;
                    for (std::size_t i = 0; i < g.size(); ++i) (*gi)[i] += g[i];
                  }
                });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  auto x = a.values(), y = b.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return finish(OpKind::kSub, {a, b}, a.shape(), std::move(out),
                [](std::span<const double> g, std::span<std::vector<double>*> gin) {
                  if (gin[0]) {
                    for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
                  }
                  if (gin[1]) {
                    for (std::size_t i = 0; i < g.size(); ++i) (*gin[1])[i] -= g[i];
                  }
                });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  auto x = a.values(), y = b.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return finish(OpKind::kMul, {a, b}, a.shape(), std::move(out),
                [a, b](std::span<const double> g, std::span<std::vector<double>*> gin) {
                  auto x = a.values(), y = b.values();
                  if (gin[0]) {
                    for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i] * y[i];
                  }
                  if (gin[1]) {
                    for (std::size_t i = 0; i < g.size(); ++i) (*gin[1])[i] += g[i] * x[i];
                  }
                });
}

Tensor scalar_mul(const Tensor& a, double s) {
  auto x = a.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = s * x[i];
  return finish(OpKind::kScalarMul, {a}, a.shape(), std::move(out),
                [s](std::span<const double> g, std::span<std::vector<double>*> gin) {
                  for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += s * g[i];
                });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) shape_fail("concat", "no inputs");
  if (axis > 1) shape_fail("concat", "axis must be 0 or 1");
  for (const Tensor& p : parts) require_rank2("concat", p);
  const std::size_t other = axis == 0 ? parts[0].cols() : parts[0].rows();
  std::size_t total = 0;
  for (const Tensor& p : parts) {
    const std::size_t o = axis == 0 ? p.cols() : p.rows();
    if (o != other) {
      shape_fail("concat", "inputs disagree off the concatenation axis: " +
                               shape_str(parts[0].shape()) + " vs " + shape_str(p.shape()));
    }
    total += axis == 0 ? p.rows() : p.cols();
  }
  const std::size_t rows = axis == 0 ? total : other;
  const std::size_t cols = axis == 0 ? other : total;
  std::vector<double> out(rows * cols);
  std::vector<std::size_t> starts;
  std::size_t pos = 0;
  for (const Tensor& p : parts) {
    starts.push_back(pos);
    auto v = p.values();
    if (axis == 0) {
      std::copy(v.begin(), v.end(), out.begin() + pos * cols);
      pos += p.rows();
    } else {
      const std::size_t w = p.cols();
      for (std::size_t r = 0; r < rows; ++r) {
        std::copy(v.begin() + r * w, v.begin() + (r + 1) * w, out.begin() + r * cols + pos);
      }
      pos += w;
    }
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  std::vector<std::size_t> widths;
  for (const Tensor& p : parts) widths.push_back(axis == 0 ? p.rows() : p.cols());
  return finish(OpKind::kConcat, std::move(inputs), {rows, cols}, std::move(out),
                [axis, rows, cols, starts, widths](std::span<const double> g,
                                                   std::span<std::vector<double>*> gin) {
                  for (std::size_t k = 0; k < gin.size(); ++k) {
                    if (!gin[k]) continue;
                    auto& gk = *gin[k];
                    if (axis == 0) {
                      const std::size_t off = starts[k] * cols;
                      for (std::size_t i = 0; i < gk.size(); ++i) gk[i] += g[off + i];
                    } else {
                      const std::size_t w = widths[k];
                      for (std::size_t r = 0; r < rows; ++r) {
                        for (std::size_t c = 0; c < w; ++c) {
                          gk[r * w + c] += g[r * cols + starts[k] + c];
                        }
                      }
                    }
                  }
                });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  require_rank2("slice", a);
  if (axis > 1) shape_fail("slice", "axis must be 0 or 1");
  const std::size_t extent = axis == 0 ? a.rows() : a.cols();
  if (begin > end || end > extent) {
    shape_fail("slice", "range [" + std::to_string(begin) + ", " + std::to_string(end) +
                            ") outside extent " + std::to_string(extent));
  }
  const std::size_t in_cols = a.cols();
  const std::size_t rows = axis == 0 ? end - begin : a.rows();
  const std::size_t cols = axis == 0 ? in_cols : end - begin;
  const std::size_t r0 = axis == 0 ? begin : 0;
  const std::size_t c0 = axis == 0 ? 0 : begin;
  auto v = a.values();
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = v[(r + r0) * in_cols + c + c0];
  }
  return finish(OpKind::kSlice, {a}, {rows, cols}, std::move(out),
                [rows, cols, r0, c0, in_cols](std::span<const double> g,
                                              std::span<std::vector<double>*> gin) {
                  auto& ga = *gin[0];
                  for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t c = 0; c < cols; ++c) {
                      ga[(r + r0) * in_cols + c + c0] += g[r * cols + c];
                    }
                  }
                });
}

Tensor reduce_sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return finish(OpKind::kReduceSum, {a}, {}, {s},
                [](std::span<const double> g, std::span<std::vector<double>*> gin) {
                  for (double& v : *gin[0]) v += g[0];
                });
}

Tensor reduce_mean(const Tensor& a) {
  if (a.size() == 0) shape_fail("reduce-mean", "empty tensor");
  double s = 0.0;
  for (double v : a.values()) s += v;
  const double n = static_cast<double>(a.size());
  return finish(OpKind::kReduceMean, {a}, {}, {s / n},
                [n](std::span<const double> g, std::span<std::vector<double>*> gin) {
                  for (double& v : *gin[0]) v += g[0] / n;
                });
}

Tensor relu(const Tensor& a) {
  return unary(
      OpKind::kRelu, a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(OpKind::kSigmoid, a, sigmoid_value, [](double x) {
    const double s = sigmoid_value(x);
    return s * (1.0 - s);
  });
}

Tensor tanh(const Tensor& a) {
  return unary(
      OpKind::kTanh, a, [](double x) { return std::tanh(x); },
      [](double x) {
        const double t = std::tanh(x);
        return 1.0 - t * t;
      });
}

Tensor identity(const Tensor& a) {
  return unary(
      OpKind::kIdentity, a, [](double x) { return x; }, [](double) { return 1.0; });
}

double fast_sigmoid_grad(double u, double slope) {
  const double d = slope * std::abs(u) + 1.0;
  return slope / (d * d);
}

Tensor spike_gate(const Tensor& m, const Tensor& threshold, double slope) {
  if (threshold.size() != 1) shape_fail("spike-gate", "threshold must hold a single value");
  const double th = threshold.values()[0];
  auto v = m.values();
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] >= th ? 1.0 : 0.0;
  return finish(OpKind::kSpikeGate, {m, threshold}, m.shape(), std::move(out),
                [m, th, slope](std::span<const double> g, std::span<std::vector<double>*> gin) {
                  auto v = m.values();
                  double gth = 0.0;
                  for (std::size_t i = 0; i < v.size(); ++i) {
                    const double s = g[i] * fast_sigmoid_grad(v[i] - th, slope);
                    if (gin[0]) (*gin[0])[i] += s;
                    gth += s;
                  }
                  if (gin[1]) (*gin[1])[0] -= gth;
                });
}

// ---- Support ops ---------------------------------------------------------------

Tensor add_scalar(const Tensor& a, double s) {
  auto x = a.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + s;
  return finish(OpKind::kAddScalar, {a}, a.shape(), std::move(out),
                [](std::span<const double> g, std::span<std::vector<double>*> gin) {
                  for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
                });
}

Tensor scale_by(const Tensor& x, const Tensor& s) {
  if (s.size() != 1) shape_fail("scale-by", "scale must hold a single value");
  const double k = s.values()[0];
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = k * xv[i];
  return finish(OpKind::kScaleBy, {x, s}, x.shape(), std::move(out),
                [x, k](std::span<const double> g, std::span<std::vector<double>*> gin) {
                  auto xv = x.values();
                  double gs = 0.0;
                  for (std::size_t i = 0; i < g.size(); ++i) {
                    if (gin[0]) (*gin[0])[i] += k * g[i];
                    gs += g[i] * xv[i];
                  }
                  if (gin[1]) (*gin[1])[0] += gs;
                });
}

Tensor add_row_vector(const Tensor& x, const Tensor& b) {
  require_rank2("add-row-vector", x);
  const std::size_t n = x.rows(), f = x.cols();
  if (b.size() != f) {
    shape_fail("add-row-vector", "bias of size " + std::to_string(b.size()) +
                                     " for " + std::to_string(f) + " columns");
  }
  auto xv = x.values(), bv = b.values();
  std::vector<double> out(n * f);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < f; ++c) out[r * f + c] = xv[r * f + c] + bv[c];
  }
  return finish(OpKind::kAddRowVector, {x, b}, x.shape(), std::move(out),
                [n, f](std::span<const double> g, std::span<std::vector<double>*> gin) {
                  if (gin[0]) {
                    for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
                  }
                  if (gin[1]) {
                    auto& gb = *gin[1];
                    for (std::size_t r = 0; r < n; ++r) {
                      for (std::size_t c = 0; c < f; ++c) gb[c] += g[r * f + c];
                    }
                  }
                });
}

Tensor mul_row_vector(const Tensor& x, const Tensor& v) {
  require_rank2("mul-row-vector", x);
  const std::size_t n = x.rows(), f = x.cols();
  if (v.size() != f) {
    shape_fail("mul-row-vector", "vector of size " + std::to_string(v.size()) + " for " +
                                     std::to_string(f) + " columns");
  }
  auto xv = x.values(), vv = v.values();
  std::vector<double> out(n * f);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < f; ++c) out[r * f + c] = xv[r * f + c] * vv[c];
  }
  return finish(OpKind::kMulRowVector, {x, v}, x.shape(), std::move(out),
                [x, v, n, f](std::span<const double> g, std::span<std::vector<double>*> gin) {
                  auto xv = x.values(), vv = v.values();
                  for (std::size_t r = 0; r < n; ++r) {
                    for (std::size_t c = 0; c < f; ++c) {
                      if (gin[0]) (*gin[0])[r * f + c] += g[r * f + c] * vv[c];
                      if (gin[1]) (*gin[1])[c] += g[r * f + c] * xv[r * f + c];
                    }
                  }
                });
}

Tensor scale_rows(const Tensor& x, std::span<const double> scale) {
  require_rank2("scale-rows", x);
  const std::size_t n = x.rows(), f = x.cols();
  if (scale.size() != n) {
    shape_fail("scale-rows", std::to_string(scale.size()) + " scales for " +
                                 std::to_string(n) + " rows");
  }
  auto xv = x.values();
  std::vector<double> out(n * f);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < f; ++c) out[r * f + c] = scale[r] * xv[r * f + c];
  }
  std::vector<double> s(scale.begin(), scale.end());
  return finish(OpKind::kScaleRows, {x}, x.shape(), std::move(out),
                [s = std::move(s), f](std::span<const double> g,
                                      std::span<std::vector<double>*> gin) {
                  auto& gx = *gin[0];
                  for (std::size_t r = 0; r < s.size(); ++r) {
                    for (std::size_t c = 0; c < f; ++c) gx[r * f + c] += s[r] * g[r * f + c];
                  }
                });
}

Tensor gather_rows(const Tensor& x, std::span<const std::int64_t> index) {
  require_rank2("gather-rows", x);
  const std::size_t n = x.rows(), f = x.cols();
  auto xv = x.values();
  std::vector<double> out(index.size() * f, 0.0);
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] < 0) continue;
    const auto r = static_cast<std::size_t>(index[k]);
    if (r >= n) {
      shape_fail("gather-rows", "row " + std::to_string(r) + " out of range for " +
                                    std::to_string(n) + " rows");
    }
    std::copy(xv.begin() + r * f, xv.begin() + (r + 1) * f, out.begin() + k * f);
  }
  std::vector<std::int64_t> idx(index.begin(), index.end());
  return finish(OpKind::kGatherRows, {x}, {index.size(), f}, std::move(out),
                [idx = std::move(idx), f](std::span<const double> g,
                                          std::span<std::vector<double>*> gin) {
                  auto& gx = *gin[0];
                  for (std::size_t k = 0; k < idx.size(); ++k) {
                    if (idx[k] < 0) continue;
                    const auto r = static_cast<std::size_t>(idx[k]);
                    for (std::size_t c = 0; c < f; ++c) gx[r * f + c] += g[k * f + c];
                  }
                });
}

namespace {

void check_offsets(std::string_view op, const Tensor& x, std::span<const std::size_t> offsets) {
  require_rank2(op, x);
  if (offsets.empty() || offsets.front() != 0 || offsets.back() != x.rows()) {
    shape_fail(op, "segment offsets must start at 0 and end at the row count " +
                       std::to_string(x.rows()));
  }
  for (std::size_t s = 1; s < offsets.size(); ++s) {
    if (offsets[s] < offsets[s - 1]) shape_fail(op, "segment offsets must be non-decreasing");
  }
}

}  // namespace

Tensor segment_reduce(const Tensor& x, std::span<const std::size_t> offsets,
                      SegmentReduce how) {
  static constexpr OpKind kKinds[] = {OpKind::kSegmentSum, OpKind::kSegmentMean,
                                      OpKind::kSegmentMax, OpKind::kSegmentMin};
  const OpKind kind = kKinds[static_cast<int>(how)];
  check_offsets(op_name(kind), x, offsets);
  const std::size_t segments = offsets.size() - 1, f = x.cols();
  auto xv = x.values();
  std::vector<double> out(segments * f, 0.0);
  // For max/min, the winning row per output cell (first in row order on ties).
  std::vector<std::size_t> arg;
  if (how == SegmentReduce::kMax || how == SegmentReduce::kMin) arg.assign(segments * f, 0);
  for (std::size_t s = 0; s < segments; ++s) {
    const std::size_t b = offsets[s], e = offsets[s + 1];
    if (b == e) continue;
    for (std::size_t c = 0; c < f; ++c) {
      double acc = xv[b * f + c];
      std::size_t best = b;
      for (std::size_t r = b + 1; r < e; ++r) {
        const double v = xv[r * f + c];
        switch (how) {
          case SegmentReduce::kSum:
          case SegmentReduce::kMean: acc += v; break;
          case SegmentReduce::kMax:
            if (v > acc) acc = v, best = r;
            break;
          case SegmentReduce::kMin:
            if (v < acc) acc = v, best = r;
            break;
        }
      }
      if (how == SegmentReduce::kMean) acc /= static_cast<double>(e - b);
      out[s * f + c] = acc;
      if (!arg.empty()) arg[s * f + c] = best;
    }
  }
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  return finish(kind, {x}, {segments, f}, std::move(out),
                [how, off = std::move(off), arg = std::move(arg), f](
                    std::span<const double> g, std::span<std::vector<double>*> gin) {
                  auto& gx = *gin[0];
                  const std::size_t segments = off.size() - 1;
                  for (std::size_t s = 0; s < segments; ++s) {
                    const std::size_t b = off[s], e = off[s + 1];
                    if (b == e) continue;
                    for (std::size_t c = 0; c < f; ++c) {
                      const double gs = g[s * f + c];
                      if (how == SegmentReduce::kMax || how == SegmentReduce::kMin) {
                        gx[arg[s * f + c] * f + c] += gs;
                        continue;
                      }
                      const double w =
                          how == SegmentReduce::kMean ? gs / static_cast<double>(e - b) : gs;
                      for (std::size_t r = b; r < e; ++r) gx[r * f + c] += w;
                    }
                  }
                });
}

Tensor segment_std(const Tensor& x, std::span<const std::size_t> offsets, double eps) {
  check_offsets("segment-std", x, offsets);
  if (!(eps > 0.0)) shape_fail("segment-std", "eps must be positive");
  const std::size_t segments = offsets.size() - 1, f = x.cols();
  auto xv = x.values();
  std::vector<double> out(segments * f, 0.0);
  std::vector<double> mean(segments * f, 0.0), root(segments * f, 0.0);
  const double root_eps = std::sqrt(eps);
  for (std::size_t s = 0; s < segments; ++s) {
    const std::size_t b = offsets[s], e = offsets[s + 1];
    if (b == e) continue;
    const double k = static_cast<double>(e - b);
    for (std::size_t c = 0; c < f; ++c) {
      double mu = 0.0;
      for (std::size_t r = b; r < e; ++r) mu += xv[r * f + c];
      mu /= k;
      double var = 0.0;
      for (std::size_t r = b; r < e; ++r) {
        const double d = xv[r * f + c] - mu;
        var += d * d;
      }
      var /= k;
      const double rt = std::sqrt(var + eps);
      mean[s * f + c] = mu;
      root[s * f + c] = rt;
      out[s * f + c] = rt - root_eps;
    }
  }
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  return finish(OpKind::kSegmentStd, {x}, {segments, f}, std::move(out),
                [x, off = std::move(off), mean = std::move(mean), root = std::move(root), f](
                    std::span<const double> g, std::span<std::vector<double>*> gin) {
                  auto& gx = *gin[0];
                  auto xv = x.values();
                  for (std::size_t s = 0; s + 1 < off.size(); ++s) {
                    const std::size_t b = off[s], e = off[s + 1];
                    if (b == e) continue;
                    const double k = static_cast<double>(e - b);
                    for (std::size_t c = 0; c < f; ++c) {
                      const double scale = g[s * f + c] / (k * root[s * f + c]);
                      for (std::size_t r = b; r < e; ++r) {
                        gx[r * f + c] += scale * (xv[r * f + c] - mean[s * f + c]);
                      }
                    }
                  }
                });
}

Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                  BatchStats* stats_out) {
  require_rank2("batch-norm", x);
  const std::size_t n = x.rows(), f = x.cols();
  if (n < 2) shape_fail("batch-norm", "training mode needs at least 2 rows");
  if (gamma.size() != f || beta.size() != f) {
    shape_fail("batch-norm", "affine parameters must have one entry per column");
  }
  auto xv = x.values(), gv = gamma.values(), bv = beta.values();
  std::vector<double> mean(f, 0.0), var(f, 0.0), inv_std(f);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < f; ++c) mean[c] += xv[r * f + c];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < f; ++c) {
      const double d = xv[r * f + c] - mean[c];
      var[c] += d * d;
    }
  }
  for (double& v : var) v /= static_cast<double>(n);
  for (std::size_t c = 0; c < f; ++c) inv_std[c] = 1.0 / std::sqrt(var[c] + eps);
  std::vector<double> xhat(n * f), out(n * f);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < f; ++c) {
      const double h = (xv[r * f + c] - mean[c]) * inv_std[c];
      xhat[r * f + c] = h;
      out[r * f + c] = gv[c] * h + bv[c];
    }
  }
  if (stats_out) *stats_out = BatchStats{mean, var};
  return finish(
      OpKind::kBatchNorm, {x, gamma, beta}, x.shape(), std::move(out),
      [gamma, xhat = std::move(xhat), inv_std = std::move(inv_std), n, f](
          std::span<const double> g, std::span<std::vector<double>*> gin) {
        auto gv = gamma.values();
        std::vector<double> sum_g(f, 0.0), sum_gx(f, 0.0);
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t c = 0; c < f; ++c) {
            sum_g[c] += g[r * f + c];
            sum_gx[c] += g[r * f + c] * xhat[r * f + c];
          }
        }
        if (gin[1]) {
          for (std::size_t c = 0; c < f; ++c) (*gin[1])[c] += sum_gx[c];
        }
        if (gin[2]) {
          for (std::size_t c = 0; c < f; ++c) (*gin[2])[c] += sum_g[c];
        }
        if (gin[0]) {
          const double dn = static_cast<double>(n);
          auto& gx = *gin[0];
          for (std::size_t r = 0; r < n; ++r) {
            for (std::size_t c = 0; c < f; ++c) {
              gx[r * f + c] += gv[c] * inv_std[c] / dn *
                               (dn * g[r * f + c] - sum_g[c] - xhat[r * f + c] * sum_gx[c]);
            }
          }
        }
      });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    shape_fail("reshape", "cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  std::vector<double> out(a.values().begin(), a.values().end());
  return finish(OpKind::kReshape, {a}, std::move(shape), std::move(out),
                [](std::span<const double> g, std::span<std::vector<double>*> gin) {
                  for (std::size_t i = 0; i < g.size(); ++i) (*gin[0])[i] += g[i];
                });
}

// ---- Dispatch ------------------------------------------------------------------

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "elementwise-mul";
    case OpKind::kScalarMul: return "scalar-mul";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kReduceSum: return "reduce-sum";
    case OpKind::kReduceMean: return "reduce-mean";
    case OpKind::kRelu: return "relu";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kIdentity: return "identity";
    case OpKind::kSpikeGate: return "spike-gate";
    case OpKind::kAddScalar: return "add-scalar";
    case OpKind::kAddRowVector: return "add-row-vector";
    case OpKind::kScaleRows: return "scale-rows";
    case OpKind::kGatherRows: return "gather-rows";
    case OpKind::kSegmentSum: return "segment-sum";
    case OpKind::kSegmentMean: return "segment-mean";
    case OpKind::kSegmentMax: return "segment-max";
    case OpKind::kSegmentMin: return "segment-min";
    case OpKind::kSegmentStd: return "segment-std";
    case OpKind::kBatchNorm: return "batch-norm";
    case OpKind::kReshape: return "reshape";
    case OpKind::kScaleBy: return "scale-by";
    case OpKind::kMulRowVector: return "mul-row-vector";
  }
  return "unknown";
}

OpKind parse_op_kind(std::string_view id) {
  for (int k = 0; k <= static_cast<int>(OpKind::kSpikeGate); ++k) {
    const auto kind = static_cast<OpKind>(k);
    if (op_name(kind) == id) return kind;
  }
  throw Error("unknown op id \"" + std::string(id) + "\"");
}

Tensor forward_op(OpKind kind, std::span<const Tensor> inputs, const OpAttrs& attrs) {
  const auto arity = [&](std::size_t n) {
    if (inputs.size() != n) {
      shape_fail(op_name(kind), "expects " + std::to_string(n) + " inputs, got " +
                                    std::to_string(inputs.size()));
    }
  };
  switch (kind) {
    case OpKind::kMatmul: arity(2); return matmul(inputs[0], inputs[1]);
    case OpKind::kAdd: arity(2); return add(inputs[0], inputs[1]);
    case OpKind::kSub: arity(2); return sub(inputs[0], inputs[1]);
    case OpKind::kMul: arity(2); return mul(inputs[0], inputs[1]);
    case OpKind::kScalarMul: arity(1); return scalar_mul(inputs[0], attrs.scalar);
    case OpKind::kConcat: return concat(inputs, attrs.axis);
    case OpKind::kSlice: arity(1); return slice(inputs[0], attrs.axis, attrs.begin, attrs.end);
    case OpKind::kReduceSum: arity(1); return reduce_sum(inputs[0]);
    case OpKind::kReduceMean: arity(1); return reduce_mean(inputs[0]);
    case OpKind::kRelu: arity(1); return relu(inputs[0]);
    case OpKind::kSigmoid: arity(1); return sigmoid(inputs[0]);
    case OpKind::kTanh: arity(1); return tanh(inputs[0]);
    case OpKind::kIdentity: arity(1); return identity(inputs[0]);
    case OpKind::kSpikeGate:
      arity(2);
      return spike_gate(inputs[0], inputs[1], attrs.surrogate_slope);
    default:
      throw Error("op \"" + std::string(op_name(kind)) +
                  "\" takes non-tensor arguments; call it directly");
  }
}

// ---- Gradient check ------------------------------------------------------------

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           double h, double tol) {
  Tensor leaf(x.shape(), std::vector<double>(x.values().begin(), x.values().end()), true);
  std::vector<double> analytic(x.size(), 0.0);
  {
    Tape tape;
    Tape::Scope scope(tape);
    const Tensor y = f(leaf);
    if (y.size() != 1) throw ShapeError("grad_check: f must return a scalar");
    if (tape.find(y) >= 0) analytic = backward(tape, y).at(leaf);
  }
  GradCheckReport report;
  std::vector<double> probe(x.values().begin(), x.values().end());
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double fp = f(Tensor(x.shape(), probe)).item();
    probe[i] = orig - h;
    const double fm = f(Tensor(x.shape(), probe)).item();
    probe[i] = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double denom = std::max({1.0, std::abs(analytic[i]), std::abs(numeric)});
    const double d = std::abs(analytic[i] - numeric) / denom;
    if (d > report.max_discrepancy) {
      report.max_discrepancy = d;
      report.worst_index = i;
    }
  }
  report.passed = report.max_discrepancy <= tol;
  return report;
}

}  // namespace hvsgnn

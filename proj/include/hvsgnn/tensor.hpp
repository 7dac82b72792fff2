// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hvsgnn/graph.hpp"

namespace hvsgnn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);

/// Dense double-precision tensor. Copies share storage (handle semantics);
/// values are immutable once produced except for leaves updated in place by
/// an optimizer through mutable_values().
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);
  static Tensor from_matrix(const Matrix& m, bool requires_grad = false);

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  /// Rank-2 helpers; a rank-1 tensor is treated as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const;
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t r, std::size_t c) const { return values()[r * cols() + c]; }
  Matrix to_matrix() const;

  bool requires_grad() const;
  /// Same values, no gradient history.
  Tensor detach() const;
  /// Identity of the underlying storage, used as the gradient-map key.
  const void* id() const { return impl_.get(); }

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

enum class OpKind : std::uint8_t {
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kScalarMul,
  kConcat,
  kSlice,
  kReduceSum,
  kReduceMean,
  kRelu,
  kSigmoid,
  kTanh,
  kIdentity,
  kSpikeGate,
  // Graph and layer support ops.
  kAddScalar,
  kAddRowVector,
  kScaleRows,
  kGatherRows,
  kSegmentSum,
  kSegmentMean,
  kSegmentMax,
  kSegmentMin,
  kSegmentStd,
  kBatchNorm,
  kReshape,
  kScaleBy,
  kMulRowVector,
};

std::string_view op_name(OpKind kind);
/// Inverse of op_name for the primary ops ("matmul", "spike-gate", ...).
/// Throws Error on an unknown id.
OpKind parse_op_kind(std::string_view id);

/// Backward rule: receives d(loss)/d(output) and accumulates into the
/// gradient buffers of inputs that require grad (nullptr otherwise).
using BackwardFn =
    std::function<void(std::span<const double> grad_out, std::span<std::vector<double>*> grad_in)>;

/// Ordered record of differentiable operations. Records are appended in
/// execution order, so every input precedes its consumer.
class Tape {
 public:
  struct Record {
    OpKind kind;
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  std::size_t size() const { return records_.size(); }
  const Record& operator[](std::size_t i) const { return records_[i]; }
  /// Index of the record producing t, or -1.
  std::ptrdiff_t find(const Tensor& t) const;

  void record(OpKind kind, std::vector<Tensor> inputs, const Tensor& output,
              BackwardFn backward);

  /// The tape ops record onto from the current thread, or nullptr.
  static Tape* active();

  /// Activates a tape for the current thread for the scope's lifetime.
  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

 private:
  std::vector<Record> records_;
  std::unordered_map<const void*, std::size_t> index_;
};

/// Gradients keyed by tensor identity.
class GradientMap {
 public:
  bool contains(const Tensor& t) const { return grads_.count(t.id()) != 0; }
  /// Gradient of t; zeros of t's size if t received none.
  std::vector<double> at(const Tensor& t) const;
  const std::vector<double>* find(const Tensor& t) const;
  std::vector<double>& slot(const Tensor& t);
  std::size_t size() const { return grads_.size(); }

 private:
  std::unordered_map<const void*, std::vector<double>> grads_;
};

/// Reverse traversal of the tape from a scalar loss.
GradientMap backward(const Tape& tape, const Tensor& loss);

// ---- Primary ops -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, double s);
/// Rank-2 concatenation along axis 0 (rows) or 1 (columns).
Tensor concat(std::span<const Tensor> parts, std::size_t axis);
/// Rank-2 slice [begin, end) along the given axis.
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);
Tensor reduce_sum(const Tensor& a);
Tensor reduce_mean(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor identity(const Tensor& a);

/// Heaviside step H(m - threshold) in the forward pass; the backward pass
/// uses the fast-sigmoid derivative k / (k|u| + 1)^2 at u = m - threshold.
/// threshold is a single-element tensor.
Tensor spike_gate(const Tensor& m, const Tensor& threshold, double slope);

/// d/du of the fast sigmoid surrogate.
double fast_sigmoid_grad(double u, double slope);

// ---- Support ops -----------------------------------------------------------

Tensor add_scalar(const Tensor& a, double s);
/// x times the single-element tensor s, differentiable in both.
Tensor scale_by(const Tensor& x, const Tensor& s);
/// x (n x f) + b (f) broadcast over rows.
Tensor add_row_vector(const Tensor& x, const Tensor& b);
/// x (n x f) * v (f) broadcast over rows, differentiable in both.
Tensor mul_row_vector(const Tensor& x, const Tensor& v);
/// Row i multiplied by the constant scale[i].
Tensor scale_rows(const Tensor& x, std::span<const double> scale);
/// Output row k is x[index[k]]; a negative index yields a zero row.
Tensor gather_rows(const Tensor& x, std::span<const std::int64_t> index);

enum class SegmentReduce { kSum, kMean, kMax, kMin };
/// Rows of x are grouped into contiguous segments [offsets[s], offsets[s+1]);
/// empty segments reduce to zero. Reductions run in row order.
Tensor segment_reduce(const Tensor& x, std::span<const std::size_t> offsets,
                      SegmentReduce how);
/// Per-segment, per-column sqrt(var + eps) - sqrt(eps) with population variance;
/// exactly zero for constant segments.
Tensor segment_std(const Tensor& x, std::span<const std::size_t> offsets, double eps);

struct BatchStats {
  std::vector<double> mean;
  std::vector<double> var;  // biased
};
/// Training-mode batch normalization over rows with affine gamma/beta.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps,
                  BatchStats* stats_out = nullptr);

Tensor reshape(const Tensor& a, Shape shape);

// ---- Generic dispatch --------------------------------------------------------

struct OpAttrs {
  double scalar = 1.0;           // scalar-mul
  double surrogate_slope = 25.0; // spike-gate
  std::size_t axis = 0;          // concat, slice
  std::size_t begin = 0;         // slice
  std::size_t end = 0;           // slice
};

/// Runs one of the primary ops by id. Throws ShapeError on non-conforming
/// inputs and Error for ops that are not dispatchable this way.
Tensor forward_op(OpKind kind, std::span<const Tensor> inputs, const OpAttrs& attrs = {});

// ---- Gradient checking -------------------------------------------------------

struct GradCheckReport {
  /// max |analytic - numeric| / max(1, |analytic|, |numeric|)
  double max_discrepancy = 0.0;
  std::size_t worst_index = 0;
  bool passed = true;
};

/// Central differences of a scalar-valued f around x, compared with the
/// tape gradient.
GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           double h = 1e-5, double tol = 1e-4);

}  // namespace hvsgnn

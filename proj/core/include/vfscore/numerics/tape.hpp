#ifndef VFSCORE_NUMERICS_TAPE_HPP_
#define VFSCORE_NUMERICS_TAPE_HPP_

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vfscore/numerics/tensor.hpp"

namespace vfscore::numerics {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid for the
// lifetime of the tape that produced it.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  std::size_t index() const { return index_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t index) : tape_(tape), index_(index) {}

  Tape* tape_ = nullptr;
  std::size_t index_ = 0;
};

// Reverse-mode automatic differentiation tape. Operations append nodes in
// execution order, which is a topological order by construction; backward()
// visits nodes exactly once in reverse. A tape is confined to one thread
// and is meant to be built, differentiated and dropped per training step.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf that does not receive gradients (inputs, frozen embeddings, masks).
  Var constant(Tensor value);
  // Leaf that accumulates gradients (trainable parameters).
  Var param(Tensor value);

  const Tensor& value(const Var& v) const;
  std::size_t size() const { return nodes_.size(); }
  void clear();

  // Runs reverse accumulation from a scalar loss. Throws ShapeError if the
  // loss is not a scalar.
  void backward(const Var& loss);

  // backward() + gradient lookup for each param, in order. Params not on the
  // computational path of the loss get zero tensors of their shape.
  std::vector<Tensor> gradients(const Var& loss, const std::vector<Var>& params);

  // Gradient of a single node after backward(); zeros if untouched.
  Tensor gradient(const Var& v) const;

 private:
  friend class TapeOps;
  struct Node {
    Tensor value;
    Tensor grad;  // empty until first accumulation
    bool needs_grad = false;
    std::function<void()> backward;
  };

  Var emplace(Tensor value, bool needs_grad, std::function<void()> backward,
              const char* op_name);
  Tensor& grad_slot(std::size_t idx);

  std::vector<Node> nodes_;
};

// ---- Differentiable operations ------------------------------------------
// All functions validate operand shapes and throw ShapeError on mismatch.
// Every output is checked for NaN/Inf and NonFiniteError is thrown with the
// operation name, so non-finite values never propagate silently.

Var matmul(const Var& a, const Var& b);  // [r x s] . [s x t] -> [r x t]
Var transpose(const Var& a);

Var add(const Var& a, const Var& b);  // same shape
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
// Adds a length-k vector to every row of an [n x k] matrix.
Var add_rowvec(const Var& a, const Var& b);
// Adds a scalar to every entry.
Var add_scalar(const Var& a, const Var& s);
Var scale(const Var& a, double c);
Var neg(const Var& a);

Var tanh(const Var& a);
Var relu(const Var& a);
Var abs(const Var& a);
Var log(const Var& a);
Var exp(const Var& a);
Var sigmoid(const Var& a);
Var softplus(const Var& a);  // log(1 + e^x), stable for large |x|

Var sum(const Var& a);   // -> scalar
Var mean(const Var& a);  // -> scalar

// Row-wise softmax with numerical stabilization by row-max subtraction.
// mask (same shape, entries 0 or 1) restricts each row to unmasked entries;
// masked outputs are exactly 0. A fully-masked row raises DegenerateError.
Var softmax_rows(const Var& a, const Tensor* mask = nullptr);

// log(softmax(row r of a))[c], computed via log-sum-exp. Preferred over
// log(pick(softmax_rows(a))) inside losses.
Var pick_log_softmax(const Var& a, std::size_t row, std::size_t col);

// Per-row layer normalization with learned gain/offset (length-k vectors).
Var layer_norm_rows(const Var& a, const Var& gain, const Var& offset,
                    double eps = 1e-5);

// u.v / (|u| |v|). Any shapes with equal element counts; ZeroNormError if
// either norm is zero.
Var cosine(const Var& u, const Var& v);

Var concat_cols(const std::vector<Var>& parts);       // [n x k_i] -> [n x sum k_i]
Var concat_scalars(const std::vector<Var>& scalars);  // -> [1 x n]
Var slice_cols(const Var& a, std::size_t c0, std::size_t c1);
Var reshape(const Var& a, std::vector<std::size_t> shape);
// Multiplies each row i by row_mask[i] (0 or 1).
Var mask_rows(const Var& a, const Tensor& row_mask);
Var pick(const Var& a, std::size_t r, std::size_t c);  // -> scalar

// Pairwise row combinations: output row i*b_rows+j combines row i of u with
// row j of v. Both operands are [.. x k].
Var pairwise_sum(const Var& u, const Var& v);
Var pairwise_diff(const Var& u, const Var& v);
Var pairwise_mul(const Var& u, const Var& v);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }

// ---- Value-only kernels ---------------------------------------------------
// The same kernels the tape ops run, for callers that need plain tensors.

Tensor matmul_value(const Tensor& a, const Tensor& b);
Tensor softmax_rows_value(const Tensor& a, const Tensor* mask = nullptr);
double cosine_value(const Tensor& u, const Tensor& v);

}  // namespace vfscore::numerics

#endif  // VFSCORE_NUMERICS_TAPE_HPP_

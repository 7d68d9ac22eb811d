#include "vfscore/numerics/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "vfscore/common/errors.hpp"

namespace vfscore::numerics {

namespace {

void accumulate(Tensor& slot, const Tensor& delta) {
  for (std::size_t i = 0; i < slot.size(); ++i) slot.at(i) += delta.at(i);
}

Tape* same_tape(const Var& a, const Var& b) {
  if (!a.valid() || !b.valid() || a.tape() != b.tape()) {
    throw std::logic_error("operands recorded on different tapes");
  }
  return a.tape();
}

}  // namespace

// Internal accessor shim; befriended by Tape.
class TapeOps {
 public:
  static const Tensor& value(Tape* t, std::size_t i) {
    return t->nodes_[i].value;
  }
  static Tensor& grad(Tape* t, std::size_t i) { return t->grad_slot(i); }
  static bool needs_grad(const Tape* t, std::size_t i) {
    return t->nodes_[i].needs_grad;
  }
  static Var emplace(Tape* t, Tensor v, bool needs_grad,
                     std::function<void()> bw, const char* op) {
    return t->emplace(std::move(v), needs_grad, std::move(bw), op);
  }
};

namespace {

const Tensor& val(Tape* t, std::size_t i) { return TapeOps::value(t, i); }
Tensor& grd(Tape* t, std::size_t i) { return TapeOps::grad(t, i); }
bool wants(Tape* t, const Var& v) { return TapeOps::needs_grad(t, v.index()); }

}  // namespace

const Tensor& Var::value() const { return tape_->value(*this); }

Var Tape::constant(Tensor value) {
  return emplace(std::move(value), false, nullptr, "constant");
}

Var Tape::param(Tensor value) {
  return emplace(std::move(value), true, nullptr, "param");
}

const Tensor& Tape::value(const Var& v) const { return nodes_[v.index_].value; }

void Tape::clear() { nodes_.clear(); }

Var Tape::emplace(Tensor value, bool needs_grad, std::function<void()> backward,
                  const char* op_name) {
  if (!value.all_finite()) {
    throw NonFiniteError(std::string("operation '") + op_name +
                         "' produced NaN/Inf");
  }
  nodes_.push_back(Node{std::move(value), Tensor{}, needs_grad,
                        std::move(backward)});
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_slot(std::size_t idx) {
  Node& n = nodes_[idx];
  if (n.grad.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Tape::backward(const Var& loss) {
  if (!loss.valid() || loss.tape() != this) {
    throw std::logic_error("loss recorded on a different tape");
  }
  if (loss.value().size() != 1) {
    throw ShapeError("backward requires a scalar loss, got shape " +
                     loss.value().shape_str());
  }
  grad_slot(loss.index()).at(0) = 1.0;
  for (std::size_t i = loss.index() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && !n.grad.empty()) n.backward();
  }
}

std::vector<Tensor> Tape::gradients(const Var& loss,
                                    const std::vector<Var>& params) {
  backward(loss);
  std::vector<Tensor> out;
  out.reserve(params.size());
  for (const Var& p : params) out.push_back(gradient(p));
  return out;
}

Tensor Tape::gradient(const Var& v) const {
  const Node& n = nodes_[v.index()];
  if (n.grad.empty()) return Tensor(n.value.shape());
  return n.grad;
}

// ---- kernels ---------------------------------------------------------------

Tensor matmul_value(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw ShapeError("matmul of " + a.shape_str() + " by " + b.shape_str());
  }
  const std::size_t r = a.rows(), s = a.cols(), t = b.cols();
  Tensor c({r, t});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t k = 0; k < s; ++k) {
      const double aik = a.at(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < t; ++j) {
        c.at(i, j) += aik * b.at(k, j);
      }
    }
  }
  return c;
}

Tensor softmax_rows_value(const Tensor& a, const Tensor* mask) {
  if (mask && !mask->same_shape(a)) {
    throw ShapeError("softmax mask shape " + mask->shape_str() +
                     " does not match input " + a.shape_str());
  }
  const std::size_t r = a.rows(), c = a.cols();
  Tensor out(a.shape());
  for (std::size_t i = 0; i < r; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) {
      if (mask && mask->at(i, j) == 0.0) continue;
      mx = std::max(mx, a.at(i, j));
    }
    if (!std::isfinite(mx)) {
      throw DegenerateError("softmax row " + std::to_string(i) +
                            " is fully masked");
    }
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      if (mask && mask->at(i, j) == 0.0) continue;
      z += std::exp(a.at(i, j) - mx);
    }
    for (std::size_t j = 0; j < c; ++j) {
      if (mask && mask->at(i, j) == 0.0) {
        out.at(i, j) = 0.0;
      } else {
        out.at(i, j) = std::exp(a.at(i, j) - mx) / z;
      }
    }
  }
  return out;
}

double cosine_value(const Tensor& u, const Tensor& v) {
  if (u.size() != v.size()) {
    throw ShapeError("cosine of " + u.shape_str() + " and " + v.shape_str());
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u.at(i) * v.at(i);
    nu += u.at(i) * u.at(i);
    nv += v.at(i) * v.at(i);
  }
  if (nu == 0.0 || nv == 0.0) {
    throw ZeroNormError("cosine of a zero-norm vector");
  }
  return dot / (std::sqrt(nu) * std::sqrt(nv));
}

// ---- differentiable ops ------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  Tape* t = same_tape(a, b);
  Tensor c = matmul_value(a.value(), b.value());
  const bool na = wants(t, a), nb = wants(t, b);
  std::function<void()> bw;
  std::size_t out = t->size();
  if (na || nb) {
    bw = [t, ia = a.index(), ib = b.index(), out, na, nb]() {
      const Tensor& g = grd(t, out);
      const Tensor& A = val(t, ia);
      const Tensor& B = val(t, ib);
      if (na) {  // dA += G . B^T
        Tensor& da = grd(t, ia);
        for (std::size_t i = 0; i < A.rows(); ++i)
          for (std::size_t j = 0; j < B.cols(); ++j) {
            const double gij = g.at(i, j);
            if (gij == 0.0) continue;
            for (std::size_t k = 0; k < A.cols(); ++k)
              da.at(i, k) += gij * B.at(k, j);
          }
      }
      if (nb) {  // dB += A^T . G
        Tensor& db = grd(t, ib);
        for (std::size_t i = 0; i < A.rows(); ++i)
          for (std::size_t k = 0; k < A.cols(); ++k) {
            const double aik = A.at(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < B.cols(); ++j)
              db.at(k, j) += aik * g.at(i, j);
          }
      }
    };
  }
  return TapeOps::emplace(t, std::move(c), na || nb, std::move(bw), "matmul");
}

Var transpose(const Var& a) {
  Tape* t = a.tape();
  const Tensor& A = a.value();
  if (A.rank() != 2) throw ShapeError("transpose needs rank 2, got " + A.shape_str());
  Tensor c({A.cols(), A.rows()});
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) c.at(j, i) = A.at(i, j);
  const bool na = wants(t, a);
  std::function<void()> bw;
  std::size_t out = t->size();
  if (na) {
    bw = [t, ia = a.index(), out]() {
      const Tensor& g = grd(t, out);
      Tensor& da = grd(t, ia);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) da.at(j, i) += g.at(i, j);
    };
  }
  return TapeOps::emplace(t, std::move(c), na, std::move(bw), "transpose");
}

namespace {

Var binary_same_shape(const Var& a, const Var& b, const char* name,
                      double sign_b) {
  Tape* t = same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (!A.same_shape(B)) {
    throw ShapeError(std::string(name) + " of " + A.shape_str() + " and " +
                     B.shape_str());
  }
  Tensor c(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i)
    c.at(i) = A.at(i) + sign_b * B.at(i);
  const bool na = wants(t, a), nb = wants(t, b);
  std::function<void()> bw;
  std::size_t out = t->size();
  if (na || nb) {
    bw = [t, ia = a.index(), ib = b.index(), out, na, nb, sign_b]() {
      const Tensor& g = grd(t, out);
      if (na) accumulate(grd(t, ia), g);
      if (nb) {
        Tensor& db = grd(t, ib);
        for (std::size_t i = 0; i < g.size(); ++i)
          db.at(i) += sign_b * g.at(i);
      }
    };
  }
  return TapeOps::emplace(t, std::move(c), na || nb, std::move(bw), name);
}

}  // namespace

Var add(const Var& a, const Var& b) { return binary_same_shape(a, b, "add", 1.0); }
Var sub(const Var& a, const Var& b) { return binary_same_shape(a, b, "sub", -1.0); }

Var mul(const Var& a, const Var& b) {
  Tape* t = same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (!A.same_shape(B)) {
    throw ShapeError("mul of " + A.shape_str() + " and " + B.shape_str());
  }
  Tensor c(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) c.at(i) = A.at(i) * B.at(i);
  const bool na = wants(t, a), nb = wants(t, b);
  std::function<void()> bw;
  std::size_t out = t->size();
  if (na || nb) {
    bw = [t, ia = a.index(), ib = b.index(), out, na, nb]() {
      const Tensor& g = grd(t, out);
      const Tensor& A2 = val(t, ia);
      const Tensor& B2 = val(t, ib);
      if (na) {
        Tensor& da = grd(t, ia);
        for (std::size_t i = 0; i < g.size(); ++i)
          da.at(i) += g.at(i) * B2.at(i);
      }
      if (nb) {
        Tensor& db = grd(t, ib);
        for (std::size_t i = 0; i < g.size(); ++i)
          db.at(i) += g.at(i) * A2.at(i);
      }
    };
  }
  return TapeOps::emplace(t, std::move(c), na || nb, std::move(bw), "mul");
}

Var add_rowvec(const Var& a, const Var& b) {
  Tape* t = same_tape(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.rank() != 2 || B.size() != A.cols()) {
    throw ShapeError("add_rowvec of " + A.shape_str() + " and " + B.shape_str());
  }
  Tensor c(A.shape());
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j)
      c.at(i, j) = A.at(i, j) + B.at(j);
  const bool na = wants(t, a), nb = wants(t, b);
  std::function<void()> bw;
  std::size_t out = t->size();
  if (na || nb) {
    bw = [t, ia = a.index(), ib = b.index(), out, na, nb]() {
      const Tensor& g = grd(t, out);
      if (na) accumulate(grd(t, ia), g);
      if (nb) {
        Tensor& db = grd(t, ib);
        for (std::size_t i = 0; i < g.rows(); ++i)
          for (std::size_t j = 0; j < g.cols(); ++j) db.at(j) += g.at(i, j);
      }
    };
  }
  return TapeOps::emplace(t, std::move(c), na || nb, std::move(bw), "add_rowvec");
}

Var add_scalar(const Var& a, const Var& s) {
  Tape* t = same_tape(a, s);
  const Tensor& A = a.value();
  const double sv = s.value().item();
  Tensor c(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) c.at(i) = A.at(i) + sv;
  const bool na = wants(t, a), ns = wants(t, s);
  std::function<void()> bw;
  std::size_t out = t->size();
  if (na || ns) {
    bw = [t, ia = a.index(), is = s.index(), out, na, ns]() {
      const Tensor& g = grd(t, out);
      if (na) accumulate(grd(t, ia), g);
      if (ns) {
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) acc += g.at(i);
        grd(t, is).at(0) += acc;
      }
    };
  }
  return TapeOps::emplace(t, std::move(c), na || ns, std::move(bw), "add_scalar");
}

Var scale(const Var& a, double c) {
  Tape* t = a.tape();
  const Tensor& A = a.value();
  Tensor o(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) o.at(i) = c * A.at(i);
  const bool na = wants(t, a);
  std::function<void()> bw;
  std::size_t out = t->size();
  if (na) {
    bw = [t, ia = a.index(), out, c]() {
      const Tensor& g = grd(t, out);
      Tensor& da = grd(t, ia);
      for (std::size_t i = 0; i < g.size(); ++i) da.at(i) += c * g.at(i);
    };
  }
  return TapeOps::emplace(t, std::move(o), na, std::move(bw), "scale");
}

Var neg(const Var& a) { return scale(a, -1.0); }

namespace {

// Unary elementwise op: forward f(x), backward df(x, y) where y = f(x).
Var unary_op(const Var& a, const char* name, double (*f)(double),
             double (*df)(double, double)) {
  Tape* t = a.tape();
  const Tensor& A = a.value();
  Tensor o(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) o.at(i) = f(A.at(i));
  const bool na = wants(t, a);
  std::function<void()> bw;
  std::size_t out = t->size();
  if (na) {
    bw = [t, ia = a.index(), out, df]() {
      const Tensor& g = grd(t, out);
      const Tensor& X = val(t, ia);
      const Tensor& Y = val(t, out);
      Tensor& da = grd(t, ia);
      for (std::size_t i = 0; i < g.size(); ++i)
        da.at(i) += g.at(i) * df(X.at(i), Y.at(i));
    };
  }
  return TapeOps::emplace(t, std::move(o), na, std::move(bw), name);
}

double sigmoid_scalar(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

Var tanh(const Var& a) {
  return unary_op(
      a, "tanh", [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Var relu(const Var& a) {
  return unary_op(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var abs(const Var& a) {
  return unary_op(
      a, "abs", [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var log(const Var& a) {
  return unary_op(
      a, "log", [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Var exp(const Var& a) {
  return unary_op(
      a, "exp", [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Var sigmoid(const Var& a) {
  return unary_op(
      a, "sigmoid", sigmoid_scalar,
      [](double, double y) { return y * (1.0 - y); });
}

Var softplus(const Var& a) {
  return unary_op(
      a, "softplus",
      [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); },
      [](double x, double) { return sigmoid_scalar(x); });
}

Var sum(const Var& a) {
  Tape* t = a.tape();
  const Tensor& A = a.value();
  double s = 0.0;
  for (std::size_t i = 0; i < A.size(); ++i) s += A.at(i);
  const bool na = wants(t, a);
  std::function<void()> bw;
  std::size_t out = t->size();
  if (na) {
    bw = [t, ia = a.index(), out]() {
      const double g = grd(t, out).at(0);
      Tensor& da = grd(t, ia);
      for (std::size_t i = 0; i < da.size(); ++i) da.at(i) += g;
    };
  }
  return TapeOps::emplace(t, Tensor::scalar(s), na, std::move(bw), "sum");
}

Var mean(const Var& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var softmax_rows(const Var& a, const Tensor* mask) {
  Tape* t = a.tape();
  Tensor y = softmax_rows_value(a.value(), mask);
  const bool na = wants(t, a);
  std::function<void()> bw;
  std::size_t out = t->size();
  if (na) {
    Tensor mask_copy = mask ? *mask : Tensor{};
    bw = [t, ia = a.index(), out, mask_copy = std::move(mask_copy)]() {
      const Tensor& g = grd(t, out);
      const Tensor& Y = val(t, out);
      Tensor& da = grd(t, ia);
      const bool masked = !mask_copy.empty();
      for (std::size_t i = 0; i < Y.rows(); ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < Y.cols(); ++j)
          dot += g.at(i, j) * Y.at(i, j);
        for (std::size_t j = 0; j < Y.cols(); ++j) {
          if (masked && mask_copy.at(i, j) == 0.0) continue;
          da.at(i, j) += Y.at(i, j) * (g.at(i, j) - dot);
        }
      }
    };
  }
  return TapeOps::emplace(t, std::move(y), na, std::move(bw), "softmax_rows");
}

Var pick_log_softmax(const Var& a, std::size_t row, std::size_t col) {
  Tape* t = a.tape();
  const Tensor& A = a.value();
  if (row >= A.rows() || col >= A.cols()) {
    throw ShapeError("pick_log_softmax index out of range for " + A.shape_str());
  }
  double mx = A.at(row, 0);
  for (std::size_t j = 1; j < A.cols(); ++j) mx = std::max(mx, A.at(row, j));
  double z = 0.0;
  for (std::size_t j = 0; j < A.cols(); ++j) z += std::exp(A.at(row, j) - mx);
  const double out_v = A.at(row, col) - mx - std::log(z);
  const bool na = wants(t, a);
  std::function<void()> bw;
  std::size_t out = t->size();
  if (na) {
    bw = [t, ia = a.index(), out, row, col]() {
      const double g = grd(t, out).at(0);
      const Tensor& A2 = val(t, ia);
      Tensor& da = grd(t, ia);
      double mx2 = A2.at(row, 0);
      for (std::size_t j = 1; j < A2.cols(); ++j)
        mx2 = std::max(mx2, A2.at(row, j));
      double z2 = 0.0;
      for (std::size_t j = 0; j < A2.cols(); ++j)
        z2 += std::exp(A2.at(row, j) - mx2);
      for (std::size_t j = 0; j < A2.cols(); ++j) {
        const double p = std::exp(A2.at(row, j) - mx2) / z2;
        da.at(row, j) += g * ((j == col ? 1.0 : 0.0) - p);
      }
    };
  }
  return TapeOps::emplace(t, Tensor::scalar(out_v), na, std::move(bw),
                          "pick_log_softmax");
}

Var layer_norm_rows(const Var& a, const Var& gain, const Var& offset,
                    double eps) {
  Tape* t = same_tape(a, gain);
  same_tape(gain, offset);
  const Tensor& A = a.value();
  const Tensor& G = gain.value();
  const Tensor& B = offset.value();
  if (A.rank() != 2 || G.size() != A.cols() || B.size() != A.cols()) {
    throw ShapeError("layer_norm_rows of " + A.shape_str() + " with gain " +
                     G.shape_str() + " offset " + B.shape_str());
  }
  const std::size_t n = A.rows(), k = A.cols();
  Tensor y(A.shape());
  Tensor xhat(A.shape());
  std::vector<double> inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < k; ++j) mu += A.at(i, j);
    mu /= static_cast<double>(k);
    double var = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double d = A.at(i, j) - mu;
      var += d * d;
    }
    var /= static_cast<double>(k);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < k; ++j) {
      xhat.at(i, j) = (A.at(i, j) - mu) * inv_std[i];
      y.at(i, j) = xhat.at(i, j) * G.at(j) + B.at(j);
    }
  }
  const bool na = wants(t, a), ng = wants(t, gain), nb = wants(t, offset);
  std::function<void()> bw;
  std::size_t out = t->size();
  if (na || ng || nb) {
    bw = [t, ia = a.index(), ig = gain.index(), ib = offset.index(), out, na,
          ng, nb, xhat = std::move(xhat), inv_std = std::move(inv_std)]() {
      const Tensor& g = grd(t, out);
      const Tensor& gv = val(t, ig);
      const std::size_t n2 = g.rows(), k2 = g.cols();
      if (ng) {
        Tensor& dg = grd(t, ig);
        for (std::size_t i = 0; i < n2; ++i)
          for (std::size_t j = 0; j < k2; ++j)
            dg.at(j) += g.at(i, j) * xhat.at(i, j);
      }
      if (nb) {
        Tensor& db = grd(t, ib);
        for (std::size_t i = 0; i < n2; ++i)
          for (std::size_t j = 0; j < k2; ++j) db.at(j) += g.at(i, j);
      }
      if (na) {
        Tensor& da = grd(t, ia);
        for (std::size_t i = 0; i < n2; ++i) {
          double m1 = 0.0, m2 = 0.0;
          for (std::size_t j = 0; j < k2; ++j) {
            const double gp = g.at(i, j) * gv.at(j);
            m1 += gp;
            m2 += gp * xhat.at(i, j);
          }
          m1 /= static_cast<double>(k2);
          m2 /= static_cast<double>(k2);
          for (std::size_t j = 0; j < k2; ++j) {
            const double gp = g.at(i, j) * gv.at(j);
            da.at(i, j) += (gp - m1 - xhat.at(i, j) * m2) * inv_std[i];
          }
        }
      }
    };
  }
  return TapeOps::emplace(t, std::move(y), na || ng || nb, std::move(bw),
                          "layer_norm_rows");
}

Var cosine(const Var& u, const Var& v) {
  Tape* t = same_tape(u, v);
  const double c = cosine_value(u.value(), v.value());
  const bool nu = wants(t, u), nv = wants(t, v);
  std::function<void()> bw;
  std::size_t out = t->size();
  if (nu || nv) {
    bw = [t, iu = u.index(), iv = v.index(), out, nu, nv]() {
      const double g = grd(t, out).at(0);
      const Tensor& U = val(t, iu);
      const Tensor& V = val(t, iv);
      double dot = 0.0, su = 0.0, sv = 0.0;
      for (std::size_t i = 0; i < U.size(); ++i) {
        dot += U.at(i) * V.at(i);
        su += U.at(i) * U.at(i);
        sv += V.at(i) * V.at(i);
      }
      const double norm_u = std::sqrt(su), norm_v = std::sqrt(sv);
      const double c2 = dot / (norm_u * norm_v);
      if (nu) {
        Tensor& du = grd(t, iu);
        for (std::size_t i = 0; i < U.size(); ++i)
          du.at(i) += g * (V.at(i) / (norm_u * norm_v) - c2 * U.at(i) / su);
      }
      if (nv) {
        Tensor& dv = grd(t, iv);
        for (std::size_t i = 0; i < V.size(); ++i)
          dv.at(i) += g * (U.at(i) / (norm_u * norm_v) - c2 * V.at(i) / sv);
      }
    };
  }
  return TapeOps::emplace(t, Tensor::scalar(c), nu || nv, std::move(bw),
                          "cosine");
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols of zero parts");
  Tape* t = parts.front().tape();
  const std::size_t n = parts.front().value().rows();
  std::size_t total = 0;
  bool needs = false;
  for (const Var& p : parts) {
    same_tape(parts.front(), p);
    const Tensor& P = p.value();
    if (P.rank() != 2 || P.rows() != n) {
      throw ShapeError("concat_cols row mismatch at " + P.shape_str());
    }
    total += P.cols();
    needs = needs || wants(t, p);
  }
  Tensor o({n, total});
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& P = p.value();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < P.cols(); ++j)
        o.at(i, off + j) = P.at(i, j);
    off += P.cols();
  }
  std::function<void()> bw;
  std::size_t out = t->size();
  if (needs) {
    std::vector<std::size_t> idx;
    std::vector<std::size_t> width;
    std::vector<bool> ng;
    for (const Var& p : parts) {
      idx.push_back(p.index());
      width.push_back(p.value().cols());
      ng.push_back(wants(t, p));
    }
    bw = [t, out, idx = std::move(idx), width = std::move(width),
          ng = std::move(ng)]() {
      const Tensor& g = grd(t, out);
      std::size_t off2 = 0;
      for (std::size_t p = 0; p < idx.size(); ++p) {
        if (ng[p]) {
          Tensor& dp = grd(t, idx[p]);
          for (std::size_t i = 0; i < g.rows(); ++i)
            for (std::size_t j = 0; j < width[p]; ++j)
              dp.at(i, j) += g.at(i, off2 + j);
        }
        off2 += width[p];
      }
    };
  }
  return TapeOps::emplace(t, std::move(o), needs, std::move(bw), "concat_cols");
}

Var concat_scalars(const std::vector<Var>& scalars) {
  if (scalars.empty()) throw ShapeError("concat_scalars of zero parts");
  Tape* t = scalars.front().tape();
  Tensor o({1, scalars.size()});
  bool needs = false;
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    same_tape(scalars.front(), scalars[i]);
    o.at(0, i) = scalars[i].value().item();
    needs = needs || wants(t, scalars[i]);
  }
  std::function<void()> bw;
  std::size_t out = t->size();
  if (needs) {
    std::vector<std::size_t> idx;
    std::vector<bool> ng;
    for (const Var& s : scalars) {
      idx.push_back(s.index());
      ng.push_back(wants(t, s));
    }
    bw = [t, out, idx = std::move(idx), ng = std::move(ng)]() {
      const Tensor& g = grd(t, out);
      for (std::size_t i = 0; i < idx.size(); ++i)
        if (ng[i]) grd(t, idx[i]).at(0) += g.at(0, i);
    };
  }
  return TapeOps::emplace(t, std::move(o), needs, std::move(bw),
                          "concat_scalars");
}

Var slice_cols(const Var& a, std::size_t c0, std::size_t c1) {
  Tape* t = a.tape();
  const Tensor& A = a.value();
  if (A.rank() != 2 || c0 >= c1 || c1 > A.cols()) {
    throw ShapeError("slice_cols [" + std::to_string(c0) + "," +
                     std::to_string(c1) + ") of " + A.shape_str());
  }
  Tensor o({A.rows(), c1 - c0});
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = c0; j < c1; ++j) o.at(i, j - c0) = A.at(i, j);
  const bool na = wants(t, a);
  std::function<void()> bw;
  std::size_t out = t->size();
  if (na) {
    bw = [t, ia = a.index(), out, c0]() {
      const Tensor& g = grd(t, out);
      Tensor& da = grd(t, ia);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j)
          da.at(i, c0 + j) += g.at(i, j);
    };
  }
  return TapeOps::emplace(t, std::move(o), na, std::move(bw), "slice_cols");
}

Var reshape(const Var& a, std::vector<std::size_t> shape) {
  Tape* t = a.tape();
  Tensor o = a.value().reshaped(std::move(shape));
  const bool na = wants(t, a);
  std::function<void()> bw;
  std::size_t out = t->size();
  if (na) {
    bw = [t, ia = a.index(), out]() {
      const Tensor& g = grd(t, out);
      Tensor& da = grd(t, ia);
      for (std::size_t i = 0; i < g.size(); ++i) da.at(i) += g.at(i);
    };
  }
  return TapeOps::emplace(t, std::move(o), na, std::move(bw), "reshape");
}

Var mask_rows(const Var& a, const Tensor& row_mask) {
  Tape* t = a.tape();
  const Tensor& A = a.value();
  if (A.rank() != 2 || row_mask.size() != A.rows()) {
    throw ShapeError("mask_rows of " + A.shape_str() + " with mask " +
                     row_mask.shape_str());
  }
  Tensor o(A.shape());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    const double m = row_mask.at(i);
    for (std::size_t j = 0; j < A.cols(); ++j) o.at(i, j) = m * A.at(i, j);
  }
  const bool na = wants(t, a);
  std::function<void()> bw;
  std::size_t out = t->size();
  if (na) {
    bw = [t, ia = a.index(), out, row_mask]() {
      const Tensor& g = grd(t, out);
      Tensor& da = grd(t, ia);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        const double m = row_mask.at(i);
        if (m == 0.0) continue;
        for (std::size_t j = 0; j < g.cols(); ++j)
          da.at(i, j) += m * g.at(i, j);
      }
    };
  }
  return TapeOps::emplace(t, std::move(o), na, std::move(bw), "mask_rows");
}

Var pick(const Var& a, std::size_t r, std::size_t c) {
  Tape* t = a.tape();
  const Tensor& A = a.value();
  if (r >= A.rows() || c >= A.cols()) {
    throw ShapeError("pick (" + std::to_string(r) + "," + std::to_string(c) +
                     ") out of range for " + A.shape_str());
  }
  const bool na = wants(t, a);
  std::function<void()> bw;
  std::size_t out = t->size();
  if (na) {
    bw = [t, ia = a.index(), out, r, c]() {
      grd(t, ia).at(r, c) += grd(t, out).at(0);
    };
  }
  return TapeOps::emplace(t, Tensor::scalar(A.at(r, c)), na, std::move(bw),
                          "pick");
}

namespace {

enum class PairwiseKind { kSum, kDiff, kMul };

Var pairwise_op(const Var& u, const Var& v, PairwiseKind kind,
                const char* name) {
  Tape* t = same_tape(u, v);
  const Tensor& U = u.value();
  const Tensor& V = v.value();
  if (U.rank() != 2 || V.rank() != 2 || U.cols() != V.cols()) {
    throw ShapeError(std::string(name) + " of " + U.shape_str() + " and " +
                     V.shape_str());
  }
  const std::size_t a = U.rows(), b = V.rows(), k = U.cols();
  Tensor o({a * b, k});
  for (std::size_t i = 0; i < a; ++i)
    for (std::size_t j = 0; j < b; ++j)
      for (std::size_t d = 0; d < k; ++d) {
        const double x = U.at(i, d), y = V.at(j, d);
        double r = 0.0;
        switch (kind) {
          case PairwiseKind::kSum: r = x + y; break;
          case PairwiseKind::kDiff: r = x - y; break;
          case PairwiseKind::kMul: r = x * y; break;
        }
        o.at(i * b + j, d) = r;
      }
  const bool nu = wants(t, u), nv = wants(t, v);
  std::function<void()> bw;
  std::size_t out = t->size();
  if (nu || nv) {
    bw = [t, iu = u.index(), iv = v.index(), out, nu, nv, kind, a, b, k]() {
      const Tensor& g = grd(t, out);
      const Tensor& U2 = val(t, iu);
      const Tensor& V2 = val(t, iv);
      if (nu) {
        Tensor& du = grd(t, iu);
        for (std::size_t i = 0; i < a; ++i)
          for (std::size_t j = 0; j < b; ++j)
            for (std::size_t d = 0; d < k; ++d) {
              const double gij = g.at(i * b + j, d);
              du.at(i, d) +=
                  kind == PairwiseKind::kMul ? gij * V2.at(j, d) : gij;
            }
      }
      if (nv) {
        Tensor& dv = grd(t, iv);
        for (std::size_t i = 0; i < a; ++i)
          for (std::size_t j = 0; j < b; ++j)
            for (std::size_t d = 0; d < k; ++d) {
              const double gij = g.at(i * b + j, d);
              switch (kind) {
                case PairwiseKind::kSum: dv.at(j, d) += gij; break;
                case PairwiseKind::kDiff: dv.at(j, d) -= gij; break;
                case PairwiseKind::kMul: dv.at(j, d) += gij * U2.at(i, d); break;
              }
            }
      }
    };
  }
  return TapeOps::emplace(t, std::move(o), nu || nv, std::move(bw), name);
}

}  // namespace

Var pairwise_sum(const Var& u, const Var& v) {
  return pairwise_op(u, v, PairwiseKind::kSum, "pairwise_sum");
}
Var pairwise_diff(const Var& u, const Var& v) {
  return pairwise_op(u, v, PairwiseKind::kDiff, "pairwise_diff");
}
Var pairwise_mul(const Var& u, const Var& v) {
  return pairwise_op(u, v, PairwiseKind::kMul, "pairwise_mul");
}

}  // namespace vfscore::numerics

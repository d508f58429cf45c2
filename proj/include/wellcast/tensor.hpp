// wellcast/tensor.hpp — dense 2-D tensors with tape-based reverse-mode autodiff.
//
// Design notes:
//  * Everything is a row-major [rows x cols] matrix of doubles. Column
//    vectors are [n x 1], row vectors [1 x n], scalars [1 x 1].
//  * Each thread owns one implicit Tape. Operations record a backward
//    closure when at least one operand is tracked (a parameter, or derived
//    from one on the current tape). backward() sweeps the tape in reverse
//    order — nodes are appended in execution order, so the reverse walk is
//    a valid reverse-topological order by construction — and clears it.
//  * Gradients accumulate into per-tensor buffers. backward() zeroes the
//    buffers of every tensor the tape touches before the sweep, so grads of
//    reachable tensors are exact, and a parameter created with
//    requires_grad keeps a zero buffer until some loss reaches it.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "wellcast/errors.hpp"
#include "wellcast/rng.hpp"

namespace wellcast {

class Tensor;

namespace detail {

struct TensorImpl {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first needed
  bool requires_grad = false;
  std::int64_t node = -1;        // index into the active tape
  std::uint64_t tape_gen = 0;    // generation that `node` belongs to
  std::uint64_t touch_gen = 0;   // dedup stamp used while recording

  std::size_t size() const { return data.size(); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

class Tape {
 public:
  static Tape& active() {
    thread_local Tape t;
    return t;
  }

  bool enabled() const { return no_grad_depth_ == 0; }
  std::uint64_t generation() const { return gen_; }

  // Temporarily disables recording (model evaluation, finite differences).
  class NoGradGuard {
   public:
    NoGradGuard() { ++Tape::active().no_grad_depth_; }
    ~NoGradGuard() { --Tape::active().no_grad_depth_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
  };

  // Registers a backward closure; `touched` lists every impl whose grad the
  // closure reads or writes (operands and output).
  std::int64_t record(std::function<void()> backward,
                      std::initializer_list<std::shared_ptr<detail::TensorImpl>> touched) {
    for (const auto& impl : touched) touch(impl);
    nodes_.push_back(std::move(backward));
    return static_cast<std::int64_t>(nodes_.size()) - 1;
  }

  std::int64_t record(std::function<void()> backward,
                      const std::vector<std::shared_ptr<detail::TensorImpl>>& touched) {
    for (const auto& impl : touched) touch(impl);
    nodes_.push_back(std::move(backward));
    return static_cast<std::int64_t>(nodes_.size()) - 1;
  }

  void backward(const Tensor& loss);

  std::size_t node_count() const { return nodes_.size(); }

  void clear() {
    nodes_.clear();
    touched_.clear();
    ++gen_;
  }

 private:
  void touch(const std::shared_ptr<detail::TensorImpl>& impl) {
    if (impl->touch_gen != gen_) {
      impl->touch_gen = gen_;
      touched_.push_back(impl);
    }
  }

  std::vector<std::function<void()>> nodes_;
  std::vector<std::shared_ptr<detail::TensorImpl>> touched_;
  int no_grad_depth_ = 0;
  std::uint64_t gen_ = 1;
};

class Tensor {
 public:
  Tensor() : impl_(std::make_shared<detail::TensorImpl>()) {}

  static Tensor zeros(int rows, int cols) {
    Tensor t;
    t.impl_->rows = rows;
    t.impl_->cols = cols;
    t.impl_->data.assign(static_cast<std::size_t>(rows) * cols, 0.0);
    return t;
  }

  static Tensor full(int rows, int cols, double value) {
    Tensor t = zeros(rows, cols);
    for (double& v : t.impl_->data) v = value;
    return t;
  }

  static Tensor from(int rows, int cols, std::vector<double> values) {
    if (values.size() != static_cast<std::size_t>(rows) * cols) {
      throw DimensionError("Tensor::from: " + std::to_string(values.size()) +
                           " values for shape [" + std::to_string(rows) + " x " +
                           std::to_string(cols) + "]");
    }
    Tensor t;
    t.impl_->rows = rows;
    t.impl_->cols = cols;
    t.impl_->data = std::move(values);
    return t;
  }

  static Tensor scalar(double v) { return from(1, 1, {v}); }
  static Tensor row(std::vector<double> v) {
    const int n = static_cast<int>(v.size());
    return from(1, n, std::move(v));
  }
  static Tensor column(std::vector<double> v) {
    const int n = static_cast<int>(v.size());
    return from(n, 1, std::move(v));
  }

  static Tensor identity(int n) {
    Tensor t = zeros(n, n);
    for (int i = 0; i < n; ++i) t.impl_->data[static_cast<std::size_t>(i) * n + i] = 1.0;
    return t;
  }

  // Uniform in ±bound, consumed in row-major order.
  static Tensor uniform(int rows, int cols, double bound, Rng& rng) {
    Tensor t = zeros(rows, cols);
    for (double& v : t.impl_->data) v = rng.uniform(-bound, bound);
    return t;
  }

  int rows() const { return impl_->rows; }
  int cols() const { return impl_->cols; }
  std::size_t size() const { return impl_->data.size(); }

  std::string shape_str() const {
    return "[" + std::to_string(rows()) + " x " + std::to_string(cols()) + "]";
  }

  double operator()(int r, int c) const {
    return impl_->data[static_cast<std::size_t>(r) * cols() + c];
  }
  double& operator()(int r, int c) {
    return impl_->data[static_cast<std::size_t>(r) * cols() + c];
  }

  double value() const {
    if (size() != 1) throw ContractError("Tensor::value: tensor " + shape_str() + " is not scalar");
    return impl_->data[0];
  }

  const std::vector<double>& data() const { return impl_->data; }
  std::vector<double>& data() { return impl_->data; }

  // Gradient buffer; allocated zero-filled on first access.
  const std::vector<double>& grad() const {
    impl_->ensure_grad();
    return impl_->grad;
  }
  std::vector<double>& grad() {
    impl_->ensure_grad();
    return impl_->grad;
  }
  double grad_at(int r, int c) const { return grad()[static_cast<std::size_t>(r) * cols() + c]; }

  Tensor& requires_grad(bool on = true) {
    impl_->requires_grad = on;
    if (on) impl_->ensure_grad();
    return *this;
  }
  bool requires_grad_flag() const { return impl_->requires_grad; }

  // Participates in gradient flow on the current tape.
  bool tracked() const {
    if (impl_->requires_grad) return true;
    return impl_->node >= 0 && impl_->tape_gen == Tape::active().generation();
  }

  std::int64_t node() const {
    return impl_->tape_gen == Tape::active().generation() ? impl_->node : -1;
  }

  // Deep copy of the values; the copy is untracked and carries no grad.
  Tensor clone() const {
    Tensor t;
    t.impl_->rows = rows();
    t.impl_->cols = cols();
    t.impl_->data = impl_->data;
    return t;
  }

  void zero_grad() { impl_->grad.assign(impl_->data.size(), 0.0); }

  void backward() const { Tape::active().backward(*this); }

  std::shared_ptr<detail::TensorImpl> impl() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

inline void Tape::backward(const Tensor& loss) {
  if (loss.size() != 1) {
    throw ContractError("backward: loss must be scalar, got " + loss.shape_str());
  }
  auto impl = loss.impl();
  if (impl->node < 0 || impl->tape_gen != gen_) {
    throw ContractError("backward: loss was not produced through taped operations");
  }
  for (const auto& t : touched_) t->grad.assign(t->data.size(), 0.0);
  impl->grad[0] = 1.0;
  for (std::size_t i = nodes_.size(); i > 0; --i) nodes_[i - 1]();
  clear();
}

inline void zero_grad(std::vector<std::pair<std::string, Tensor>>& params) {
  for (auto& [name, t] : params) t.zero_grad();
}

// ---------------------------------------------------------------------------
// Operation helpers
// ---------------------------------------------------------------------------

namespace detail {

inline void mark_output(Tensor& out, std::int64_t node_idx) {
  out.impl()->node = node_idx;
  out.impl()->tape_gen = Tape::active().generation();
}

inline void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// matmul and transpose
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions disagree " + a.shape_str() + " vs " +
                         b.shape_str());
  }
  const int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = Tensor::zeros(m, n);
  {
    const double* A = a.data().data();
    const double* B = b.data().data();
    double* C = out.data().data();
    for (int i = 0; i < m; ++i) {
      for (int kk = 0; kk < k; ++kk) {
        const double aik = A[static_cast<std::size_t>(i) * k + kk];
        if (aik == 0.0) continue;
        const double* Brow = B + static_cast<std::size_t>(kk) * n;
        double* Crow = C + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) Crow[j] += aik * Brow[j];
      }
    }
  }

  Tape& tape = Tape::active();
  const bool ta = tape.enabled() && a.tracked();
  const bool tb = tape.enabled() && b.tracked();
  if (ta || tb) {
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    if (ta) ai->ensure_grad();
    if (tb) bi->ensure_grad();
    oi->ensure_grad();
    auto idx = tape.record(
        [ai, bi, oi, ta, tb, m, k, n]() {
          const double* G = oi->grad.data();
          if (ta) {
            // dA[i,kk] += sum_j G[i,j] * B[kk,j]
            const double* B = bi->data.data();
            double* dA = ai->grad.data();
            for (int i = 0; i < m; ++i) {
              for (int kk = 0; kk < k; ++kk) {
                const double* Grow = G + static_cast<std::size_t>(i) * n;
                const double* Brow = B + static_cast<std::size_t>(kk) * n;
                double s = 0.0;
                for (int j = 0; j < n; ++j) s += Grow[j] * Brow[j];
                dA[static_cast<std::size_t>(i) * k + kk] += s;
              }
            }
          }
          if (tb) {
            // dB[kk,j] += sum_i A[i,kk] * G[i,j]
            const double* A = ai->data.data();
            double* dB = bi->grad.data();
            for (int i = 0; i < m; ++i) {
              const double* Grow = G + static_cast<std::size_t>(i) * n;
              for (int kk = 0; kk < k; ++kk) {
                const double aik = A[static_cast<std::size_t>(i) * k + kk];
                if (aik == 0.0) continue;
                double* dBrow = dB + static_cast<std::size_t>(kk) * n;
                for (int j = 0; j < n; ++j) dBrow[j] += aik * Grow[j];
              }
            }
          }
        },
        {ai, bi, oi});
    detail::mark_output(out, idx);
  }
  return out;
}

inline Tensor transpose(const Tensor& a) {
  const int m = a.rows(), n = a.cols();
  Tensor out = Tensor::zeros(n, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out(j, i) = a(i, j);

  Tape& tape = Tape::active();
  if (tape.enabled() && a.tracked()) {
    auto ai = a.impl(), oi = out.impl();
    ai->ensure_grad();
    oi->ensure_grad();
    auto idx = tape.record(
        [ai, oi, m, n]() {
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
              ai->grad[static_cast<std::size_t>(i) * n + j] +=
                  oi->grad[static_cast<std::size_t>(j) * m + i];
        },
        {ai, oi});
    detail::mark_output(out, idx);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise binary ops
// ---------------------------------------------------------------------------

namespace detail {

enum class BinKind { add, sub, mul };

inline Tensor binary_op(BinKind kind, const char* name, const Tensor& a, const Tensor& b) {
  require_same_shape(name, a, b);
  Tensor out = Tensor::zeros(a.rows(), a.cols());
  const std::size_t n = a.size();
  const double* A = a.data().data();
  const double* B = b.data().data();
  double* C = out.data().data();
  switch (kind) {
    case BinKind::add:
      for (std::size_t i = 0; i < n; ++i) C[i] = A[i] + B[i];
      break;
    case BinKind::sub:
      for (std::size_t i = 0; i < n; ++i) C[i] = A[i] - B[i];
      break;
    case BinKind::mul:
      for (std::size_t i = 0; i < n; ++i) C[i] = A[i] * B[i];
      break;
  }

  Tape& tape = Tape::active();
  const bool ta = tape.enabled() && a.tracked();
  const bool tb = tape.enabled() && b.tracked();
  if (ta || tb) {
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    if (ta) ai->ensure_grad();
    if (tb) bi->ensure_grad();
    oi->ensure_grad();
    auto idx = tape.record(
        [kind, ai, bi, oi, ta, tb, n]() {
          const double* G = oi->grad.data();
          switch (kind) {
            case BinKind::add:
              if (ta)
                for (std::size_t i = 0; i < n; ++i) ai->grad[i] += G[i];
              if (tb)
                for (std::size_t i = 0; i < n; ++i) bi->grad[i] += G[i];
              break;
            case BinKind::sub:
              if (ta)
                for (std::size_t i = 0; i < n; ++i) ai->grad[i] += G[i];
              if (tb)
                for (std::size_t i = 0; i < n; ++i) bi->grad[i] -= G[i];
              break;
            case BinKind::mul:
              if (ta)
                for (std::size_t i = 0; i < n; ++i) ai->grad[i] += G[i] * bi->data[i];
              if (tb)
                for (std::size_t i = 0; i < n; ++i) bi->grad[i] += G[i] * ai->data[i];
              break;
          }
        },
        {ai, bi, oi});
    detail::mark_output(out, idx);
  }
  return out;
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::binary_op(detail::BinKind::add, "add", a, b);
}
inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::binary_op(detail::BinKind::sub, "sub", a, b);
}
inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::binary_op(detail::BinKind::mul, "mul", a, b);
}

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }

// X [r x c] plus a broadcast row vector b [1 x c].
inline Tensor add_rowvec(const Tensor& x, const Tensor& b) {
  if (b.rows() != 1 || b.cols() != x.cols()) {
    throw DimensionError("add_rowvec: expected [1 x " + std::to_string(x.cols()) + "] bias, got " +
                         b.shape_str());
  }
  const int r = x.rows(), c = x.cols();
  Tensor out = Tensor::zeros(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out(i, j) = x(i, j) + b(0, j);

  Tape& tape = Tape::active();
  const bool tx = tape.enabled() && x.tracked();
  const bool tb = tape.enabled() && b.tracked();
  if (tx || tb) {
    auto xi = x.impl(), bi = b.impl(), oi = out.impl();
    if (tx) xi->ensure_grad();
    if (tb) bi->ensure_grad();
    oi->ensure_grad();
    auto idx = tape.record(
        [xi, bi, oi, tx, tb, r, c]() {
          const double* G = oi->grad.data();
          if (tx)
            for (std::size_t i = 0; i < static_cast<std::size_t>(r) * c; ++i) xi->grad[i] += G[i];
          if (tb)
            for (int i = 0; i < r; ++i)
              for (int j = 0; j < c; ++j) bi->grad[j] += G[static_cast<std::size_t>(i) * c + j];
        },
        {xi, bi, oi});
    detail::mark_output(out, idx);
  }
  return out;
}

// Multiplication by a plain constant (not a tracked tensor).
inline Tensor scale(const Tensor& a, double s) {
  Tensor out = Tensor::zeros(a.rows(), a.cols());
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * s;

  Tape& tape = Tape::active();
  if (tape.enabled() && a.tracked()) {
    auto ai = a.impl(), oi = out.impl();
    ai->ensure_grad();
    oi->ensure_grad();
    auto idx = tape.record(
        [ai, oi, s, n]() {
          for (std::size_t i = 0; i < n; ++i) ai->grad[i] += s * oi->grad[i];
        },
        {ai, oi});
    detail::mark_output(out, idx);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise activations
// ---------------------------------------------------------------------------

namespace detail {

inline double stable_sigmoid(double x) {
  if (x >= 0.0) {
    const double z = std::exp(-x);
    return 1.0 / (1.0 + z);
  }
  const double z = std::exp(x);
  return z / (1.0 + z);
}

// dy/dx expressed through the output y keeps the closures small.
template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& a, Fwd fwd, Bwd bwd_from_xy) {
  Tensor out = Tensor::zeros(a.rows(), a.cols());
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = fwd(a.data()[i]);

  Tape& tape = Tape::active();
  if (tape.enabled() && a.tracked()) {
    auto ai = a.impl(), oi = out.impl();
    ai->ensure_grad();
    oi->ensure_grad();
    auto idx = tape.record(
        [ai, oi, bwd_from_xy, n]() {
          for (std::size_t i = 0; i < n; ++i)
            ai->grad[i] += oi->grad[i] * bwd_from_xy(ai->data[i], oi->data[i]);
        },
        {ai, oi});
    detail::mark_output(out, idx);
  }
  return out;
}

}  // namespace detail

inline Tensor sigmoid(const Tensor& a) {
  return detail::unary_op(
      a, [](double x) { return detail::stable_sigmoid(x); },
      [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh(const Tensor& a) {
  return detail::unary_op(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

inline Tensor relu(const Tensor& a) {
  return detail::unary_op(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// softmax over rows
// ---------------------------------------------------------------------------

inline Tensor softmax_rows(const Tensor& x) {
  const int r = x.rows(), c = x.cols();
  Tensor out = Tensor::zeros(r, c);
  for (int i = 0; i < r; ++i) {
    double mx = x(i, 0);
    for (int j = 1; j < c; ++j) mx = std::max(mx, x(i, j));
    double sum = 0.0;
    for (int j = 0; j < c; ++j) {
      const double e = std::exp(x(i, j) - mx);
      out(i, j) = e;
      sum += e;
    }
    const double inv = 1.0 / sum;
    for (int j = 0; j < c; ++j) out(i, j) *= inv;
  }

  Tape& tape = Tape::active();
  if (tape.enabled() && x.tracked()) {
    auto xi = x.impl(), oi = out.impl();
    xi->ensure_grad();
    oi->ensure_grad();
    auto idx = tape.record(
        [xi, oi, r, c]() {
          // dx = y * (g - <g, y>) per row
          for (int i = 0; i < r; ++i) {
            const double* y = oi->data.data() + static_cast<std::size_t>(i) * c;
            const double* g = oi->grad.data() + static_cast<std::size_t>(i) * c;
            double dot = 0.0;
            for (int j = 0; j < c; ++j) dot += g[j] * y[j];
            double* dx = xi->grad.data() + static_cast<std::size_t>(i) * c;
            for (int j = 0; j < c; ++j) dx[j] += y[j] * (g[j] - dot);
          }
        },
        {xi, oi});
    detail::mark_output(out, idx);
  }
  return out;
}

// ---------------------------------------------------------------------------
// layer normalization over rows
// ---------------------------------------------------------------------------

// Rows standardized with population variance, eps inside the square root,
// then scaled by gamma and shifted by beta (both [1 x c]).
inline Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  if (eps <= 0.0) throw ContractError("layer_norm: eps must be positive");
  const int r = x.rows(), c = x.cols();
  if (gamma.rows() != 1 || gamma.cols() != c || beta.rows() != 1 || beta.cols() != c) {
    throw DimensionError("layer_norm: gamma/beta must be [1 x " + std::to_string(c) + "], got " +
                         gamma.shape_str() + " and " + beta.shape_str());
  }
  Tensor out = Tensor::zeros(r, c);
  // xhat and 1/sqrt(var+eps) are needed by the backward rule.
  auto xhat = std::make_shared<std::vector<double>>(static_cast<std::size_t>(r) * c);
  auto inv_std = std::make_shared<std::vector<double>>(r);
  for (int i = 0; i < r; ++i) {
    double mean = 0.0;
    for (int j = 0; j < c; ++j) mean += x(i, j);
    mean /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) {
      const double d = x(i, j) - mean;
      var += d * d;
    }
    var /= c;
    const double inv = 1.0 / std::sqrt(var + eps);
    (*inv_std)[i] = inv;
    for (int j = 0; j < c; ++j) {
      const double xh = (x(i, j) - mean) * inv;
      (*xhat)[static_cast<std::size_t>(i) * c + j] = xh;
      out(i, j) = gamma(0, j) * xh + beta(0, j);
    }
  }

  Tape& tape = Tape::active();
  const bool tx = tape.enabled() && x.tracked();
  const bool tg = tape.enabled() && gamma.tracked();
  const bool tb = tape.enabled() && beta.tracked();
  if (tx || tg || tb) {
    auto xi = x.impl(), gi = gamma.impl(), bi = beta.impl(), oi = out.impl();
    if (tx) xi->ensure_grad();
    if (tg) gi->ensure_grad();
    if (tb) bi->ensure_grad();
    oi->ensure_grad();
    auto idx = tape.record(
        [xi, gi, bi, oi, xhat, inv_std, tx, tg, tb, r, c]() {
          for (int i = 0; i < r; ++i) {
            const double* G = oi->grad.data() + static_cast<std::size_t>(i) * c;
            const double* xh = xhat->data() + static_cast<std::size_t>(i) * c;
            if (tg)
              for (int j = 0; j < c; ++j) gi->grad[j] += G[j] * xh[j];
            if (tb)
              for (int j = 0; j < c; ++j) bi->grad[j] += G[j];
            if (tx) {
              // dxhat = G * gamma; dx = inv*(dxhat - mean(dxhat) - xhat*mean(dxhat*xhat))
              double mean_dxh = 0.0, mean_dxh_xh = 0.0;
              for (int j = 0; j < c; ++j) {
                const double dxh = G[j] * gi->data[j];
                mean_dxh += dxh;
                mean_dxh_xh += dxh * xh[j];
              }
              mean_dxh /= c;
              mean_dxh_xh /= c;
              const double inv = (*inv_std)[i];
              double* dx = xi->grad.data() + static_cast<std::size_t>(i) * c;
              for (int j = 0; j < c; ++j) {
                const double dxh = G[j] * gi->data[j];
                dx[j] += inv * (dxh - mean_dxh - xh[j] * mean_dxh_xh);
              }
            }
          }
        },
        {xi, gi, bi, oi});
    detail::mark_output(out, idx);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Concatenation and slicing
// ---------------------------------------------------------------------------

inline Tensor vconcat(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) {
    throw DimensionError("vconcat: column mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
  const int c = a.cols(), ra = a.rows(), rb = b.rows();
  Tensor out = Tensor::zeros(ra + rb, c);
  std::copy(a.data().begin(), a.data().end(), out.data().begin());
  std::copy(b.data().begin(), b.data().end(), out.data().begin() + a.size());

  Tape& tape = Tape::active();
  const bool ta = tape.enabled() && a.tracked();
  const bool tb = tape.enabled() && b.tracked();
  if (ta || tb) {
    auto ai = a.impl(), bi = b.impl(), oi = out.impl();
    if (ta) ai->ensure_grad();
    if (tb) bi->ensure_grad();
    oi->ensure_grad();
    const std::size_t na = a.size(), nb = b.size();
    auto idx = tape.record(
        [ai, bi, oi, ta, tb, na, nb]() {
          if (ta)
            for (std::size_t i = 0; i < na; ++i) ai->grad[i] += oi->grad[i];
          if (tb)
            for (std::size_t i = 0; i < nb; ++i) bi->grad[i] += oi->grad[na + i];
        },
        {ai, bi, oi});
    detail::mark_output(out, idx);
  }
  (void)ra;
  (void)rb;
  return out;
}

inline Tensor hconcat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("hconcat: no tensors given");
  const int r = parts.front().rows();
  int total_cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != r)
      throw DimensionError("hconcat: row mismatch " + parts.front().shape_str() + " vs " +
                           p.shape_str());
    total_cols += p.cols();
  }
  Tensor out = Tensor::zeros(r, total_cols);
  int col0 = 0;
  for (const auto& p : parts) {
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < p.cols(); ++j) out(i, col0 + j) = p(i, j);
    col0 += p.cols();
  }

  Tape& tape = Tape::active();
  bool any = false;
  if (tape.enabled())
    for (const auto& p : parts) any = any || p.tracked();
  if (any) {
    auto oi = out.impl();
    oi->ensure_grad();
    struct Piece {
      std::shared_ptr<detail::TensorImpl> impl;
      int col0, cols;
      bool tracked;
    };
    auto pieces = std::make_shared<std::vector<Piece>>();
    std::vector<std::shared_ptr<detail::TensorImpl>> touched{oi};
    int c0 = 0;
    for (const auto& p : parts) {
      const bool tp = p.tracked();
      if (tp) {
        p.impl()->ensure_grad();
        touched.push_back(p.impl());
      }
      pieces->push_back({p.impl(), c0, p.cols(), tp});
      c0 += p.cols();
    }
    auto idx = tape.record(
        [pieces, oi, r, total_cols]() {
          for (const auto& piece : *pieces) {
            if (!piece.tracked) continue;
            for (int i = 0; i < r; ++i)
              for (int j = 0; j < piece.cols; ++j)
                piece.impl->grad[static_cast<std::size_t>(i) * piece.cols + j] +=
                    oi->grad[static_cast<std::size_t>(i) * total_cols + piece.col0 + j];
          }
        },
        touched);
    detail::mark_output(out, idx);
  }
  return out;
}

inline Tensor slice_rows(const Tensor& x, int r0, int r1) {
  if (r0 < 0 || r1 > x.rows() || r0 >= r1) {
    throw ContractError("slice_rows: invalid range [" + std::to_string(r0) + ", " +
                        std::to_string(r1) + ") for " + x.shape_str());
  }
  const int c = x.cols(), r = r1 - r0;
  Tensor out = Tensor::zeros(r, c);
  std::copy(x.data().begin() + static_cast<std::size_t>(r0) * c,
            x.data().begin() + static_cast<std::size_t>(r1) * c, out.data().begin());

  Tape& tape = Tape::active();
  if (tape.enabled() && x.tracked()) {
    auto xi = x.impl(), oi = out.impl();
    xi->ensure_grad();
    oi->ensure_grad();
    auto idx = tape.record(
        [xi, oi, r0, r, c]() {
          for (std::size_t i = 0; i < static_cast<std::size_t>(r) * c; ++i)
            xi->grad[static_cast<std::size_t>(r0) * c + i] += oi->grad[i];
        },
        {xi, oi});
    detail::mark_output(out, idx);
  }
  return out;
}

inline Tensor slice_cols(const Tensor& x, int c0, int c1) {
  if (c0 < 0 || c1 > x.cols() || c0 >= c1) {
    throw ContractError("slice_cols: invalid range [" + std::to_string(c0) + ", " +
                        std::to_string(c1) + ") for " + x.shape_str());
  }
  const int r = x.rows(), c = c1 - c0, xc = x.cols();
  Tensor out = Tensor::zeros(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out(i, j) = x(i, c0 + j);

  Tape& tape = Tape::active();
  if (tape.enabled() && x.tracked()) {
    auto xi = x.impl(), oi = out.impl();
    xi->ensure_grad();
    oi->ensure_grad();
    auto idx = tape.record(
        [xi, oi, r, c, c0, xc]() {
          for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j)
              xi->grad[static_cast<std::size_t>(i) * xc + c0 + j] +=
                  oi->grad[static_cast<std::size_t>(i) * c + j];
        },
        {xi, oi});
    detail::mark_output(out, idx);
  }
  return out;
}

// Inverted dropout; the mask already carries the 1/(1-p) factor. Consumes
// one uniform draw per element.
inline Tensor dropout(const Tensor& x, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw ContractError("dropout: p must lie in [0, 1)");
  if (p == 0.0) return x;
  const std::size_t n = x.size();
  auto mask = std::make_shared<std::vector<double>>(n);
  const double keep_scale = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < n; ++i) (*mask)[i] = rng.uniform() >= p ? keep_scale : 0.0;

  Tensor out = Tensor::zeros(x.rows(), x.cols());
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] * (*mask)[i];

  Tape& tape = Tape::active();
  if (tape.enabled() && x.tracked()) {
    auto xi = x.impl(), oi = out.impl();
    xi->ensure_grad();
    oi->ensure_grad();
    auto idx = tape.record(
        [xi, oi, mask, n]() {
          for (std::size_t i = 0; i < n; ++i) xi->grad[i] += oi->grad[i] * (*mask)[i];
        },
        {xi, oi});
    detail::mark_output(out, idx);
  }
  return out;
}

}  // namespace wellcast

#include "mtcad/tensor.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mtcad/errors.hpp"

namespace mtcad {

struct Tensor::Node {
  std::vector<int> shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  const void* last_tape = nullptr;
};

namespace {

int64_t numel(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

void check_shape(const std::vector<int>& shape) {
  if (shape.empty() || shape.size() > 3)
    throw std::invalid_argument("tensor rank must be 1..3, got " + shape_str(shape));
  for (int d : shape)
    if (d <= 0) throw std::invalid_argument("non-positive dimension in " + shape_str(shape));
}

void gemm(bool trans_a, bool trans_b, int m, int n, int k, double alpha,
          const double* a, int lda, const double* b, int ldb, double beta,
          double* c, int ldc) {
  static const bool blas_init = [] {
    openblas_set_num_threads(1);
    return true;
  }();
  (void)blas_init;
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b,
              ldb, beta, c, ldc);
}

}  // namespace

std::string shape_str(const std::vector<int>& s) {
  std::string out = "[";
  for (size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  check_shape(shape);
  Tensor t;
  t.node_ = std::make_shared<Node>();
  t.node_->value.assign(numel(shape), 0.0);
  t.node_->shape = std::move(shape);
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> data,
                         bool requires_grad) {
  check_shape(shape);
  if (static_cast<int64_t>(data.size()) != numel(shape))
    throw std::invalid_argument("data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  Tensor t;
  t.node_ = std::make_shared<Node>();
  t.node_->shape = std::move(shape);
  t.node_->value = std::move(data);
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::scalar(double v) { return from_data({1}, {v}); }

const std::vector<int>& Tensor::shape() const { return node_->shape; }
int64_t Tensor::size() const { return static_cast<int64_t>(node_->value.size()); }
std::vector<double>& Tensor::data() { return node_->value; }
const std::vector<double>& Tensor::data() const { return node_->value; }
bool Tensor::requires_grad() const { return node_->requires_grad; }

std::vector<double>& Tensor::grad() {
  if (node_->grad.size() != node_->value.size())
    node_->grad.assign(node_->value.size(), 0.0);
  return node_->grad;
}

const std::vector<double>& Tensor::grad() const { return node_->grad; }

double Tensor::item() const {
  if (size() != 1) throw std::logic_error("item() on non-scalar tensor " + shape_str(shape()));
  return node_->value[0];
}

Tensor Tape::make(std::vector<int> shape) {
  Tensor t = Tensor::zeros(std::move(shape));
  note(t);
  return t;
}

void Tape::note(const Tensor& t) {
  if (!recording_ || !t.node_) return;
  if (t.node_->last_tape == this) return;
  t.node_->last_tape = this;
  touched_.push_back(t);
}

void Tape::record(std::function<void()> fn) {
  if (recording_) records_.push_back({std::move(fn)});
}

// ---------------------------------------------------------------------------
// matmul / linear / bmm

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0])
    throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape()) +
                                " x " + shape_str(b.shape()));
  const int m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor y = make({m, n});
  gemm(false, false, m, n, k, 1.0, a.data().data(), k, b.data().data(), n, 0.0,
       y.data().data(), n);
  note(a);
  note(b);
  record([a = a, b = b, y, m, n, k]() mutable {
    const double* gy = y.grad().data();
    gemm(false, true, m, k, n, 1.0, gy, n, b.data().data(), n, 1.0, a.grad().data(), k);
    gemm(true, false, k, n, m, 1.0, a.data().data(), k, gy, n, 1.0, b.grad().data(), n);
  });
  return y;
}

Tensor Tape::linear(const Tensor& x, const Tensor& w) {
  if (w.rank() != 2 || (x.rank() != 2 && x.rank() != 3) ||
      x.shape().back() != w.shape()[1])
    throw std::invalid_argument("linear: incompatible shapes " + shape_str(x.shape()) +
                                " x " + shape_str(w.shape()));
  const int batches = x.rank() == 3 ? x.shape()[0] : 1;
  const int rows = x.rank() == 3 ? x.shape()[1] : x.shape()[0];
  const int in = w.shape()[1], out = w.shape()[0];
  std::vector<int> yshape = x.shape();
  yshape.back() = out;
  Tensor y = make(yshape);
  for (int bi = 0; bi < batches; ++bi)
    gemm(false, true, rows, out, in, 1.0, x.data().data() + int64_t(bi) * rows * in,
         in, w.data().data(), in, 0.0, y.data().data() + int64_t(bi) * rows * out, out);
  note(x);
  note(w);
  record([x = x, w = w, y, batches, rows, in, out]() mutable {
    for (int bi = 0; bi < batches; ++bi) {
      const double* gy = y.grad().data() + int64_t(bi) * rows * out;
      gemm(false, false, rows, in, out, 1.0, gy, out, w.data().data(), in, 1.0,
           x.grad().data() + int64_t(bi) * rows * in, in);
      gemm(true, false, out, in, rows, 1.0, gy, out,
           x.data().data() + int64_t(bi) * rows * in, in, 1.0, w.grad().data(), in);
    }
  });
  return y;
}

Tensor Tape::bmm(const Tensor& a, const Tensor& b, bool transpose_b) {
  if (a.rank() != 3 || b.rank() != 3 || a.shape()[0] != b.shape()[0])
    throw std::invalid_argument("bmm: incompatible shapes " + shape_str(a.shape()) +
                                " x " + shape_str(b.shape()));
  const int batches = a.shape()[0], m = a.shape()[1], k = a.shape()[2];
  const int bk = transpose_b ? b.shape()[2] : b.shape()[1];
  const int n = transpose_b ? b.shape()[1] : b.shape()[2];
  if (bk != k)
    throw std::invalid_argument("bmm: inner dims disagree " + shape_str(a.shape()) +
                                " x " + shape_str(b.shape()));
  Tensor y = make({batches, m, n});
  const int64_t sa = int64_t(m) * k, sb = int64_t(b.shape()[1]) * b.shape()[2],
                sy = int64_t(m) * n;
  for (int bi = 0; bi < batches; ++bi)
    gemm(false, transpose_b, m, n, k, 1.0, a.data().data() + bi * sa, k,
         b.data().data() + bi * sb, transpose_b ? k : n, 0.0,
         y.data().data() + bi * sy, n);
  note(a);
  note(b);
  record([a = a, b = b, y, transpose_b, batches, m, n, k, sa, sb, sy]() mutable {
    for (int bi = 0; bi < batches; ++bi) {
      const double* gy = y.grad().data() + bi * sy;
      const double* av = a.data().data() + bi * sa;
      const double* bv = b.data().data() + bi * sb;
      double* ga = a.grad().data() + bi * sa;
      double* gb = b.grad().data() + bi * sb;
      if (!transpose_b) {
        gemm(false, true, m, k, n, 1.0, gy, n, bv, n, 1.0, ga, k);
        gemm(true, false, k, n, m, 1.0, av, k, gy, n, 1.0, gb, n);
      } else {
        gemm(false, false, m, k, n, 1.0, gy, n, bv, k, 1.0, ga, k);
        gemm(true, false, n, k, m, 1.0, gy, n, av, k, 1.0, gb, k);
      }
    }
  });
  return y;
}

// ---------------------------------------------------------------------------
// shape plumbing

Tensor Tape::add_bias(const Tensor& x, const Tensor& b) {
  if (b.rank() != 1 || b.shape()[0] != x.shape().back())
    throw std::invalid_argument("add_bias: bias " + shape_str(b.shape()) +
                                " does not match " + shape_str(x.shape()));
  const int d = b.shape()[0];
  const int64_t rows = x.size() / d;
  Tensor y = make(x.shape());
  for (int64_t r = 0; r < rows; ++r)
    for (int j = 0; j < d; ++j)
      y.data()[r * d + j] = x.data()[r * d + j] + b.data()[j];
  note(x);
  note(b);
  record([x = x, b = b, y, rows, d]() mutable {
    auto& gx = x.grad();
    auto& gb = b.grad();
    const auto& gy = y.grad();
    for (int64_t r = 0; r < rows; ++r)
      for (int j = 0; j < d; ++j) {
        gx[r * d + j] += gy[r * d + j];
        gb[j] += gy[r * d + j];
      }
  });
  return y;
}

Tensor Tape::concat_mid(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.shape()[0] != b.shape()[0] ||
      a.shape()[2] != b.shape()[2])
    throw std::invalid_argument("concat_mid: incompatible shapes " +
                                shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  const int batches = a.shape()[0], ra = a.shape()[1], rb = b.shape()[1],
            d = a.shape()[2];
  Tensor y = make({batches, ra + rb, d});
  const int64_t sa = int64_t(ra) * d, sb = int64_t(rb) * d, sy = sa + sb;
  for (int bi = 0; bi < batches; ++bi) {
    std::copy_n(a.data().data() + bi * sa, sa, y.data().data() + bi * sy);
    std::copy_n(b.data().data() + bi * sb, sb, y.data().data() + bi * sy + sa);
  }
  note(a);
  note(b);
  record([a = a, b = b, y, batches, sa, sb, sy]() mutable {
    for (int bi = 0; bi < batches; ++bi) {
      const double* gy = y.grad().data() + bi * sy;
      double* ga = a.grad().data() + bi * sa;
      double* gb = b.grad().data() + bi * sb;
      for (int64_t i = 0; i < sa; ++i) ga[i] += gy[i];
      for (int64_t i = 0; i < sb; ++i) gb[i] += gy[sa + i];
    }
  });
  return y;
}

Tensor Tape::reshape(const Tensor& x, std::vector<int> shape) {
  check_shape(shape);
  if (numel(shape) != x.size())
    throw std::invalid_argument("reshape: element count mismatch " +
                                shape_str(x.shape()) + " -> " + shape_str(shape));
  Tensor y = make(std::move(shape));
  y.data() = x.data();
  note(x);
  record([x = x, y]() mutable {
    auto& gx = x.grad();
    const auto& gy = y.grad();
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
  });
  return y;
}

// ---------------------------------------------------------------------------
// elementwise

namespace {
void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}
}  // namespace

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor y = make(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) y.data()[i] = a.data()[i] + b.data()[i];
  note(a);
  note(b);
  record([a = a, b = b, y]() mutable {
    auto& ga = a.grad();
    auto& gb = b.grad();
    const auto& gy = y.grad();
    for (size_t i = 0; i < gy.size(); ++i) {
      ga[i] += gy[i];
      gb[i] += gy[i];
    }
  });
  return y;
}

Tensor Tape::sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor y = make(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) y.data()[i] = a.data()[i] - b.data()[i];
  note(a);
  note(b);
  record([a = a, b = b, y]() mutable {
    auto& ga = a.grad();
    auto& gb = b.grad();
    const auto& gy = y.grad();
    for (size_t i = 0; i < gy.size(); ++i) {
      ga[i] += gy[i];
      gb[i] -= gy[i];
    }
  });
  return y;
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor y = make(a.shape());
  for (int64_t i = 0; i < a.size(); ++i) y.data()[i] = a.data()[i] * b.data()[i];
  note(a);
  note(b);
  record([a = a, b = b, y]() mutable {
    auto& ga = a.grad();
    auto& gb = b.grad();
    const auto& gy = y.grad();
    for (size_t i = 0; i < gy.size(); ++i) {
      ga[i] += gy[i] * b.data()[i];
      gb[i] += gy[i] * a.data()[i];
    }
  });
  return y;
}

Tensor Tape::relu(const Tensor& x) {
  Tensor y = make(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) y.data()[i] = std::max(0.0, x.data()[i]);
  note(x);
  record([x = x, y]() mutable {
    auto& gx = x.grad();
    const auto& gy = y.grad();
    for (size_t i = 0; i < gy.size(); ++i)
      if (x.data()[i] > 0.0) gx[i] += gy[i];
  });
  return y;
}

Tensor Tape::tanh(const Tensor& x) {
  Tensor y = make(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) y.data()[i] = std::tanh(x.data()[i]);
  note(x);
  record([x = x, y]() mutable {
    auto& gx = x.grad();
    const auto& gy = y.grad();
    for (size_t i = 0; i < gy.size(); ++i) {
      const double t = y.data()[i];
      gx[i] += gy[i] * (1.0 - t * t);
    }
  });
  return y;
}

Tensor Tape::sigmoid(const Tensor& x) {
  Tensor y = make(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    y.data()[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                           : std::exp(v) / (1.0 + std::exp(v));
  }
  note(x);
  record([x = x, y]() mutable {
    auto& gx = x.grad();
    const auto& gy = y.grad();
    for (size_t i = 0; i < gy.size(); ++i) {
      const double s = y.data()[i];
      gx[i] += gy[i] * s * (1.0 - s);
    }
  });
  return y;
}

Tensor Tape::log_floored(const Tensor& x) {
  constexpr double kFloor = 1e-12;
  Tensor y = make(x.shape());
  for (int64_t i = 0; i < x.size(); ++i)
    y.data()[i] = std::log(std::max(x.data()[i], kFloor));
  note(x);
  record([x = x, y]() mutable {
    auto& gx = x.grad();
    const auto& gy = y.grad();
    for (size_t i = 0; i < gy.size(); ++i)
      if (x.data()[i] > kFloor) gx[i] += gy[i] / x.data()[i];
  });
  return y;
}

Tensor Tape::scale(const Tensor& x, double c) {
  Tensor y = make(x.shape());
  for (int64_t i = 0; i < x.size(); ++i) y.data()[i] = c * x.data()[i];
  note(x);
  record([x = x, y, c]() mutable {
    auto& gx = x.grad();
    const auto& gy = y.grad();
    for (size_t i = 0; i < gy.size(); ++i) gx[i] += c * gy[i];
  });
  return y;
}

Tensor Tape::elementwise(ElemKind kind, const Tensor& a) {
  switch (kind) {
    case ElemKind::Relu: return relu(a);
    case ElemKind::Tanh: return tanh(a);
    case ElemKind::Sigmoid: return sigmoid(a);
    default: throw std::invalid_argument("elementwise: binary kind needs two operands");
  }
}

Tensor Tape::elementwise(ElemKind kind, const Tensor& a, const Tensor& b) {
  switch (kind) {
    case ElemKind::Add: return add(a, b);
    case ElemKind::Mul: return mul(a, b);
    case ElemKind::Sub: return sub(a, b);
    default: throw std::invalid_argument("elementwise: unary kind takes one operand");
  }
}

// ---------------------------------------------------------------------------
// softmax / masking / reductions

Tensor Tape::softmax_rows(const Tensor& x) {
  const int cols = x.shape().back();
  const int64_t rows = x.size() / cols;
  for (int64_t i = 0; i < x.size(); ++i)
    if (std::isnan(x.data()[i]))
      throw numeric_error("softmax_rows: NaN in input");
  Tensor y = make(x.shape());
  for (int64_t r = 0; r < rows; ++r) {
    const double* xv = x.data().data() + r * cols;
    double* yv = y.data().data() + r * cols;
    double mx = xv[0];
    for (int j = 1; j < cols; ++j) mx = std::max(mx, xv[j]);
    double sum = 0.0;
    for (int j = 0; j < cols; ++j) {
      yv[j] = std::exp(xv[j] - mx);
      sum += yv[j];
    }
    const double inv = 1.0 / sum;
    for (int j = 0; j < cols; ++j) yv[j] *= inv;
  }
  note(x);
  record([x = x, y, rows, cols]() mutable {
    auto& gx = x.grad();
    const auto& gy = y.grad();
    for (int64_t r = 0; r < rows; ++r) {
      const double* yv = y.data().data() + r * cols;
      const double* gyv = gy.data() + r * cols;
      double dot = 0.0;
      for (int j = 0; j < cols; ++j) dot += gyv[j] * yv[j];
      for (int j = 0; j < cols; ++j) gx[r * cols + j] += yv[j] * (gyv[j] - dot);
    }
  });
  return y;
}

Tensor Tape::mask_self(const Tensor& scores, int col_offset) {
  if (scores.rank() != 3)
    throw std::invalid_argument("mask_self: expected rank-3 scores, got " +
                                shape_str(scores.shape()));
  const int batches = scores.shape()[0], rows = scores.shape()[1],
            cols = scores.shape()[2];
  Tensor y = make(scores.shape());
  y.data() = scores.data();
  for (int bi = 0; bi < batches; ++bi)
    for (int r = 0; r < rows; ++r) {
      const int c = r + col_offset;
      if (c >= 0 && c < cols)
        y.data()[(int64_t(bi) * rows + r) * cols + c] = -1e30;
    }
  note(scores);
  record([scores = scores, y, batches, rows, cols, col_offset]() mutable {
    auto& gx = scores.grad();
    const auto& gy = y.grad();
    for (int bi = 0; bi < batches; ++bi)
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
          if (c != r + col_offset)
            gx[(int64_t(bi) * rows + r) * cols + c] +=
                gy[(int64_t(bi) * rows + r) * cols + c];
  });
  return y;
}

Tensor Tape::sum_all(const Tensor& x) {
  Tensor y = make({1});
  double acc = 0.0;
  for (int64_t i = 0; i < x.size(); ++i) acc += x.data()[i];
  y.data()[0] = acc;
  note(x);
  record([x = x, y]() mutable {
    auto& gx = x.grad();
    const double g = y.grad()[0];
    for (size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
  return y;
}

// ---------------------------------------------------------------------------
// batch norm

Tensor Tape::batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                        BnStats& stats, BnMode mode, double momentum, double eps) {
  const int d = x.shape().back();
  if (gamma.rank() != 1 || gamma.shape()[0] != d || beta.rank() != 1 ||
      beta.shape()[0] != d)
    throw std::invalid_argument("batch_norm: scale/shift must be length " +
                                std::to_string(d));
  if (static_cast<int>(stats.mean.size()) != d)
    throw std::invalid_argument("batch_norm: stats dim mismatch");
  const int64_t m = x.size() / d;
  Tensor y = make(x.shape());

  std::vector<double> mu(d), inv_std(d);
  if (mode == BnMode::Inference) {
    mu = stats.mean;
    for (int j = 0; j < d; ++j) inv_std[j] = 1.0 / std::sqrt(stats.var[j] + eps);
  } else {
    std::vector<double> var(d, 0.0);
    for (int j = 0; j < d; ++j) mu[j] = 0.0;
    for (int64_t r = 0; r < m; ++r)
      for (int j = 0; j < d; ++j) mu[j] += x.data()[r * d + j];
    for (int j = 0; j < d; ++j) mu[j] /= double(m);
    for (int64_t r = 0; r < m; ++r)
      for (int j = 0; j < d; ++j) {
        const double c = x.data()[r * d + j] - mu[j];
        var[j] += c * c;
      }
    for (int j = 0; j < d; ++j) {
      var[j] /= double(m);
      inv_std[j] = 1.0 / std::sqrt(var[j] + eps);
    }
    if (mode == BnMode::Train) {
      for (int j = 0; j < d; ++j) {
        stats.mean[j] = (1.0 - momentum) * stats.mean[j] + momentum * mu[j];
        stats.var[j] = (1.0 - momentum) * stats.var[j] + momentum * var[j];
      }
    }
  }

  // xhat kept for the backward rule
  auto xhat = std::make_shared<std::vector<double>>(x.size());
  for (int64_t r = 0; r < m; ++r)
    for (int j = 0; j < d; ++j) {
      const double h = (x.data()[r * d + j] - mu[j]) * inv_std[j];
      (*xhat)[r * d + j] = h;
      y.data()[r * d + j] = gamma.data()[j] * h + beta.data()[j];
    }

  note(x);
  note(gamma);
  note(beta);
  const bool batch_stats = mode != BnMode::Inference;
  record([x = x, gamma = gamma, beta = beta, y, xhat, inv_std, m, d, batch_stats]() mutable {
    auto& gx = x.grad();
    auto& gg = gamma.grad();
    auto& gb = beta.grad();
    const auto& gy = y.grad();
    for (int64_t r = 0; r < m; ++r)
      for (int j = 0; j < d; ++j) {
        gg[j] += gy[r * d + j] * (*xhat)[r * d + j];
        gb[j] += gy[r * d + j];
      }
    if (!batch_stats) {
      // frozen statistics: plain affine transform
      for (int64_t r = 0; r < m; ++r)
        for (int j = 0; j < d; ++j)
          gx[r * d + j] += gy[r * d + j] * gamma.data()[j] * inv_std[j];
      return;
    }
    std::vector<double> s1(d, 0.0), s2(d, 0.0);
    for (int64_t r = 0; r < m; ++r)
      for (int j = 0; j < d; ++j) {
        const double dyh = gy[r * d + j] * gamma.data()[j];
        s1[j] += dyh;
        s2[j] += dyh * (*xhat)[r * d + j];
      }
    const double invm = 1.0 / double(m);
    for (int64_t r = 0; r < m; ++r)
      for (int j = 0; j < d; ++j) {
        const double dyh = gy[r * d + j] * gamma.data()[j];
        gx[r * d + j] +=
            inv_std[j] * (dyh - invm * s1[j] - (*xhat)[r * d + j] * invm * s2[j]);
      }
  });
  return y;
}

// ---------------------------------------------------------------------------

void Tape::backward(const Tensor& loss) {
  if (!recording_)
    throw std::logic_error("backward: tape was not recording");
  if (loss.size() != 1)
    throw std::logic_error("backward: loss must be scalar, got " +
                           shape_str(loss.shape()));
  for (auto& t : touched_) {
    auto& g = t.node_->grad;
    g.assign(t.node_->value.size(), 0.0);
  }
  if (loss.node_->grad.empty()) loss.node_->grad.assign(1, 0.0);
  loss.node_->grad[0] = 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) it->backward();
}

}  // namespace mtcad

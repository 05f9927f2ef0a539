#include "mtcad/complex_matrix.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace mtcad {

ComplexMatrix ComplexMatrix::identity(int n) {
  ComplexMatrix m(n, n);
  for (int i = 0; i < n; ++i) m.re(i, i) = 1.0;
  return m;
}

ComplexMatrix ComplexMatrix::adjoint() const {
  ComplexMatrix out(cols_, rows_);
  for (int j = 0; j < cols_; ++j)
    for (int i = 0; i < rows_; ++i) {
      out.re(j, i) = re(i, j);
      out.im(j, i) = -im(i, j);
    }
  return out;
}

ComplexMatrix ComplexMatrix::operator*(const ComplexMatrix& rhs) const {
  if (cols_ != rhs.rows_)
    throw std::invalid_argument("complex matmul: inner dims " + std::to_string(cols_) +
                                " vs " + std::to_string(rhs.rows_));
  ComplexMatrix out(rows_, rhs.cols_);
  for (int j = 0; j < rhs.cols_; ++j) {
    for (int k = 0; k < cols_; ++k) {
      const double br = rhs.re(k, j), bi = rhs.im(k, j);
      if (br == 0.0 && bi == 0.0) continue;
      for (int i = 0; i < rows_; ++i) {
        const double ar = re(i, k), ai = im(i, k);
        out.re(i, j) += ar * br - ai * bi;
        out.im(i, j) += ar * bi + ai * br;
      }
    }
  }
  return out;
}

ComplexMatrix ComplexMatrix::operator+(const ComplexMatrix& rhs) const {
  if (rows_ != rhs.rows_ || cols_ != rhs.cols_)
    throw std::invalid_argument("complex add: shape mismatch");
  ComplexMatrix out(rows_, cols_);
  for (size_t i = 0; i < re_.size(); ++i) {
    out.re_[i] = re_[i] + rhs.re_[i];
    out.im_[i] = im_[i] + rhs.im_[i];
  }
  return out;
}

ComplexMatrix ComplexMatrix::operator-(const ComplexMatrix& rhs) const {
  if (rows_ != rhs.rows_ || cols_ != rhs.cols_)
    throw std::invalid_argument("complex sub: shape mismatch");
  ComplexMatrix out(rows_, cols_);
  for (size_t i = 0; i < re_.size(); ++i) {
    out.re_[i] = re_[i] - rhs.re_[i];
    out.im_[i] = im_[i] - rhs.im_[i];
  }
  return out;
}

ComplexMatrix ComplexMatrix::scaled(double s) const {
  ComplexMatrix out(rows_, cols_);
  for (size_t i = 0; i < re_.size(); ++i) {
    out.re_[i] = re_[i] * s;
    out.im_[i] = im_[i] * s;
  }
  return out;
}

double ComplexMatrix::frobenius_norm() const {
  double acc = 0.0;
  for (size_t i = 0; i < re_.size(); ++i) acc += re_[i] * re_[i] + im_[i] * im_[i];
  return std::sqrt(acc);
}

double ComplexMatrix::hermitian_defect() const {
  double acc = 0.0;
  for (int j = 0; j < cols_; ++j)
    for (int i = 0; i < rows_; ++i) {
      const double dr = re(i, j) - re(j, i);
      const double di = im(i, j) + im(j, i);
      acc += dr * dr + di * di;
    }
  return std::sqrt(acc);
}

ComplexMatrix sample_covariance(const ComplexMatrix& y) {
  const int lp = y.rows();
  const int m = y.cols();
  if (m < 1) throw std::invalid_argument("sample_covariance: need at least one column");
  ComplexMatrix c(lp, lp);
  const double inv_m = 1.0 / m;
  for (int k = 0; k < m; ++k) {
    for (int j = 0; j < lp; ++j) {
      // conj of y(j,k)
      const double br = y.re(j, k), bi = -y.im(j, k);
      for (int i = 0; i < lp; ++i) {
        const double ar = y.re(i, k), ai = y.im(i, k);
        c.re(i, j) += (ar * br - ai * bi) * inv_m;
        c.im(i, j) += (ar * bi + ai * br) * inv_m;
      }
    }
  }
  return c;
}

}  // namespace mtcad

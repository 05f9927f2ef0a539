#pragma once

#include <complex>
#include <vector>

namespace mtcad {

// Dense complex matrix stored as two column-major real planes (real, imag).
// The planar layout matches the on-disk dataset encoding and keeps the
// coordinate-descent hot loops on contiguous doubles.
class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  ComplexMatrix(int rows, int cols)
      : rows_(rows), cols_(cols), re_(size_t(rows) * cols, 0.0),
        im_(size_t(rows) * cols, 0.0) {}

  static ComplexMatrix identity(int n);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& re(int i, int j) { return re_[idx(i, j)]; }
  double& im(int i, int j) { return im_[idx(i, j)]; }
  double re(int i, int j) const { return re_[idx(i, j)]; }
  double im(int i, int j) const { return im_[idx(i, j)]; }

  std::complex<double> at(int i, int j) const { return {re_[idx(i, j)], im_[idx(i, j)]}; }
  void set(int i, int j, std::complex<double> v) {
    re_[idx(i, j)] = v.real();
    im_[idx(i, j)] = v.imag();
  }

  std::vector<double>& real_plane() { return re_; }
  std::vector<double>& imag_plane() { return im_; }
  const std::vector<double>& real_plane() const { return re_; }
  const std::vector<double>& imag_plane() const { return im_; }

  ComplexMatrix adjoint() const;
  ComplexMatrix operator*(const ComplexMatrix& rhs) const;
  ComplexMatrix operator+(const ComplexMatrix& rhs) const;
  ComplexMatrix operator-(const ComplexMatrix& rhs) const;
  ComplexMatrix scaled(double s) const;

  double frobenius_norm() const;
  // distance to the adjoint, used by the Hermitian checks
  double hermitian_defect() const;

  bool equal_bytes(const ComplexMatrix& rhs) const {
    return rows_ == rhs.rows_ && cols_ == rhs.cols_ && re_ == rhs.re_ && im_ == rhs.im_;
  }

 private:
  size_t idx(int i, int j) const { return size_t(j) * rows_ + i; }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> re_, im_;
};

// C = Y * Y^H / M  (Hermitian PSD, rows x rows)
ComplexMatrix sample_covariance(const ComplexMatrix& y);

}  // namespace mtcad

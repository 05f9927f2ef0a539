#include "mtcad/covariance_detector.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mtcad/errors.hpp"
#include "mtcad/rng.hpp"

namespace mtcad {

namespace {

Eigen::MatrixXcd to_eigen(const ComplexMatrix& m) {
  Eigen::MatrixXcd out(m.rows(), m.cols());
  for (int j = 0; j < m.cols(); ++j)
    for (int i = 0; i < m.rows(); ++i) out(i, j) = m.at(i, j);
  return out;
}

ComplexMatrix from_eigen(const Eigen::MatrixXcd& m) {
  ComplexMatrix out(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
  for (int j = 0; j < m.cols(); ++j)
    for (int i = 0; i < m.rows(); ++i) out.set(i, j, m(i, j));
  return out;
}

Eigen::MatrixXcd build_sigma(const std::vector<double>& activity,
                             const ComplexMatrix& b, double noise_var) {
  const int lp = b.rows();
  const int n = b.cols();
  Eigen::MatrixXcd sigma = noise_var * Eigen::MatrixXcd::Identity(lp, lp);
  for (int dev = 0; dev < n; ++dev) {
    if (activity[dev] == 0.0) continue;
    Eigen::VectorXcd col(lp);
    for (int i = 0; i < lp; ++i) col(i) = b.at(i, dev);
    sigma.noalias() += activity[dev] * col * col.adjoint();
  }
  return sigma;
}

struct FreshFactors {
  Eigen::MatrixXcd inverse;
  double nll = 0.0;
};

FreshFactors factor_from_scratch(const std::vector<double>& activity,
                                 const ComplexMatrix& cov, const ComplexMatrix& b,
                                 double noise_var) {
  const Eigen::MatrixXcd sigma = build_sigma(activity, b, noise_var);
  Eigen::LLT<Eigen::MatrixXcd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw numeric_error("covariance detector: Cholesky factorization failed");
  const int lp = b.rows();
  double logdet = 0.0;
  for (int i = 0; i < lp; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i).real());
  FreshFactors f;
  f.inverse = llt.solve(Eigen::MatrixXcd::Identity(lp, lp));
  const Eigen::MatrixXcd c = to_eigen(cov);
  f.nll = logdet + (f.inverse * c).trace().real();
  return f;
}

}  // namespace

double cd_nll(const std::vector<double>& activity, const ComplexMatrix& cov,
              const ComplexMatrix& scaled_pilots, double noise_var) {
  if (noise_var <= 0.0)
    throw std::invalid_argument("cd_nll: noise variance must be positive");
  if (static_cast<int>(activity.size()) != scaled_pilots.cols())
    throw std::invalid_argument("cd_nll: activity length vs pilot count mismatch");
  for (double a : activity)
    if (a < -1e-12 || a > 1.0 + 1e-12)
      throw std::invalid_argument("cd_nll: activity outside [0,1]");

  const Eigen::MatrixXcd sigma = build_sigma(activity, scaled_pilots, noise_var);
  Eigen::LLT<Eigen::MatrixXcd> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw numeric_error("cd_nll: Cholesky factorization failed");
  const int lp = scaled_pilots.rows();
  double logdet = 0.0;
  for (int i = 0; i < lp; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i).real());
  const Eigen::MatrixXcd solved = llt.solve(to_eigen(cov));
  return logdet + solved.trace().real();
}

SolverState SolverState::init(const ComplexMatrix& cov,
                              const ComplexMatrix& scaled_pilots, double noise_var) {
  if (noise_var <= 0.0)
    throw std::invalid_argument("SolverState: noise variance must be positive");
  if (cov.rows() != cov.cols() || cov.rows() != scaled_pilots.rows())
    throw std::invalid_argument("SolverState: covariance and pilot shapes disagree");
  SolverState s;
  const int lp = cov.rows();
  s.activity.assign(scaled_pilots.cols(), 0.0);
  s.sigma_inv = ComplexMatrix::identity(lp).scaled(1.0 / noise_var);
  s.cov = cov;
  s.scaled_pilots = scaled_pilots;
  s.noise_var = noise_var;
  // Sigma = noise_var * I at a = 0
  double tr = 0.0;
  for (int i = 0; i < lp; ++i) tr += cov.re(i, i);
  s.nll = lp * std::log(noise_var) + tr / noise_var;
  s.q_re.resize(lp);
  s.q_im.resize(lp);
  s.t_re.resize(lp);
  s.t_im.resize(lp);
  return s;
}

double coordinate_step(SolverState& st, int n) {
  const int lp = st.cov.rows();
  const double* br = st.scaled_pilots.real_plane().data() + size_t(n) * lp;
  const double* bi = st.scaled_pilots.imag_plane().data() + size_t(n) * lp;
  double* qr = st.q_re.data();
  double* qi = st.q_im.data();

  // q = Sigma^-1 b_n  (Sigma^-1 column-major, Hermitian)
  const auto& ar = st.sigma_inv.real_plane();
  const auto& ai = st.sigma_inv.imag_plane();
  for (int i = 0; i < lp; ++i) {
    qr[i] = 0.0;
    qi[i] = 0.0;
  }
  for (int k = 0; k < lp; ++k) {
    const double xr = br[k], xi = bi[k];
    const double* colr = ar.data() + size_t(k) * lp;
    const double* coli = ai.data() + size_t(k) * lp;
    for (int i = 0; i < lp; ++i) {
      qr[i] += colr[i] * xr - coli[i] * xi;
      qi[i] += colr[i] * xi + coli[i] * xr;
    }
  }

  // s = b_n^H Sigma^-1 b_n = q^H b_n  (real by Hermitian symmetry)
  double s = 0.0;
  for (int i = 0; i < lp; ++i) s += qr[i] * br[i] + qi[i] * bi[i];
  if (std::abs(s) < 1e-30) return 0.0;  // numerically zero pilot column

  // c = q^H C q via t = C q
  double* tr = st.t_re.data();
  double* ti = st.t_im.data();
  const auto& cr = st.cov.real_plane();
  const auto& ci = st.cov.imag_plane();
  for (int i = 0; i < lp; ++i) {
    tr[i] = 0.0;
    ti[i] = 0.0;
  }
  for (int k = 0; k < lp; ++k) {
    const double xr = qr[k], xi = qi[k];
    const double* colr = cr.data() + size_t(k) * lp;
    const double* coli = ci.data() + size_t(k) * lp;
    for (int i = 0; i < lp; ++i) {
      tr[i] += colr[i] * xr - coli[i] * xi;
      ti[i] += colr[i] * xi + coli[i] * xr;
    }
  }
  double c = 0.0;
  for (int i = 0; i < lp; ++i) c += qr[i] * tr[i] + qi[i] * ti[i];

  const double a_n = st.activity[n];
  double delta = (c - s) / (s * s);
  delta = std::clamp(delta, -a_n, 1.0 - a_n);
  if (delta == 0.0) return 0.0;

  st.activity[n] = a_n + delta;

  // rank-one downdate of Sigma^-1 and incremental cost change
  const double denom = 1.0 + delta * s;
  const double f = delta / denom;
  auto& sr = st.sigma_inv.real_plane();
  auto& si = st.sigma_inv.imag_plane();
  for (int j = 0; j < lp; ++j) {
    // conj(q_j)
    const double pr = qr[j], pi = -qi[j];
    double* colr = sr.data() + size_t(j) * lp;
    double* coli = si.data() + size_t(j) * lp;
    for (int i = 0; i < lp; ++i) {
      colr[i] -= f * (qr[i] * pr - qi[i] * pi);
      coli[i] -= f * (qr[i] * pi + qi[i] * pr);
    }
  }
  st.nll += std::log(denom) - delta * c / denom;
  return delta;
}

CdResult detect_cd(const ComplexMatrix& cov, const ComplexMatrix& scaled_pilots,
                   double noise_var, const CdOptions& options) {
  if (options.passes < 1) throw std::invalid_argument("detect_cd: passes must be >= 1");
  const int n = scaled_pilots.cols();
  SolverState st = SolverState::init(cov, scaled_pilots, noise_var);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (!options.custom_order.empty()) {
    if (static_cast<int>(options.custom_order.size()) != n)
      throw std::invalid_argument("detect_cd: custom order length mismatch");
    order = options.custom_order;
  }
  Rng rng(options.seed);

  CdResult res;
  double prev_nll = st.nll;
  for (int pass = 0; pass < options.passes; ++pass) {
    if (options.custom_order.empty() && options.order == CdOptions::Order::Random) {
      for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.uniform_int(i + 1)]);
    }
    for (int idx : order) {
      coordinate_step(st, idx);
      if (options.per_step_trace) res.step_nll.push_back(st.nll);
    }
    // refresh the inverse from scratch to cap rank-one drift
    FreshFactors fresh = factor_from_scratch(st.activity, cov, scaled_pilots, noise_var);
    const ComplexMatrix fresh_inv = from_eigen(fresh.inverse);
    res.pass_drift.push_back((st.sigma_inv - fresh_inv).frobenius_norm() /
                             fresh_inv.frobenius_norm());
    st.sigma_inv = fresh_inv;
    st.nll = fresh.nll;
    res.pass_nll.push_back(st.nll);
    res.passes_run = pass + 1;
    if (std::abs(prev_nll - st.nll) < options.pass_tol) break;
    prev_nll = st.nll;
  }
  res.activity = std::move(st.activity);
  return res;
}

std::vector<uint8_t> threshold(const std::vector<double>& activity, double xi) {
  if (xi < 0.0 || xi > 1.0)
    throw std::invalid_argument("threshold: xi must be in [0,1]");
  std::vector<uint8_t> out(activity.size());
  for (size_t i = 0; i < activity.size(); ++i) out[i] = activity[i] > xi ? 1 : 0;
  return out;
}

}  // namespace mtcad

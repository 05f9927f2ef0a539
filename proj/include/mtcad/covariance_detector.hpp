#pragma once

#include <cstdint>
#include <vector>

#include "mtcad/complex_matrix.hpp"

namespace mtcad {

// Negative log-likelihood of relaxed activities:
//   log|Sigma| + Tr(Sigma^-1 C),  Sigma = noise_var*I + B diag(a) B^H.
// Reference path: Hermitian Cholesky for both the log-determinant and the
// solve, no explicit inverse.
double cd_nll(const std::vector<double>& activity, const ComplexMatrix& cov,
              const ComplexMatrix& scaled_pilots, double noise_var);

// Mutable state of one coordinate-descent run. sigma_inv tracks the current
// Sigma^-1 through rank-one updates; nll tracks the cost incrementally.
struct SolverState {
  std::vector<double> activity;
  ComplexMatrix sigma_inv;
  ComplexMatrix cov;
  ComplexMatrix scaled_pilots;
  double noise_var = 0.0;
  double nll = 0.0;

  static SolverState init(const ComplexMatrix& cov, const ComplexMatrix& scaled_pilots,
                          double noise_var);

  // scratch for the per-coordinate kernels
  std::vector<double> q_re, q_im, t_re, t_im;
};

// One closed-form coordinate update of activity[n], clipped to keep
// activity in [0,1]; sigma_inv and nll maintained rank-one. Returns the
// applied step.
double coordinate_step(SolverState& state, int n);

struct CdOptions {
  int passes = 10;
  double pass_tol = 1e-9;  // stop when a full pass improves nll by less
  enum class Order { Cyclic, Random } order = Order::Cyclic;
  uint64_t seed = 0;             // for Order::Random
  std::vector<int> custom_order;  // overrides order when non-empty
  bool per_step_trace = false;
};

struct CdResult {
  std::vector<double> activity;
  std::vector<double> pass_nll;    // recomputed exactly after each pass
  std::vector<double> step_nll;    // incremental, when per_step_trace
  // relative Frobenius gap ||incremental - fresh||_F / ||fresh||_F per pass;
  // relative so the measure is meaningful at physical noise scales where
  // Sigma^-1 entries are ~1e13
  std::vector<double> pass_drift;
  int passes_run = 0;
};

CdResult detect_cd(const ComplexMatrix& cov, const ComplexMatrix& scaled_pilots,
                   double noise_var, const CdOptions& options = {});

// a_n = 1 when value > xi, strictly; ties decide inactive.
std::vector<uint8_t> threshold(const std::vector<double>& activity, double xi);

}  // namespace mtcad

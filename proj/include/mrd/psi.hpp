#pragma once

#include <cstdint>

#include "mrd/kernel.hpp"

namespace mrd {

/// Factorized Gaussian q(X): row n is N(means.row(n), diag(variances.row(n))).
struct VariationalLatent {
  Matrix means;
  Matrix variances;

  Index num_points() const { return means.rows(); }
  Index latent_dim() const { return means.cols(); }
  void validate() const;
};

/// Expectations of ARD kernel quantities under q(X):
///   psi0 = sum_n E[k(x_n, x_n)]
///   psi1(n, m) = E[k(x_n, z_m)]
///   psi2(m, m') = sum_n E[k(z_m, x_n) k(x_n, z_m')]
struct PsiStats {
  double psi0 = 0.0;
  Matrix psi1;
  Matrix psi2;
};

PsiStats psi_stats(const ArdKernelParams& params, const VariationalLatent& q,
                   const Matrix& inducing);

/// Gradients of  g0 * psi0 + sum(g1 .* psi1) + sum(g2 .* psi2)  with respect to
/// the kernel parameters, the variational parameters and the inducing inputs.
/// Only the symmetric part of g2 contributes.
struct PsiGradients {
  double variance = 0.0;
  Vector weights;
  Matrix means;
  Matrix variances;
  Matrix inducing;
};

PsiGradients psi_stats_grads(const ArdKernelParams& params, const VariationalLatent& q,
                             const Matrix& inducing, double g0, const Matrix& g1,
                             const Matrix& g2);

/// Monte-Carlo estimate of PsiStats with per-entry standard errors.
struct PsiMonteCarlo {
  PsiStats estimate;
  double psi0_stderr = 0.0;
  Matrix psi1_stderr;
  Matrix psi2_stderr;
};

PsiMonteCarlo psi_monte_carlo(const ArdKernelParams& params, const VariationalLatent& q,
                              const Matrix& inducing, std::int64_t n_samples,
                              std::uint64_t seed);

}  // namespace mrd

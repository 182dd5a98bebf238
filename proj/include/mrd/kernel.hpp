#pragma once

#include <Eigen/Dense>
#include <vector>

namespace mrd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// ARD exponentiated-quadratic kernel
///   k(x, x') = variance * exp(-1/2 sum_q weights[q] (x_q - x'_q)^2).
/// `weights` are inverse squared lengthscales; a weight of zero switches the
/// latent dimension off for the view that owns the kernel.
struct ArdKernelParams {
  double variance = 1.0;
  Vector weights;

  Index latent_dim() const { return weights.size(); }
  /// Throws InvalidArgument on variance <= 0 or a negative/non-finite weight.
  void validate() const;
};

/// Exponentiated-quadratic kernel over observation times, used by the
/// dynamical latent prior. `jitter` is added to the diagonal of square Gram
/// matrices only.
struct TemporalKernelParams {
  double variance = 1.0;
  double lengthscale = 1.0;
  double jitter = 1e-5;

  void validate() const;
};

Matrix ard_kernel(const ArdKernelParams& params, const Matrix& xa, const Matrix& xb);

/// Entry-wise partial derivatives of ard_kernel(params, xa, xb).
/// Entry (i, j) depends only on row i of xa and row j of xb, so the input
/// derivatives are stored per latent dimension q as A x B matrices:
///   d_xa[q](i, j) = dK(i, j) / d xa(i, q)
///   d_xb[q](i, j) = dK(i, j) / d xb(j, q)
struct ArdKernelGrads {
  Matrix value;
  Matrix d_variance;
  std::vector<Matrix> d_weights;
  std::vector<Matrix> d_xa;
  std::vector<Matrix> d_xb;
};

ArdKernelGrads ard_kernel_grads(const ArdKernelParams& params, const Matrix& xa,
                                const Matrix& xb);

/// Vector-Jacobian product of the symmetric Gram K = ard_kernel(params, x, x):
/// gradients of sum_ij upstream(i, j) K(i, j).
struct ArdGramVjp {
  double variance = 0.0;
  Vector weights;
  Matrix inputs;
};

ArdGramVjp ard_gram_vjp(const ArdKernelParams& params, const Matrix& x, const Matrix& upstream);

/// Square Gram over one time vector, jitter on the diagonal.
Matrix temporal_kernel(const TemporalKernelParams& params, const Vector& t);

/// Cross-covariance between two time vectors, no jitter.
Matrix temporal_kernel(const TemporalKernelParams& params, const Vector& ta, const Vector& tb);

/// Derivative of temporal_kernel(params, t) with respect to the lengthscale.
Matrix temporal_kernel_d_lengthscale(const TemporalKernelParams& params, const Vector& t);

/// Cholesky factorization with escalating diagonal jitter.
///
/// Attempts a plain factorization first. On failure retries with jitter
/// starting at 1e-6 * mean(diag(A)), growing by 10x per attempt up to
/// 1e-2 * mean(diag(A)); past that throws SingularMatrixError. All products
/// (solve, log_det, inverse) refer to A + jitter() * I.
class StableCholesky {
 public:
  explicit StableCholesky(const Matrix& a);

  Matrix solve(const Matrix& b) const;
  Matrix inverse() const;
  double log_det() const { return log_det_; }
  double jitter() const { return jitter_; }
  const Eigen::LLT<Matrix>& llt() const { return llt_; }
  /// Solves L x = b with the lower factor.
  Matrix solve_lower(const Matrix& b) const;

 private:
  Eigen::LLT<Matrix> llt_;
  double log_det_ = 0.0;
  double jitter_ = 0.0;
};

struct PsdSolveResult {
  Matrix solution;
  double log_det = 0.0;
  double jitter = 0.0;
};

PsdSolveResult stable_psd_solve(const Matrix& a, const Matrix& b);

}  // namespace mrd

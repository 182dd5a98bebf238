#include "mrd/kernel.hpp"

#include <cmath>
#include <string>

#include "mrd/errors.hpp"

namespace mrd {

void ArdKernelParams::validate() const {
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw InvalidArgument("ARD kernel variance must be positive, got " + std::to_string(variance));
  }
  for (Index q = 0; q < weights.size(); ++q) {
    if (!(weights[q] >= 0.0) || !std::isfinite(weights[q])) {
      throw InvalidArgument("ARD weight " + std::to_string(q) + " must be non-negative");
    }
  }
}

void TemporalKernelParams::validate() const {
  if (!(variance > 0.0) || !(lengthscale > 0.0) || !(jitter > 0.0) || !std::isfinite(variance) ||
      !std::isfinite(lengthscale) || !std::isfinite(jitter)) {
    throw InvalidArgument("temporal kernel variance, lengthscale and jitter must be positive");
  }
}

namespace {

void check_inputs(const ArdKernelParams& params, const Matrix& xa, const Matrix& xb) {
  const Index q = params.latent_dim();
  if (xa.cols() != q || xb.cols() != q) {
    throw DimensionError("ard_kernel: inputs have " + std::to_string(xa.cols()) + " and " +
                         std::to_string(xb.cols()) + " columns, kernel has " + std::to_string(q) +
                         " weights");
  }
}

// Weighted squared distances sum_q w_q (xa_iq - xb_jq)^2.
Matrix weighted_sq_dist(const Vector& w, const Matrix& xa, const Matrix& xb) {
  const Matrix sa = xa * w.cwiseSqrt().asDiagonal();
  const Matrix sb = xb * w.cwiseSqrt().asDiagonal();
  Matrix d(xa.rows(), xb.rows());
  for (Index j = 0; j < xb.rows(); ++j) {
    for (Index i = 0; i < xa.rows(); ++i) {
      d(i, j) = (sa.row(i) - sb.row(j)).squaredNorm();
    }
  }
  return d;
}

void check_times(const Vector& t) {
  if (!t.allFinite()) throw InvalidArgument("temporal_kernel: timestamps must be finite");
}

}  // namespace

Matrix ard_kernel(const ArdKernelParams& params, const Matrix& xa, const Matrix& xb) {
  check_inputs(params, xa, xb);
  return params.variance * (-0.5 * weighted_sq_dist(params.weights, xa, xb)).array().exp().matrix();
}

ArdKernelGrads ard_kernel_grads(const ArdKernelParams& params, const Matrix& xa,
                                const Matrix& xb) {
  check_inputs(params, xa, xb);
  const Index nq = params.latent_dim();
  ArdKernelGrads g;
  g.value = ard_kernel(params, xa, xb);
  g.d_variance = g.value / params.variance;
  g.d_weights.resize(nq);
  g.d_xa.resize(nq);
  g.d_xb.resize(nq);
  for (Index q = 0; q < nq; ++q) {
    Matrix diff(xa.rows(), xb.rows());
    for (Index j = 0; j < xb.rows(); ++j) {
      diff.col(j) = xa.col(q).array() - xb(j, q);
    }
    g.d_weights[q] = (-0.5 * diff.array().square() * g.value.array()).matrix();
    g.d_xa[q] = (-params.weights[q] * diff.array() * g.value.array()).matrix();
    g.d_xb[q] = -g.d_xa[q];
  }
  return g;
}

ArdGramVjp ard_gram_vjp(const ArdKernelParams& params, const Matrix& x, const Matrix& upstream) {
  const Index m = x.rows();
  const Index nq = params.latent_dim();
  if (upstream.rows() != m || upstream.cols() != m) {
    throw DimensionError("ard_gram_vjp: upstream must be square with one row per input");
  }
  const Matrix k = ard_kernel(params, x, x);
  const Matrix gk = upstream.cwiseProduct(k);
  ArdGramVjp out;
  out.variance = gk.sum() / params.variance;
  out.weights = Vector::Zero(nq);
  out.inputs = Matrix::Zero(m, nq);
  const Matrix sym = gk + gk.transpose();
  for (Index q = 0; q < nq; ++q) {
    double wsum = 0.0;
    for (Index j = 0; j < m; ++j) {
      for (Index i = 0; i < m; ++i) {
        const double d = x(i, q) - x(j, q);
        wsum += gk(i, j) * d * d;
        // dK_ij/dx_iq = -w d K_ij; x_i appears as both row and column index.
        out.inputs(i, q) -= params.weights[q] * d * sym(i, j);
      }
    }
    out.weights[q] = -0.5 * wsum;
  }
  return out;
}

Matrix temporal_kernel(const TemporalKernelParams& params, const Vector& t) {
  Matrix k = temporal_kernel(params, t, t);
  k.diagonal().array() += params.jitter;
  return k;
}

Matrix temporal_kernel(const TemporalKernelParams& params, const Vector& ta, const Vector& tb) {
  check_times(ta);
  check_times(tb);
  const double inv = 1.0 / (2.0 * params.lengthscale * params.lengthscale);
  Matrix k(ta.size(), tb.size());
  for (Index j = 0; j < tb.size(); ++j) {
    for (Index i = 0; i < ta.size(); ++i) {
      const double d = ta[i] - tb[j];
      k(i, j) = params.variance * std::exp(-d * d * inv);
    }
  }
  return k;
}

Matrix temporal_kernel_d_lengthscale(const TemporalKernelParams& params, const Vector& t) {
  const Matrix k = temporal_kernel(params, t, t);
  const double l3 = params.lengthscale * params.lengthscale * params.lengthscale;
  Matrix d(t.size(), t.size());
  for (Index j = 0; j < t.size(); ++j) {
    for (Index i = 0; i < t.size(); ++i) {
      const double lag = t[i] - t[j];
      d(i, j) = k(i, j) * lag * lag / l3;
    }
  }
  return d;
}

StableCholesky::StableCholesky(const Matrix& a) {
  if (a.rows() != a.cols()) throw DimensionError("StableCholesky: matrix must be square");
  const Index n = a.rows();
  if (n == 0) return;
  if (!a.allFinite()) throw SingularMatrixError("StableCholesky: matrix has non-finite entries");
  const double mean_diag = a.diagonal().mean();
  const double scale = mean_diag > 0.0 ? mean_diag : 1.0;
  const double max_diag = a.diagonal().maxCoeff();

  auto accept = [&](const Eigen::LLT<Matrix>& llt) {
    if (llt.info() != Eigen::Success) return false;
    const auto d = llt.matrixLLT().diagonal();
    // Eigen only flags non-positive pivots; reject numerically rank-deficient
    // factors as well.
    return d.allFinite() && d.minCoeff() * d.minCoeff() > 1e-14 * max_diag;
  };

  llt_.compute(a);
  double jitter = 0.0;
  if (!accept(llt_)) {
    bool ok = false;
    for (jitter = 1e-6 * scale; jitter <= 1e-2 * scale * (1.0 + 1e-9); jitter *= 10.0) {
      Matrix aj = a;
      aj.diagonal().array() += jitter;
      llt_.compute(aj);
      if (accept(llt_)) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw SingularMatrixError("Cholesky factorization failed after jitter " +
                                std::to_string(1e-2 * scale));
    }
  }
  jitter_ = jitter;
  log_det_ = 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

Matrix StableCholesky::solve(const Matrix& b) const {
  if (b.rows() != llt_.rows()) throw DimensionError("StableCholesky::solve: row mismatch");
  return llt_.solve(b);
}

Matrix StableCholesky::inverse() const {
  return llt_.solve(Matrix::Identity(llt_.rows(), llt_.rows()));
}

Matrix StableCholesky::solve_lower(const Matrix& b) const {
  return llt_.matrixL().solve(b);
}

PsdSolveResult stable_psd_solve(const Matrix& a, const Matrix& b) {
  if (a.rows() != a.cols() || b.rows() != a.rows()) {
    throw DimensionError("stable_psd_solve: A must be square with as many rows as B");
  }
  StableCholesky chol(a);
  return {chol.solve(b), chol.log_det(), chol.jitter()};
}

}  // namespace mrd

#include "mrd/psi.hpp"

#include <cmath>
#include <random>
#include <string>

#include "mrd/errors.hpp"
#include "mrd/rng.hpp"

namespace mrd {

void VariationalLatent::validate() const {
  if (means.rows() != variances.rows() || means.cols() != variances.cols()) {
    throw DimensionError("variational latent: means and variances differ in shape");
  }
  if (!means.allFinite()) throw InvalidArgument("variational latent: non-finite means");
  if (!variances.allFinite() || (variances.size() > 0 && !(variances.minCoeff() > 0.0))) {
    throw InvalidArgument("variational latent: variances must be positive");
  }
}

namespace {

void check_shapes(const ArdKernelParams& params, const VariationalLatent& q,
                  const Matrix& inducing) {
  q.validate();
  const Index nq = params.latent_dim();
  if (q.latent_dim() != nq || inducing.cols() != nq) {
    throw DimensionError("psi statistics: latent dimensionality differs between kernel (" +
                         std::to_string(nq) + "), q(X) (" + std::to_string(q.latent_dim()) +
                         ") and inducing inputs (" + std::to_string(inducing.cols()) + ")");
  }
}

}  // namespace

PsiStats psi_stats(const ArdKernelParams& params, const VariationalLatent& q,
                   const Matrix& inducing) {
  check_shapes(params, q, inducing);
  const Index n_pts = q.num_points();
  const Index m_ind = inducing.rows();
  const Index nq = params.latent_dim();
  const Vector& w = params.weights;
  const double var = params.variance;

  PsiStats out;
  out.psi0 = static_cast<double>(n_pts) * var;
  out.psi1.resize(n_pts, m_ind);
  out.psi2 = Matrix::Zero(m_ind, m_ind);

  // Pairwise quantities that do not depend on the data point.
  Matrix pair_base(m_ind, m_ind);
  std::vector<Matrix> zbar(nq, Matrix(m_ind, m_ind));
  for (Index m2 = 0; m2 < m_ind; ++m2) {
    for (Index m1 = 0; m1 <= m2; ++m1) {
      double acc = 0.0;
      for (Index k = 0; k < nq; ++k) {
        const double dz = inducing(m1, k) - inducing(m2, k);
        acc -= 0.25 * w[k] * dz * dz;
        zbar[k](m1, m2) = 0.5 * (inducing(m1, k) + inducing(m2, k));
      }
      pair_base(m1, m2) = acc;
    }
  }

  Vector a1(nq), a2(nq);
  for (Index n = 0; n < n_pts; ++n) {
    double log1 = 0.0, log2 = 0.0;
    for (Index k = 0; k < nq; ++k) {
      a1[k] = w[k] * q.variances(n, k) + 1.0;
      a2[k] = 2.0 * w[k] * q.variances(n, k) + 1.0;
      log1 -= 0.5 * std::log(a1[k]);
      log2 -= 0.5 * std::log(a2[k]);
    }
    for (Index m = 0; m < m_ind; ++m) {
      double e = log1;
      for (Index k = 0; k < nq; ++k) {
        const double d = q.means(n, k) - inducing(m, k);
        e -= 0.5 * w[k] * d * d / a1[k];
      }
      out.psi1(n, m) = var * std::exp(e);
    }
    for (Index m2 = 0; m2 < m_ind; ++m2) {
      for (Index m1 = 0; m1 <= m2; ++m1) {
        double e = log2 + pair_base(m1, m2);
        for (Index k = 0; k < nq; ++k) {
          const double d = q.means(n, k) - zbar[k](m1, m2);
          e -= w[k] * d * d / a2[k];
        }
        out.psi2(m1, m2) += var * var * std::exp(e);
      }
    }
  }
  out.psi2.triangularView<Eigen::StrictlyLower>() = out.psi2.transpose();
  return out;
}

PsiGradients psi_stats_grads(const ArdKernelParams& params, const VariationalLatent& q,
                             const Matrix& inducing, double g0, const Matrix& g1,
                             const Matrix& g2) {
  check_shapes(params, q, inducing);
  const Index n_pts = q.num_points();
  const Index m_ind = inducing.rows();
  const Index nq = params.latent_dim();
  if (g1.rows() != n_pts || g1.cols() != m_ind || g2.rows() != m_ind || g2.cols() != m_ind) {
    throw DimensionError("psi_stats_grads: upstream gradient shapes do not match psi statistics");
  }
  const Vector& w = params.weights;
  const double var = params.variance;

  PsiGradients g;
  g.variance = g0 * static_cast<double>(n_pts);
  g.weights = Vector::Zero(nq);
  g.means = Matrix::Zero(n_pts, nq);
  g.variances = Matrix::Zero(n_pts, nq);
  g.inducing = Matrix::Zero(m_ind, nq);

  // Symmetrized upstream weights over the upper triangle.
  Matrix g2u(m_ind, m_ind);
  for (Index m2 = 0; m2 < m_ind; ++m2) {
    for (Index m1 = 0; m1 <= m2; ++m1) {
      g2u(m1, m2) = m1 == m2 ? g2(m1, m1) : g2(m1, m2) + g2(m2, m1);
    }
  }
  Matrix pair_base(m_ind, m_ind);
  for (Index m2 = 0; m2 < m_ind; ++m2) {
    for (Index m1 = 0; m1 <= m2; ++m1) {
      double acc = 0.0;
      for (Index k = 0; k < nq; ++k) {
        const double dz = inducing(m1, k) - inducing(m2, k);
        acc -= 0.25 * w[k] * dz * dz;
      }
      pair_base(m1, m2) = acc;
    }
  }

  Vector a1(nq), a2(nq), e_vec(nq);
  for (Index n = 0; n < n_pts; ++n) {
    double log1 = 0.0, log2 = 0.0;
    for (Index k = 0; k < nq; ++k) {
      a1[k] = w[k] * q.variances(n, k) + 1.0;
      a2[k] = 2.0 * w[k] * q.variances(n, k) + 1.0;
      log1 -= 0.5 * std::log(a1[k]);
      log2 -= 0.5 * std::log(a2[k]);
    }

    for (Index m = 0; m < m_ind; ++m) {
      if (g1(n, m) == 0.0) continue;
      double e = log1;
      for (Index k = 0; k < nq; ++k) {
        const double d = q.means(n, k) - inducing(m, k);
        e -= 0.5 * w[k] * d * d / a1[k];
      }
      const double t = g1(n, m) * var * std::exp(e);
      g.variance += t / var;
      for (Index k = 0; k < nq; ++k) {
        const double d = q.means(n, k) - inducing(m, k);
        const double s = q.variances(n, k);
        const double a = a1[k];
        g.weights[k] += t * (-0.5 * s / a - 0.5 * d * d / (a * a));
        g.means(n, k) -= t * w[k] * d / a;
        g.variances(n, k) += t * (-0.5 * w[k] / a + 0.5 * w[k] * w[k] * d * d / (a * a));
        g.inducing(m, k) += t * w[k] * d / a;
      }
    }

    for (Index m2 = 0; m2 < m_ind; ++m2) {
      for (Index m1 = 0; m1 <= m2; ++m1) {
        if (g2u(m1, m2) == 0.0) continue;
        double e = log2 + pair_base(m1, m2);
        for (Index k = 0; k < nq; ++k) {
          e_vec[k] = q.means(n, k) - 0.5 * (inducing(m1, k) + inducing(m2, k));
          e -= w[k] * e_vec[k] * e_vec[k] / a2[k];
        }
        const double t = g2u(m1, m2) * var * var * std::exp(e);
        g.variance += 2.0 * t / var;
        for (Index k = 0; k < nq; ++k) {
          const double ev = e_vec[k];
          const double dz = inducing(m1, k) - inducing(m2, k);
          const double s = q.variances(n, k);
          const double b = a2[k];
          g.weights[k] += t * (-s / b - 0.25 * dz * dz - ev * ev / (b * b));
          g.means(n, k) -= t * 2.0 * w[k] * ev / b;
          g.variances(n, k) += t * (-w[k] / b + 2.0 * w[k] * w[k] * ev * ev / (b * b));
          const double shared = w[k] * ev / b;
          g.inducing(m1, k) += t * (shared - 0.5 * w[k] * dz);
          g.inducing(m2, k) += t * (shared + 0.5 * w[k] * dz);
        }
      }
    }
  }
  return g;
}

PsiMonteCarlo psi_monte_carlo(const ArdKernelParams& params, const VariationalLatent& q,
                              const Matrix& inducing, std::int64_t n_samples,
                              std::uint64_t seed) {
  check_shapes(params, q, inducing);
  if (n_samples < 1) throw InvalidArgument("psi_monte_carlo: n_samples must be >= 1");
  const Index n_pts = q.num_points();
  const Index m_ind = inducing.rows();
  const Index nq = params.latent_dim();
  const double s_count = static_cast<double>(n_samples);

  auto rng = named_stream(seed, "psi_monte_carlo");
  std::normal_distribution<double> normal(0.0, 1.0);

  PsiMonteCarlo out;
  out.estimate.psi1 = Matrix::Zero(n_pts, m_ind);
  out.estimate.psi2 = Matrix::Zero(m_ind, m_ind);
  out.psi1_stderr = Matrix::Zero(n_pts, m_ind);
  out.psi2_stderr = Matrix::Zero(m_ind, m_ind);
  // k(x, x) is the constant variance for this kernel; sampling adds nothing.
  out.estimate.psi0 = static_cast<double>(n_pts) * params.variance;

  Matrix x(1, nq);
  for (Index n = 0; n < n_pts; ++n) {
    Vector sum1 = Vector::Zero(m_ind), sq1 = Vector::Zero(m_ind);
    Matrix sum2 = Matrix::Zero(m_ind, m_ind), sq2 = Matrix::Zero(m_ind, m_ind);
    for (std::int64_t s = 0; s < n_samples; ++s) {
      for (Index k = 0; k < nq; ++k) {
        x(0, k) = q.means(n, k) + std::sqrt(q.variances(n, k)) * normal(rng);
      }
      const Vector kx = ard_kernel(params, x, inducing).row(0).transpose();
      sum1 += kx;
      sq1 += kx.cwiseAbs2();
      const Matrix outer = kx * kx.transpose();
      sum2 += outer;
      sq2 += outer.cwiseAbs2();
    }
    const Vector mean1 = sum1 / s_count;
    const Matrix mean2 = sum2 / s_count;
    out.estimate.psi1.row(n) = mean1.transpose();
    out.estimate.psi2 += mean2;
    if (n_samples > 1) {
      const Vector v1 = ((sq1 / s_count) - mean1.cwiseAbs2()).cwiseMax(0.0) * (s_count / (s_count - 1.0));
      out.psi1_stderr.row(n) = (v1 / s_count).cwiseSqrt().transpose();
      const Matrix v2 =
          ((sq2 / s_count) - mean2.cwiseAbs2()).cwiseMax(0.0) * (s_count / (s_count - 1.0));
      out.psi2_stderr += v2 / s_count;  // variances add across independent points
    }
  }
  out.psi2_stderr = out.psi2_stderr.cwiseSqrt();
  return out;
}

}  // namespace mrd

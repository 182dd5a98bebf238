#pragma once

#include <vector>

#include "mrd/types.hpp"

namespace mrd {

/// data * data^T. Everything downstream touches the data only through this
/// N x N matrix, so per-evaluation cost does not depend on D.
Matrix precompute_data_gram(const Matrix& data);

/// The collapsed (q(U) eliminated) evidence term of one view, expressed in its
/// sufficient statistics, together with its partial derivatives.
struct EvidencePartials {
  double value = 0.0;
  double d_psi0 = 0.0;
  Matrix d_psi1;
  Matrix d_psi2;
  Matrix d_kmm;
  double d_beta = 0.0;  // beta = 1 / noise variance
};

/// Evaluates
///   -ND/2 log 2pi + ND/2 log beta + D/2 log|Kmm| - D/2 log|A|
///   - beta/2 tr(G) + beta^2/2 tr(A^-1 psi1^T G psi1)
///   - beta D/2 psi0 + beta D/2 tr(Kmm^-1 psi2),      A = beta psi2 + Kmm,
/// where G is the data Gram and N the number of rows of psi1.
EvidencePartials collapsed_evidence(const PsiStats& stats, const Matrix& kmm, double beta,
                                    const Matrix& gram, Index output_dim, bool with_gradient);

/// L_view for one view under q(X).
double view_evidence_term(const ViewParams& view, const VariationalLatent& q);

double kl_standard(const VariationalLatent& q);

/// One independent block of a Gaussian prior N(0, covariance) over the listed
/// points, applied to every latent dimension.
struct PriorBlock {
  std::vector<Index> indices;
  Matrix covariance;
};

/// sum over blocks and latent dimensions of KL[N(mu, diag(s)) || N(0, K_block)].
double kl_gaussian_blocks(const VariationalLatent& q, const std::vector<PriorBlock>& blocks);

/// The temporal prior's blocks: one temporal Gram per sequence.
std::vector<PriorBlock> dynamical_blocks(const LatentPrior& prior);

double kl_dynamical(const VariationalLatent& q, const LatentPrior& prior);

struct KlGradient {
  double value = 0.0;
  Matrix means;
  Matrix variances;
  std::vector<Matrix> d_covariance;  // one per block (dynamical only)
  double lengthscale = 0.0;          // dynamical only
};

KlGradient kl_standard_grad(const VariationalLatent& q);
KlGradient kl_gaussian_blocks_grad(const VariationalLatent& q,
                                   const std::vector<PriorBlock>& blocks);
KlGradient kl_dynamical_grad(const VariationalLatent& q, const LatentPrior& prior);

/// F = sum_views L_view - KL[q(X) || p(X)].
double total_bound(const MrdModel& model);

struct ViewGradient {
  double kernel_variance = 0.0;
  Vector weights;
  double noise_variance = 0.0;
  Matrix inducing;
};

/// Gradient of the bound in constrained parameter space.
struct BoundGradient {
  double value = 0.0;
  std::vector<ViewGradient> views;
  Matrix means;
  Matrix variances;
  double temporal_lengthscale = 0.0;
};

BoundGradient total_bound_grad(const MrdModel& model);

}  // namespace mrd

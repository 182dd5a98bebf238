#include "mrd/bound.hpp"

#include <cmath>
#include <numbers>

#include "mrd/errors.hpp"

namespace mrd {

Matrix precompute_data_gram(const Matrix& data) {
  Matrix g = Matrix::Zero(data.rows(), data.rows());
  g.selfadjointView<Eigen::Lower>().rankUpdate(data);
  return g.selfadjointView<Eigen::Lower>();
}

EvidencePartials collapsed_evidence(const PsiStats& stats, const Matrix& kmm, double beta,
                                    const Matrix& gram, Index output_dim, bool with_gradient) {
  const Index n = stats.psi1.rows();
  const Index m = stats.psi1.cols();
  if (kmm.rows() != m || stats.psi2.rows() != m || gram.rows() != n || gram.cols() != n) {
    throw DimensionError("collapsed_evidence: inconsistent statistic shapes");
  }
  const double dn = static_cast<double>(n);
  const double dd = static_cast<double>(output_dim);

  const StableCholesky kchol(kmm);
  Matrix a = beta * stats.psi2 + kmm;
  a.diagonal().array() += kchol.jitter();
  const StableCholesky achol(a);

  const Matrix g_psi1 = gram * stats.psi1;               // N x M
  const Matrix p = stats.psi1.transpose() * g_psi1;      // M x M
  const Matrix ainv_p = achol.solve(p);
  const Matrix kinv_psi2 = kchol.solve(stats.psi2);
  const double tr_gram = gram.trace();

  EvidencePartials out;
  out.value = -0.5 * dn * dd * std::log(2.0 * std::numbers::pi) + 0.5 * dn * dd * std::log(beta) +
              0.5 * dd * kchol.log_det() - 0.5 * dd * achol.log_det() - 0.5 * beta * tr_gram +
              0.5 * beta * beta * ainv_p.trace() - 0.5 * beta * dd * stats.psi0 +
              0.5 * beta * dd * kinv_psi2.trace();
  if (!with_gradient) return out;

  const Matrix ainv = achol.inverse();
  const Matrix kinv = kchol.inverse();
  const Matrix ainv_p_ainv = ainv_p * ainv;
  const Matrix kinv_psi2_kinv = kinv_psi2 * kinv;

  out.d_psi0 = -0.5 * beta * dd;
  out.d_psi1 = beta * beta * g_psi1 * ainv;
  out.d_psi2 = 0.5 * beta * (dd * kinv - dd * ainv - beta * beta * ainv_p_ainv);
  out.d_kmm = 0.5 * dd * kinv - 0.5 * dd * ainv - 0.5 * beta * beta * ainv_p_ainv -
              0.5 * beta * dd * kinv_psi2_kinv;
  out.d_beta = 0.5 * dn * dd / beta - 0.5 * dd * ainv.cwiseProduct(stats.psi2).sum() -
               0.5 * tr_gram + beta * ainv_p.trace() -
               0.5 * beta * beta * ainv_p_ainv.cwiseProduct(stats.psi2).sum() -
               0.5 * dd * stats.psi0 + 0.5 * dd * kinv_psi2.trace();
  return out;
}

double view_evidence_term(const ViewParams& view, const VariationalLatent& q) {
  if (view.data.rows() != q.num_points()) {
    throw DimensionError("view_evidence_term: view has " + std::to_string(view.data.rows()) +
                         " rows, q(X) has " + std::to_string(q.num_points()));
  }
  if (view.inducing.rows() < 1) throw DimensionError("view_evidence_term: no inducing inputs");
  const PsiStats stats = psi_stats(view.kernel, q, view.inducing);
  const Matrix kmm = ard_kernel(view.kernel, view.inducing, view.inducing);
  return collapsed_evidence(stats, kmm, 1.0 / view.noise_variance, view.data_gram,
                            view.output_dim(), false)
      .value;
}

double kl_standard(const VariationalLatent& q) { return kl_standard_grad(q).value; }

KlGradient kl_standard_grad(const VariationalLatent& q) {
  q.validate();
  KlGradient g;
  const auto& mu = q.means.array();
  const auto& s = q.variances.array();
  g.value = 0.5 * (mu.square() + s - 1.0 - s.log()).sum();
  g.means = q.means;
  g.variances = 0.5 * (1.0 - s.inverse());
  return g;
}

KlGradient kl_gaussian_blocks_grad(const VariationalLatent& q,
                                   const std::vector<PriorBlock>& blocks) {
  q.validate();
  const Index nq = q.latent_dim();
  KlGradient g;
  g.means = Matrix::Zero(q.num_points(), nq);
  g.variances = Matrix::Zero(q.num_points(), nq);
  for (const auto& block : blocks) {
    const Index nb = static_cast<Index>(block.indices.size());
    if (block.covariance.rows() != nb || block.covariance.cols() != nb) {
      throw DimensionError("prior block covariance does not match its index list");
    }
    const StableCholesky chol(block.covariance);
    const Matrix kinv = chol.inverse();
    Matrix mu(nb, nq), s(nb, nq);
    for (Index i = 0; i < nb; ++i) {
      mu.row(i) = q.means.row(block.indices[i]);
      s.row(i) = q.variances.row(block.indices[i]);
    }
    const Matrix kinv_mu = kinv * mu;
    const Vector kinv_diag = kinv.diagonal();
    double value = 0.0;
    Matrix d_cov = Matrix::Zero(nb, nb);
    for (Index k = 0; k < nq; ++k) {
      value += 0.5 * (kinv_diag.dot(s.col(k)) + mu.col(k).dot(kinv_mu.col(k)) -
                      static_cast<double>(nb) + chol.log_det() - s.col(k).array().log().sum());
      // d/dK of tr(K^-1 S) + mu^T K^-1 mu + log|K|
      Matrix inner = s.col(k).asDiagonal();
      inner += mu.col(k) * mu.col(k).transpose();
      d_cov += 0.5 * (kinv - kinv * inner * kinv);
    }
    g.value += value;
    for (Index i = 0; i < nb; ++i) {
      const Index row = block.indices[i];
      g.means.row(row) = kinv_mu.row(i);
      g.variances.row(row) = 0.5 * (kinv_diag[i] - s.row(i).array().inverse());
    }
    g.d_covariance.push_back(std::move(d_cov));
  }
  return g;
}

double kl_gaussian_blocks(const VariationalLatent& q, const std::vector<PriorBlock>& blocks) {
  return kl_gaussian_blocks_grad(q, blocks).value;
}

std::vector<PriorBlock> dynamical_blocks(const LatentPrior& prior) {
  std::vector<PriorBlock> blocks;
  for (auto& idx : prior.sequence_blocks()) {
    Vector t(static_cast<Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) t[static_cast<Index>(i)] = prior.timestamps[idx[i]];
    blocks.push_back({idx, temporal_kernel(prior.temporal, t)});
  }
  return blocks;
}

double kl_dynamical(const VariationalLatent& q, const LatentPrior& prior) {
  return kl_dynamical_grad(q, prior).value;
}

KlGradient kl_dynamical_grad(const VariationalLatent& q, const LatentPrior& prior) {
  if (!prior.is_dynamical()) throw InvalidArgument("kl_dynamical requires a dynamical prior");
  prior.validate(q.num_points());
  const auto blocks = dynamical_blocks(prior);
  KlGradient g = kl_gaussian_blocks_grad(q, blocks);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    Vector t(static_cast<Index>(blocks[b].indices.size()));
    for (Index i = 0; i < t.size(); ++i) t[i] = prior.timestamps[blocks[b].indices[i]];
    g.lengthscale +=
        g.d_covariance[b].cwiseProduct(temporal_kernel_d_lengthscale(prior.temporal, t)).sum();
  }
  return g;
}

namespace {

KlGradient prior_kl_grad(const MrdModel& model) {
  return model.prior.is_dynamical() ? kl_dynamical_grad(model.q, model.prior)
                                    : kl_standard_grad(model.q);
}

}  // namespace

double total_bound(const MrdModel& model) {
  model.validate();
  double value = 0.0;
  for (const auto& view : model.views) value += view_evidence_term(view, model.q);
  return value - prior_kl_grad(model).value;
}

BoundGradient total_bound_grad(const MrdModel& model) {
  model.validate();
  const Index n = model.num_points();
  const Index nq = model.latent_dim();
  BoundGradient out;
  out.means = Matrix::Zero(n, nq);
  out.variances = Matrix::Zero(n, nq);

  for (const auto& view : model.views) {
    const double beta = 1.0 / view.noise_variance;
    const PsiStats stats = psi_stats(view.kernel, model.q, view.inducing);
    const Matrix kmm = ard_kernel(view.kernel, view.inducing, view.inducing);
    const EvidencePartials ev =
        collapsed_evidence(stats, kmm, beta, view.data_gram, view.output_dim(), true);
    const PsiGradients pg =
        psi_stats_grads(view.kernel, model.q, view.inducing, ev.d_psi0, ev.d_psi1, ev.d_psi2);
    const ArdGramVjp kg = ard_gram_vjp(view.kernel, view.inducing, ev.d_kmm);

    ViewGradient vg;
    vg.kernel_variance = pg.variance + kg.variance;
    vg.weights = pg.weights + kg.weights;
    vg.inducing = pg.inducing + kg.inputs;
    vg.noise_variance = -beta * beta * ev.d_beta;
    out.views.push_back(std::move(vg));
    out.means += pg.means;
    out.variances += pg.variances;
    out.value += ev.value;
  }

  const KlGradient kl = prior_kl_grad(model);
  out.value -= kl.value;
  out.means -= kl.means;
  out.variances -= kl.variances;
  out.temporal_lengthscale = -kl.lengthscale;
  return out;
}

}  // namespace mrd

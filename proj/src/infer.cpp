#include "mrd/infer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mrd/bound.hpp"
#include "mrd/errors.hpp"

namespace mrd {

namespace {

constexpr Index kInitNeighbours = 5;

void check_latent_input(const MrdModel& model, const Matrix& x) {
  if (x.cols() != model.latent_dim()) {
    throw DimensionError("latent inputs have " + std::to_string(x.cols()) + " columns, model has Q = " +
                         std::to_string(model.latent_dim()));
  }
  if (!x.allFinite()) throw InvalidArgument("latent inputs must be finite");
}

}  // namespace

TestLatent infer_test_latent(const MrdModel& model, const Matrix& y_star, const std::string& view,
                             const OptimConfig& config, const std::optional<Vector>& test_times) {
  model.validate();
  config.validate();
  const ViewParams& v = model.views[model.view_index(view)];
  if (y_star.rows() == 0) throw DataError("no test points given");
  if (y_star.cols() != v.output_dim()) {
    throw DimensionError("test data has " + std::to_string(y_star.cols()) + " columns, view '" +
                         view + "' has " + std::to_string(v.output_dim()));
  }
  if (!y_star.allFinite()) throw DataError("test data has non-finite entries");
  const bool dynamic = model.prior.is_dynamical();
  if (dynamic && !test_times) {
    throw InvalidArgument("model has a dynamical prior: test timestamps are required");
  }

  const Index n = model.num_points();
  const Index ns = y_star.rows();
  const Index nq = model.latent_dim();
  const Matrix ys = v.standardize(y_star);

  std::vector<PriorBlock> test_block;
  if (dynamic) {
    if (test_times->size() != ns) {
      throw DimensionError("expected " + std::to_string(ns) + " test timestamps, got " +
                           std::to_string(test_times->size()));
    }
    LatentPrior p = LatentPrior::dynamical(*test_times, std::vector<int>(static_cast<std::size_t>(ns), 0),
                                           model.prior.temporal);
    p.validate(ns);
    std::vector<Index> idx(static_cast<std::size_t>(ns));
    std::iota(idx.begin(), idx.end(), Index{0});
    test_block.push_back({idx, temporal_kernel(model.prior.temporal, *test_times)});
  }

  // Initial means: average latent mean of the nearest training rows.
  Matrix init_means(ns, nq);
  const Index nn = std::min(kInitNeighbours, n);
  for (Index i = 0; i < ns; ++i) {
    std::vector<std::pair<double, Index>> dist(static_cast<std::size_t>(n));
    for (Index j = 0; j < n; ++j) dist[static_cast<std::size_t>(j)] = {(v.data.row(j) - ys.row(i)).squaredNorm(), j};
    std::partial_sort(dist.begin(), dist.begin() + nn, dist.end());
    init_means.row(i).setZero();
    for (Index j = 0; j < nn; ++j) init_means.row(i) += model.q.means.row(dist[static_cast<std::size_t>(j)].second);
    init_means.row(i) /= static_cast<double>(nn);
  }

  Matrix all_data(n + ns, v.output_dim());
  all_data << v.data, ys;
  const Matrix gram = precompute_data_gram(all_data);
  const Matrix kmm = ard_kernel(v.kernel, v.inducing, v.inducing);
  const double beta = 1.0 / v.noise_variance;
  const Index block = ns * nq;

  VariationalLatent q;
  q.means.resize(n + ns, nq);
  q.variances.resize(n + ns, nq);
  q.means.topRows(n) = model.q.means;
  q.variances.topRows(n) = model.q.variances;

  Objective objective = [&](const Vector& z, Vector& grad) {
    grad = Vector::Constant(z.size(), std::numeric_limits<double>::quiet_NaN());
    q.means.bottomRows(ns) = Eigen::Map<const Matrix>(z.data(), ns, nq);
    q.variances.bottomRows(ns) = Eigen::Map<const Matrix>(z.data() + block, ns, nq).array().exp();
    if (!q.variances.allFinite() || (q.variances.array() <= 0.0).any()) {
      return std::numeric_limits<double>::quiet_NaN();
    }
    try {
      const PsiStats stats = psi_stats(v.kernel, q, v.inducing);
      const EvidencePartials ev = collapsed_evidence(stats, kmm, beta, gram, v.output_dim(), true);
      const PsiGradients pg =
          psi_stats_grads(v.kernel, q, v.inducing, ev.d_psi0, ev.d_psi1, ev.d_psi2);
      VariationalLatent qt{q.means.bottomRows(ns), q.variances.bottomRows(ns)};
      const KlGradient kl = dynamic ? kl_gaussian_blocks_grad(qt, test_block) : kl_standard_grad(qt);
      const Matrix gm = pg.means.bottomRows(ns) - kl.means;
      const Matrix gv = (pg.variances.bottomRows(ns) - kl.variances).cwiseProduct(qt.variances);
      grad.head(block) = Eigen::Map<const Vector>(gm.data(), block);
      grad.tail(block) = Eigen::Map<const Vector>(gv.data(), block);
      return ev.value - kl.value;
    } catch (const SingularMatrixError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };

  Vector z0(2 * block);
  z0.head(block) = Eigen::Map<const Vector>(init_means.data(), block);
  z0.tail(block).setConstant(std::log(0.1));
  const OptimResult r = maximize(objective, z0, config);

  TestLatent out;
  out.means = Eigen::Map<const Matrix>(r.x.data(), ns, nq);
  out.variances = Eigen::Map<const Matrix>(r.x.data() + block, ns, nq).array().exp();
  out.source_view = view;
  out.trace = r.trace;
  return out;
}

std::vector<Index> shared_dims(const MrdModel& model, std::size_t source, std::size_t target) {
  const Vector ws = normalized_weights(model.views.at(source));
  const Vector wt = normalized_weights(model.views.at(target));
  std::vector<Index> dims;
  for (Index q = 0; q < model.latent_dim(); ++q) {
    if (ws[q] > model.delta_rel && wt[q] > model.delta_rel) dims.push_back(q);
  }
  return dims;
}

CandidateList nearest_shared(const MrdModel& model, const TestLatent& test,
                             const std::string& target_view, Index k) {
  const std::size_t src = model.view_index(test.source_view);
  const std::size_t tgt = model.view_index(target_view);
  const Index n = model.num_points();
  if (k < 1 || k > n) {
    throw InvalidArgument("number of candidates must be in [1, " + std::to_string(n) + "], got " +
                          std::to_string(k));
  }
  check_latent_input(model, test.means);
  const std::vector<Index> dims = shared_dims(model, src, tgt);
  if (dims.empty()) {
    throw DataError("degenerate segmentation: views '" + test.source_view + "' and '" + target_view +
                    "' share no latent dimension at delta " + std::to_string(model.delta_rel));
  }
  const Vector wt = normalized_weights(model.views[tgt]);

  CandidateList out;
  for (Index i = 0; i < test.means.rows(); ++i) {
    std::vector<std::pair<double, Index>> dist(static_cast<std::size_t>(n));
    for (Index j = 0; j < n; ++j) {
      double d2 = 0.0;
      for (Index q : dims) {
        const double diff = wt[q] * (test.means(i, q) - model.q.means(j, q));
        d2 += diff * diff;
      }
      dist[static_cast<std::size_t>(j)] = {std::sqrt(d2), j};
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    std::vector<Index> idx;
    std::vector<double> d;
    for (Index j = 0; j < k; ++j) {
      idx.push_back(dist[static_cast<std::size_t>(j)].second);
      d.push_back(dist[static_cast<std::size_t>(j)].first);
    }
    out.indices.push_back(std::move(idx));
    out.distances.push_back(std::move(d));
  }
  return out;
}

Matrix predictive_mean(const MrdModel& model, const std::string& view, const Matrix& x) {
  const ViewParams& v = model.views[model.view_index(view)];
  check_latent_input(model, x);
  const double beta = 1.0 / v.noise_variance;
  const PsiStats stats = psi_stats(v.kernel, model.q, v.inducing);
  const Matrix kmm = ard_kernel(v.kernel, v.inducing, v.inducing);
  const StableCholesky kchol(kmm);
  Matrix a = beta * stats.psi2 + kmm;
  a.diagonal().array() += kchol.jitter();
  const StableCholesky achol(a);
  const Matrix weights = achol.solve(beta * (stats.psi1.transpose() * v.data));  // M x D
  return v.destandardize(ard_kernel(v.kernel, x, v.inducing) * weights);
}

TransferResult transfer(const MrdModel& model, const Matrix& y_star, const std::string& source_view,
                        const std::string& target_view, Index k, const OptimConfig& config,
                        const std::optional<Vector>& test_times, bool all_candidates) {
  const std::size_t src = model.view_index(source_view);
  const std::size_t tgt = model.view_index(target_view);
  const std::vector<Index> dims = shared_dims(model, src, tgt);
  if (dims.empty()) {
    throw DataError("degenerate segmentation: views '" + source_view + "' and '" + target_view +
                    "' share no latent dimension at delta " + std::to_string(model.delta_rel));
  }
  TransferResult out;
  out.latent = infer_test_latent(model, y_star, source_view, config, test_times);
  out.candidates = nearest_shared(model, out.latent, target_view, k);

  const Index ns = y_star.rows();
  const Index used = all_candidates ? k : 1;
  for (Index c = 0; c < used; ++c) {
    Matrix x_gen(ns, model.latent_dim());
    for (Index i = 0; i < ns; ++i) {
      x_gen.row(i) = model.q.means.row(out.candidates.indices[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)]);
      for (Index q : dims) x_gen(i, q) = out.latent.means(i, q);
    }
    out.candidate_predictions.push_back(predictive_mean(model, target_view, x_gen));
  }
  out.predictions = out.candidate_predictions.front();
  if (!all_candidates) out.candidate_predictions.clear();
  return out;
}

std::vector<int> classify(const MrdModel& model, const Matrix& y_star,
                          const std::string& source_view, const std::string& label_view, Index k,
                          const OptimConfig& config, const std::optional<Vector>& test_times) {
  const ViewParams& lv = model.views[model.view_index(label_view)];
  const Matrix raw = lv.destandardize(lv.data);
  for (Index i = 0; i < raw.rows(); ++i) {
    const double sum = raw.row(i).sum();
    if (sum < 0.99 || sum > 1.01 || raw.row(i).minCoeff() < -0.01 || raw.row(i).maxCoeff() > 1.01) {
      throw DataError("view '" + label_view + "' is not 1-of-K encoded (training row " +
                      std::to_string(i + 1) + ")");
    }
  }
  const TransferResult tr = transfer(model, y_star, source_view, label_view, k, config, test_times);
  std::vector<int> labels;
  for (Index i = 0; i < tr.predictions.rows(); ++i) {
    Index best = 0;
    for (Index c = 1; c < tr.predictions.cols(); ++c) {
      if (tr.predictions(i, c) > tr.predictions(i, best)) best = c;
    }
    labels.push_back(static_cast<int>(best));
  }
  return labels;
}

Matrix sample_traversal(const MrdModel& model, const std::string& view, const Vector& base, Index dim,
                        double low, double high, Index steps) {
  const Index nq = model.latent_dim();
  if (base.size() != nq) {
    throw DimensionError("base latent point has " + std::to_string(base.size()) + " entries, Q = " +
                         std::to_string(nq));
  }
  if (dim < 0 || dim >= nq) {
    throw InvalidArgument("latent dimension " + std::to_string(dim) + " out of range [0, " +
                          std::to_string(nq - 1) + "]");
  }
  if (steps < 1) throw InvalidArgument("steps must be at least 1");
  if (!(low <= high) || !std::isfinite(low) || !std::isfinite(high)) {
    throw InvalidArgument("traversal range needs finite low <= high");
  }
  Matrix x = base.transpose().replicate(steps, 1);
  for (Index i = 0; i < steps; ++i) {
    x(i, dim) = steps == 1 ? low : low + static_cast<double>(i) * (high - low) / static_cast<double>(steps - 1);
  }
  return predictive_mean(model, view, x);
}

double mean_sq_second_difference(const Matrix& trajectory) {
  if (trajectory.rows() < 3) return 0.0;
  const Index r = trajectory.rows() - 2;
  const Matrix d2 = trajectory.bottomRows(r) - 2.0 * trajectory.middleRows(1, r) + trajectory.topRows(r);
  return d2.squaredNorm() / static_cast<double>(d2.size());
}

}  // namespace mrd

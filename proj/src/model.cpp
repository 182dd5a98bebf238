#include "mrd/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "mrd/bound.hpp"
#include "mrd/errors.hpp"
#include "mrd/rng.hpp"

namespace mrd {

MrdModel init_model(const std::vector<ViewData>& views, Index latent_dim, Index num_inducing,
                    LatentPrior prior, std::uint64_t seed) {
  if (views.empty()) throw InvalidArgument("init_model: at least one view is required");
  const Index n = views.front().data.rows();
  Index total_d = 0;
  for (const auto& v : views) {
    if (v.data.rows() != n) {
      throw DataError("views have different numbers of rows: '" + views.front().name + "' has " +
                      std::to_string(n) + ", '" + v.name + "' has " +
                      std::to_string(v.data.rows()));
    }
    if (v.data.cols() < 1) throw DataError("view '" + v.name + "' has no columns");
    if (!v.data.allFinite()) throw DataError("view '" + v.name + "' has non-finite entries");
    total_d += v.data.cols();
  }
  if (n < 2) throw DataError("init_model: need at least two data points");
  if (latent_dim < 1 || latent_dim >= total_d || latent_dim > n) {
    throw InvalidArgument("init_model: latent dimensionality " + std::to_string(latent_dim) +
                          " must be in [1, " + std::to_string(std::min(total_d - 1, n)) + "]");
  }
  if (num_inducing < 1 || num_inducing > n) {
    throw InvalidArgument("init_model: number of inducing points " + std::to_string(num_inducing) +
                          " must be in [1, " + std::to_string(n) + "]");
  }
  prior.validate(n);

  MrdModel model;
  model.seed = seed;
  model.prior = std::move(prior);

  Matrix concat(n, total_d);
  Index col = 0;
  for (const auto& v : views) {
    ViewParams p;
    p.name = v.name;
    p.columns = v.columns;
    if (p.columns.size() != static_cast<std::size_t>(v.data.cols())) {
      p.columns.clear();
      for (Index d = 0; d < v.data.cols(); ++d) p.columns.push_back(v.name + "_" + std::to_string(d));
    }
    p.col_mean = v.data.colwise().mean().transpose();
    p.col_scale.resize(v.data.cols());
    for (Index d = 0; d < v.data.cols(); ++d) {
      const double sd = std::sqrt((v.data.col(d).array() - p.col_mean[d]).square().mean());
      p.col_scale[d] = sd > 1e-12 ? sd : 1.0;
    }
    p.data = p.standardize(v.data);
    p.data_gram = precompute_data_gram(p.data);
    concat.middleCols(col, v.data.cols()) = p.data;
    col += v.data.cols();
    model.views.push_back(std::move(p));
  }

  // PCA on the standardized concatenation (already column-centred).
  Eigen::BDCSVD<Matrix> svd(concat, Eigen::ComputeThinV);
  Matrix loadings = svd.matrixV().leftCols(latent_dim);
  for (Index k = 0; k < latent_dim; ++k) {
    Index arg = 0;
    loadings.col(k).cwiseAbs().maxCoeff(&arg);
    if (loadings(arg, k) < 0.0) loadings.col(k) *= -1.0;
  }
  model.q.means = concat * loadings;
  model.q.variances = Matrix::Constant(n, latent_dim, 0.1);

  for (std::size_t i = 0; i < model.views.size(); ++i) {
    auto& p = model.views[i];
    auto rng = named_stream(seed, "inducing/" + std::to_string(i));
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    for (Index k = 0; k < num_inducing; ++k) {
      std::uniform_int_distribution<Index> pick(k, n - 1);
      std::swap(idx[static_cast<std::size_t>(k)], idx[static_cast<std::size_t>(pick(rng))]);
    }
    p.inducing.resize(num_inducing, latent_dim);
    for (Index k = 0; k < num_inducing; ++k) {
      p.inducing.row(k) = model.q.means.row(idx[static_cast<std::size_t>(k)]);
    }
    p.kernel.variance = 1.0;
    p.kernel.weights = Vector::Ones(latent_dim);
    const double data_var = p.data.array().square().mean();
    p.noise_variance = 0.01 * (data_var > 0.0 ? data_var : 1.0);
  }
  model.validate();
  return model;
}

double default_lengthscale(const Vector& timestamps, const std::vector<int>& sequence_ids) {
  if (static_cast<Index>(sequence_ids.size()) != timestamps.size()) {
    throw DimensionError("default_lengthscale: timestamps and sequence ids differ in length");
  }
  LatentPrior p;
  p.timestamps = timestamps;
  p.sequence_ids = sequence_ids;
  std::vector<double> gaps;
  for (const auto& block : p.sequence_blocks()) {
    for (std::size_t i = 1; i < block.size(); ++i) {
      gaps.push_back(std::abs(timestamps[block[i]] - timestamps[block[i - 1]]));
    }
  }
  if (gaps.empty()) return 1.0;
  std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
  const double g = gaps[gaps.size() / 2];
  return g > 0.0 ? 2.0 * g : 1.0;
}

namespace {

// Bound and packed gradient; numerical breakdowns map to NaN so the optimizer
// rejects the step instead of aborting.
double bound_objective(const Vector& x, Vector& grad, const ParamLayout& layout, MrdModel& work) {
  try {
    unpack_into(x, layout, work);
    const BoundGradient bg = total_bound_grad(work);
    grad = pack_gradient(bg, work, layout);
    return bg.value;
  } catch (const SingularMatrixError&) {
  } catch (const InvalidArgument&) {
  }
  grad = Vector::Constant(x.size(), std::numeric_limits<double>::quiet_NaN());
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

TrainResult train(const MrdModel& model, const OptimConfig& config, const TrainOptions& options) {
  model.validate();
  config.validate();
  const ParamLayout layout = ParamLayout::for_model(model);
  MrdModel work = model;
  Vector x = pack(model, layout);

  std::vector<Index> always_fixed;
  for (const auto& name : options.fixed_noise_views) {
    const std::size_t v = model.view_index(name);
    always_fixed.push_back(layout.offset("views[" + std::to_string(v) + "].noise_variance"));
  }

  // Optimizes the entries of x not listed in `fixed` for at most `iterations`.
  TrainResult result;
  auto run_phase = [&](std::vector<Index> fixed, int iterations) {
    std::sort(fixed.begin(), fixed.end());
    std::vector<Index> free_idx;
    for (Index i = 0; i < x.size(); ++i) {
      if (!std::binary_search(fixed.begin(), fixed.end(), i)) free_idx.push_back(i);
    }
    const Vector base = x;
    Vector full_grad(x.size());
    Objective restricted = [&](const Vector& z, Vector& g) {
      Vector full = base;
      for (std::size_t i = 0; i < free_idx.size(); ++i) full[free_idx[i]] = z[static_cast<Index>(i)];
      const double f = bound_objective(full, full_grad, layout, work);
      g.resize(z.size());
      for (std::size_t i = 0; i < free_idx.size(); ++i) g[static_cast<Index>(i)] = full_grad[free_idx[i]];
      return f;
    };
    Vector z(static_cast<Index>(free_idx.size()));
    for (std::size_t i = 0; i < free_idx.size(); ++i) z[static_cast<Index>(i)] = x[free_idx[i]];
    OptimConfig phase = config;
    phase.max_iterations = iterations;
    const OptimResult r = maximize(restricted, z, phase);
    for (std::size_t i = 0; i < free_idx.size(); ++i) x[free_idx[i]] = r.x[static_cast<Index>(i)];
    if (result.trace.empty()) {
      result.trace = r.trace;
    } else {
      result.trace.insert(result.trace.end(), r.trace.begin() + 1, r.trace.end());
    }
    result.iterations += r.iterations;
    result.termination = r.termination;
  };

  const int warmup = std::min(options.freeze_weight_iterations, config.max_iterations);
  if (warmup > 0) {
    std::vector<Index> fixed = always_fixed;
    for (const auto& block : layout.blocks()) {
      const bool weights = block.name.ends_with(".kernel.weights");
      const bool noise = options.freeze_noise && block.name.ends_with(".noise_variance");
      const bool lengthscale = options.freeze_lengthscale && block.name.ends_with(".lengthscale");
      if (!(weights || noise || lengthscale)) continue;
      const Index off = layout.offset(block.name);
      for (Index i = 0; i < block.size(); ++i) fixed.push_back(off + i);
    }
    std::sort(fixed.begin(), fixed.end());
    fixed.erase(std::unique(fixed.begin(), fixed.end()), fixed.end());
    run_phase(fixed, warmup);
  }
  const int remaining = config.max_iterations - result.iterations;
  if (remaining > 0) run_phase(always_fixed, remaining);

  result.model = model;
  unpack_into(x, layout, result.model);
  return result;
}

Vector normalized_weights(const ViewParams& view) {
  const Vector& w = view.kernel.weights;
  if (w.size() == 0) return w;
  const double top = w.maxCoeff();
  if (!(top > 0.0)) return Vector::Zero(w.size());
  return w / top;
}

Segmentation segment(const MrdModel& model, double delta_rel) {
  if (!(delta_rel > 0.0 && delta_rel < 1.0)) {
    throw InvalidArgument("segment: delta must lie in (0, 1), got " + std::to_string(delta_rel));
  }
  const std::size_t nv = model.views.size();
  if (nv == 0) throw InvalidArgument("segment: model has no views");
  const Index nq = model.latent_dim();

  Segmentation seg;
  seg.delta_rel = delta_rel;
  seg.private_dims.resize(nv);
  std::vector<Vector> norm;
  for (const auto& v : model.views) {
    seg.view_names.push_back(v.name);
    norm.push_back(normalized_weights(v));
    seg.delta_abs.push_back(delta_rel * (v.kernel.weights.size() ? v.kernel.weights.maxCoeff() : 0.0));
  }

  for (Index q = 0; q < nq; ++q) {
    std::vector<std::size_t> on;
    bool near = false;
    for (std::size_t i = 0; i < nv; ++i) {
      const double w = norm[i][q];
      if (w > delta_rel) on.push_back(i);
      if (w > 0.1 * delta_rel && w < 10.0 * delta_rel) near = true;
    }
    if (near) seg.borderline.push_back(q);
    if (on.empty()) {
      seg.inactive.push_back(q);
    } else if (on.size() == nv) {
      seg.shared.push_back(q);
    } else if (on.size() == 1) {
      seg.private_dims[on.front()].push_back(q);
    } else {
      auto it = std::find_if(seg.partial.begin(), seg.partial.end(),
                             [&](const SubsetDims& s) { return s.views == on; });
      if (it == seg.partial.end()) {
        seg.partial.push_back({on, {q}});
      } else {
        it->dims.push_back(q);
      }
    }
  }
  return seg;
}

}  // namespace mrd

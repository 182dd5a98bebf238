#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mrd/optim.hpp"
#include "mrd/types.hpp"

namespace mrd {

/// Raw (unstandardized) observations of one view.
struct ViewData {
  std::string name;
  Matrix data;
  std::vector<std::string> columns;  // optional; generated when empty
};

/// Builds an untrained model.
///
/// Each view is standardized per column (zero mean, unit variance; constant
/// columns keep scale 1). The latent means are the first Q principal-component
/// projections of the column-wise concatenation of the standardized views,
/// variances start at 0.1, each view's M inducing inputs are a seeded random
/// subset of those means, ARD weights and kernel variance start at 1 and the
/// noise variance at 1% of the view's (standardized) data variance.
MrdModel init_model(const std::vector<ViewData>& views, Index latent_dim, Index num_inducing,
                    LatentPrior prior, std::uint64_t seed);

/// Twice the median gap between consecutive timestamps of the same sequence;
/// 1 when no sequence has two points.
double default_lengthscale(const Vector& timestamps, const std::vector<int>& sequence_ids);

struct TrainOptions {
  /// Iterations at the start during which ARD weights are held fixed so q(X)
  /// can settle before dimensions are switched off. 0 disables the phase.
  int freeze_weight_iterations = 50;
  /// Also hold the noise variances fixed during that phase. Without this the
  /// noise tends to absorb all variance before the mappings fit anything.
  bool freeze_noise = true;
  /// Same for the temporal prior's lengthscale.
  bool freeze_lengthscale = true;
  /// Views whose noise variance stays at its initial value throughout, e.g.
  /// 1-of-K label views, whose noise otherwise collapses towards zero.
  std::vector<std::string> fixed_noise_views;
};

struct TrainResult {
  MrdModel model;
  std::vector<double> trace;
  Termination termination = Termination::kMaxIterations;
  int iterations = 0;
};

TrainResult train(const MrdModel& model, const OptimConfig& config, const TrainOptions& options = {});

/// Weights divided by their maximum (all zeros stay zeros).
Vector normalized_weights(const ViewParams& view);

/// Dimensions switched on in a proper subset (>= 2) of views, for models with
/// more than two views.
struct SubsetDims {
  std::vector<std::size_t> views;
  std::vector<Index> dims;
};

/// Partition of the latent dimensions (0-based) into shared, per-view private
/// and inactive sets, from thresholding normalized ARD weights.
struct Segmentation {
  std::vector<std::string> view_names;
  double delta_rel = 0.01;
  std::vector<double> delta_abs;  // per view: delta_rel * max raw weight
  std::vector<Index> shared;
  std::vector<std::vector<Index>> private_dims;
  std::vector<SubsetDims> partial;
  std::vector<Index> inactive;
  /// Dimensions whose normalized weight is within a factor of 10 of delta_rel
  /// in some view. Informational only.
  std::vector<Index> borderline;
};

/// Dimension q is on for a view iff its normalized weight exceeds delta_rel.
Segmentation segment(const MrdModel& model, double delta_rel);

}  // namespace mrd

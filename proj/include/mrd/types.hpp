#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mrd/kernel.hpp"
#include "mrd/psi.hpp"

namespace mrd {

/// One observed view: its (standardized) data, cached Gram, GP mapping
/// hyperparameters and inducing inputs.
struct ViewParams {
  std::string name;
  std::vector<std::string> columns;
  Matrix data;       // N x D, standardized
  Matrix data_gram;  // data * data^T, cached at construction
  ArdKernelParams kernel;
  double noise_variance = 0.01;
  Matrix inducing;   // M x Q
  // Column standardization applied to the raw data: data = (raw - mean) / scale.
  Vector col_mean;
  Vector col_scale;

  Index num_points() const { return data.rows(); }
  Index output_dim() const { return data.cols(); }
  Index num_inducing() const { return inducing.rows(); }

  Matrix standardize(const Matrix& raw) const;
  Matrix destandardize(const Matrix& standardized) const;
};

/// Builds a view with an identity standardization and a freshly computed Gram.
ViewParams make_view(std::string name, Matrix data, ArdKernelParams kernel, double noise_variance,
                     Matrix inducing);

enum class PriorKind { kStandard, kDynamical };

/// p(X): either independent standard normals or, per latent dimension, a
/// temporal GP over observation times that is block-diagonal across sequences.
struct LatentPrior {
  PriorKind kind = PriorKind::kStandard;
  Vector timestamps;
  std::vector<int> sequence_ids;
  TemporalKernelParams temporal;

  static LatentPrior standard() { return {}; }
  static LatentPrior dynamical(Vector timestamps, std::vector<int> sequence_ids,
                               TemporalKernelParams temporal);

  bool is_dynamical() const { return kind == PriorKind::kDynamical; }
  /// Checks shapes against N and strict time ordering within each sequence.
  void validate(Index n) const;
  /// Point indices of each sequence, in order of first appearance.
  std::vector<std::vector<Index>> sequence_blocks() const;
};

struct MrdModel {
  std::vector<ViewParams> views;
  VariationalLatent q;
  LatentPrior prior;
  double delta_rel = 0.01;
  std::uint64_t seed = 0;

  Index num_points() const { return q.num_points(); }
  Index latent_dim() const { return q.latent_dim(); }
  /// Index of the view called `name`; throws InvalidArgument if absent.
  std::size_t view_index(const std::string& name) const;
  void validate() const;
};

}  // namespace mrd

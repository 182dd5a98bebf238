#include "mrd/types.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "mrd/bound.hpp"
#include "mrd/errors.hpp"

namespace mrd {

Matrix ViewParams::standardize(const Matrix& raw) const {
  if (raw.cols() != col_mean.size()) {
    throw DimensionError("view '" + name + "' has " + std::to_string(col_mean.size()) +
                         " columns, input has " + std::to_string(raw.cols()));
  }
  return (raw.rowwise() - col_mean.transpose()).array().rowwise() /
         col_scale.transpose().array();
}

Matrix ViewParams::destandardize(const Matrix& standardized) const {
  return (standardized.array().rowwise() * col_scale.transpose().array()).matrix().rowwise() +
         col_mean.transpose();
}

ViewParams make_view(std::string name, Matrix data, ArdKernelParams kernel, double noise_variance,
                     Matrix inducing) {
  ViewParams v;
  v.name = std::move(name);
  for (Index d = 0; d < data.cols(); ++d) v.columns.push_back("y" + std::to_string(d));
  v.data_gram = precompute_data_gram(data);
  v.col_mean = Vector::Zero(data.cols());
  v.col_scale = Vector::Ones(data.cols());
  v.data = std::move(data);
  v.kernel = std::move(kernel);
  v.noise_variance = noise_variance;
  v.inducing = std::move(inducing);
  return v;
}

LatentPrior LatentPrior::dynamical(Vector timestamps, std::vector<int> sequence_ids,
                                   TemporalKernelParams temporal) {
  LatentPrior p;
  p.kind = PriorKind::kDynamical;
  p.timestamps = std::move(timestamps);
  p.sequence_ids = std::move(sequence_ids);
  p.temporal = temporal;
  return p;
}

void LatentPrior::validate(Index n) const {
  if (!is_dynamical()) return;
  temporal.validate();
  if (timestamps.size() != n || static_cast<Index>(sequence_ids.size()) != n) {
    throw DimensionError("dynamical prior: expected " + std::to_string(n) +
                         " timestamps and sequence ids, got " + std::to_string(timestamps.size()) +
                         " and " + std::to_string(sequence_ids.size()));
  }
  if (!timestamps.allFinite()) throw DataError("dynamical prior: timestamps must be finite");
  std::map<int, double> last;
  for (Index i = 0; i < n; ++i) {
    auto it = last.find(sequence_ids[i]);
    if (it != last.end() && !(timestamps[i] > it->second)) {
      throw DataError("dynamical prior: timestamps must increase strictly within sequence " +
                      std::to_string(sequence_ids[i]) + " (row " + std::to_string(i + 1) + ")");
    }
    last[sequence_ids[i]] = timestamps[i];
  }
}

std::vector<std::vector<Index>> LatentPrior::sequence_blocks() const {
  std::vector<std::vector<Index>> blocks;
  std::map<int, std::size_t> slot;
  for (std::size_t i = 0; i < sequence_ids.size(); ++i) {
    auto [it, inserted] = slot.emplace(sequence_ids[i], blocks.size());
    if (inserted) blocks.emplace_back();
    blocks[it->second].push_back(static_cast<Index>(i));
  }
  return blocks;
}

std::size_t MrdModel::view_index(const std::string& name) const {
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (views[i].name == name) return i;
  }
  throw InvalidArgument("unknown view '" + name + "'");
}

void MrdModel::validate() const {
  if (views.empty()) throw InvalidArgument("model has no views");
  q.validate();
  const Index n = num_points();
  const Index nq = latent_dim();
  for (const auto& v : views) {
    if (v.data.rows() != n) {
      throw DimensionError("view '" + v.name + "' has " + std::to_string(v.data.rows()) +
                           " rows, q(X) has " + std::to_string(n));
    }
    if (v.data_gram.rows() != n || v.data_gram.cols() != n) {
      throw DimensionError("view '" + v.name + "': data Gram is not N x N");
    }
    if (v.inducing.cols() != nq || v.kernel.latent_dim() != nq) {
      throw DimensionError("view '" + v.name + "': inducing inputs or weights do not have Q = " +
                           std::to_string(nq) + " columns");
    }
    if (v.inducing.rows() < 1) throw DimensionError("view '" + v.name + "' has no inducing inputs");
    if (v.col_mean.size() != v.data.cols() || v.col_scale.size() != v.data.cols()) {
      throw DimensionError("view '" + v.name + "': standardization has wrong length");
    }
    v.kernel.validate();
    if (!(v.noise_variance > 0.0) || !std::isfinite(v.noise_variance)) {
      throw InvalidArgument("view '" + v.name + "': noise variance must be positive");
    }
  }
  prior.validate(n);
}

}  // namespace mrd

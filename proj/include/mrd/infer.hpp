#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mrd/model.hpp"
#include "mrd/optim.hpp"

namespace mrd {

/// q(X*) for a batch of test points observed in one view.
struct TestLatent {
  Matrix means;      // N* x Q
  Matrix variances;  // N* x Q
  std::string source_view;
  std::vector<double> trace;
};

/// Maximizes the source view's bound over (Y, Y*) and (X, X*) with respect to
/// q(X*) only; everything learned in training stays fixed. `y_star` is in raw
/// (unstandardized) units. With a dynamical prior `test_times` is required and
/// the test points form one new sequence.
///
/// Means start at the average latent mean of the 5 training points closest in
/// (standardized) data space; variances start at 0.1.
TestLatent infer_test_latent(const MrdModel& model, const Matrix& y_star, const std::string& view,
                             const OptimConfig& config,
                             const std::optional<Vector>& test_times = std::nullopt);

/// For each test point, K training indices (0-based) with distances, sorted.
struct CandidateList {
  std::vector<std::vector<Index>> indices;
  std::vector<std::vector<double>> distances;
};

/// Latent dimensions used for retrieval between two views: those switched on
/// in both at the model's delta_rel.
std::vector<Index> shared_dims(const MrdModel& model, std::size_t source, std::size_t target);

/// Euclidean distance over `shared_dims(source, target)`, each coordinate
/// scaled by the target view's normalized weight. Ties go to the lower index.
CandidateList nearest_shared(const MrdModel& model, const TestLatent& test,
                             const std::string& target_view, Index k);

/// Sparse-GP predictive mean of a view at deterministic latent inputs, in raw
/// units: K(X, Z) A^-1 beta psi1^T Y, destandardized.
Matrix predictive_mean(const MrdModel& model, const std::string& view, const Matrix& x);

struct TransferResult {
  Matrix predictions;  // N* x D_target, from the top candidate
  CandidateList candidates;
  TestLatent latent;
  /// candidate_predictions[k] is the prediction through the k-th candidate;
  /// filled only when requested.
  std::vector<Matrix> candidate_predictions;
};

TransferResult transfer(const MrdModel& model, const Matrix& y_star, const std::string& source_view,
                        const std::string& target_view, Index k, const OptimConfig& config,
                        const std::optional<Vector>& test_times = std::nullopt,
                        bool all_candidates = false);

/// Rows of the label view's raw training data must be 1-of-C. Returns 0-based
/// class indices; ties go to the lowest index.
std::vector<int> classify(const MrdModel& model, const Matrix& y_star,
                          const std::string& source_view, const std::string& label_view, Index k,
                          const OptimConfig& config,
                          const std::optional<Vector>& test_times = std::nullopt);

/// Predictive means along one latent coordinate (0-based `dim`) from `low` to
/// `high` in `steps` evenly spaced values, other coordinates fixed at `base`.
Matrix sample_traversal(const MrdModel& model, const std::string& view, const Vector& base,
                        Index dim, double low, double high, Index steps);

/// Mean squared second difference of each column, averaged over columns.
double mean_sq_second_difference(const Matrix& trajectory);

}  // namespace mrd

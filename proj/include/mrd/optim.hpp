#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mrd/bound.hpp"
#include "mrd/types.hpp"

namespace mrd {

enum class Transform { kIdentity, kLog };

struct ParamBlock {
  std::string name;
  Index rows = 0;
  Index cols = 0;
  Transform transform = Transform::kIdentity;

  Index size() const { return rows * cols; }
};

/// Ordered description of the free parameters of an MrdModel. Matrices are
/// flattened column-major. Positive quantities are stored as their logarithm.
///
/// Order: for each view i
///   views[i].kernel.variance (log), views[i].kernel.weights (log, Q),
///   views[i].noise_variance (log), views[i].inducing (M_i x Q);
/// then q.means (N x Q), q.variances (log, N x Q), and for dynamical priors
/// prior.temporal.lengthscale (log).
class ParamLayout {
 public:
  ParamLayout() = default;
  explicit ParamLayout(std::vector<ParamBlock> blocks);

  static ParamLayout for_model(const MrdModel& model);

  const std::vector<ParamBlock>& blocks() const { return blocks_; }
  Index size() const { return size_; }
  /// Offset of the named block; throws InvalidArgument when absent.
  Index offset(const std::string& name) const;
  /// Flat indices of every block whose name does not end with `suffix`.
  std::vector<Index> indices_excluding_suffix(const std::string& suffix) const;

 private:
  std::vector<ParamBlock> blocks_;
  Index size_ = 0;
};

Vector pack(const MrdModel& model, const ParamLayout& layout);

/// Writes the unconstrained vector into `model` (which supplies data and
/// structure). Throws DimensionError when shapes disagree.
void unpack_into(const Vector& x, const ParamLayout& layout, MrdModel& model);
MrdModel unpack(const Vector& x, const ParamLayout& layout, const MrdModel& structure);

/// Chain rule into unconstrained space: log-transformed entries are multiplied
/// by their constrained value.
Vector pack_gradient(const BoundGradient& grad, const MrdModel& model, const ParamLayout& layout);

/// Objective callback: returns f(x) and writes df/dx into `grad`.
using Objective = std::function<double(const Vector& x, Vector& grad)>;

struct OptimConfig {
  int max_iterations = 1000;
  double gradient_tolerance = 1e-4;   // on the max-norm of the gradient
  double objective_tolerance = 1e-10; // on |f_k+1 - f_k| / max(1, |f_k|)
  std::uint64_t seed = 0;
  int memory = 10;
  double sufficient_increase = 1e-4;

  void validate() const;
};

enum class Termination {
  kGradientTolerance,
  kObjectiveTolerance,
  kMaxIterations,
  kLineSearchFailed,
};

std::string to_string(Termination t);

struct OptimResult {
  Vector x;
  double value = 0.0;
  std::vector<double> trace;  // objective at x0 and after each accepted step
  Termination termination = Termination::kMaxIterations;
  int iterations = 0;
  int evaluations = 0;
};

/// Limited-memory BFGS ascent with backtracking (Armijo) line search.
/// The objective-change test only ends the run when a steepest-ascent step
/// stalls; a stalled quasi-Newton step clears the memory and retries.
/// Accepted iterates never decrease the objective. Non-finite trial values
/// are rejected and the step halved; 50 consecutive non-finite trials raise
/// NumericalError.
OptimResult maximize(const Objective& objective, const Vector& x0, const OptimConfig& config);

struct FiniteDiffReport {
  Vector analytic;
  Vector numeric;
  Vector rel_error;  // |a - n| / max(|a|, |n|, 1e-8)
  double max_rel_error = 0.0;
  Index worst_index = -1;
};

/// Central-difference check of the gradient returned by `objective`.
FiniteDiffReport finite_diff_check(const Objective& objective, const Vector& x, double step);

}  // namespace mrd

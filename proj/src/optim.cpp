#include "mrd/optim.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <type_traits>

#include "mrd/errors.hpp"

namespace mrd {

ParamLayout::ParamLayout(std::vector<ParamBlock> blocks) : blocks_(std::move(blocks)) {
  for (const auto& b : blocks_) size_ += b.size();
}

ParamLayout ParamLayout::for_model(const MrdModel& model) {
  std::vector<ParamBlock> blocks;
  const Index nq = model.latent_dim();
  for (std::size_t i = 0; i < model.views.size(); ++i) {
    const std::string prefix = "views[" + std::to_string(i) + "].";
    blocks.push_back({prefix + "kernel.variance", 1, 1, Transform::kLog});
    blocks.push_back({prefix + "kernel.weights", nq, 1, Transform::kLog});
    blocks.push_back({prefix + "noise_variance", 1, 1, Transform::kLog});
    blocks.push_back({prefix + "inducing", model.views[i].num_inducing(), nq, Transform::kIdentity});
  }
  blocks.push_back({"q.means", model.num_points(), nq, Transform::kIdentity});
  blocks.push_back({"q.variances", model.num_points(), nq, Transform::kLog});
  if (model.prior.is_dynamical()) {
    blocks.push_back({"prior.temporal.lengthscale", 1, 1, Transform::kLog});
  }
  return ParamLayout(std::move(blocks));
}

Index ParamLayout::offset(const std::string& name) const {
  Index off = 0;
  for (const auto& b : blocks_) {
    if (b.name == name) return off;
    off += b.size();
  }
  throw InvalidArgument("parameter layout has no block '" + name + "'");
}

std::vector<Index> ParamLayout::indices_excluding_suffix(const std::string& suffix) const {
  std::vector<Index> out;
  Index off = 0;
  for (const auto& b : blocks_) {
    const bool match =
        b.name.size() >= suffix.size() &&
        b.name.compare(b.name.size() - suffix.size(), suffix.size(), suffix) == 0;
    if (!match) {
      for (Index i = 0; i < b.size(); ++i) out.push_back(off + i);
    }
    off += b.size();
  }
  return out;
}

namespace {

// Parameter storage of `model` in layout order.
template <typename Model>
auto model_slots(Model& model) {
  using Ptr = std::conditional_t<std::is_const_v<Model>, const double*, double*>;
  struct Slot {
    Ptr data;
    Index size;
  };
  std::vector<Slot> slots;
  for (auto& v : model.views) {
    slots.push_back({&v.kernel.variance, 1});
    slots.push_back({v.kernel.weights.data(), v.kernel.weights.size()});
    slots.push_back({&v.noise_variance, 1});
    slots.push_back({v.inducing.data(), v.inducing.size()});
  }
  slots.push_back({model.q.means.data(), model.q.means.size()});
  slots.push_back({model.q.variances.data(), model.q.variances.size()});
  if (model.prior.is_dynamical()) slots.push_back({&model.prior.temporal.lengthscale, 1});
  return slots;
}

template <typename Slots>
void check_layout(const Slots& slots, const ParamLayout& layout, Index x_size) {
  const auto& blocks = layout.blocks();
  if (slots.size() != blocks.size() || x_size != layout.size()) {
    throw DimensionError("parameter vector does not match model structure (layout has " +
                         std::to_string(layout.size()) + " entries, vector " +
                         std::to_string(x_size) + ")");
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].size != blocks[i].size()) {
      throw DimensionError("parameter block '" + blocks[i].name + "' has wrong size");
    }
  }
}

}  // namespace

Vector pack(const MrdModel& model, const ParamLayout& layout) {
  const auto slots = model_slots(model);
  check_layout(slots, layout, layout.size());
  Vector x(layout.size());
  Index off = 0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const bool log = layout.blocks()[i].transform == Transform::kLog;
    for (Index j = 0; j < slots[i].size; ++j) {
      x[off + j] = log ? std::log(slots[i].data[j]) : slots[i].data[j];
    }
    off += slots[i].size;
  }
  return x;
}

void unpack_into(const Vector& x, const ParamLayout& layout, MrdModel& model) {
  const auto slots = model_slots(model);
  check_layout(slots, layout, x.size());
  Index off = 0;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const bool log = layout.blocks()[i].transform == Transform::kLog;
    for (Index j = 0; j < slots[i].size; ++j) {
      slots[i].data[j] = log ? std::exp(x[off + j]) : x[off + j];
    }
    off += slots[i].size;
  }
}

MrdModel unpack(const Vector& x, const ParamLayout& layout, const MrdModel& structure) {
  MrdModel out = structure;
  unpack_into(x, layout, out);
  return out;
}

Vector pack_gradient(const BoundGradient& grad, const MrdModel& model, const ParamLayout& layout) {
  // Mirror the model's slot structure with the gradient's storage.
  MrdModel shadow;
  shadow.prior = model.prior;
  shadow.q.means = grad.means;
  shadow.q.variances = grad.variances;
  shadow.prior.temporal.lengthscale = grad.temporal_lengthscale;
  if (grad.views.size() != model.views.size()) {
    throw DimensionError("gradient has a different number of views than the model");
  }
  for (const auto& gv : grad.views) {
    ViewParams v;
    v.kernel.variance = gv.kernel_variance;
    v.kernel.weights = gv.weights;
    v.noise_variance = gv.noise_variance;
    v.inducing = gv.inducing;
    shadow.views.push_back(std::move(v));
  }
  const auto gslots = model_slots(shadow);
  const auto vslots = model_slots(model);
  check_layout(gslots, layout, layout.size());
  Vector g(layout.size());
  Index off = 0;
  for (std::size_t i = 0; i < gslots.size(); ++i) {
    const bool log = layout.blocks()[i].transform == Transform::kLog;
    for (Index j = 0; j < gslots[i].size; ++j) {
      g[off + j] = log ? gslots[i].data[j] * vslots[i].data[j] : gslots[i].data[j];
    }
    off += gslots[i].size;
  }
  return g;
}

void OptimConfig::validate() const {
  if (max_iterations < 1) throw InvalidArgument("max_iterations must be positive");
  if (!(gradient_tolerance > 0.0) || !(objective_tolerance > 0.0)) {
    throw InvalidArgument("optimizer tolerances must be positive");
  }
  if (memory < 1) throw InvalidArgument("L-BFGS memory must be positive");
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::kGradientTolerance: return "gradient_tolerance";
    case Termination::kObjectiveTolerance: return "objective_tolerance";
    case Termination::kMaxIterations: return "max_iterations";
    case Termination::kLineSearchFailed: return "line_search_failed";
  }
  return "unknown";
}

OptimResult maximize(const Objective& objective, const Vector& x0, const OptimConfig& config) {
  config.validate();
  constexpr int kMaxNonFinite = 50;
  constexpr int kMaxBacktracks = 60;

  OptimResult res;
  res.x = x0;
  Vector grad(x0.size());
  double f = objective(res.x, grad);
  ++res.evaluations;
  if (!std::isfinite(f) || !grad.allFinite()) {
    throw NumericalError("objective is not finite at the starting point");
  }
  res.trace.push_back(f);

  // Work with the negated objective: minimize h = -f.
  Vector g = -grad;
  std::deque<Vector> s_hist, y_hist;
  std::deque<double> rho_hist;
  Vector trial_grad(x0.size());

  res.termination = Termination::kMaxIterations;
  for (int iter = 0; iter < config.max_iterations; ++iter) {
    if (g.lpNorm<Eigen::Infinity>() <= config.gradient_tolerance) {
      res.termination = Termination::kGradientTolerance;
      break;
    }

    // Two-loop recursion.
    Vector d = -g;
    const std::size_t mem = s_hist.size();
    std::vector<double> alpha(mem);
    for (std::size_t k = mem; k-- > 0;) {
      alpha[k] = rho_hist[k] * s_hist[k].dot(d);
      d -= alpha[k] * y_hist[k];
    }
    if (mem > 0) d *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t k = 0; k < mem; ++k) {
      const double b = rho_hist[k] * y_hist[k].dot(d);
      d += (alpha[k] - b) * s_hist[k];
    }
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -g;
      slope = g.dot(d);
    }

    const bool used_steepest = s_hist.empty();
    double step = used_steepest ? std::min(1.0, 1.0 / d.norm()) : 1.0;
    int non_finite = 0;
    int backtracks = 0;
    bool accepted = false;
    Vector x_trial;
    double f_trial = 0.0;
    while (true) {
      x_trial = res.x + step * d;
      f_trial = objective(x_trial, trial_grad);
      ++res.evaluations;
      if (!std::isfinite(f_trial) || !trial_grad.allFinite()) {
        if (++non_finite >= kMaxNonFinite) {
          throw NumericalError("objective non-finite after " + std::to_string(kMaxNonFinite) +
                               " consecutive step rejections");
        }
        step *= 0.5;
        continue;
      }
      non_finite = 0;
      const double h_trial = -f_trial;
      if (h_trial <= -f + config.sufficient_increase * step * slope && f_trial >= f) {
        accepted = true;
        break;
      }
      if (++backtracks >= kMaxBacktracks) break;
      // Safeguarded quadratic interpolation.
      const double denom = 2.0 * (h_trial + f - slope * step);
      double next = denom > 0.0 ? -slope * step * step / denom : 0.5 * step;
      step = std::clamp(next, 0.1 * step, 0.5 * step);
    }
    if (!accepted) {
      res.termination = Termination::kLineSearchFailed;
      break;
    }

    const Vector s = x_trial - res.x;
    const Vector g_new = -trial_grad;
    const Vector y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      if (static_cast<int>(s_hist.size()) == config.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
    }
    const double f_old = f;
    res.x = x_trial;
    f = f_trial;
    g = g_new;
    res.trace.push_back(f);
    ++res.iterations;
    if (std::abs(f - f_old) <= config.objective_tolerance * std::max(1.0, std::abs(f_old))) {
      // A stalled quasi-Newton step gets one retry from steepest ascent.
      if (!used_steepest) {
        s_hist.clear();
        y_hist.clear();
        rho_hist.clear();
        continue;
      }
      res.termination = Termination::kObjectiveTolerance;
      break;
    }
  }
  if (res.termination == Termination::kMaxIterations &&
      g.lpNorm<Eigen::Infinity>() <= config.gradient_tolerance) {
    res.termination = Termination::kGradientTolerance;
  }
  res.value = f;
  return res;
}

FiniteDiffReport finite_diff_check(const Objective& objective, const Vector& x, double step) {
  if (!(step > 0.0)) throw InvalidArgument("finite_diff_check: step must be positive");
  FiniteDiffReport rep;
  rep.analytic.resize(x.size());
  objective(x, rep.analytic);
  rep.numeric.resize(x.size());
  rep.rel_error.resize(x.size());
  Vector scratch(x.size());
  Vector xp = x;
  for (Index i = 0; i < x.size(); ++i) {
    xp[i] = x[i] + step;
    const double fp = objective(xp, scratch);
    xp[i] = x[i] - step;
    const double fm = objective(xp, scratch);
    xp[i] = x[i];
    rep.numeric[i] = (fp - fm) / (2.0 * step);
    const double a = rep.analytic[i];
    const double n = rep.numeric[i];
    rep.rel_error[i] = std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-8});
    if (rep.rel_error[i] > rep.max_rel_error || rep.worst_index < 0) {
      rep.max_rel_error = rep.rel_error[i];
      rep.worst_index = i;
    }
  }
  return rep;
}

}  // namespace mrd

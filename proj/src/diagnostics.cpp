#include "mrd/diagnostics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "mrd/bound.hpp"
#include "mrd/errors.hpp"
#include "mrd/optim.hpp"
#include "mrd/rng.hpp"

namespace mrd {

namespace {

Matrix gaussian(std::mt19937_64& rng, Index rows, Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

MrdModel random_model(std::mt19937_64& rng, Index n, Index nq, Index m, const std::vector<Index>& dims) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  MrdModel model;
  for (std::size_t v = 0; v < dims.size(); ++v) {
    ArdKernelParams k;
    k.variance = 0.5 + unit(rng);
    k.weights = (gaussian(rng, nq, 1).array().abs() + 0.3).matrix();
    model.views.push_back(make_view("view" + std::to_string(v), gaussian(rng, n, dims[v]), k,
                                    0.2 + 0.3 * unit(rng), gaussian(rng, m, nq)));
  }
  model.q.means = gaussian(rng, n, nq);
  model.q.variances = (gaussian(rng, n, nq).array().abs() * 0.5 + 0.1).matrix();
  return model;
}

}  // namespace

MrdModel make_gradcheck_model(std::uint64_t seed, bool dynamical) {
  auto rng = named_stream(seed, dynamical ? "gradcheck/dynamical" : "gradcheck/standard");
  MrdModel model = random_model(rng, 6, 3, 4, {5, 5});
  model.seed = seed;
  if (dynamical) {
    Vector t(6);
    t << 0.0, 0.7, 1.5, 0.0, 0.4, 1.1;
    model.prior = LatentPrior::dynamical(t, {0, 0, 0, 1, 1, 1}, TemporalKernelParams{1.0, 1.3, 1e-5});
  }
  model.validate();
  return model;
}

std::vector<GradcheckResult> run_gradcheck(std::uint64_t seed, double step) {
  std::vector<GradcheckResult> out;
  for (bool dynamical : {false, true}) {
    const MrdModel model = make_gradcheck_model(seed, dynamical);
    const ParamLayout layout = ParamLayout::for_model(model);
    MrdModel work = model;
    Objective f = [&](const Vector& x, Vector& g) {
      unpack_into(x, layout, work);
      const BoundGradient bg = total_bound_grad(work);
      g = pack_gradient(bg, work, layout);
      return bg.value;
    };
    const FiniteDiffReport rep = finite_diff_check(f, pack(model, layout), step);
    GradcheckResult r;
    r.dynamical = dynamical;
    r.max_rel_error = rep.max_rel_error;
    for (const auto& b : layout.blocks()) {
      const Index off = layout.offset(b.name);
      if (rep.worst_index >= off && rep.worst_index < off + b.size()) {
        r.worst_parameter = b.name + "[" + std::to_string(rep.worst_index - off) + "]";
      }
    }
    out.push_back(r);
  }
  return out;
}

std::vector<ScalingTiming> bench_scaling(const std::vector<std::pair<Index, Index>>& grid,
                                         std::uint64_t seed, int repeats) {
  using clock = std::chrono::steady_clock;
  std::vector<ScalingTiming> out;
  for (const auto& [n, d] : grid) {
    auto rng = named_stream(seed, "bench/" + std::to_string(n) + "x" + std::to_string(d));
    const MrdModel model = random_model(rng, n, 4, 20, {d});
    (void)total_bound_grad(model);  // warm-up
    std::vector<double> times;
    for (int r = 0; r < repeats; ++r) {
      const auto t0 = clock::now();
      const BoundGradient g = total_bound_grad(model);
      const auto t1 = clock::now();
      if (!std::isfinite(g.value)) throw NumericalError("bench_scaling: non-finite bound");
      times.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    std::nth_element(times.begin(), times.begin() + times.size() / 2, times.end());
    out.push_back({n, d, times[times.size() / 2]});
  }
  return out;
}

}  // namespace mrd

// Acceptance run: prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>
#include <unistd.h>

#include "mrd/bound.hpp"
#include "mrd/diagnostics.hpp"
#include "mrd/errors.hpp"
#include "mrd/infer.hpp"
#include "mrd/io.hpp"
#include "mrd/synth.hpp"
#include "oracles.hpp"

using namespace mrd;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Every optimizer trace produced during the run, for the monotonicity check.
struct TraceLog {
  std::size_t traces = 0;
  std::size_t decreasing = 0;
  void add(const std::vector<double>& t) {
    ++traces;
    for (std::size_t i = 1; i < t.size(); ++i) {
      if (t[i] < t[i - 1]) {
        ++decreasing;
        return;
      }
    }
  }
};

// save/load round trips of trained models
struct RoundTripLog {
  std::size_t models = 0;
  double worst = 0.0;
  void add(const MrdModel& m) {
    const std::string path = (std::filesystem::temp_directory_path() /
                              ("mrd_acceptance_" + std::to_string(::getpid()) + ".json"))
                                 .string();
    save_model(path, m);
    const MrdModel back = load_model(path);
    std::filesystem::remove(path);
    ++models;
    worst = std::max(worst, std::abs(total_bound(back) - total_bound(m)));
  }
};

TraceLog g_traces;
RoundTripLog g_roundtrip;
int g_failures = 0;
std::map<int, std::string> g_lines;

void report(int id, bool pass, const std::string& detail) {
  std::ostringstream line;
  line << "criterion " << std::setw(2) << id << ": " << (pass ? "PASS" : "FAIL") << "  " << detail;
  g_lines[id] = line.str();
  std::cerr << line.str() << std::endl;
  if (!pass) ++g_failures;
}

TrainResult train_logged(const MrdModel& m, const OptimConfig& c, const TrainOptions& o = {}) {
  TrainResult r = train(m, c, o);
  g_traces.add(r.trace);
  g_roundtrip.add(r.model);
  return r;
}

std::string fmt(double v, int prec = 3) {
  std::ostringstream s;
  s << std::setprecision(prec) << v;
  return s.str();
}

void gradient_check() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (const auto& r : run_gradcheck(0)) worst = std::max(worst, r.max_rel_error);
  const double secs = seconds_since(t0);
  report(1, worst <= 1e-5 && secs < 10.0, "max rel error " + fmt(worst) + ", " + fmt(secs) + " s");
}

void psi_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> size(1, 5);
  std::size_t entries = 0, outside = 0;
  double worst_z = 0.0;
  for (int inst = 0; inst < 5; ++inst) {
    const Index n = size(rng), m = 1 + size(rng) % 4, nq = 1 + size(rng) % 3;
    ArdKernelParams k;
    k.variance = oracle::uniform(rng, 1, 1, 0.5, 2.0)(0, 0);
    k.weights = oracle::uniform(rng, nq, 1, 0.2, 2.0);
    VariationalLatent q;
    q.means = oracle::normal(rng, n, nq);
    q.variances = oracle::uniform(rng, n, nq, 0.1, 1.0);
    const Matrix z = oracle::normal(rng, m, nq);
    const PsiStats exact = psi_stats(k, q, z);
    const PsiMonteCarlo mc = psi_monte_carlo(k, q, z, 1000000, 100 + inst);
    auto check = [&](double a, double b, double se) {
      ++entries;
      const double diff = std::abs(a - b);
      if (se > 0.0) worst_z = std::max(worst_z, diff / se);
      if (diff > 3.0 * se + 1e-12 * std::abs(b)) ++outside;
    };
    check(mc.estimate.psi0, exact.psi0, mc.psi0_stderr);
    for (Index i = 0; i < exact.psi1.size(); ++i) {
      check(mc.estimate.psi1.data()[i], exact.psi1.data()[i], mc.psi1_stderr.data()[i]);
    }
    for (Index i = 0; i < exact.psi2.size(); ++i) {
      check(mc.estimate.psi2.data()[i], exact.psi2.data()[i], mc.psi2_stderr.data()[i]);
    }
  }
  const double secs = seconds_since(t0);
  report(2, outside == 0 && secs < 60.0,
         std::to_string(entries - outside) + "/" + std::to_string(entries) + " entries within 3 s.e. (max " +
             fmt(worst_z) + " s.e.), " + fmt(secs) + " s");
}

void bound_exactness() {
  std::mt19937_64 rng(3);
  double worst_gap = 0.0;
  bool below = true;
  for (int inst = 0; inst < 5; ++inst) {
    const Index n = 6 + inst, nq = 2;
    VariationalLatent q;
    q.means = oracle::normal(rng, n, nq);
    q.variances = Matrix::Constant(n, nq, 1e-12);
    const Matrix y = oracle::normal(rng, n, 3);
    ArdKernelParams k{1.2, oracle::uniform(rng, nq, 1, 0.3, 1.5)};
    const Matrix kd = oracle::ard(k.variance, k.weights, q.means, q.means);
    const double dense = oracle::gp_log_marginal(kd, y, 0.15);
    const ViewParams full = make_view("v", y, k, 0.15, q.means);
    worst_gap = std::max(worst_gap, std::abs(view_evidence_term(full, q) - dense));
    const ViewParams sparse = make_view("v", y, k, 0.15, q.means.topRows(n - 2));
    below = below && view_evidence_term(sparse, q) <= dense;
  }
  report(3, worst_gap <= 1e-4 && below,
         "max |F - log p| at M=N: " + fmt(worst_gap) + "; M=N-2 below dense: " + (below ? "yes" : "no"));
}

void lower_bound() {
  std::mt19937_64 rng(4);
  const Matrix x = oracle::normal(rng, 3, 1);
  Matrix y(3, 2);
  y.col(0) = (2.0 * x.col(0)).array().sin();
  y.col(1) = x.col(0).array().cos();
  y += oracle::normal(rng, 3, 2, 0.1);
  MrdModel m;
  m.q.means = oracle::normal(rng, 3, 1, 0.5);
  m.q.variances = Matrix::Constant(3, 1, 0.5);
  m.views.push_back(make_view("y", y, ArdKernelParams{1.0, Vector::Constant(1, 1.0)}, 0.1, oracle::normal(rng, 3, 1)));

  // kernel and noise stay at their values; q(X) and the inducing inputs are fitted
  const ParamLayout layout = ParamLayout::for_model(m);
  std::vector<Index> free_idx;
  for (const char* block : {"views[0].inducing", "q.means", "q.variances"}) {
    for (const auto& b : layout.blocks()) {
      if (b.name == block) {
        for (Index i = 0; i < b.size(); ++i) free_idx.push_back(layout.offset(block) + i);
      }
    }
  }
  const Vector x0 = pack(m, layout);
  MrdModel work = m;
  auto expand = [&](const Vector& z) {
    Vector full = x0;
    for (std::size_t i = 0; i < free_idx.size(); ++i) full[free_idx[i]] = z[static_cast<Index>(i)];
    return full;
  };
  Objective f = [&](const Vector& z, Vector& g) {
    unpack_into(expand(z), layout, work);
    const BoundGradient bg = total_bound_grad(work);
    const Vector full = pack_gradient(bg, work, layout);
    g.resize(z.size());
    for (std::size_t i = 0; i < free_idx.size(); ++i) g[static_cast<Index>(i)] = full[free_idx[i]];
    return bg.value;
  };
  Vector z0(static_cast<Index>(free_idx.size()));
  for (std::size_t i = 0; i < free_idx.size(); ++i) z0[static_cast<Index>(i)] = x0[free_idx[i]];
  OptimConfig cfg;
  cfg.max_iterations = 500;
  const OptimResult r = maximize(f, z0, cfg);
  g_traces.add(r.trace);
  const MrdModel fitted = unpack(expand(r.x), layout, m);
  const double bound = total_bound(fitted);
  const oracle::McEstimate mc = oracle::mc_log_evidence(1.0, Vector::Constant(1, 1.0), 0.1, y, 1000000, 44);
  report(4, bound <= mc.value + 3.0 * mc.stderr_,
         "F = " + fmt(bound, 6) + ", MC log p(Y) = " + fmt(mc.value, 6) + " +- " + fmt(mc.stderr_, 2));
}

void factorization_recovery() {
  int matches = 0;
  double slowest = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto t0 = Clock::now();
    SynthSpec s;
    s.n = 100;
    s.n_shared = 1;
    s.n_private = {1, 1};
    s.output_dims = {10, 10};
    s.noise_std = {0.05, 0.05};
    s.n_sequences = 10;
    s.seed = seed;
    const SynthData d = generate(s);
    const MrdModel m = init_model(d.views, 6, 20, LatentPrior::standard(), seed);
    OptimConfig cfg;
    cfg.max_iterations = 1000;
    const TrainResult r = train_logged(m, cfg);
    matches += score_segmentation(segment(r.model, 0.01), d.truth).exact_match;
    slowest = std::max(slowest, seconds_since(t0));
  }
  report(5, matches >= 8 && slowest < 300.0,
         std::to_string(matches) + "/10 seeds match, slowest run " + fmt(slowest) + " s");
}

double mean_error(const Matrix& a, const Matrix& b) { return (a - b).rowwise().norm().mean(); }

// Latent trajectory smoothness with each dimension scaled by the spread of
// the training latents, so models with different latent scales compare.
double normalized_roughness(const Matrix& latent, const MrdModel& m) {
  Matrix x = latent;
  for (Index q = 0; q < x.cols(); ++q) {
    const double var = (m.q.means.col(q).array() - m.q.means.col(q).mean()).square().mean();
    x.col(q) /= std::sqrt(var);
  }
  return mean_sq_second_difference(x);
}

void sequence_transfer() {
  constexpr Index kTrainSeq = 6, kTestSeq = 3, kLen = 20;
  int beats_nn = 0, beats_static = 0, smoother = 0;
  std::ostringstream detail;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SynthSpec s;
    s.n = (kTrainSeq + kTestSeq) * kLen;
    s.n_shared = 1;
    s.n_private = {1, 0};
    s.output_dims = {10, 10};
    s.noise_std = {0.5, 0.02};
    s.n_sequences = kTrainSeq + kTestSeq;
    s.seed = seed;
    const SynthData d = generate(s);
    const Index ntr = kTrainSeq * kLen;
    std::vector<ViewData> tr;
    for (const auto& v : d.views) tr.push_back({v.name, v.data.topRows(ntr), v.columns});
    const Vector t = d.truth.timestamps.head(ntr);
    const std::vector<int> ids(d.truth.sequence_ids.begin(), d.truth.sequence_ids.begin() + ntr);

    OptimConfig cfg;
    cfg.max_iterations = 1000;
    const TrainResult rs = train_logged(init_model(tr, 4, 20, LatentPrior::standard(), seed), cfg);
    const LatentPrior prior =
        LatentPrior::dynamical(t, ids, TemporalKernelParams{1.0, default_lengthscale(t, ids), 1e-5});
    const TrainResult rd = train_logged(init_model(tr, 4, 20, prior, seed), cfg);

    OptimConfig ci;
    ci.max_iterations = 500;
    double err_s = 0, err_d = 0, err_nn = 0, rough_s = 0, rough_d = 0;
    for (Index k = 0; k < kTestSeq; ++k) {
      const Index off = ntr + k * kLen;
      const Matrix ys = d.views[0].data.middleRows(off, kLen);
      const Matrix zs = d.views[1].data.middleRows(off, kLen);
      const Vector ts = d.truth.timestamps.segment(off, kLen);
      const TransferResult ps = transfer(rs.model, ys, "view0", "view1", 5, ci);
      const TransferResult pd = transfer(rd.model, ys, "view0", "view1", 5, ci, ts);
      g_traces.add(ps.latent.trace);
      g_traces.add(pd.latent.trace);
      err_s += mean_error(ps.predictions, zs);
      err_d += mean_error(pd.predictions, zs);
      err_nn += mean_error(nn_baseline(tr[0].data, tr[1].data, ys), zs);
      rough_s += normalized_roughness(ps.latent.means, rs.model);
      rough_d += normalized_roughness(pd.latent.means, rd.model);
    }
    beats_nn += err_d < err_nn;
    beats_static += err_d < err_s;
    smoother += rough_d <= rough_s;
    detail << (seed ? " " : "") << std::fixed << std::setprecision(2) << err_d / kTestSeq << "/"
           << err_s / kTestSeq << "/" << err_nn / kTestSeq;
  }
  report(6, beats_nn >= 7 && beats_static >= 7,
         "dynamical < NN in " + std::to_string(beats_nn) + "/10, < static in " + std::to_string(beats_static) +
             "/10 (errors dyn/static/NN: " + detail.str() + ")");
  report(10, smoother == 10, "dynamical latent smoother in " + std::to_string(smoother) + "/10 seeds");
}

void classification() {
  constexpr Index kTest = 100;
  int seeds_ok = 0;
  std::ostringstream detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    int worse = 0, better = 0;
    detail << (seed ? " |" : "");
    for (Index ntr : {50, 100, 200}) {
      SynthSpec s;
      s.n = ntr + kTest;
      s.n_shared = 1;
      s.n_private = {2, 0};
      s.output_dims = {10, 3};
      s.noise_std = {0.3, 0.0};
      s.n_sequences = s.n / 10;
      s.n_classes = 3;
      s.seed = seed;
      const SynthData d = generate(s);
      const Matrix labels = one_hot(d.truth.labels, 3);
      const std::vector<ViewData> tr{{"x", d.views[0].data.topRows(ntr), {}}, {"labels", labels.topRows(ntr), {}}};
      const Matrix xs = d.views[0].data.bottomRows(kTest);

      MrdModel m = init_model(tr, 3, std::min<Index>(20, ntr), LatentPrior::standard(), seed);
      m.views[1].noise_variance = 0.3;
      TrainOptions opts;
      opts.fixed_noise_views = {"labels"};
      OptimConfig cfg;
      cfg.max_iterations = 1000;
      const TrainResult r = train_logged(m, cfg, opts);

      OptimConfig ci;
      ci.max_iterations = 300;
      std::vector<int> pred(static_cast<std::size_t>(kTest), -1);
      try {
        pred = classify(r.model, xs, "x", "labels", 5, ci);
      } catch (const DataError&) {
        // no shared dimension: every prediction counts as wrong
      }
      const Matrix nn = nn_baseline(tr[0].data, labels.topRows(ntr), xs);
      int acc_mrd = 0, acc_nn = 0;
      for (Index i = 0; i < kTest; ++i) {
        const int truth = d.truth.labels[static_cast<std::size_t>(ntr + i)];
        Index best = 0;
        nn.row(i).maxCoeff(&best);
        acc_mrd += pred[static_cast<std::size_t>(i)] == truth;
        acc_nn += best == truth;
      }
      // accuracies in percentage points (100 test points)
      worse += acc_mrd < acc_nn - 2;
      better += acc_mrd > acc_nn;
      detail << " " << acc_mrd << "/" << acc_nn;
    }
    seeds_ok += worse == 0 && better >= 2;
  }
  report(7, seeds_ok >= 3,
         std::to_string(seeds_ok) + "/5 seeds meet the rule (MRD/NN % at N=50,100,200:" + detail.str() + ")");
}

void complexity() {
  const auto t = bench_scaling({{100, 10}, {200, 10}, {100, 1000}}, 0, 15);
  const double rn = t[1].seconds / t[0].seconds;
  const double rd = t[2].seconds / t[0].seconds;
  report(8, rn <= 2.6 && rd <= 1.5, "time ratio N200/N100 = " + fmt(rn) + ", D1000/D10 = " + fmt(rd));
}

void optimizer_contract() {
  report(9, g_traces.decreasing == 0 && g_roundtrip.worst <= 1e-9,
         std::to_string(g_traces.traces - g_traces.decreasing) + "/" + std::to_string(g_traces.traces) +
             " traces non-decreasing; max save/load change in F " + fmt(g_roundtrip.worst) + " over " +
             std::to_string(g_roundtrip.models) + " models");
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void()>>> steps{
      {"gradient", gradient_check},   {"psi", psi_oracle},          {"exact", bound_exactness},
      {"lower bound", lower_bound},   {"factorization", factorization_recovery},
      {"transfer", sequence_transfer}, {"classification", classification},
      {"complexity", complexity},     {"optimizer", optimizer_contract}};
  for (const auto& [name, step] : steps) {
    try {
      step();
    } catch (const std::exception& e) {
      std::cerr << "error in " << name << " checks: " << e.what() << std::endl;
      ++g_failures;
    }
  }
  for (int id = 1; id <= 10; ++id) {
    if (g_lines.count(id)) {
      std::cout << g_lines[id] << '\n';
    } else {
      std::cout << "criterion " << std::setw(2) << id << ": FAIL  not evaluated\n";
      ++g_failures;
    }
  }
  std::cout << (g_failures == 0 ? "all criteria passed" : std::to_string(g_failures) + " criteria failed")
            << std::endl;
  return g_failures == 0 ? 0 : 1;
}

#include "mrd/cli.hpp"

#include <cmath>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "mrd/bound.hpp"
#include "mrd/diagnostics.hpp"
#include "mrd/errors.hpp"
#include "mrd/infer.hpp"
#include "mrd/io.hpp"
#include "mrd/synth.hpp"

namespace mrd {

namespace {

using nlohmann::json;

struct Args {
  // shared
  std::string model_path;
  std::uint64_t seed = 0;
  int max_iter = 1000;
  std::string out;
  // train
  std::vector<std::string> views;
  Index latent_dim = 0;
  Index inducing = 0;
  bool dynamical = false;
  std::string times;
  std::string sequences;
  double lengthscale = 0.0;
  double delta = 0.01;
  std::vector<std::string> fixed_noise;
  // weights
  std::string format = "tsv";
  // transfer / classify
  std::string from;
  std::string to;
  std::string input;
  Index k = 5;
  std::string candidates;
  std::string label_view;
  // sample
  std::string view;
  Index dim = 0;
  std::string range;
  Index steps = 0;
  std::string base;
  // synth
  std::string spec;
  std::string out_dir;
};

OptimConfig optim_config(const Args& a) {
  OptimConfig c;
  c.max_iterations = a.max_iter;
  c.seed = a.seed;
  return c;
}

std::optional<Vector> optional_times(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return load_column(path);
}

void print_weights_tsv(const MrdModel& model, std::ostream& out) {
  out << "dim";
  for (const auto& v : model.views) out << '\t' << v.name;
  out << '\n';
  std::vector<Vector> norm;
  for (const auto& v : model.views) norm.push_back(normalized_weights(v));
  out << std::setprecision(6);
  for (Index q = 0; q < model.latent_dim(); ++q) {
    out << q + 1;
    for (const auto& w : norm) out << '\t' << w[q];
    out << '\n';
  }
}

int cmd_train(const Args& a, std::ostream& out) {
  std::vector<ViewData> views;
  for (const auto& spec : a.views) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
      throw InvalidArgument("--view expects NAME=PATH, got '" + spec + "'");
    }
    const std::string name = spec.substr(0, eq);
    for (const auto& v : views) {
      if (v.name == name) throw InvalidArgument("view name '" + name + "' given twice");
    }
    const CsvTable t = load_csv(spec.substr(eq + 1));
    views.push_back({name, t.data, t.columns});
  }
  LatentPrior prior;
  if (a.dynamical) {
    if (a.times.empty()) throw InvalidArgument("--dynamical needs --times");
    const Vector t = load_column(a.times);
    std::vector<int> ids(static_cast<std::size_t>(t.size()), 0);
    if (!a.sequences.empty()) {
      const Vector s = load_column(a.sequences);
      if (s.size() != t.size()) {
        throw DataError("--sequences has " + std::to_string(s.size()) + " rows, --times has " +
                        std::to_string(t.size()));
      }
      for (Index i = 0; i < s.size(); ++i) ids[static_cast<std::size_t>(i)] = static_cast<int>(s[i]);
    }
    TemporalKernelParams temporal;
    temporal.lengthscale = a.lengthscale > 0.0 ? a.lengthscale : default_lengthscale(t, ids);
    prior = LatentPrior::dynamical(t, std::move(ids), temporal);
  } else if (!a.times.empty() || !a.sequences.empty()) {
    throw InvalidArgument("--times and --sequences need --dynamical");
  }
  if (!views.empty() && prior.is_dynamical() && prior.timestamps.size() != views.front().data.rows()) {
    throw DataError("--times has " + std::to_string(prior.timestamps.size()) + " rows, view '" +
                    views.front().name + "' has " + std::to_string(views.front().data.rows()));
  }

  MrdModel model = init_model(views, a.latent_dim, a.inducing, std::move(prior), a.seed);
  model.delta_rel = a.delta;
  TrainOptions options;
  for (const auto& spec : a.fixed_noise) {
    const auto eq = spec.find('=');
    double value = 0.0;
    try {
      value = eq == std::string::npos ? 0.0 : std::stod(spec.substr(eq + 1));
    } catch (const std::exception&) {
    }
    if (!(value > 0.0) || !std::isfinite(value)) {
      throw InvalidArgument("--fixed-noise expects NAME=VARIANCE with a positive variance, got '" + spec + "'");
    }
    const std::string name = spec.substr(0, eq);
    model.views[model.view_index(name)].noise_variance = value;
    options.fixed_noise_views.push_back(name);
  }
  const TrainResult r = train(model, optim_config(a), options);
  TrainingSummary summary{r.trace, to_string(r.termination), r.iterations};
  save_model(a.out, r.model, summary);

  out << std::setprecision(10) << "bound\t" << r.trace.back() << '\n'
      << "iterations\t" << r.iterations << '\n'
      << "termination\t" << to_string(r.termination) << '\n';
  print_weights_tsv(r.model, out);
  return 0;
}

int cmd_weights(const Args& a, std::ostream& out) {
  const MrdModel model = load_model(a.model_path);
  if (a.format == "tsv") {
    print_weights_tsv(model, out);
  } else {
    json j;
    j["dims"] = model.latent_dim();
    json norm = json::object(), raw = json::object();
    for (const auto& v : model.views) {
      const Vector w = normalized_weights(v);
      norm[v.name] = std::vector<double>(w.data(), w.data() + w.size());
      raw[v.name] = std::vector<double>(v.kernel.weights.data(), v.kernel.weights.data() + w.size());
    }
    j["normalized"] = norm;
    j["raw"] = raw;
    out << j.dump(2) << '\n';
  }
  return 0;
}

int cmd_segment(const Args& a, std::ostream& out) {
  const MrdModel model = load_model(a.model_path);
  out << segmentation_to_json(segment(model, a.delta)).dump(2) << '\n';
  return 0;
}

json candidates_json(const CandidateList& c) {
  json j = json::array();
  for (std::size_t i = 0; i < c.indices.size(); ++i) {
    json list = json::array();
    for (std::size_t k = 0; k < c.indices[i].size(); ++k) {
      list.push_back({{"train_row", c.indices[i][k] + 1}, {"distance", c.distances[i][k]}});
    }
    j.push_back({{"test_row", i + 1}, {"candidates", list}});
  }
  return j;
}

int cmd_transfer(const Args& a, std::ostream& out) {
  const MrdModel model = load_model(a.model_path);
  const CsvTable input = load_csv(a.input);
  const TransferResult r =
      transfer(model, input.data, a.from, a.to, a.k, optim_config(a), optional_times(a.times));
  save_csv(a.out, r.predictions, model.views[model.view_index(a.to)].columns);
  if (!a.candidates.empty()) write_file_atomic(a.candidates, candidates_json(r.candidates).dump(2) + "\n");
  out << "wrote " << r.predictions.rows() << " predictions to " << a.out << '\n';
  return 0;
}

int cmd_classify(const Args& a, std::ostream& out) {
  const MrdModel model = load_model(a.model_path);
  std::string from = a.from;
  if (from.empty()) {
    if (model.views.size() != 2) throw InvalidArgument("model has more than two views: pass --from");
    from = model.views[0].name == a.label_view ? model.views[1].name : model.views[0].name;
  }
  const CsvTable input = load_csv(a.input);
  const std::vector<int> labels =
      classify(model, input.data, from, a.label_view, a.k, optim_config(a), optional_times(a.times));
  Matrix m(static_cast<Index>(labels.size()), 1);
  for (std::size_t i = 0; i < labels.size(); ++i) m(static_cast<Index>(i), 0) = labels[i] + 1;
  save_csv(a.out, m, {"label"});
  out << "wrote " << labels.size() << " labels to " << a.out << '\n';
  return 0;
}

int cmd_sample(const Args& a, std::ostream& out) {
  const MrdModel model = load_model(a.model_path);
  const auto colon = a.range.find(':');
  double lo = 0.0, hi = 0.0;
  try {
    if (colon == std::string::npos) throw std::invalid_argument("no colon");
    std::size_t used = 0;
    lo = std::stod(a.range.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument("trailing");
    const std::string rest = a.range.substr(colon + 1);
    hi = std::stod(rest, &used);
    if (used != rest.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw InvalidArgument("--range expects LO:HI, got '" + a.range + "'");
  }
  Vector base = model.q.means.colwise().mean().transpose();
  if (!a.base.empty()) {
    const CsvTable t = load_csv(a.base);
    if (t.data.rows() != 1 && t.data.cols() == 1) {
      base = t.data.col(0);
    } else if (t.data.rows() == 1) {
      base = t.data.row(0).transpose();
    } else {
      throw DataError(a.base + ": expected one latent point (a single row or column)");
    }
  }
  if (a.dim < 1 || a.dim > model.latent_dim()) {
    throw InvalidArgument("--dim must be in [1, " + std::to_string(model.latent_dim()) + "]");
  }
  const Matrix grid = sample_traversal(model, a.view, base, a.dim - 1, lo, hi, a.steps);
  save_csv(a.out, grid, model.views[model.view_index(a.view)].columns);
  out << "wrote " << grid.rows() << " samples to " << a.out << '\n';
  return 0;
}

int cmd_synth(const Args& a, std::ostream& out) {
  json j;
  try {
    j = json::parse(read_file(a.spec));
  } catch (const json::parse_error& e) {
    throw DataError("synth spec '" + a.spec + "' is not valid JSON: " + e.what());
  }
  const SynthSpec spec = synth_spec_from_json(j);
  const SynthData data = generate(spec);
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec) throw DataError("cannot create directory '" + a.out_dir + "'");
  const fs::path dir(a.out_dir);
  for (const auto& v : data.views) save_csv((dir / (v.name + ".csv")).string(), v.data, v.columns);
  save_csv((dir / "times.csv").string(), data.truth.timestamps, {"t"});
  Matrix seq(static_cast<Index>(data.truth.sequence_ids.size()), 1);
  for (std::size_t i = 0; i < data.truth.sequence_ids.size(); ++i) seq(static_cast<Index>(i), 0) = data.truth.sequence_ids[i];
  save_csv((dir / "sequences.csv").string(), seq, {"sequence"});
  if (spec.n_classes > 0) {
    std::vector<std::string> cols;
    for (Index c = 0; c < spec.n_classes; ++c) cols.push_back("class" + std::to_string(c + 1));
    save_csv((dir / "labels.csv").string(), one_hot(data.truth.labels, spec.n_classes), cols);
  }
  write_file_atomic((dir / "truth.json").string(), synth_truth_to_json(data.truth).dump(1) + "\n");
  out << "wrote " << data.views.size() << " views to " << a.out_dir << '\n';
  return 0;
}

int cmd_gradcheck(const Args& a, std::ostream& out) {
  const auto results = run_gradcheck(a.seed);
  double worst = 0.0;
  out << std::setprecision(3) << std::scientific;
  for (const auto& r : results) {
    out << (r.dynamical ? "dynamical" : "standard") << "\tmax_rel_error\t" << r.max_rel_error << '\t'
        << r.worst_parameter << '\n';
    worst = std::max(worst, r.max_rel_error);
  }
  out << "max_rel_error\t" << worst << '\n';
  return worst <= 1e-5 ? 0 : static_cast<int>(ExitCode::kNumerical);
}

int cmd_bench(const Args& a, std::ostream& out) {
  const auto t = bench_scaling({{100, 10}, {200, 10}, {400, 10}, {100, 1000}, {200, 1000}}, a.seed);
  out << "N\tD\tseconds\n" << std::setprecision(4);
  for (const auto& r : t) out << r.n << '\t' << r.d << '\t' << r.seconds << '\n';
  out << "ratio_N200_N100\t" << t[1].seconds / t[0].seconds << '\n';
  out << "ratio_D1000_D10\t" << t[3].seconds / t[0].seconds << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Args a;
  CLI::App app{"Manifold relevance determination: multi-view Bayesian GP-LVM"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  auto model_arg = [&](CLI::App* sub) {
    sub->add_option("model", a.model_path, "Model file (JSON)")->required();
  };

  auto* train_cmd = app.add_subcommand("train", "Train a model on one or more views");
  train_cmd->add_option("--view", a.views, "NAME=PATH.csv, repeat per view")->required();
  train_cmd->add_option("--latent-dim", a.latent_dim, "Latent dimensionality Q")->required();
  train_cmd->add_option("--inducing", a.inducing, "Inducing points per view M")->required();
  train_cmd->add_flag("--dynamical", a.dynamical, "Temporal GP prior over latent points");
  train_cmd->add_option("--times", a.times, "Timestamps CSV (one column)");
  train_cmd->add_option("--sequences", a.sequences, "Sequence ids CSV (one column)");
  train_cmd->add_option("--lengthscale", a.lengthscale,
                        "Initial temporal lengthscale (default: twice the median time step)")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", a.seed);
  train_cmd->add_option("--max-iter", a.max_iter)->check(CLI::PositiveNumber);
  train_cmd->add_option("--delta", a.delta, "Relative weight threshold stored in the model");
  train_cmd->add_option("--fixed-noise", a.fixed_noise,
                        "NAME=VARIANCE: hold a view's noise variance fixed (e.g. 1-of-K label views)");
  train_cmd->add_option("--out", a.out, "Output model file")->required();

  auto* weights_cmd = app.add_subcommand("weights", "Per-view normalized ARD weights");
  model_arg(weights_cmd);
  weights_cmd->add_option("--format", a.format)->check(CLI::IsMember({"json", "tsv"}));

  auto* segment_cmd = app.add_subcommand("segment", "Shared/private/inactive latent dimensions");
  model_arg(segment_cmd);
  segment_cmd->add_option("--delta", a.delta);

  auto* transfer_cmd = app.add_subcommand("transfer", "Predict one view from another");
  model_arg(transfer_cmd);
  transfer_cmd->add_option("--from", a.from)->required();
  transfer_cmd->add_option("--to", a.to)->required();
  transfer_cmd->add_option("--input", a.input, "Test observations of the source view")->required();
  transfer_cmd->add_option("--out", a.out)->required();
  transfer_cmd->add_option("--k", a.k, "Number of shared-space candidates");
  transfer_cmd->add_option("--candidates", a.candidates, "Write candidate lists (JSON)");
  transfer_cmd->add_option("--times", a.times, "Test timestamps (dynamical models)");
  transfer_cmd->add_option("--seed", a.seed);
  transfer_cmd->add_option("--max-iter", a.max_iter)->check(CLI::PositiveNumber);

  auto* classify_cmd = app.add_subcommand("classify", "Predict classes through a 1-of-K label view");
  model_arg(classify_cmd);
  classify_cmd->add_option("--label-view", a.label_view)->required();
  classify_cmd->add_option("--from", a.from, "Feature view (default: the other view)");
  classify_cmd->add_option("--input", a.input)->required();
  classify_cmd->add_option("--out", a.out)->required();
  classify_cmd->add_option("--k", a.k);
  classify_cmd->add_option("--times", a.times);
  classify_cmd->add_option("--seed", a.seed);
  classify_cmd->add_option("--max-iter", a.max_iter)->check(CLI::PositiveNumber);

  auto* sample_cmd = app.add_subcommand("sample", "Traverse one latent dimension");
  model_arg(sample_cmd);
  sample_cmd->add_option("--view", a.view)->required();
  sample_cmd->add_option("--dim", a.dim, "Latent dimension, 1-based")->required();
  sample_cmd->add_option("--range", a.range, "LO:HI")->required();
  sample_cmd->add_option("--steps", a.steps)->required();
  sample_cmd->add_option("--out", a.out)->required();
  sample_cmd->add_option("--base", a.base, "Base latent point CSV (default: mean of q(X))");

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic multi-view dataset");
  synth_cmd->add_option("--spec", a.spec, "Spec JSON")->required();
  synth_cmd->add_option("--out-dir", a.out_dir)->required();

  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of the bound gradient");
  grad_cmd->add_option("--seed", a.seed);

  auto* bench_cmd = app.add_subcommand("bench-scaling", "Time bound+gradient across N and D");
  bench_cmd->add_option("--seed", a.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kUsage);
  }

  try {
    if (*train_cmd) return cmd_train(a, out);
    if (*weights_cmd) return cmd_weights(a, out);
    if (*segment_cmd) return cmd_segment(a, out);
    if (*transfer_cmd) return cmd_transfer(a, out);
    if (*classify_cmd) return cmd_classify(a, out);
    if (*sample_cmd) return cmd_sample(a, out);
    if (*synth_cmd) return cmd_synth(a, out);
    if (*grad_cmd) return cmd_gradcheck(a, out);
    if (*bench_cmd) return cmd_bench(a, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(e.exit_code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::kNumerical);
  }
  return static_cast<int>(ExitCode::kUsage);
}

}  // namespace mrd

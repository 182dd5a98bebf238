#include "mrd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "mrd/errors.hpp"
#include "mrd/rng.hpp"

namespace mrd {

std::string to_string(Nonlinearity n) {
  return n == Nonlinearity::kSinCosMix ? "sin-cos-mix" : "random-smooth-map";
}

Nonlinearity nonlinearity_from_string(const std::string& s) {
  if (s == "sin-cos-mix") return Nonlinearity::kSinCosMix;
  if (s == "random-smooth-map") return Nonlinearity::kRandomSmoothMap;
  throw InvalidArgument("unknown nonlinearity '" + s + "'");
}

void SynthSpec::validate() const {
  const std::size_t nv = num_views();
  if (nv == 0) throw InvalidArgument("synth spec: at least one view is required");
  if (n_private.size() != nv || noise_std.size() != nv) {
    throw InvalidArgument("synth spec: n_private, output_dims and noise_std need one entry per view");
  }
  if (n < 4) throw InvalidArgument("synth spec: N must be at least 4");
  if (n_shared < 0 || n_sequences < 1 || n_classes < 0) {
    throw InvalidArgument("synth spec: counts must be non-negative and n_sequences >= 1");
  }
  if (n_sequences * 2 > n) throw InvalidArgument("synth spec: sequences need at least 2 points each");
  for (std::size_t v = 0; v < nv; ++v) {
    if (n_private[v] < 0 || !(noise_std[v] >= 0.0)) {
      throw InvalidArgument("synth spec: negative private count or noise for view " +
                            std::to_string(v));
    }
    if (output_dims[v] < n_shared + n_private[v] || output_dims[v] < 1) {
      throw InvalidArgument("synth spec: view " + std::to_string(v) +
                            " needs D >= n_shared + n_private");
    }
    if (n_shared + n_private[v] == 0) {
      throw InvalidArgument("synth spec: view " + std::to_string(v) + " has no latent signal");
    }
  }
  if (n_classes > 0 && n_classes > n) throw InvalidArgument("synth spec: more classes than points");
  if (share_maps) {
    for (std::size_t v = 1; v < nv; ++v) {
      if (output_dims[v] != output_dims[0] || n_private[v] != n_private[0]) {
        throw InvalidArgument("synth spec: shared maps need identical view shapes");
      }
    }
  }
}

namespace {

struct ViewMap {
  Matrix mix;        // D x r, unit-norm rows
  Matrix mix2;       // D x r, second mix for the smooth-map variant
  Vector frequency;  // D
  Vector phase;      // D
};

ViewMap make_map(std::mt19937_64& rng, Index d, Index r) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> freq(0.5, 2.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  ViewMap m;
  m.mix.resize(d, r);
  m.mix2.resize(d, r);
  m.frequency.resize(d);
  m.phase.resize(d);
  for (Index i = 0; i < d; ++i) {
    for (Index k = 0; k < r; ++k) m.mix(i, k) = normal(rng);
    for (Index k = 0; k < r; ++k) m.mix2(i, k) = normal(rng);
    m.mix.row(i).normalize();
    m.mix2.row(i).normalize();
    m.frequency[i] = freq(rng);
    m.phase[i] = phase(rng);
  }
  return m;
}

Matrix apply_map(const ViewMap& m, const Matrix& inputs, Nonlinearity kind) {
  const Matrix proj = inputs * m.mix.transpose();  // N x D
  Matrix out(proj.rows(), proj.cols());
  for (Index d = 0; d < proj.cols(); ++d) {
    for (Index i = 0; i < proj.rows(); ++i) {
      const double a = m.frequency[d] * proj(i, d) + m.phase[d];
      if (kind == Nonlinearity::kSinCosMix) {
        out(i, d) = d % 2 == 0 ? std::sin(a) : std::cos(a);
      } else {
        const double lin = inputs.row(i).dot(m.mix2.row(d));
        out(i, d) = proj(i, d) + 0.5 * std::tanh(lin * m.frequency[d]);
      }
    }
  }
  return out;
}

}  // namespace

SynthData generate(const SynthSpec& spec) {
  spec.validate();
  const std::size_t nv = spec.num_views();
  const Index n = spec.n;
  Index n_signals = spec.n_shared;
  for (auto p : spec.n_private) n_signals += p;

  SynthData out;
  SynthTruth& truth = out.truth;
  truth.n_shared = spec.n_shared;

  // Sequences are contiguous blocks of near-equal length with times in [0, 1].
  truth.timestamps.resize(n);
  truth.sequence_ids.resize(static_cast<std::size_t>(n));
  Index start = 0;
  std::vector<std::pair<Index, Index>> seq_ranges;
  for (Index s = 0; s < spec.n_sequences; ++s) {
    const Index len = n / spec.n_sequences + (s < n % spec.n_sequences ? 1 : 0);
    for (Index j = 0; j < len; ++j) {
      truth.timestamps[start + j] = static_cast<double>(j) / static_cast<double>(len - 1);
      truth.sequence_ids[static_cast<std::size_t>(start + j)] = static_cast<int>(s);
    }
    seq_ranges.emplace_back(start, len);
    start += len;
  }

  auto sig_rng = named_stream(spec.seed, "signals");
  std::uniform_real_distribution<double> freq(0.5, 2.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  truth.signals.resize(n, n_signals);
  for (Index k = 0; k < n_signals; ++k) {
    for (const auto& [s0, len] : seq_ranges) {
      const double f = freq(sig_rng);
      const double ph = phase(sig_rng);
      for (Index j = 0; j < len; ++j) {
        truth.signals(s0 + j, k) =
            std::sin(2.0 * std::numbers::pi * f * truth.timestamps[s0 + j] + ph);
      }
    }
  }

  truth.relevant.assign(nv, std::vector<bool>(static_cast<std::size_t>(n_signals), false));
  Index private_offset = spec.n_shared;
  std::vector<ViewMap> maps;
  for (std::size_t v = 0; v < nv; ++v) {
    const Index r = spec.n_shared + spec.n_private[v];
    if (spec.share_maps && v > 0) {
      maps.push_back(maps.front());
    } else {
      auto rng = named_stream(spec.seed, "map/" + std::to_string(v));
      maps.push_back(make_map(rng, spec.output_dims[v], r));
    }
    Matrix inputs(n, r);
    inputs.leftCols(spec.n_shared) = truth.signals.leftCols(spec.n_shared);
    // With shared maps every view reads the first view's private block.
    const Index off = spec.share_maps ? spec.n_shared : private_offset;
    inputs.rightCols(spec.n_private[v]) = truth.signals.middleCols(off, spec.n_private[v]);
    for (Index k = 0; k < spec.n_shared; ++k) truth.relevant[v][static_cast<std::size_t>(k)] = true;
    for (Index k = 0; k < spec.n_private[v]; ++k) {
      truth.relevant[v][static_cast<std::size_t>(off + k)] = true;
    }

    Matrix y = apply_map(maps.back(), inputs, spec.nonlinearity);
    auto noise_rng = named_stream(spec.seed, "noise/" + std::to_string(v));
    std::normal_distribution<double> normal(0.0, 1.0);
    if (spec.noise_std[v] > 0.0) {
      for (Index i = 0; i < y.size(); ++i) y.data()[i] += spec.noise_std[v] * normal(noise_rng);
    }
    ViewData vd;
    vd.name = "view" + std::to_string(v);
    vd.data = std::move(y);
    for (Index d = 0; d < vd.data.cols(); ++d) vd.columns.push_back(vd.name + "_" + std::to_string(d));
    out.views.push_back(std::move(vd));
    if (!spec.share_maps) private_offset += spec.n_private[v];
  }

  if (spec.n_classes > 0) {
    const Index src = 0;  // first shared signal, or the first signal overall
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
      return truth.signals(a, src) < truth.signals(b, src);
    });
    truth.labels.assign(static_cast<std::size_t>(n), 0);
    for (Index rank = 0; rank < n; ++rank) {
      truth.labels[static_cast<std::size_t>(order[static_cast<std::size_t>(rank)])] =
          static_cast<int>(rank * spec.n_classes / n);
    }
  }
  return out;
}

Matrix one_hot(const std::vector<int>& labels, Index n_classes) {
  Matrix out = Matrix::Zero(static_cast<Index>(labels.size()), n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= n_classes) throw InvalidArgument("one_hot: label out of range");
    out(static_cast<Index>(i), labels[i]) = 1.0;
  }
  return out;
}

SegmentationScore score_segmentation(const Segmentation& seg, const SynthTruth& truth) {
  SegmentationScore score;
  const std::size_t nv = truth.relevant.size();
  const Index n_signals = truth.signals.cols();
  score.truth.private_dims.assign(nv, 0);
  for (Index k = 0; k < n_signals; ++k) {
    std::size_t on = 0, last = 0;
    for (std::size_t v = 0; v < nv; ++v) {
      if (truth.relevant[v][static_cast<std::size_t>(k)]) {
        ++on;
        last = v;
      }
    }
    if (on == 0) {
      ++score.truth.inactive;
    } else if (on == nv) {
      ++score.truth.shared;
    } else if (on == 1) {
      ++score.truth.private_dims[last];
    } else {
      ++score.truth.partial;
    }
  }

  score.predicted.shared = static_cast<Index>(seg.shared.size());
  score.predicted.inactive = static_cast<Index>(seg.inactive.size());
  for (const auto& p : seg.private_dims) score.predicted.private_dims.push_back(static_cast<Index>(p.size()));
  for (const auto& p : seg.partial) score.predicted.partial += static_cast<Index>(p.dims.size());
  const Index model_q = score.predicted.shared + score.predicted.inactive + score.predicted.partial +
                        std::accumulate(score.predicted.private_dims.begin(),
                                        score.predicted.private_dims.end(), Index{0});
  if (model_q > n_signals) score.truth.inactive += model_q - n_signals;

  score.exact_match = score.truth.shared == score.predicted.shared &&
                      score.truth.private_dims == score.predicted.private_dims &&
                      score.truth.partial == score.predicted.partial &&
                      score.truth.inactive == score.predicted.inactive;
  return score;
}

Matrix nn_baseline(const Matrix& train_features, const Matrix& train_targets,
                   const Matrix& test_features) {
  if (train_features.rows() == 0) throw InvalidArgument("nn_baseline: empty training set");
  if (train_features.rows() != train_targets.rows() ||
      train_features.cols() != test_features.cols()) {
    throw DimensionError("nn_baseline: inconsistent shapes");
  }
  Matrix out(test_features.rows(), train_targets.cols());
  for (Index i = 0; i < test_features.rows(); ++i) {
    Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < train_features.rows(); ++j) {
      const double d = (train_features.row(j) - test_features.row(i)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    out.row(i) = train_targets.row(best);
  }
  return out;
}

}  // namespace mrd

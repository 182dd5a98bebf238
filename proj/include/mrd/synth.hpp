#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mrd/model.hpp"

namespace mrd {

enum class Nonlinearity { kSinCosMix, kRandomSmoothMap };

std::string to_string(Nonlinearity n);
Nonlinearity nonlinearity_from_string(const std::string& s);

/// Synthetic multi-view dataset with a known shared/private factorization.
/// Vectors indexed by view must all have the same length (the number of views).
struct SynthSpec {
  Index n = 100;
  Index n_shared = 1;
  std::vector<Index> n_private = {1, 1};
  std::vector<Index> output_dims = {10, 10};
  std::vector<double> noise_std = {0.05, 0.05};
  Nonlinearity nonlinearity = Nonlinearity::kSinCosMix;
  Index n_sequences = 1;
  Index n_classes = 0;
  /// All views use the maps of view 0 (makes views with equal specs identical
  /// up to noise).
  bool share_maps = false;
  std::uint64_t seed = 0;

  std::size_t num_views() const { return output_dims.size(); }
  void validate() const;
};

struct SynthTruth {
  Matrix signals;                          // N x (n_shared + sum n_private)
  std::vector<std::vector<bool>> relevant; // [view][signal]
  Index n_shared = 0;
  std::vector<int> labels;                 // empty when n_classes == 0
  Vector timestamps;
  std::vector<int> sequence_ids;
};

struct SynthData {
  std::vector<ViewData> views;
  SynthTruth truth;
};

/// Latent signals are sinusoids of time with random frequencies and
/// per-sequence phases. Each view maps (shared signals, its private signals)
/// through fixed random smooth maps built from unit-norm linear mixes passed
/// through sin/cos with frequencies in [0.5, 2], then adds Gaussian noise.
/// Labels, when requested, are equal-count bins of the first shared signal.
SynthData generate(const SynthSpec& spec);

/// One-hot encoding of labels in 0..n_classes-1.
Matrix one_hot(const std::vector<int>& labels, Index n_classes);

struct RoleCounts {
  Index shared = 0;
  std::vector<Index> private_dims;
  Index partial = 0;
  Index inactive = 0;
};

struct SegmentationScore {
  bool exact_match = false;
  RoleCounts truth;
  RoleCounts predicted;
};

/// Compares role counts (latent dimensions are unordered, so identities are
/// not matched). Truth is padded with inactive dimensions up to the model's Q.
SegmentationScore score_segmentation(const Segmentation& seg, const SynthTruth& truth);

/// 1-nearest-neighbour regression in feature space; ties go to the lower index.
Matrix nn_baseline(const Matrix& train_features, const Matrix& train_targets,
                   const Matrix& test_features);

}  // namespace mrd

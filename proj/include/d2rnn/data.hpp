#ifndef D2RNN_DATA_HPP
#define D2RNN_DATA_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "d2rnn/numerics.hpp"
#include "d2rnn/sequence.hpp"

namespace d2rnn {

// ---------------------------------------------------------------------------
// Synthetic motion tasks
// ---------------------------------------------------------------------------

enum class SynthTask { Velocity, Acceleration, Mixed };

std::string to_string(SynthTask task);
SynthTask parse_synth_task(const std::string& text);

/// A latent point z moves for `length` frames over normalized time
/// tau in [0, 1]:  z(tau) = z0 + tau v + tau^2 a / 2, with z0 ~ U(-1, 1)^q
/// drawn per sequence. Frames are x = P z + noise, where P (dim x q) is a fixed
/// random projection shared by every sequence of the dataset.
///
///   velocity:      v = rate (c + 1) / classes * u,  a = 0
///   acceleration:  v = rate u + jitter xi (xi ~ U(-1, 1)^q per sequence),
///                  a = curvature (2c / (classes - 1) - 1) w
///   mixed:         speed index c mod 2 and bend sign (c / 2) mod 2 combined
///
/// u and w are fixed orthogonal unit directions (w == u when q == 1).
struct SynthSpec {
  SynthTask task = SynthTask::Velocity;
  int classes = 2;
  int count = 100;
  int length = 20;
  int dim = 16;
  double noise_sigma = 0.05;
  std::uint64_t seed = 1;
  double rate = 2.0;
  double curvature = 4.0;
  double jitter = 1.0;
  int latent_dim = 2;

  void validate() const;
};

/// Labels cycle 0, 1, ..., classes - 1 so every class is equally represented.
Dataset gen_synthetic(const SynthSpec& spec);

// ---------------------------------------------------------------------------
// JSONL feature files
// ---------------------------------------------------------------------------

// Line 1: {"classes": ["name", ...]}
// Then one sequence per line:
//   {"id": str, "label": int, "frames": [[float, ...], ...],
//    "frame_labels": [int, ...] (optional), "group": str (optional)}
Dataset load_jsonl(const std::filesystem::path& path);
Dataset parse_jsonl(const std::string& text);
void save_jsonl(const Dataset& data, const std::filesystem::path& path);
std::string format_jsonl(const Dataset& data);

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

/// Seeded shuffle, then contiguous folds; the first size % k folds get one
/// extra item. With `grouped`, whole groups (Sequence::group) are assigned to
/// folds instead of single sequences.
struct KFold {
  int k = 5;
  std::uint64_t seed = 1;
  bool grouped = false;
};

/// Per-class stratified sampling: floor(train_fraction * class size) of each
/// class go to training, the remainder to test, independently per trial.
struct MonteCarlo {
  double train_fraction = 0.8;
  int trials = 5;
  std::uint64_t seed = 1;
};

/// Train and test on the full dataset.
struct NoSplit {};

using SplitPlan = std::variant<KFold, MonteCarlo, NoSplit>;

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

std::vector<Split> make_splits(const Dataset& data, const SplitPlan& plan);

/// "kfold:5", "mc:0.8:5", "none"; the seed comes from the caller.
SplitPlan parse_split_plan(const std::string& text, std::uint64_t seed);

// ---------------------------------------------------------------------------
// PCA preprocessing
// ---------------------------------------------------------------------------

/// Fits PCA on every frame of the (training) dataset.
PcaTransform fit_preprocess(const Dataset& train, double energy);

/// Projects every frame; the transform is only read.
Dataset apply_preprocess(const PcaTransform& t, const Dataset& data);

}  // namespace d2rnn

#endif  // D2RNN_DATA_HPP

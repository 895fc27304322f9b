#ifndef D2RNN_ENSEMBLE_HPP
#define D2RNN_ENSEMBLE_HPP

#include <filesystem>
#include <functional>
#include <vector>

#include <nlohmann/json.hpp>

#include "d2rnn/cells.hpp"
#include "d2rnn/train.hpp"

namespace d2rnn {

enum class BoostVariant { Samme, M1 };

struct EnsembleMember {
  Model model;
  double weight = 0.0;
};

struct EnsembleModel {
  std::vector<EnsembleMember> members;
  int classes = 0;

  /// At least one positive weight, all finite and non-negative.
  void validate() const;
};

/// Member weight for a learner whose error is exactly zero.
inline const double kMaxMemberWeight = std::log(1e6);

/// Outcome of one boosting round.
struct BoostRound {
  double error = 0.0;
  double alpha = 0.0;
  bool degenerate = false;  // error too high; weight 0 and example weights reset
  std::vector<double> weights;  // example weights after the update, summing to 1
};

/// One multiclass AdaBoost update. SAMME: alpha = ln((1 - err) / err) + ln(k - 1)
/// and misclassified examples are scaled by exp(alpha). M1 (k == 2 only):
/// alpha = ln((1 - err) / err) and correctly classified examples are scaled
/// by err / (1 - err). Weights are renormalized after either update.
BoostRound boost_round(const std::vector<double>& weights, const std::vector<bool>& correct,
                       int classes, BoostVariant variant = BoostVariant::Samme);

struct EnsembleConfig {
  int max_order = 2;
  int state_units = 8;
  TrainConfig train;
  BoostVariant variant = BoostVariant::Samme;
};

struct EnsembleFitLog {
  std::vector<BoostRound> rounds;
};

using MemberCallback = std::function<void(int order, const Model&, const Metrics&)>;

/// Trains single-layer DoS models of orders 0..max_order in sequence. Member m
/// is initialized from seed train.seed + m. The first member sees the
/// training set as is; later members train on a weighted resample
/// (seeded, with replacement) of it.
EnsembleModel fit_ernn(const Dataset& data, const EnsembleConfig& config,
                       EnsembleFitLog* log = nullptr, const MemberCallback& on_member = {});

struct EnsemblePrediction {
  int label = 0;
  Vector scores;  // sum of member weights voting for each class
};

EnsemblePrediction predict_ensemble(const EnsembleModel& e, const Sequence& seq);

Metrics evaluate_ensemble(const EnsembleModel& e, const Dataset& data);

nlohmann::json ensemble_to_json(const EnsembleModel& e);
EnsembleModel ensemble_from_json(const nlohmann::json& j);
void ensemble_save(const EnsembleModel& e, const std::filesystem::path& path);
EnsembleModel ensemble_load(const std::filesystem::path& path);

}  // namespace d2rnn

#endif  // D2RNN_ENSEMBLE_HPP

#include "d2rnn/ensemble.hpp"

#include <cmath>
#include <algorithm>
#include <numeric>

#include "d2rnn/checkpoint.hpp"

namespace d2rnn {

using nlohmann::json;

void EnsembleModel::validate() const {
  if (members.empty()) throw_data("ensemble: no members");
  bool any_positive = false;
  for (const auto& m : members) {
    if (!std::isfinite(m.weight) || m.weight < 0.0)
      throw_data("ensemble: member weights must be finite and non-negative");
    any_positive = any_positive || m.weight > 0.0;
    if (m.model.config.output_classes != classes)
      throw_data("ensemble: member class count differs from the ensemble's");
  }
  if (!any_positive) throw_data("ensemble: no member has positive weight");
}

BoostRound boost_round(const std::vector<double>& weights, const std::vector<bool>& correct,
                       int classes, BoostVariant variant) {
  if (weights.size() != correct.size() || weights.empty())
    throw_data("boost_round: weights and predictions differ in length");
  if (classes < 2) throw_data("boost_round: need at least 2 classes");
  if (variant == BoostVariant::M1 && classes != 2)
    throw_usage("boost_round: AdaBoost.M1 is only offered for 2 classes");

  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double wrong = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i)
    if (!correct[i]) wrong += weights[i];

  BoostRound r;
  r.error = wrong / total;
  const double k = static_cast<double>(classes);

  if (r.error >= (k - 1.0) / k) {
    r.degenerate = true;
    r.alpha = 0.0;
    r.weights.assign(weights.size(), 1.0 / static_cast<double>(weights.size()));
    return r;
  }

  const double bonus = variant == BoostVariant::Samme ? std::log(k - 1.0) : 0.0;
  r.alpha = r.error > 0.0 ? std::log((1.0 - r.error) / r.error) + bonus : kMaxMemberWeight;
  r.alpha = std::min(r.alpha, kMaxMemberWeight);

  r.weights = weights;
  if (r.error > 0.0) {
    if (variant == BoostVariant::Samme) {
      const double up = std::exp(r.alpha);
      for (std::size_t i = 0; i < r.weights.size(); ++i)
        if (!correct[i]) r.weights[i] *= up;
    } else {
      const double beta = r.error / (1.0 - r.error);
      for (std::size_t i = 0; i < r.weights.size(); ++i)
        if (correct[i]) r.weights[i] *= beta;
    }
  }
  const double norm = std::accumulate(r.weights.begin(), r.weights.end(), 0.0);
  for (double& w : r.weights) w /= norm;
  return r;
}

namespace {

// Draws data.size() indices with replacement, proportional to weights.
std::vector<std::size_t> weighted_resample(const std::vector<double>& weights, Rng& rng) {
  std::vector<double> cdf(weights.size());
  std::partial_sum(weights.begin(), weights.end(), cdf.begin());
  std::vector<std::size_t> picks;
  picks.reserve(weights.size());
  for (std::size_t n = 0; n < weights.size(); ++n) {
    const double u = rng.uniform01() * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    picks.push_back(std::min(static_cast<std::size_t>(it - cdf.begin()), weights.size() - 1));
  }
  return picks;
}

}  // namespace

EnsembleModel fit_ernn(const Dataset& data, const EnsembleConfig& config, EnsembleFitLog* log,
                       const MemberCallback& on_member) {
  if (data.sequences.empty()) throw_data("fit_ernn: empty dataset");
  if (config.max_order < 0) throw_usage("fit_ernn: max_order must be non-negative");
  config.train.validate();

  const int k = data.num_classes();
  EnsembleModel ensemble;
  ensemble.classes = k;
  std::vector<double> weights(data.size(), 1.0 / static_cast<double>(data.size()));
  Rng resample_rng(config.train.seed ^ 0xB0057ULL);

  for (int order = 0; order <= config.max_order; ++order) {
    TrainConfig tc = config.train;
    tc.seed = config.train.seed + static_cast<std::uint64_t>(order);
    Model model = Model::create(
        StackConfig::single(CellKind::dos(order), static_cast<int>(data.feature_dim),
                            config.state_units, k),
        tc.seed);

    Metrics fit;
    if (order == 0) {
      fit = train(model, data, tc);
    } else {
      fit = train(model, data.subset(weighted_resample(weights, resample_rng)), tc);
    }
    if (on_member) on_member(order, model, fit);

    std::vector<bool> correct(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
      correct[i] = predict(model, data.sequences[i]) == data.sequences[i].label;
    BoostRound round = boost_round(weights, correct, k, config.variant);
    weights = round.weights;
    ensemble.members.push_back({std::move(model), round.alpha});
    if (log) log->rounds.push_back(std::move(round));
  }

  // Every member degenerate: fall back to equal votes.
  bool any_positive = false;
  for (const auto& m : ensemble.members) any_positive = any_positive || m.weight > 0.0;
  if (!any_positive)
    for (auto& m : ensemble.members) m.weight = 1.0;
  return ensemble;
}

EnsemblePrediction predict_ensemble(const EnsembleModel& e, const Sequence& seq) {
  EnsemblePrediction p;
  p.scores = Vector::Zero(e.classes);
  for (const auto& m : e.members) p.scores(predict(m.model, seq)) += m.weight;
  p.label = argmax(p.scores);
  return p;
}

Metrics evaluate_ensemble(const EnsembleModel& e, const Dataset& data) {
  MetricsBuilder builder(e.classes);
  for (const auto& seq : data.sequences) builder.add(seq.label, predict_ensemble(e, seq).label);
  return builder.finish();
}

json ensemble_to_json(const EnsembleModel& e) {
  json members = json::array();
  for (const auto& m : e.members)
    members.push_back({{"weight", m.weight}, {"model", model_to_json(m.model)}});
  return json{{"format", "d2rnn-ensemble"},
              {"version", kCheckpointVersion},
              {"classes", e.classes},
              {"members", std::move(members)}};
}

EnsembleModel ensemble_from_json(const json& j) {
  try {
    if (!j.is_object() || j.value("format", std::string()) != "d2rnn-ensemble")
      throw_data("ensemble checkpoint: not a d2rnn ensemble document");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw_data("ensemble checkpoint: unsupported version");
    EnsembleModel e;
    e.classes = j.at("classes").get<int>();
    for (const auto& m : j.at("members"))
      e.members.push_back({model_from_json(m.at("model")), m.at("weight").get<double>()});
    e.validate();
    return e;
  } catch (const json::exception& ex) {
    throw_data(std::string("ensemble checkpoint: malformed document: ") + ex.what());
  }
}

void ensemble_save(const EnsembleModel& e, const std::filesystem::path& path) {
  write_text_file(path, ensemble_to_json(e).dump(1) + "\n");
}

EnsembleModel ensemble_load(const std::filesystem::path& path) {
  return ensemble_from_json(read_json_file(path));
}

}  // namespace d2rnn

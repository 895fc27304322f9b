#ifndef D2RNN_TRAIN_HPP
#define D2RNN_TRAIN_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "d2rnn/backprop.hpp"
#include "d2rnn/cells.hpp"
#include "d2rnn/loss.hpp"
#include "d2rnn/sequence.hpp"

namespace d2rnn {

struct TrainConfig {
  double learning_rate = 1e-4;
  int epochs = 50;
  LossMode mode = LossMode::Sequence;
  Truncation truncation = Truncation::Truncated;
  std::uint64_t seed = 1;
  std::optional<double> clip_norm;
  bool shuffle = true;
  double momentum = 0.0;

  void validate() const;
};

using Confusion = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Rows of the confusion matrix are true classes, columns predictions.
struct Metrics {
  std::vector<double> epoch_loss;
  double accuracy = 0.0;
  Confusion confusion;

  std::int64_t total() const { return confusion.sum(); }
};

/// Accumulates predictions into a confusion matrix.
class MetricsBuilder {
 public:
  explicit MetricsBuilder(int classes);
  void add(int truth, int predicted);
  void merge(const MetricsBuilder& other);
  Metrics finish() const;

 private:
  Confusion confusion_;
};

/// Class with the largest logit; ties go to the lowest index.
int predict(const Model& model, const Sequence& seq);
int argmax(const Vector& scores);

/// Optimizer state carried across epochs (momentum buffer).
struct SgdState {
  std::optional<Gradients> velocity;
};

/// Loss and exact (full or truncated) gradient for one sequence.
struct SequenceGradient {
  double loss = 0.0;
  int predicted = 0;
  Gradients grad;
};

SequenceGradient compute_gradient(const Model& model, const Sequence& seq, LossMode mode,
                                  Truncation truncation);

/// theta <- theta - lr * g, after optional clipping and momentum.
void apply_update(Model& model, Gradients grad, const TrainConfig& config, SgdState& state);

/// One pass of per-sequence SGD. Sequences are visited in an order drawn from
/// `order_rng` when shuffling is enabled. Training metrics record each
/// sequence's prediction before its update. Throws on a non-finite loss.
Metrics sgd_epoch(Model& model, const Dataset& data, const TrainConfig& config, Rng& order_rng,
                  SgdState& state);

using EpochCallback = std::function<void(int epoch, const Metrics&)>;

/// Runs `config.epochs` epochs; the returned metrics carry every epoch's mean
/// loss and the final epoch's training confusion matrix.
Metrics train(Model& model, const Dataset& data, const TrainConfig& config,
              const EpochCallback& on_epoch = {});

/// Sequence-level accuracy and confusion matrix.
Metrics evaluate(const Model& model, const Dataset& data);

}  // namespace d2rnn

#endif  // D2RNN_TRAIN_HPP

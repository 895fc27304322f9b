#include "d2rnn/train.hpp"

#include <cmath>
#include <numeric>

namespace d2rnn {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw_usage("train config: learning_rate must be finite and non-negative");
  if (epochs < 1) throw_usage("train config: epochs must be at least 1");
  if (clip_norm && !(*clip_norm > 0.0)) throw_usage("train config: clip_norm must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw_usage("train config: momentum must lie in [0, 1)");
}

MetricsBuilder::MetricsBuilder(int classes) : confusion_(Confusion::Zero(classes, classes)) {}

void MetricsBuilder::add(int truth, int predicted) { confusion_(truth, predicted) += 1; }

void MetricsBuilder::merge(const MetricsBuilder& other) { confusion_ += other.confusion_; }

Metrics MetricsBuilder::finish() const {
  Metrics m;
  m.confusion = confusion_;
  const auto total = confusion_.sum();
  m.accuracy = total > 0 ? static_cast<double>(confusion_.trace()) / static_cast<double>(total)
                         : 0.0;
  return m;
}

int argmax(const Vector& scores) {
  Eigen::Index best = 0;
  scores.maxCoeff(&best);
  return static_cast<int>(best);
}

int predict(const Model& model, const Sequence& seq) {
  return argmax(stack_forward(model, seq).sequence_logits());
}

SequenceGradient compute_gradient(const Model& model, const Sequence& seq, LossMode mode,
                                  Truncation truncation) {
  const Tape tape = stack_forward(model, seq);
  SequenceLoss loss = sequence_loss(tape, seq, mode);
  SequenceGradient out;
  out.loss = loss.loss;
  out.predicted = argmax(tape.sequence_logits());
  out.grad = backward(model.params, tape, loss.logit_grads, truncation);
  return out;
}

void apply_update(Model& model, Gradients grad, const TrainConfig& config, SgdState& state) {
  if (config.clip_norm) {
    const double norm = global_norm(grad);
    if (norm > *config.clip_norm) {
      const double scale = *config.clip_norm / norm;
      grad.for_each([&](const std::string&, auto& m) { m *= scale; });
    }
  }

  if (config.momentum > 0.0) {
    if (!state.velocity) {
      state.velocity = grad;
      state.velocity->for_each([](const std::string&, auto& m) { m.setZero(); });
    }
    // v <- mu v + g ; step along v
    std::vector<double*> vel;
    state.velocity->for_each([&](const std::string&, auto& m) { vel.push_back(m.data()); });
    std::size_t k = 0;
    grad.for_each([&](const std::string&, auto& m) {
      double* v = vel[k++];
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        v[i] = config.momentum * v[i] + m.data()[i];
        m.data()[i] = v[i];
      }
    });
  }

  std::vector<const double*> steps;
  std::vector<Eigen::Index> sizes;
  grad.for_each([&](const std::string&, const auto& m) {
    steps.push_back(m.data());
    sizes.push_back(m.size());
  });
  std::size_t k = 0;
  model.params.for_each([&](const std::string& name, auto& m) {
    if (k >= steps.size() || sizes[k] != m.size())
      throw_data("apply_update: gradient shape mismatch at " + name);
    const double* g = steps[k++];
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] -= config.learning_rate * g[i];
  });
}

Metrics sgd_epoch(Model& model, const Dataset& data, const TrainConfig& config, Rng& order_rng,
                  SgdState& state) {
  if (data.sequences.empty()) throw_data("sgd_epoch: empty dataset");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (config.shuffle) order_rng.shuffle(order);

  MetricsBuilder builder(model.config.output_classes);
  double total = 0.0;
  for (std::size_t idx : order) {
    const Sequence& seq = data.sequences[idx];
    SequenceGradient sg = compute_gradient(model, seq, config.mode, config.truncation);
    if (!std::isfinite(sg.loss))
      throw_numerical("sgd_epoch: non-finite loss on sequence '" + seq.id + "'");
    total += sg.loss;
    builder.add(seq.label, sg.predicted);
    apply_update(model, std::move(sg.grad), config, state);
  }
  Metrics m = builder.finish();
  m.epoch_loss.push_back(total / static_cast<double>(data.size()));
  return m;
}

Metrics train(Model& model, const Dataset& data, const TrainConfig& config,
              const EpochCallback& on_epoch) {
  config.validate();
  Rng order_rng(config.seed ^ 0x5DEECE66DULL);
  SgdState state;
  Metrics all;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Metrics m = sgd_epoch(model, data, config, order_rng, state);
    all.epoch_loss.push_back(m.epoch_loss.front());
    all.accuracy = m.accuracy;
    all.confusion = m.confusion;
    if (on_epoch) on_epoch(epoch, m);
  }
  return all;
}

Metrics evaluate(const Model& model, const Dataset& data) {
  MetricsBuilder builder(model.config.output_classes);
  for (const auto& seq : data.sequences) builder.add(seq.label, predict(model, seq));
  return builder.finish();
}

}  // namespace d2rnn

#include "d2rnn/loss.hpp"

#include <cmath>

namespace d2rnn {

namespace {

void check_class(int c, Eigen::Index k, const char* who) {
  if (c < 0 || c >= k)
    throw_data(std::string(who) + ": class index " + std::to_string(c) + " outside [0, " +
               std::to_string(k) + ")");
}

}  // namespace

LossValue loss_frame(const Vector& p, int c) {
  check_class(c, p.size(), "loss_frame");
  LossValue v;
  v.loss = -std::log(p(c));
  v.grad = p;
  v.grad(c) -= 1.0;
  return v;
}

LossValue loss_sequence(const Vector& p, int c) {
  check_class(c, p.size(), "loss_sequence");
  return loss_frame(p, c);
}

LossValue loss_from_logits(const Vector& logits, int c) {
  check_class(c, logits.size(), "loss");
  const double peak = logits.maxCoeff();
  const double lse = peak + std::log((logits.array() - peak).exp().sum());
  LossValue v;
  v.loss = lse - logits(c);
  v.grad = softmax(logits);
  v.grad(c) -= 1.0;
  return v;
}

SequenceLoss sequence_loss(const Tape& tape, const Sequence& seq, LossMode mode) {
  const std::size_t T = tape.frames();
  SequenceLoss out;
  out.logit_grads.assign(T, Vector::Zero(tape.logits.front().size()));
  if (mode == LossMode::Sequence) {
    auto v = loss_from_logits(tape.logits.back(), seq.label);
    out.loss = v.loss;
    out.logit_grads.back() = std::move(v.grad);
  } else {
    for (std::size_t t = 0; t < T; ++t) {
      auto v = loss_from_logits(tape.logits[t], seq.frame_label(t));
      out.loss += v.loss;
      out.logit_grads[t] = std::move(v.grad);
    }
  }
  if (!std::isfinite(out.loss)) throw_numerical("non-finite loss on sequence '" + seq.id + "'");
  return out;
}

double model_loss(const Model& model, const Sequence& seq, LossMode mode) {
  return sequence_loss(stack_forward(model, seq), seq, mode).loss;
}

}  // namespace d2rnn

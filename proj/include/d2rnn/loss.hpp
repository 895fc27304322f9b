#ifndef D2RNN_LOSS_HPP
#define D2RNN_LOSS_HPP

#include <vector>

#include "d2rnn/cells.hpp"

namespace d2rnn {

enum class LossMode { Frame, Sequence };

/// Negative log-likelihood and its gradient with respect to the logits y that
/// produced p = softmax(y). The gradient is p - onehot(c).
struct LossValue {
  double loss = 0.0;
  Vector grad;
};

/// -log p_c for a probability vector p.
LossValue loss_frame(const Vector& p, int c);

/// Same loss, applied once per sequence to the final-frame probabilities.
LossValue loss_sequence(const Vector& p, int c);

/// -log softmax(y)_c evaluated as logsumexp(y) - y_c.
LossValue loss_from_logits(const Vector& logits, int c);

/// Loss of a forward pass and dL/dy for every frame. Sequence mode scores the
/// final frame only; frame mode sums per-frame losses against frame labels
/// (falling back to the sequence label).
struct SequenceLoss {
  double loss = 0.0;
  std::vector<Vector> logit_grads;
};

SequenceLoss sequence_loss(const Tape& tape, const Sequence& seq, LossMode mode);

/// Scalar loss only; the gradient checker's objective.
double model_loss(const Model& model, const Sequence& seq, LossMode mode);

}  // namespace d2rnn

#endif  // D2RNN_LOSS_HPP

#ifndef D2RNN_BACKPROP_HPP
#define D2RNN_BACKPROP_HPP

#include <optional>
#include <string>
#include <vector>

#include "d2rnn/cells.hpp"
#include "d2rnn/loss.hpp"

namespace d2rnn {

/// Same shape as the parameters they differentiate.
using Gradients = Parameters;

enum class Truncation { Full, Truncated };

Gradients zero_gradients(const Model& model);

/// Reverse-mode gradient of a loss through a recorded forward pass.
/// `logit_grads[t]` is dL/dy_t. With Truncation::Truncated, gradient does not
/// flow from the gates back into DoS vectors of order >= 1 (v_t, a_t, ...);
/// the parameter gradients of the DoS matrices themselves are still exact
/// for the truncated objective.
Gradients backward(const Parameters& params, const Tape& tape,
                   const std::vector<Vector>& logit_grads, Truncation mode);

Gradients backward_full(const Model& model, const Tape& tape,
                        const std::vector<Vector>& logit_grads);
Gradients backward_truncated(const Model& model, const Tape& tape,
                             const std::vector<Vector>& logit_grads);

/// L2 norm over every gradient entry.
double global_norm(const Gradients& g);

// ---------------------------------------------------------------------------
// Finite-difference checking
// ---------------------------------------------------------------------------

struct GradCheckEntry {
  std::string param;
  Eigen::Index row = 0;
  Eigen::Index col = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Relative error denominator floor.
  double floor = 1e-8;
  LossMode loss = LossMode::Sequence;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  GradCheckEntry worst;
  double max_rel_error = 0.0;
  bool passed = false;

  /// Failing coordinates, worst first.
  std::vector<GradCheckEntry> failures(double tolerance) const;

  /// "name(row,col)" of the worst entry.
  std::string worst_name() const;

  /// One line per parameter tensor (its worst entry), then a verdict line.
  std::string to_text(double tolerance) const;
};

/// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor = 1e-8);

/// Central differences against `analytic` for every scalar parameter.
GradCheckReport grad_check_against(const Model& model, const Sequence& seq,
                                   const Gradients& analytic, const GradCheckOptions& opts = {});

/// Central differences against backward_full.
GradCheckReport grad_check(const Model& model, const Sequence& seq,
                           const GradCheckOptions& opts = {});

}  // namespace d2rnn

#endif  // D2RNN_BACKPROP_HPP

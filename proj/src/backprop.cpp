#include "d2rnn/backprop.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

namespace d2rnn {

namespace {

Vector sigmoid_grad(const Vector& dy, const Vector& y) {
  return dy.cwiseProduct(y.cwiseProduct(Vector::Ones(y.size()) - y));
}

Vector tanh_grad(const Vector& dy, const Vector& y) {
  return dy.cwiseProduct(Vector::Ones(y.size()) - y.cwiseProduct(y));
}

// Backpropagates one classical layer; returns dL/dx_t per frame.
std::vector<Vector> backward_classical(const CellParams& p,
                                       const std::vector<StepRecord>& recs,
                                       const std::vector<Vector>& dh_ext, CellParams& g) {
  const std::size_t T = recs.size();
  std::vector<Vector> dx(T);
  Vector dh_rec = Vector::Zero(p.state_units());
  for (std::size_t t = T; t-- > 0;) {
    const StepRecord& r = recs[t];
    const Vector dpre = tanh_grad(dh_ext[t] + dh_rec, r.h);
    g.W_hh.noalias() += dpre * r.h_prev.transpose();
    g.W_hx.noalias() += dpre * r.x.transpose();
    g.b_h += dpre;
    dh_rec.noalias() = p.W_hh.transpose() * dpre;
    dx[t].noalias() = p.W_hx.transpose() * dpre;
  }
  return dx;
}

std::vector<Vector> backward_gated(const CellParams& p, const std::vector<StepRecord>& recs,
                                   const std::vector<Vector>& dh_ext, Truncation mode,
                                   CellParams& g) {
  const std::size_t T = recs.size();
  const Eigen::Index units = p.state_units();
  const auto& W_fh = p.tied ? p.W_ih : p.W_fh;
  const auto& W_oh = p.tied ? p.W_ih : p.W_oh;
  auto& gW_fh = p.tied ? g.W_ih : g.W_fh;
  auto& gW_oh = p.tied ? g.W_ih : g.W_oh;

  std::vector<std::vector<double>> coeffs;
  for (int n : p.orders) coeffs.push_back(dos_coefficients(n));
  auto severed = [&](std::size_t k) { return mode == Truncation::Truncated && p.orders[k] >= 1; };

  // Gradient reaching s_t from uses at later timesteps.
  std::vector<Vector> ds_acc(T, Vector::Zero(units));
  std::vector<Vector> dx(T);
  Vector dh_rec = Vector::Zero(units);

  auto scatter = [&](std::ptrdiff_t newest, const std::vector<double>& c, const Vector& grad) {
    for (std::size_t j = 0; j < c.size(); ++j) {
      const std::ptrdiff_t idx = newest - static_cast<std::ptrdiff_t>(j);
      if (idx < 0) break;  // zero padding before the first frame
      ds_acc[static_cast<std::size_t>(idx)] += c[j] * grad;
    }
  };

  for (std::size_t t = T; t-- > 0;) {
    const StepRecord& r = recs[t];
    const auto now = static_cast<std::ptrdiff_t>(t);

    const Vector dh = dh_ext[t] + dh_rec;
    const Vector dpre_o = sigmoid_grad(dh.cwiseProduct(r.tanh_s), r.o);
    Vector ds = ds_acc[t] + tanh_grad(dh.cwiseProduct(r.o), r.tanh_s);

    // Output gate reads the DoS of the current state.
    for (std::size_t k = 0; k < p.orders.size(); ++k) {
      g.W_od[k].noalias() += dpre_o * r.dos_cur[k].transpose();
      if (severed(k)) continue;
      const Vector gd = p.W_od[k].transpose() * dpre_o;
      ds += coeffs[k][0] * gd;
      std::vector<double> rest(coeffs[k].begin() + 1, coeffs[k].end());
      scatter(now - 1, rest, gd);
    }

    // s_t = f * s_{t-1} + i * g
    const Vector dpre_f = sigmoid_grad(ds.cwiseProduct(r.s_prev), r.f);
    const Vector dpre_i = sigmoid_grad(ds.cwiseProduct(r.g), r.i);
    const Vector dpre_g = tanh_grad(ds.cwiseProduct(r.i), r.g);
    if (t > 0) ds_acc[t - 1] += ds.cwiseProduct(r.f);

    // Input and forget gates read the DoS of the previous state.
    for (std::size_t k = 0; k < p.orders.size(); ++k) {
      g.W_id[k].noalias() += dpre_i * r.dos_prev[k].transpose();
      g.W_fd[k].noalias() += dpre_f * r.dos_prev[k].transpose();
      if (severed(k)) continue;
      const Vector gd = p.W_id[k].transpose() * dpre_i + p.W_fd[k].transpose() * dpre_f;
      scatter(now - 1, coeffs[k], gd);
    }

    g.W_ix.noalias() += dpre_i * r.x.transpose();
    g.W_fx.noalias() += dpre_f * r.x.transpose();
    g.W_ox.noalias() += dpre_o * r.x.transpose();
    g.W_sx.noalias() += dpre_g * r.x.transpose();
    g.W_ih.noalias() += dpre_i * r.h_prev.transpose();
    gW_fh.noalias() += dpre_f * r.h_prev.transpose();
    gW_oh.noalias() += dpre_o * r.h_prev.transpose();
    g.W_sh.noalias() += dpre_g * r.h_prev.transpose();
    g.b_i += dpre_i;
    g.b_f += dpre_f;
    g.b_o += dpre_o;
    g.b_s += dpre_g;

    dh_rec = p.W_ih.transpose() * dpre_i + W_fh.transpose() * dpre_f +
             W_oh.transpose() * dpre_o + p.W_sh.transpose() * dpre_g;
    dx[t] = p.W_ix.transpose() * dpre_i + p.W_fx.transpose() * dpre_f +
            p.W_ox.transpose() * dpre_o + p.W_sx.transpose() * dpre_g;
  }
  return dx;
}

// Loss evaluated at extended precision so that central differences are not
// dominated by rounding in the loss itself.
using Wide = long double;

Wide wide_loss(const ParametersT<Wide>& params, const std::vector<VectorT<Wide>>& frames,
               const Sequence& seq, LossMode mode) {
  const TapeT<Wide> tape = stack_forward(params, frames);
  auto nll = [](const VectorT<Wide>& y, int c) {
    const Wide peak = y.maxCoeff();
    return peak + std::log((y.array() - peak).exp().sum()) - y(c);
  };
  if (mode == LossMode::Sequence) return nll(tape.logits.back(), seq.label);
  Wide total = 0;
  for (std::size_t t = 0; t < tape.frames(); ++t) total += nll(tape.logits[t], seq.frame_label(t));
  return total;
}

Parameters zeros_like(const Parameters& params) {
  Parameters g = params;
  g.for_each([](const std::string&, auto& m) { m.setZero(); });
  return g;
}

}  // namespace

Gradients zero_gradients(const Model& model) { return zeros_like(model.params); }

Gradients backward(const Parameters& params, const Tape& tape,
                   const std::vector<Vector>& logit_grads, Truncation mode) {
  if (tape.depth() != params.layers.size())
    throw_data("backward: tape has " + std::to_string(tape.depth()) + " layers, model has " +
               std::to_string(params.layers.size()));
  if (logit_grads.size() != tape.frames())
    throw_data("backward: " + std::to_string(logit_grads.size()) +
               " logit gradients for a tape of " + std::to_string(tape.frames()) + " frames");
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    if (tape.records[k].size() != tape.frames() ||
        (tape.frames() > 0 && tape.records[k][0].s.size() != params.layers[k].state_units()))
      throw_data("backward: tape does not match layer " + std::to_string(k));
  }

  Gradients g = zeros_like(params);
  const std::size_t T = tape.frames();
  const std::size_t top = params.layers.size() - 1;

  std::vector<Vector> dh(T);
  for (std::size_t t = 0; t < T; ++t) {
    if (logit_grads[t].size() != params.b_y.size())
      throw_data("backward: logit gradient length mismatch at frame " + std::to_string(t));
    const Vector dz = tanh_grad(logit_grads[t], tape.logits[t]);
    g.W_yh.noalias() += dz * tape.records[top][t].h.transpose();
    g.b_y += dz;
    dh[t] = params.W_yh.transpose() * dz;
  }

  for (std::size_t k = params.layers.size(); k-- > 0;) {
    const CellParams& p = params.layers[k];
    dh = p.kind.is_gated() ? backward_gated(p, tape.records[k], dh, mode, g.layers[k])
                           : backward_classical(p, tape.records[k], dh, g.layers[k]);
  }
  return g;
}

Gradients backward_full(const Model& model, const Tape& tape,
                        const std::vector<Vector>& logit_grads) {
  return backward(model.params, tape, logit_grads, Truncation::Full);
}

Gradients backward_truncated(const Model& model, const Tape& tape,
                             const std::vector<Vector>& logit_grads) {
  return backward(model.params, tape, logit_grads, Truncation::Truncated);
}

double global_norm(const Gradients& g) {
  double sq = 0.0;
  g.for_each([&](const std::string&, const auto& m) { sq += m.squaredNorm(); });
  return std::sqrt(sq);
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

std::vector<GradCheckEntry> GradCheckReport::failures(double tolerance) const {
  std::vector<GradCheckEntry> out;
  for (const auto& e : entries)
    if (!(e.rel_error < tolerance)) out.push_back(e);
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.rel_error > b.rel_error; });
  return out;
}

std::string GradCheckReport::to_text(double tolerance) const {
  std::ostringstream os;
  os << std::setprecision(6) << std::scientific;
  os << "param\trow\tcol\tanalytic\tnumeric\trel_error\n";
  auto line = [&](const GradCheckEntry& e) {
    os << e.param << '\t' << e.row << '\t' << e.col << '\t' << e.analytic << '\t' << e.numeric
       << '\t' << e.rel_error << '\n';
  };
  // Worst entry of each tensor, in visiting order.
  std::vector<std::string> order;
  std::map<std::string, GradCheckEntry> worst;
  for (const auto& e : entries) {
    auto it = worst.find(e.param);
    if (it == worst.end()) {
      order.push_back(e.param);
      worst.emplace(e.param, e);
    } else if (e.rel_error > it->second.rel_error) {
      it->second = e;
    }
  }
  for (const auto& name : order) line(worst.at(name));
  const auto bad = failures(tolerance);
  if (!bad.empty()) {
    os << "# failing coordinates\n";
    for (const auto& e : bad) line(e);
  }
  os << (passed ? "PASS" : "FAIL") << " max_rel_error=" << max_rel_error << " at " << worst_name()
     << " parameters=" << entries.size() << " tolerance=" << tolerance << '\n';
  return os.str();
}

std::string GradCheckReport::worst_name() const {
  return worst.param + "(" + std::to_string(worst.row) + "," + std::to_string(worst.col) + ")";
}

GradCheckReport grad_check_against(const Model& model, const Sequence& seq,
                                   const Gradients& analytic, const GradCheckOptions& opts) {
  std::vector<double> flat;
  analytic.for_each([&](const std::string&, const auto& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
  });

  if (seq.dim() != model.config.input_units)
    throw_data("grad_check: frame dim does not match the model input");
  std::vector<VectorT<Wide>> frames;
  for (const auto& f : seq.frames) frames.push_back(f.cast<Wide>());
  sequence_loss(stack_forward(model, seq), seq, opts.loss);  // validates labels

  GradCheckReport report;
  ParametersT<Wide> probe = cast_parameters<Wide>(model.params);
  const Wide step = static_cast<Wide>(opts.step);
  std::size_t idx = 0;
  probe.for_each([&](const std::string& name, auto& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (idx >= flat.size()) throw_data("grad_check: gradient shape does not match model");
        const Wide saved = m(i, j);
        m(i, j) = saved + step;
        const Wide up = wide_loss(probe, frames, seq, opts.loss);
        m(i, j) = saved - step;
        const Wide down = wide_loss(probe, frames, seq, opts.loss);
        m(i, j) = saved;
        const double numeric = static_cast<double>((up - down) / (2 * step));

        GradCheckEntry e{name, i, j, flat[idx], numeric, 0.0};
        if (!std::isfinite(e.analytic) || !std::isfinite(e.numeric)) {
          throw_numerical("grad_check: non-finite gradient at " + name + "(" + std::to_string(i) +
                          "," + std::to_string(j) + ")");
        }
        e.rel_error = relative_error(e.analytic, e.numeric, opts.floor);
        if (report.entries.empty() || e.rel_error > report.max_rel_error) {
          report.max_rel_error = e.rel_error;
          report.worst = e;
        }
        report.entries.push_back(std::move(e));
        ++idx;
      }
    }
  });
  if (idx != flat.size()) throw_data("grad_check: gradient shape does not match model");
  report.passed = report.max_rel_error < opts.tolerance;
  return report;
}

GradCheckReport grad_check(const Model& model, const Sequence& seq, const GradCheckOptions& opts) {
  const Tape tape = stack_forward(model, seq);
  const SequenceLoss loss = sequence_loss(tape, seq, opts.loss);
  return grad_check_against(model, seq, backward_full(model, tape, loss.logit_grads), opts);
}

}  // namespace d2rnn

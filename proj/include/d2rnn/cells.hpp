#ifndef D2RNN_CELLS_HPP
#define D2RNN_CELLS_HPP

#include <cmath>
#include <cstdint>
#include <deque>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "d2rnn/numerics.hpp"
#include "d2rnn/sequence.hpp"

namespace d2rnn {

// ---------------------------------------------------------------------------
// Cell kinds and stack configuration
// ---------------------------------------------------------------------------

enum class CellType { ClassicalRnn, Lstm, Dos, Drnn };

/// A recurrent cell variant. `order` is the single DoS order of a Dos cell or
/// the highest summed order of a Drnn cell; it is ignored otherwise.
struct CellKind {
  CellType type = CellType::Lstm;
  int order = 0;

  static CellKind classical() { return {CellType::ClassicalRnn, 0}; }
  static CellKind lstm() { return {CellType::Lstm, 0}; }
  static CellKind dos(int n) { return {CellType::Dos, n}; }
  static CellKind drnn(int max_order) { return {CellType::Drnn, max_order}; }

  /// DoS orders feeding the gates, in summation order.
  std::vector<int> dos_orders() const {
    switch (type) {
      case CellType::Dos:
        return {order};
      case CellType::Drnn: {
        std::vector<int> all;
        for (int n = 0; n <= order; ++n) all.push_back(n);
        return all;
      }
      default:
        return {};
    }
  }

  /// Number of lagged internal states the layer keeps.
  int history_depth() const {
    return (type == CellType::Dos || type == CellType::Drnn) ? order : 0;
  }

  bool is_gated() const { return type != CellType::ClassicalRnn; }

  std::string to_string() const;
  static CellKind parse(const std::string& text);

  friend bool operator==(const CellKind& a, const CellKind& b) {
    return a.type == b.type && a.history_depth() == b.history_depth();
  }
};

struct LayerSpec {
  CellKind kind;
  int state_units = 0;
};

struct StackConfig {
  std::vector<LayerSpec> layers;
  int input_units = 0;
  int output_classes = 0;
  // Reproduces the literal forget/output gate equations that reuse W_ih.
  bool tie_gate_hidden_weights = false;

  int layer_input_units(std::size_t k) const {
    return k == 0 ? input_units : layers[k - 1].state_units;
  }

  /// Throws if any width is non-positive or an order is negative.
  void validate() const;

  /// Layer k (0-based) uses the single DoS order k.
  static StackConfig d2rnn(int depth, int input_units, int state_units, int classes);
  static StackConfig stacked_lstm(int depth, int input_units, int state_units, int classes);
  static StackConfig single(CellKind kind, int input_units, int state_units, int classes);
};

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// Every weight of one recurrent layer. Gated cells use the W_*x, W_*h and
/// b_* members plus one W_id/W_fd/W_od triple per DoS order; the classical
/// cell uses W_hx, W_hh and b_h only.
template <typename Scalar>
struct CellParamsT {
  using Mat = MatrixT<Scalar>;
  using Vec = VectorT<Scalar>;

  CellKind kind;
  bool tied = false;

  Mat W_ix, W_fx, W_ox, W_sx;
  Mat W_ih, W_fh, W_oh, W_sh;
  Vec b_i, b_f, b_o, b_s;

  std::vector<int> orders;
  std::vector<Mat> W_id, W_fd, W_od;

  Mat W_hx, W_hh;
  Vec b_h;

  Eigen::Index state_units() const { return kind.is_gated() ? b_i.size() : b_h.size(); }
  Eigen::Index input_units() const { return kind.is_gated() ? W_ix.cols() : W_hx.cols(); }

  static CellParamsT zeros(CellKind kind, Eigen::Index input_units, Eigen::Index units) {
    CellParamsT p;
    p.kind = kind;
    if (!kind.is_gated()) {
      p.W_hx = Mat::Zero(units, input_units);
      p.W_hh = Mat::Zero(units, units);
      p.b_h = Vec::Zero(units);
      return p;
    }
    for (Mat* m : {&p.W_ix, &p.W_fx, &p.W_ox, &p.W_sx}) *m = Mat::Zero(units, input_units);
    for (Mat* m : {&p.W_ih, &p.W_fh, &p.W_oh, &p.W_sh}) *m = Mat::Zero(units, units);
    for (Vec* b : {&p.b_i, &p.b_f, &p.b_o, &p.b_s}) *b = Vec::Zero(units);
    p.orders = kind.dos_orders();
    p.W_id.assign(p.orders.size(), Mat::Zero(units, units));
    p.W_fd = p.W_id;
    p.W_od = p.W_id;
    return p;
  }

  /// Visits every live parameter as (name, matrix-or-vector).
  template <typename F>
  void for_each(F&& f) {
    visit_impl(*this, f);
  }
  template <typename F>
  void for_each(F&& f) const {
    visit_impl(*this, f);
  }

 private:
  template <typename Self, typename F>
  static void visit_impl(Self& self, F& f) {
    if (!self.kind.is_gated()) {
      f("W_hx", self.W_hx);
      f("W_hh", self.W_hh);
      f("b_h", self.b_h);
      return;
    }
    f("W_ix", self.W_ix);
    f("W_fx", self.W_fx);
    f("W_ox", self.W_ox);
    f("W_sx", self.W_sx);
    f("W_ih", self.W_ih);
    f("W_fh", self.W_fh);
    f("W_oh", self.W_oh);
    f("W_sh", self.W_sh);
    f("b_i", self.b_i);
    f("b_f", self.b_f);
    f("b_o", self.b_o);
    f("b_s", self.b_s);
    for (std::size_t k = 0; k < self.orders.size(); ++k) {
      const std::string tag = "[" + std::to_string(self.orders[k]) + "]";
      f("W_id" + tag, self.W_id[k]);
      f("W_fd" + tag, self.W_fd[k]);
      f("W_od" + tag, self.W_od[k]);
    }
  }
};

/// All layers plus the output projection y = tanh(W_yh h + b_y).
template <typename Scalar>
struct ParametersT {
  std::vector<CellParamsT<Scalar>> layers;
  MatrixT<Scalar> W_yh;
  VectorT<Scalar> b_y;

  static ParametersT zeros(const StackConfig& config) {
    config.validate();
    ParametersT p;
    for (std::size_t k = 0; k < config.layers.size(); ++k) {
      auto layer = CellParamsT<Scalar>::zeros(config.layers[k].kind, config.layer_input_units(k),
                                              config.layers[k].state_units);
      layer.tied = config.tie_gate_hidden_weights;
      p.layers.push_back(std::move(layer));
    }
    p.W_yh = MatrixT<Scalar>::Zero(config.output_classes, config.layers.back().state_units);
    p.b_y = VectorT<Scalar>::Zero(config.output_classes);
    return p;
  }

  /// Visits every parameter with a qualified name such as "layer1.W_id[1]".
  template <typename F>
  void for_each(F&& f) {
    visit_impl(*this, f);
  }
  template <typename F>
  void for_each(F&& f) const {
    visit_impl(*this, f);
  }

  std::size_t count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const auto& m) { n += static_cast<std::size_t>(m.size()); });
    return n;
  }

 private:
  template <typename Self, typename F>
  static void visit_impl(Self& self, F& f) {
    for (std::size_t k = 0; k < self.layers.size(); ++k) {
      const std::string prefix = "layer" + std::to_string(k) + ".";
      self.layers[k].for_each([&](const std::string& name, auto& m) { f(prefix + name, m); });
    }
    f(std::string("output.W_yh"), self.W_yh);
    f(std::string("output.b_y"), self.b_y);
  }
};

using CellParams = CellParamsT<double>;
using Parameters = ParametersT<double>;

/// Converts every tensor to another scalar type; structure is preserved.
template <typename To, typename From>
ParametersT<To> cast_parameters(const ParametersT<From>& from) {
  ParametersT<To> to;
  for (const auto& layer : from.layers) {
    CellParamsT<To> c;
    c.kind = layer.kind;
    c.tied = layer.tied;
    c.orders = layer.orders;
    c.W_id.resize(layer.W_id.size());
    c.W_fd.resize(layer.W_fd.size());
    c.W_od.resize(layer.W_od.size());
    to.layers.push_back(std::move(c));
  }
  std::vector<MatrixT<To>*> mats;
  std::vector<VectorT<To>*> vecs;
  to.for_each([&](const std::string&, auto& m) {
    if constexpr (std::is_same_v<std::decay_t<decltype(m)>, MatrixT<To>>)
      mats.push_back(&m);
    else
      vecs.push_back(&m);
  });
  std::size_t mi = 0, vi = 0;
  from.for_each([&](const std::string&, const auto& m) {
    if constexpr (std::is_same_v<std::decay_t<decltype(m)>, MatrixT<From>>)
      *mats[mi++] = m.template cast<To>();
    else
      *vecs[vi++] = m.template cast<To>();
  });
  return to;
}

/// Uniform in [-r, r] with r = 1/sqrt(fan-in) per matrix, biases zero except
/// the forget-gate bias, which starts at +1.
Parameters init_parameters(const StackConfig& config, Rng& rng);

/// Throws if the parameter shapes disagree with the configuration.
void check_shapes(const StackConfig& config, const Parameters& params);

struct Model {
  StackConfig config;
  Parameters params;
  std::uint64_t seed = 0;

  static Model create(const StackConfig& config, std::uint64_t seed) {
    Rng rng(seed);
    return Model{config, init_parameters(config, rng), seed};
  }
};

// ---------------------------------------------------------------------------
// Derivative of state
// ---------------------------------------------------------------------------

/// Signed binomial weights c_j with dos(n, s_t) = sum_j c_j s_{t-j}.
inline std::vector<double> dos_coefficients(int order) {
  std::vector<double> c(static_cast<std::size_t>(order) + 1, 0.0);
  c[0] = 1.0;
  for (int level = 1; level <= order; ++level) {
    for (int j = level; j >= 1; --j) c[j] = c[j] - c[j - 1];
  }
  return c;
}

/// order-th finite difference of the internal state. `history` holds
/// s_{t-1}, s_{t-2}, ... most recent first; missing entries count as zero.
template <typename Scalar>
VectorT<Scalar> dos(int order, const VectorT<Scalar>& s_t,
                    const std::deque<VectorT<Scalar>>& history) {
  if (order == 0) return s_t;
  std::vector<VectorT<Scalar>> window;
  window.reserve(static_cast<std::size_t>(order) + 1);
  window.push_back(s_t);
  for (int j = 0; j < order; ++j) {
    if (static_cast<std::size_t>(j) < history.size())
      window.push_back(history[static_cast<std::size_t>(j)]);
    else
      window.push_back(VectorT<Scalar>::Zero(s_t.size()));
  }
  for (int level = 1; level <= order; ++level) {
    for (int j = 0; j <= order - level; ++j) window[j] = window[j] - window[j + 1];
  }
  return window[0];
}

// ---------------------------------------------------------------------------
// Stepping
// ---------------------------------------------------------------------------

template <typename Scalar>
struct LayerStateT {
  VectorT<Scalar> s;
  VectorT<Scalar> h;
  std::deque<VectorT<Scalar>> history;  // s_{t-2}, s_{t-3}, ... relative to s = s_{t-1}

  static LayerStateT zeros(Eigen::Index units, int depth) {
    LayerStateT st;
    st.s = VectorT<Scalar>::Zero(units);
    st.h = VectorT<Scalar>::Zero(units);
    st.history.assign(static_cast<std::size_t>(depth), VectorT<Scalar>::Zero(units));
    return st;
  }
};
using LayerState = LayerStateT<double>;

template <typename Scalar>
struct GatesT {
  VectorT<Scalar> i, f, o;
};
using Gates = GatesT<double>;

/// Everything one layer computes at one timestep, kept for BPTT.
template <typename Scalar>
struct StepRecordT {
  VectorT<Scalar> x, h_prev, s_prev;
  std::vector<VectorT<Scalar>> dos_prev;  // per order, of s_{t-1}
  std::vector<VectorT<Scalar>> dos_cur;   // per order, of s_t
  VectorT<Scalar> i, f, o;                // gate activations
  VectorT<Scalar> g;                      // tanh candidate
  VectorT<Scalar> s, tanh_s, h;
};
using StepRecord = StepRecordT<double>;

namespace detail {

template <typename Scalar>
void check_step_shapes(const CellParamsT<Scalar>& p, const LayerStateT<Scalar>& st,
                       const VectorT<Scalar>& x) {
  if (x.size() != p.input_units()) {
    throw_data("cell step: input length " + std::to_string(x.size()) + " but layer expects " +
               std::to_string(p.input_units()));
  }
  if (st.s.size() != p.state_units() || st.h.size() != p.state_units()) {
    throw_data("cell step: state length " + std::to_string(st.s.size()) +
               " but layer has " + std::to_string(p.state_units()) + " units");
  }
}

// sum_k W[k] * d[k], accumulated in order from a zero vector
template <typename Scalar>
VectorT<Scalar> dos_term(const std::vector<MatrixT<Scalar>>& W,
                         const std::vector<VectorT<Scalar>>& d, Eigen::Index units) {
  VectorT<Scalar> acc = VectorT<Scalar>::Zero(units);
  for (std::size_t k = 0; k < W.size(); ++k) acc += W[k] * d[k];
  return acc;
}

}  // namespace detail

/// Advances one layer by one frame. Gated cells follow the fixed order:
/// input/forget gates from the DoS of s_{t-1}, the state update, the DoS of
/// the new state, the output gate from that DoS, then h_t.
template <typename Scalar>
StepRecordT<Scalar> cell_step(const CellParamsT<Scalar>& p, LayerStateT<Scalar>& st,
                              const VectorT<Scalar>& x) {
  using Vec = VectorT<Scalar>;
  detail::check_step_shapes(p, st, x);

  StepRecordT<Scalar> r;
  r.x = x;
  r.h_prev = st.h;
  r.s_prev = st.s;

  if (!p.kind.is_gated()) {
    r.h = d2rnn::tanh(Vec(p.W_hh * st.h + p.W_hx * x + p.b_h));
    r.s = r.h;
    r.tanh_s = r.h;
    st.s = r.s;
    st.h = r.h;
    return r;
  }

  const Eigen::Index units = p.state_units();
  const auto& W_fh = p.tied ? p.W_ih : p.W_fh;
  const auto& W_oh = p.tied ? p.W_ih : p.W_oh;

  for (int n : p.orders) r.dos_prev.push_back(dos(n, st.s, st.history));

  Vec pre_i = p.W_ih * st.h + p.W_ix * x + p.b_i;
  Vec pre_f = W_fh * st.h + p.W_fx * x + p.b_f;
  if (!p.orders.empty()) {
    pre_i = detail::dos_term(p.W_id, r.dos_prev, units) + pre_i;
    pre_f = detail::dos_term(p.W_fd, r.dos_prev, units) + pre_f;
  }
  r.i = sigmoid(pre_i);
  r.f = sigmoid(pre_f);
  r.g = d2rnn::tanh(Vec(p.W_sh * st.h + p.W_sx * x + p.b_s));
  r.s = r.f.cwiseProduct(st.s) + r.i.cwiseProduct(r.g);

  std::deque<Vec> lagged = st.history;
  lagged.push_front(st.s);
  for (int n : p.orders) r.dos_cur.push_back(dos(n, r.s, lagged));

  Vec pre_o = W_oh * st.h + p.W_ox * x + p.b_o;
  if (!p.orders.empty()) pre_o = detail::dos_term(p.W_od, r.dos_cur, units) + pre_o;
  r.o = sigmoid(pre_o);
  r.tanh_s = d2rnn::tanh(r.s);
  r.h = r.o.cwiseProduct(r.tanh_s);

  const auto depth = static_cast<std::size_t>(p.kind.history_depth());
  while (lagged.size() > depth) lagged.pop_back();
  st.history = std::move(lagged);
  st.s = r.s;
  st.h = r.h;
  return r;
}

namespace detail {
template <typename Scalar>
std::pair<LayerStateT<Scalar>, GatesT<Scalar>> step_as(const CellParamsT<Scalar>& p,
                                                        const LayerStateT<Scalar>& state,
                                                        const VectorT<Scalar>& x) {
  LayerStateT<Scalar> next = state;
  auto rec = cell_step(p, next, x);
  return {std::move(next), GatesT<Scalar>{rec.i, rec.f, rec.o}};
}
}  // namespace detail

/// Conventional LSTM update; gates see h_{t-1} and x_t only.
template <typename Scalar>
std::pair<LayerStateT<Scalar>, GatesT<Scalar>> lstm_step(const CellParamsT<Scalar>& p,
                                                          const LayerStateT<Scalar>& state,
                                                          const VectorT<Scalar>& x) {
  if (p.kind.type != CellType::Lstm) throw_data("lstm_step: parameters are not an LSTM layer");
  return detail::step_as(p, state, x);
}

/// Single-order DoS cell (one d2RNN layer).
template <typename Scalar>
std::pair<LayerStateT<Scalar>, GatesT<Scalar>> dos_cell_step(const CellParamsT<Scalar>& p,
                                                              const LayerStateT<Scalar>& state,
                                                              const VectorT<Scalar>& x,
                                                              int order) {
  if (p.kind.type != CellType::Dos || p.kind.order != order)
    throw_data("dos_cell_step: parameters are not a DoS cell of order " + std::to_string(order));
  return detail::step_as(p, state, x);
}

/// dRNN cell: the gates see the sum of DoS orders 0..max_order.
template <typename Scalar>
std::pair<LayerStateT<Scalar>, GatesT<Scalar>> drnn_cell_step(const CellParamsT<Scalar>& p,
                                                               const LayerStateT<Scalar>& state,
                                                               const VectorT<Scalar>& x,
                                                               int max_order) {
  if (p.kind.type != CellType::Drnn || p.kind.order != max_order)
    throw_data("drnn_cell_step: parameters are not a dRNN cell of order " +
               std::to_string(max_order));
  return detail::step_as(p, state, x);
}

// ---------------------------------------------------------------------------
// Whole-stack forward pass
// ---------------------------------------------------------------------------

/// Forward intermediates: records[layer][t], plus per-frame output logits.
template <typename Scalar>
struct TapeT {
  std::vector<std::vector<StepRecordT<Scalar>>> records;
  std::vector<VectorT<Scalar>> logits;  // y_t = tanh(W_yh h_t + b_y)

  std::size_t frames() const { return logits.size(); }
  std::size_t depth() const { return records.size(); }
  const VectorT<Scalar>& sequence_logits() const { return logits.back(); }
};
using Tape = TapeT<double>;

template <typename Scalar>
TapeT<Scalar> stack_forward(const ParametersT<Scalar>& params,
                            const std::vector<VectorT<Scalar>>& frames) {
  if (frames.empty()) throw_data("stack_forward: empty sequence");
  if (params.layers.empty()) throw_data("stack_forward: model has no layers");

  TapeT<Scalar> tape;
  tape.records.resize(params.layers.size());
  std::vector<LayerStateT<Scalar>> states;
  for (const auto& layer : params.layers)
    states.push_back(LayerStateT<Scalar>::zeros(layer.state_units(), layer.kind.history_depth()));

  for (std::size_t t = 0; t < frames.size(); ++t) {
    const VectorT<Scalar>* input = &frames[t];
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
      tape.records[k].push_back(cell_step(params.layers[k], states[k], *input));
      input = &tape.records[k].back().h;
    }
    if (params.W_yh.cols() != input->size())
      throw_data("stack_forward: output projection expects " +
                 std::to_string(params.W_yh.cols()) + " units");
    tape.logits.push_back(d2rnn::tanh(VectorT<Scalar>(params.W_yh * *input + params.b_y)));
  }
  return tape;
}

inline Tape stack_forward(const Model& model, const Sequence& seq) {
  if (seq.frames.empty()) throw_data("stack_forward: empty sequence '" + seq.id + "'");
  if (seq.dim() != model.config.input_units) {
    throw_data("stack_forward: frame dim " + std::to_string(seq.dim()) + " != input units " +
               std::to_string(model.config.input_units) + " (sequence '" + seq.id + "')");
  }
  return stack_forward(model.params, seq.frames);
}

/// Per-frame L2 norms of DoS orders 0..n of one layer's internal state, where n
/// is the highest order the layer keeps history for unless `max_order` is
/// given. Rows are frames.
Matrix dos_energy(const Model& model, const Sequence& seq, std::size_t layer, int max_order = -1);

/// Same, from an existing tape.
Matrix dos_energy(const Tape& tape, const CellKind& kind, std::size_t layer, int max_order = -1);

}  // namespace d2rnn

#endif  // D2RNN_CELLS_HPP

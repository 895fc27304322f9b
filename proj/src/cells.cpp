#include "d2rnn/cells.hpp"

#include <charconv>

namespace d2rnn {

namespace {

int parse_order(const std::string& text, const std::string& whole) {
  int value = -1;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || value < 0)
    throw_usage("cannot parse cell order in '" + whole + "'");
  return value;
}

}  // namespace

std::string CellKind::to_string() const {
  switch (type) {
    case CellType::ClassicalRnn:
      return "rnn";
    case CellType::Lstm:
      return "lstm";
    case CellType::Dos:
      return "dos:" + std::to_string(order);
    case CellType::Drnn:
      return "drnn:" + std::to_string(order);
  }
  return "?";
}

CellKind CellKind::parse(const std::string& text) {
  if (text == "rnn") return classical();
  if (text == "lstm") return lstm();
  const auto colon = text.find(':');
  if (colon != std::string::npos) {
    const std::string head = text.substr(0, colon);
    const int n = parse_order(text.substr(colon + 1), text);
    if (head == "dos") return dos(n);
    if (head == "drnn") return drnn(n);
  }
  throw_usage("unknown cell kind '" + text + "' (expected rnn, lstm, dos:<n> or drnn:<n>)");
}

void StackConfig::validate() const {
  if (layers.empty()) throw_usage("stack config: no layers");
  if (input_units <= 0) throw_usage("stack config: input_units must be positive");
  if (output_classes < 2) throw_usage("stack config: need at least 2 output classes");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    if (layers[k].state_units <= 0)
      throw_usage("stack config: layer " + std::to_string(k) + " has no state units");
    if (layers[k].kind.order < 0)
      throw_usage("stack config: layer " + std::to_string(k) + " has a negative order");
  }
}

StackConfig StackConfig::d2rnn(int depth, int input_units, int state_units, int classes) {
  StackConfig c;
  for (int k = 0; k < depth; ++k) c.layers.push_back({CellKind::dos(k), state_units});
  c.input_units = input_units;
  c.output_classes = classes;
  return c;
}

StackConfig StackConfig::stacked_lstm(int depth, int input_units, int state_units, int classes) {
  StackConfig c;
  for (int k = 0; k < depth; ++k) c.layers.push_back({CellKind::lstm(), state_units});
  c.input_units = input_units;
  c.output_classes = classes;
  return c;
}

StackConfig StackConfig::single(CellKind kind, int input_units, int state_units, int classes) {
  StackConfig c;
  c.layers.push_back({kind, state_units});
  c.input_units = input_units;
  c.output_classes = classes;
  return c;
}

Parameters init_parameters(const StackConfig& config, Rng& rng) {
  Parameters p = Parameters::zeros(config);
  p.for_each([&](const std::string& name, auto& m) {
    const bool is_bias = name.find(".b_") != std::string::npos;
    if (is_bias) {
      if (name.ends_with(".b_f")) m.setConstant(1.0);
      return;
    }
    const double r = 1.0 / std::sqrt(static_cast<double>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-r, r);
  });
  return p;
}

void check_shapes(const StackConfig& config, const Parameters& params) {
  const Parameters expected = Parameters::zeros(config);
  if (params.layers.size() != expected.layers.size())
    throw_data("parameter shapes: expected " + std::to_string(expected.layers.size()) +
               " layers, found " + std::to_string(params.layers.size()));
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    if (!(params.layers[k].kind == expected.layers[k].kind))
      throw_data("parameter shapes: layer " + std::to_string(k) + " kind mismatch");
  }
  std::vector<std::pair<std::string, std::string>> want;
  expected.for_each([&](const std::string& name, const auto& m) {
    want.emplace_back(name, shape_string(m));
  });
  std::size_t idx = 0;
  params.for_each([&](const std::string& name, const auto& m) {
    if (idx >= want.size() || want[idx].first != name || want[idx].second != shape_string(m))
      throw_data("parameter shapes: unexpected " + name + " " + shape_string(m));
    ++idx;
  });
  if (idx != want.size()) throw_data("parameter shapes: missing parameters");
}

Matrix dos_energy(const Tape& tape, const CellKind& kind, std::size_t layer, int max_order) {
  if (layer >= tape.depth())
    throw_usage("dos_energy: layer " + std::to_string(layer) + " out of range (model has " +
                std::to_string(tape.depth()) + " layers)");
  const auto& recs = tape.records[layer];
  const int top = max_order >= 0 ? max_order : kind.history_depth();
  Matrix energy(static_cast<Eigen::Index>(recs.size()), top + 1);
  std::deque<Vector> history;
  for (std::size_t t = 0; t < recs.size(); ++t) {
    for (int n = 0; n <= top; ++n)
      energy(static_cast<Eigen::Index>(t), n) = dos(n, recs[t].s, history).norm();
    history.push_front(recs[t].s);
    if (history.size() > static_cast<std::size_t>(top)) history.pop_back();
  }
  return energy;
}

Matrix dos_energy(const Model& model, const Sequence& seq, std::size_t layer, int max_order) {
  if (layer >= model.config.layers.size())
    throw_usage("dos_energy: layer " + std::to_string(layer) + " out of range (model has " +
                std::to_string(model.config.layers.size()) + " layers)");
  return dos_energy(stack_forward(model, seq), model.config.layers[layer].kind, layer, max_order);
}

}  // namespace d2rnn

#include "d2rnn/checkpoint.hpp"

#include <fstream>
#include <sstream>

namespace d2rnn {

using nlohmann::json;

namespace {

template <typename M>
json tensor_to_json(const M& m) {
  json data = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index k = 0; k < m.cols(); ++k) data.push_back(m(i, k));
  return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

template <typename M>
void tensor_from_json(const json& j, const std::string& name, M& m) {
  if (!j.is_object()) throw_data("checkpoint: tensor " + name + " is not an object");
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  if (rows != m.rows() || cols != m.cols())
    throw_data("checkpoint: tensor " + name + " is " + std::to_string(rows) + "x" +
               std::to_string(cols) + ", expected " + shape_string(m));
  const json& data = j.at("data");
  if (!data.is_array() || static_cast<Eigen::Index>(data.size()) != rows * cols)
    throw_data("checkpoint: tensor " + name + " has the wrong number of values");
  std::size_t idx = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index k = 0; k < cols; ++k) {
      const json& v = data[idx++];
      if (!v.is_number()) throw_data("checkpoint: tensor " + name + " holds a non-number");
      m(i, k) = v.get<double>();
    }
}

}  // namespace

json config_to_json(const StackConfig& config) {
  json layers = json::array();
  for (const auto& l : config.layers)
    layers.push_back({{"kind", l.kind.to_string()}, {"state_units", l.state_units}});
  return json{{"input_units", config.input_units},
              {"output_classes", config.output_classes},
              {"tie_gate_hidden_weights", config.tie_gate_hidden_weights},
              {"layers", std::move(layers)}};
}

StackConfig config_from_json(const json& j) {
  try {
    StackConfig c;
    c.input_units = j.at("input_units").get<int>();
    c.output_classes = j.at("output_classes").get<int>();
    c.tie_gate_hidden_weights = j.value("tie_gate_hidden_weights", false);
    for (const auto& l : j.at("layers"))
      c.layers.push_back({CellKind::parse(l.at("kind").get<std::string>()),
                          l.at("state_units").get<int>()});
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw_data(std::string("checkpoint: malformed config: ") + e.what());
  } catch (const Error& e) {
    throw_data(std::string("checkpoint: invalid config: ") + e.what());
  }
}

json model_to_json(const Model& model) {
  json params = json::object();
  model.params.for_each([&](const std::string& name, const auto& m) {
    if (!m.allFinite()) throw_numerical("checkpoint: parameter " + name + " is not finite");
    params[name] = tensor_to_json(m);
  });
  return json{{"format", "d2rnn-model"},
              {"version", kCheckpointVersion},
              {"seed", model.seed},
              {"config", config_to_json(model.config)},
              {"params", std::move(params)}};
}

Model model_from_json(const json& j) {
  try {
    if (!j.is_object() || j.value("format", std::string()) != "d2rnn-model")
      throw_data("checkpoint: not a d2rnn model document");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion)
      throw_data("checkpoint: unsupported version " + std::to_string(version) + " (expected " +
                 std::to_string(kCheckpointVersion) + ")");
    Model model;
    model.seed = j.at("seed").get<std::uint64_t>();
    model.config = config_from_json(j.at("config"));
    model.params = Parameters::zeros(model.config);
    const json& params = j.at("params");
    std::size_t seen = 0;
    model.params.for_each([&](const std::string& name, auto& m) {
      if (!params.contains(name)) throw_data("checkpoint: missing tensor " + name);
      tensor_from_json(params.at(name), name, m);
      ++seen;
    });
    if (seen != params.size()) throw_data("checkpoint: unexpected extra tensors");
    return model;
  } catch (const json::exception& e) {
    throw_data(std::string("checkpoint: malformed document: ") + e.what());
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw_data("cannot parse " + path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("cannot write " + path.string());
  out << text;
  if (!out) throw_data("write failed for " + path.string());
}

void checkpoint_save(const Model& model, const std::filesystem::path& path) {
  write_text_file(path, model_to_json(model).dump(1) + "\n");
}

Model checkpoint_load(const std::filesystem::path& path) {
  return model_from_json(read_json_file(path));
}

}  // namespace d2rnn

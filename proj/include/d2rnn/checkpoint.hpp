#ifndef D2RNN_CHECKPOINT_HPP
#define D2RNN_CHECKPOINT_HPP

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "d2rnn/cells.hpp"

namespace d2rnn {

inline constexpr int kCheckpointVersion = 1;

// Checkpoint document (JSON):
//   {"format": "d2rnn-model", "version": 1, "seed": <uint>,
//    "config": {"input_units", "output_classes", "tie_gate_hidden_weights",
//               "layers": [{"kind": "dos:1", "state_units": 8}, ...]},
//    "params": {"layer0.W_ix": {"rows", "cols", "data": [row-major]}, ...}}
// Floats are written in shortest round-trip form, so a reload is bitwise exact.

nlohmann::json config_to_json(const StackConfig& config);
StackConfig config_from_json(const nlohmann::json& j);

nlohmann::json model_to_json(const Model& model);
Model model_from_json(const nlohmann::json& j);

void checkpoint_save(const Model& model, const std::filesystem::path& path);
Model checkpoint_load(const std::filesystem::path& path);

/// Reads and parses a whole JSON file; failures become data errors.
nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace d2rnn

#endif  // D2RNN_CHECKPOINT_HPP

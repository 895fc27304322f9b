#ifndef D2RNN_TESTS_HELPERS_HPP
#define D2RNN_TESTS_HELPERS_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "d2rnn/cells.hpp"
#include "d2rnn/sequence.hpp"

namespace testing_support {

inline d2rnn::Sequence random_sequence(Eigen::Index dim, std::size_t length, int classes,
                                       std::uint64_t seed) {
  d2rnn::Rng rng(seed);
  d2rnn::Sequence seq;
  seq.id = "seq" + std::to_string(seed);
  for (std::size_t t = 0; t < length; ++t) {
    d2rnn::Vector x(dim);
    for (Eigen::Index i = 0; i < dim; ++i) x(i) = rng.normal();
    seq.frames.push_back(x);
    seq.frame_labels.push_back(static_cast<int>(rng.index(static_cast<std::size_t>(classes))));
  }
  seq.label = static_cast<int>(rng.index(static_cast<std::size_t>(classes)));
  return seq;
}

/// Every parameter redrawn from U(-scale, scale), biases included.
inline d2rnn::Model random_model(const d2rnn::StackConfig& config, std::uint64_t seed,
                                 double scale = 0.5) {
  d2rnn::Model m = d2rnn::Model::create(config, seed);
  d2rnn::Rng rng(seed * 7919 + 3);
  m.params.for_each([&](const std::string&, auto& t) {
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = rng.uniform(-scale, scale);
  });
  return m;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("d2rnn_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing_support

#endif  // D2RNN_TESTS_HELPERS_HPP

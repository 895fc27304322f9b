#ifndef D2RNN_SEQUENCE_HPP
#define D2RNN_SEQUENCE_HPP

#include <optional>
#include <string>
#include <vector>

#include "d2rnn/numerics.hpp"

namespace d2rnn {

/// One labeled sequence of per-frame feature vectors.
struct Sequence {
  std::string id;
  std::vector<Vector> frames;
  int label = 0;
  std::vector<int> frame_labels;  // empty, or one per frame
  std::optional<std::string> group;

  std::size_t length() const { return frames.size(); }
  Eigen::Index dim() const { return frames.empty() ? 0 : frames.front().size(); }
  int frame_label(std::size_t t) const {
    return frame_labels.empty() ? label : frame_labels[t];
  }
};

struct Dataset {
  std::vector<Sequence> sequences;
  std::vector<std::string> class_names;
  Eigen::Index feature_dim = 0;

  std::size_t size() const { return sequences.size(); }
  int num_classes() const { return static_cast<int>(class_names.size()); }

  /// Throws on any broken invariant (ragged frames, label out of range, ...).
  void validate() const;

  Dataset subset(const std::vector<std::size_t>& indices) const;
};

}  // namespace d2rnn

#endif  // D2RNN_SEQUENCE_HPP

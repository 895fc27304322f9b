#include "d2rnn/sequence.hpp"

namespace d2rnn {

void Dataset::validate() const {
  if (sequences.empty()) throw_data("dataset: no sequences");
  if (class_names.empty()) throw_data("dataset: no classes");
  for (const auto& seq : sequences) {
    if (seq.frames.empty()) throw_data("dataset: sequence '" + seq.id + "' has no frames");
    for (const auto& f : seq.frames) {
      if (f.size() != feature_dim)
        throw_data("dataset: sequence '" + seq.id + "' has a frame of dim " +
                   std::to_string(f.size()) + ", expected " + std::to_string(feature_dim));
      if (!f.allFinite()) throw_data("dataset: sequence '" + seq.id + "' has non-finite values");
    }
    if (seq.label < 0 || seq.label >= num_classes())
      throw_data("dataset: sequence '" + seq.id + "' label " + std::to_string(seq.label) +
                 " out of range");
    if (!seq.frame_labels.empty()) {
      if (seq.frame_labels.size() != seq.frames.size())
        throw_data("dataset: sequence '" + seq.id + "' frame_labels length mismatch");
      for (int l : seq.frame_labels)
        if (l < 0 || l >= num_classes())
          throw_data("dataset: sequence '" + seq.id + "' frame label out of range");
    }
  }
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.class_names = class_names;
  out.feature_dim = feature_dim;
  out.sequences.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= sequences.size()) throw_data("dataset: subset index out of range");
    out.sequences.push_back(sequences[i]);
  }
  return out;
}

}  // namespace d2rnn

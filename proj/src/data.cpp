#include "d2rnn/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace d2rnn {

using nlohmann::json;

std::string to_string(SynthTask task) {
  switch (task) {
    case SynthTask::Velocity:
      return "velocity";
    case SynthTask::Acceleration:
      return "acceleration";
    case SynthTask::Mixed:
      return "mixed";
  }
  return "?";
}

SynthTask parse_synth_task(const std::string& text) {
  if (text == "velocity") return SynthTask::Velocity;
  if (text == "acceleration") return SynthTask::Acceleration;
  if (text == "mixed") return SynthTask::Mixed;
  throw_usage("unknown synthetic task '" + text + "' (velocity, acceleration, mixed)");
}

void SynthSpec::validate() const {
  if (classes < 2) throw_usage("synth: need at least 2 classes");
  if (count < 1) throw_usage("synth: count must be positive");
  if (length < 2) throw_usage("synth: length must be at least 2");
  if (dim < 1) throw_usage("synth: dim must be positive");
  if (latent_dim < 1) throw_usage("synth: latent_dim must be positive");
  if (!(noise_sigma >= 0.0)) throw_usage("synth: noise_sigma must be non-negative");
}

Dataset gen_synthetic(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const Eigen::Index q = spec.latent_dim;

  Matrix projection(spec.dim, q);
  for (Eigen::Index i = 0; i < projection.rows(); ++i)
    for (Eigen::Index j = 0; j < q; ++j)
      projection(i, j) = rng.normal(0.0, 1.0 / std::sqrt(static_cast<double>(q)));

  Vector u(q), w(q);
  for (Eigen::Index j = 0; j < q; ++j) u(j) = rng.normal();
  u.normalize();
  if (q == 1) {
    w = u;
  } else {
    for (Eigen::Index j = 0; j < q; ++j) w(j) = rng.normal();
    w -= w.dot(u) * u;
    w.normalize();
  }

  const int k = spec.classes;
  auto signed_level = [k](int c) { return 2.0 * c / (k - 1) - 1.0; };

  Dataset data;
  data.feature_dim = spec.dim;
  for (int c = 0; c < k; ++c) data.class_names.push_back(to_string(spec.task) + "_" + std::to_string(c));

  for (int n = 0; n < spec.count; ++n) {
    const int c = n % k;
    Vector z0(q);
    for (Eigen::Index j = 0; j < q; ++j) z0(j) = rng.uniform(-1.0, 1.0);

    Vector v = Vector::Zero(q), a = Vector::Zero(q);
    switch (spec.task) {
      case SynthTask::Velocity:
        v = spec.rate * (c + 1) / k * u;
        break;
      case SynthTask::Acceleration: {
        Vector xi(q);
        for (Eigen::Index j = 0; j < q; ++j) xi(j) = rng.uniform(-1.0, 1.0);
        v = spec.rate * u + spec.jitter * xi;
        a = spec.curvature * signed_level(c) * w;
        break;
      }
      case SynthTask::Mixed: {
        const double speed = spec.rate * ((c % 2) + 1) / 2.0;
        const double bend = ((c / 2) % 2 == 0 ? -1.0 : 1.0) * (1.0 + c / 4);
        v = speed * u;
        a = spec.curvature * bend * w;
        break;
      }
    }

    Sequence seq;
    seq.id = "seq" + std::to_string(n);
    seq.label = c;
    for (int t = 0; t < spec.length; ++t) {
      const double tau = static_cast<double>(t) / (spec.length - 1);
      const Vector z = z0 + tau * v + 0.5 * tau * tau * a;
      Vector x = projection * z;
      if (spec.noise_sigma > 0.0)
        for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += rng.normal(0.0, spec.noise_sigma);
      seq.frames.push_back(std::move(x));
    }
    data.sequences.push_back(std::move(seq));
  }
  return data;
}

// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void line_error(std::size_t line, const std::string& what) {
  throw_data("line " + std::to_string(line) + ": " + what);
}

Sequence parse_sequence(const json& j, std::size_t line, int classes, Eigen::Index& dim) {
  if (!j.is_object()) line_error(line, "expected a JSON object");
  Sequence seq;
  try {
    seq.id = j.at("id").get<std::string>();
    seq.label = j.at("label").get<int>();
    const json& frames = j.at("frames");
    if (!frames.is_array() || frames.empty()) line_error(line, "'frames' must be a non-empty array");
    for (const json& f : frames) {
      if (!f.is_array()) line_error(line, "each frame must be an array of numbers");
      Vector v(static_cast<Eigen::Index>(f.size()));
      for (std::size_t i = 0; i < f.size(); ++i) {
        if (!f[i].is_number()) line_error(line, "non-numeric feature value");
        v(static_cast<Eigen::Index>(i)) = f[i].get<double>();
      }
      if (dim < 0) dim = v.size();
      if (v.size() != dim || dim == 0)
        line_error(line, "frame has dim " + std::to_string(v.size()) + ", expected " +
                             std::to_string(dim));
      seq.frames.push_back(std::move(v));
    }
    if (j.contains("frame_labels")) seq.frame_labels = j.at("frame_labels").get<std::vector<int>>();
    if (j.contains("group")) seq.group = j.at("group").get<std::string>();
    for (const auto& key : j.items()) {
      const auto& k = key.key();
      if (k != "id" && k != "label" && k != "frames" && k != "frame_labels" && k != "group")
        line_error(line, "unknown field '" + k + "'");
    }
  } catch (const json::exception& e) {
    line_error(line, e.what());
  }
  if (seq.label < 0 || seq.label >= classes)
    line_error(line, "label " + std::to_string(seq.label) + " outside [0, " +
                         std::to_string(classes) + ")");
  if (!seq.frame_labels.empty()) {
    if (seq.frame_labels.size() != seq.frames.size())
      line_error(line, "frame_labels length does not match frame count");
    for (int l : seq.frame_labels)
      if (l < 0 || l >= classes) line_error(line, "frame label out of range");
  }
  return seq;
}

}  // namespace

Dataset parse_jsonl(const std::string& text) {
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  Dataset data;
  bool have_header = false;
  Eigen::Index dim = -1;
  while (std::getline(in, raw)) {
    ++line;
    if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(raw);
    } catch (const json::parse_error& e) {
      line_error(line, std::string("invalid JSON: ") + e.what());
    }
    if (!have_header) {
      if (!j.is_object() || !j.contains("classes"))
        line_error(line, "first line must be a {\"classes\": [...]} header");
      try {
        data.class_names = j.at("classes").get<std::vector<std::string>>();
      } catch (const json::exception& e) {
        line_error(line, e.what());
      }
      if (data.class_names.empty()) line_error(line, "header lists no classes");
      have_header = true;
      continue;
    }
    data.sequences.push_back(parse_sequence(j, line, data.num_classes(), dim));
  }
  if (data.sequences.empty()) throw_data("no sequences");
  data.feature_dim = dim;
  return data;
}

Dataset load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_jsonl(buf.str());
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::string format_jsonl(const Dataset& data) {
  std::string out = json{{"classes", data.class_names}}.dump() + "\n";
  for (const auto& seq : data.sequences) {
    json frames = json::array();
    for (const auto& f : seq.frames) frames.push_back(std::vector<double>(f.data(), f.data() + f.size()));
    json j{{"id", seq.id}, {"label", seq.label}, {"frames", std::move(frames)}};
    if (!seq.frame_labels.empty()) j["frame_labels"] = seq.frame_labels;
    if (seq.group) j["group"] = *seq.group;
    out += j.dump() + "\n";
  }
  return out;
}

void save_jsonl(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw_data("cannot write " + path.string());
  out << format_jsonl(data);
  if (!out) throw_data("write failed for " + path.string());
}

// ---------------------------------------------------------------------------

namespace {

std::vector<Split> kfold_splits(const Dataset& data, const KFold& plan) {
  if (plan.k < 2) throw_usage("kfold: k must be at least 2");
  Rng rng(plan.seed);

  // Units are single sequences, or whole groups when grouped.
  std::vector<std::vector<std::size_t>> units;
  if (plan.grouped) {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto& g = data.sequences[i].group;
      if (!g) throw_data("kfold: grouped folds need a group on every sequence ('" +
                         data.sequences[i].id + "' has none)");
      auto [it, inserted] = index.emplace(*g, units.size());
      if (inserted) units.emplace_back();
      units[it->second].push_back(i);
    }
  } else {
    for (std::size_t i = 0; i < data.size(); ++i) units.push_back({i});
  }
  const auto k = static_cast<std::size_t>(plan.k);
  if (k > units.size())
    throw_data("kfold: k = " + std::to_string(k) + " exceeds the " + std::to_string(units.size()) +
               (plan.grouped ? " groups" : " sequences") + " available");

  std::vector<std::size_t> order(units.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);

  std::vector<Split> splits(k);
  std::vector<int> fold_of(data.size(), -1);
  const std::size_t base = units.size() / k, extra = units.size() % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t n = base + (f < extra ? 1 : 0);
    for (std::size_t j = 0; j < n; ++j, ++pos)
      for (std::size_t i : units[order[pos]]) fold_of[i] = static_cast<int>(f);
  }
  for (std::size_t f = 0; f < k; ++f)
    for (std::size_t i = 0; i < data.size(); ++i)
      (fold_of[i] == static_cast<int>(f) ? splits[f].test : splits[f].train).push_back(i);
  return splits;
}

std::vector<Split> monte_carlo_splits(const Dataset& data, const MonteCarlo& plan) {
  if (!(plan.train_fraction > 0.0 && plan.train_fraction < 1.0))
    throw_usage("monte carlo: train fraction must lie in (0, 1)");
  if (plan.trials < 1) throw_usage("monte carlo: trials must be positive");
  Rng rng(plan.seed);
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(data.num_classes()));
  for (std::size_t i = 0; i < data.size(); ++i)
    by_class[static_cast<std::size_t>(data.sequences[i].label)].push_back(i);

  std::vector<Split> splits;
  for (int trial = 0; trial < plan.trials; ++trial) {
    Split s;
    for (auto members : by_class) {
      rng.shuffle(members);
      const auto n_train = static_cast<std::size_t>(
          std::floor(plan.train_fraction * static_cast<double>(members.size()) + 1e-9));
      s.train.insert(s.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
      s.test.insert(s.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
    }
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    splits.push_back(std::move(s));
  }
  return splits;
}

}  // namespace

std::vector<Split> make_splits(const Dataset& data, const SplitPlan& plan) {
  if (data.sequences.empty()) throw_data("make_splits: empty dataset");
  if (const auto* kf = std::get_if<KFold>(&plan)) return kfold_splits(data, *kf);
  if (const auto* mc = std::get_if<MonteCarlo>(&plan)) return monte_carlo_splits(data, *mc);
  Split all;
  all.train.resize(data.size());
  std::iota(all.train.begin(), all.train.end(), std::size_t{0});
  all.test = all.train;
  return {all};
}

SplitPlan parse_split_plan(const std::string& text, std::uint64_t seed) {
  auto fields = [&] {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ':')) out.push_back(item);
    return out;
  }();
  auto to_int = [&](const std::string& s) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) throw_usage("bad split plan '" + text + "'");
    return v;
  };
  if (fields.size() == 1 && fields[0] == "none") return NoSplit{};
  if (!fields.empty() && (fields[0] == "kfold" || fields[0] == "gkfold") && fields.size() == 2)
    return KFold{to_int(fields[1]), seed, fields[0] == "gkfold"};
  if (!fields.empty() && fields[0] == "mc" && fields.size() == 3) {
    double frac = 0.0;
    try {
      std::size_t used = 0;
      frac = std::stod(fields[1], &used);
      if (used != fields[1].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw_usage("bad split plan '" + text + "'");
    }
    return MonteCarlo{frac, to_int(fields[2]), seed};
  }
  throw_usage("bad split plan '" + text + "' (expected kfold:<k>, gkfold:<k>, mc:<frac>:<trials> or none)");
}

// ---------------------------------------------------------------------------

PcaTransform fit_preprocess(const Dataset& train, double energy) {
  std::vector<Vector> frames;
  for (const auto& seq : train.sequences)
    for (const auto& f : seq.frames) frames.push_back(f);
  return pca_fit(frames, energy);
}

Dataset apply_preprocess(const PcaTransform& t, const Dataset& data) {
  Dataset out = data;
  out.feature_dim = t.components();
  for (auto& seq : out.sequences)
    for (auto& f : seq.frames) f = pca_apply(t, f);
  return out;
}

}  // namespace d2rnn

#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <map>
#include <ostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "d2rnn/backprop.hpp"
#include "d2rnn/checkpoint.hpp"
#include "d2rnn/data.hpp"
#include "d2rnn/ensemble.hpp"
#include "d2rnn/error.hpp"
#include "d2rnn/train.hpp"

namespace d2rnn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int parse_count(const std::string& text, const std::string& arch) {
  std::size_t used = 0;
  int n = 0;
  try {
    n = std::stoi(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size() || text.empty())
    throw_usage("arch '" + arch + "': expected an integer after ':'");
  return n;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw_data("cannot create output directory " + dir.string());
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void print(std::ostream& os) const {
    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
    for (const auto& r : rows)
      for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
    auto line = [&](const std::vector<std::string>& r) {
      for (std::size_t c = 0; c < r.size(); ++c)
        os << (c ? "  " : "") << std::left << std::setw(static_cast<int>(width[c])) << r[c];
      os << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
  }
};

// CSV text with a header row; fields never contain commas.
class Csv {
 public:
  explicit Csv(std::vector<std::string> header) { row(header); }
  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) text_ += (i ? "," : "") + fields[i];
    text_ += '\n';
  }
  void save(const fs::path& path) const { write_text_file(path, text_); }
  const std::string& text() const { return text_; }

 private:
  std::string text_;
};

void add_confusion(Csv& csv, const std::string& fold, const Confusion& c) {
  for (Eigen::Index t = 0; t < c.rows(); ++t)
    for (Eigen::Index p = 0; p < c.cols(); ++p)
      csv.row({fold, std::to_string(t), std::to_string(p), std::to_string(c(t, p))});
}

json pca_to_json(const PcaTransform& t) {
  json mean = json::array(), basis = json::array();
  for (Eigen::Index i = 0; i < t.mean.size(); ++i) mean.push_back(t.mean(i));
  for (Eigen::Index i = 0; i < t.basis.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < t.basis.cols(); ++k) row.push_back(t.basis(i, k));
    basis.push_back(std::move(row));
  }
  return json{{"format", "d2rnn-pca"},
              {"energy_retained", t.energy_retained},
              {"mean", std::move(mean)},
              {"basis", std::move(basis)}};
}

PcaTransform pca_from_json(const json& j) {
  try {
    if (j.value("format", std::string()) != "d2rnn-pca") throw_data("not a d2rnn PCA document");
    PcaTransform t;
    t.energy_retained = j.at("energy_retained").get<double>();
    const auto& mean = j.at("mean");
    const auto& basis = j.at("basis");
    t.mean.resize(static_cast<Eigen::Index>(mean.size()));
    for (std::size_t i = 0; i < mean.size(); ++i) t.mean(static_cast<Eigen::Index>(i)) = mean[i];
    const auto cols = basis.empty() ? 0 : basis[0].size();
    if (basis.empty() || cols != mean.size()) throw_data("PCA basis columns differ from mean length");
    t.basis.resize(static_cast<Eigen::Index>(basis.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < basis.size(); ++i) {
      if (basis[i].size() != cols) throw_data("PCA basis is ragged");
      for (std::size_t k = 0; k < cols; ++k)
        t.basis(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = basis[i][k];
    }
    return t;
  } catch (const json::exception& e) {
    throw_data(std::string("malformed PCA document: ") + e.what());
  }
}

Dataset maybe_project(const Dataset& data, const std::string& pca_path) {
  if (pca_path.empty()) return data;
  return apply_preprocess(pca_from_json(read_json_file(pca_path)), data);
}

LossMode parse_mode(const std::string& s) {
  if (s == "sequence") return LossMode::Sequence;
  if (s == "frame") return LossMode::Frame;
  throw_usage("unknown loss mode '" + s + "' (expected sequence or frame)");
}

Truncation parse_truncation(const std::string& s) {
  if (s == "truncated") return Truncation::Truncated;
  if (s == "full") return Truncation::Full;
  throw_usage("unknown truncation '" + s + "' (expected truncated or full)");
}

// Options shared by train and ensemble.
struct TrainFlags {
  std::string mode = "sequence";
  std::string truncation = "truncated";
  double lr = 1e-4;
  int epochs = 50;
  double clip = 0.0;
  double momentum = 0.0;
  bool no_shuffle = false;

  void bind(CLI::App* cmd) {
    cmd->add_option("--lr", lr, "learning rate")->capture_default_str();
    cmd->add_option("--epochs", epochs, "epoch budget")->capture_default_str();
    cmd->add_option("--mode", mode, "loss mode: sequence | frame")->capture_default_str();
    cmd->add_option("--truncation", truncation, "truncated | full")->capture_default_str();
    cmd->add_option("--clip", clip, "max gradient norm, 0 disables")->capture_default_str();
    cmd->add_option("--momentum", momentum, "momentum, 0 is plain SGD")->capture_default_str();
    cmd->add_flag("--no-shuffle", no_shuffle, "visit sequences in file order");
  }

  TrainConfig to_config(std::uint64_t seed) const {
    TrainConfig c;
    c.learning_rate = lr;
    c.epochs = epochs;
    c.mode = parse_mode(mode);
    c.truncation = parse_truncation(truncation);
    c.seed = seed;
    if (clip > 0.0) c.clip_norm = clip;
    c.shuffle = !no_shuffle;
    c.momentum = momentum;
    c.validate();
    return c;
  }
};

struct Options {
  // synth
  std::string task = "velocity";
  SynthSpec synth;
  int order_intent = 0;
  // shared
  std::uint64_t seed = 1;
  std::string out;
  std::string data;
  std::string arch = "lstm";
  int units = 8;
  std::string split = "kfold:5";
  double pca = 0.0;
  bool tie_gates = false;
  TrainFlags train;
  // eval / dos-energy
  std::string model;
  std::string pca_file;
  int layer = 0;
  std::string sequence;
  int max_order = -1;
  // gradcheck
  int input = 3;
  int classes = 3;
  int frames = 5;
  std::string corrupt;
  // ensemble
  std::string variant = "samme";
  int members_max_order = 2;
};

// Only the command that ran, as a TOML section that --config reads back.
void echo_config(const CLI::App& app, const fs::path& path) {
  for (const CLI::App* cmd : app.get_subcommands()) {
    write_text_file(path, "[" + cmd->get_name() + "]\n" + cmd->config_to_str(true, false));
    return;
  }
}

int cmd_synth(const CLI::App& app, Options& o, std::ostream& out, std::ostream& err) {
  SynthSpec spec = o.synth;
  spec.task = parse_synth_task(o.task);
  spec.seed = o.seed;
  if (spec.length < o.order_intent + 2)
    err << "warning: length " << spec.length << " is shorter than the order-" << o.order_intent
        << " DoS window; early frames only see zero-padded history\n";
  Dataset data = gen_synthetic(spec);
  const fs::path path(o.out);
  if (path.has_parent_path()) ensure_dir(path.parent_path());
  save_jsonl(data, path);
  echo_config(app, fs::path(o.out + ".config.toml"));

  std::vector<int> counts(static_cast<std::size_t>(data.num_classes()), 0);
  for (const auto& s : data.sequences) ++counts[static_cast<std::size_t>(s.label)];
  out << "wrote " << data.size() << " sequences to " << o.out << "\n";
  Table t{{"class", "name", "count"}, {}};
  for (std::size_t c = 0; c < counts.size(); ++c)
    t.rows.push_back({std::to_string(c), data.class_names[c], std::to_string(counts[c])});
  t.print(out);
  return 0;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Train/test datasets for one split, with PCA fitted on the training part only.
struct FoldData {
  Dataset train, test;
  std::optional<PcaTransform> pca;
};

FoldData fold_data(const Dataset& data, const Split& split, double pca_energy) {
  FoldData f{data.subset(split.train), data.subset(split.test), std::nullopt};
  if (pca_energy > 0.0) {
    f.pca = fit_preprocess(f.train, pca_energy);
    f.train = apply_preprocess(*f.pca, f.train);
    f.test = apply_preprocess(*f.pca, f.test);
  }
  return f;
}

int cmd_train(const CLI::App& app, Options& o, std::ostream& out) {
  const TrainConfig tc = o.train.to_config(o.seed);
  const Dataset data = load_jsonl(o.data);
  // Validate the architecture before any work.
  parse_arch(o.arch, static_cast<int>(data.feature_dim), o.units, data.num_classes());
  const auto splits = make_splits(data, parse_split_plan(o.split, o.seed));
  const fs::path dir(o.out);
  ensure_dir(dir);
  echo_config(app, dir / kConfigEcho);

  Csv metrics({"fold", "train_size", "test_size", "final_train_loss", "accuracy"});
  Csv losses({"fold", "epoch", "mean_loss", "train_accuracy"});
  Csv confusion({"fold", "true", "predicted", "count"});
  Table table{{"fold", "train", "test", "final loss", "accuracy"}, {}};
  std::vector<double> accuracies;

  for (std::size_t f = 0; f < splits.size(); ++f) {
    const std::string fold = std::to_string(f);
    FoldData fd = fold_data(data, splits[f], o.pca);
    StackConfig sc = parse_arch(o.arch, static_cast<int>(fd.train.feature_dim), o.units,
                                data.num_classes());
    sc.tie_gate_hidden_weights = o.tie_gates;
    Model model = Model::create(sc, o.seed);
    const Metrics fit = train(model, fd.train, tc, [&](int epoch, const Metrics& m) {
      losses.row({fold, std::to_string(epoch + 1), num(m.epoch_loss.back()), num(m.accuracy)});
    });
    const Metrics test = evaluate(model, fd.test);
    const double final_loss = fit.epoch_loss.empty() ? 0.0 : fit.epoch_loss.back();
    metrics.row({fold, std::to_string(fd.train.size()), std::to_string(fd.test.size()),
                 num(final_loss), num(test.accuracy)});
    add_confusion(confusion, fold, test.confusion);
    table.rows.push_back({fold, std::to_string(fd.train.size()), std::to_string(fd.test.size()),
                          num(final_loss), num(test.accuracy)});
    accuracies.push_back(test.accuracy);
    checkpoint_save(model, dir / ("model_fold" + fold + ".json"));
    if (fd.pca) write_text_file(dir / ("pca_fold" + fold + ".json"), pca_to_json(*fd.pca).dump(1) + "\n");
  }

  metrics.save(dir / "metrics.csv");
  losses.save(dir / "loss.csv");
  confusion.save(dir / "confusion.csv");
  Csv summary({"arch", "folds", "mean_accuracy", "std_accuracy"});
  summary.row({o.arch, std::to_string(splits.size()), num(mean_of(accuracies)),
               num(std_of(accuracies))});
  summary.save(dir / "summary.csv");

  table.print(out);
  out << "arch " << o.arch << ": mean accuracy " << num(mean_of(accuracies)) << " over "
      << splits.size() << " fold(s)\n";
  return 0;
}

int cmd_eval(const CLI::App& app, Options& o, std::ostream& out) {
  const Model model = checkpoint_load(o.model);
  const Dataset data = maybe_project(load_jsonl(o.data), o.pca_file);
  if (static_cast<int>(data.feature_dim) != model.config.input_units)
    throw_data("data has " + std::to_string(data.feature_dim) + " features, model expects " +
               std::to_string(model.config.input_units));
  if (data.num_classes() != model.config.output_classes)
    throw_data("data has " + std::to_string(data.num_classes()) + " classes, model predicts " +
               std::to_string(model.config.output_classes));
  const Metrics m = evaluate(model, data);

  if (!o.out.empty()) {
    const fs::path dir(o.out);
    ensure_dir(dir);
    echo_config(app, dir / kConfigEcho);
    Csv metrics({"sequences", "accuracy"});
    metrics.row({std::to_string(data.size()), num(m.accuracy)});
    metrics.save(dir / "metrics.csv");
    Csv confusion({"fold", "true", "predicted", "count"});
    add_confusion(confusion, "0", m.confusion);
    confusion.save(dir / "confusion.csv");
  }

  Table t{{"true \\ predicted"}, {}};
  for (Eigen::Index p = 0; p < m.confusion.cols(); ++p) t.header.push_back(data.class_names[p]);
  for (Eigen::Index r = 0; r < m.confusion.rows(); ++r) {
    std::vector<std::string> row{data.class_names[r]};
    for (Eigen::Index p = 0; p < m.confusion.cols(); ++p) row.push_back(std::to_string(m.confusion(r, p)));
    t.rows.push_back(std::move(row));
  }
  t.print(out);
  out << "accuracy " << num(m.accuracy) << " on " << data.size() << " sequences\n";
  return 0;
}

// "layer0.W_ix:1:2" -> doubles that gradient entry.
void corrupt_entry(Gradients& g, const std::string& spec) {
  const auto a = spec.rfind(':');
  const auto b = a == std::string::npos ? a : spec.rfind(':', a - 1);
  if (b == std::string::npos) throw_usage("--corrupt expects name:row:col");
  const std::string name = spec.substr(0, b);
  const Eigen::Index row = parse_count(spec.substr(b + 1, a - b - 1), spec);
  const Eigen::Index col = parse_count(spec.substr(a + 1), spec);
  bool found = false;
  g.for_each([&](const std::string& n, auto& m) {
    if (n != name) return;
    if (row < 0 || col < 0 || row >= m.rows() || col >= m.cols())
      throw_usage("--corrupt: index outside " + name + " (" + shape_string(m) + ")");
    m(row, col) *= 2.0;
    found = true;
  });
  if (!found) throw_usage("--corrupt: no parameter named " + name);
}

int cmd_gradcheck(const CLI::App& app, Options& o, std::ostream& out) {
  const StackConfig sc = parse_arch(o.arch, o.input, o.units, o.classes);
  if (o.frames < 1) throw_usage("--frames must be at least 1");
  const Model model = Model::create(sc, o.seed);
  Rng rng(o.seed + 1);
  Sequence seq;
  seq.id = "gradcheck";
  seq.label = static_cast<int>(rng.index(static_cast<std::size_t>(o.classes)));
  for (int t = 0; t < o.frames; ++t) {
    Vector x(o.input);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
    seq.frames.push_back(std::move(x));
  }

  GradCheckOptions opts;
  opts.loss = parse_mode(o.train.mode);
  const Tape tape = stack_forward(model.params, seq.frames);
  Gradients analytic =
      backward_full(model, tape, sequence_loss(tape, seq, opts.loss).logit_grads);
  if (!o.corrupt.empty()) corrupt_entry(analytic, o.corrupt);
  const GradCheckReport report = grad_check_against(model, seq, analytic, opts);

  const std::string text = report.to_text(opts.tolerance);
  if (!o.out.empty()) {
    const fs::path path(o.out);
    if (path.has_parent_path()) ensure_dir(path.parent_path());
    write_text_file(path, text);
    echo_config(app, fs::path(o.out + ".config.toml"));
  }
  out << text;
  return report.passed ? 0 : static_cast<int>(ErrorKind::Numerical);
}

int cmd_dos_energy(const CLI::App& app, Options& o, std::ostream& out) {
  const Model model = checkpoint_load(o.model);
  const Dataset data = maybe_project(load_jsonl(o.data), o.pca_file);
  if (static_cast<int>(data.feature_dim) != model.config.input_units)
    throw_data("data has " + std::to_string(data.feature_dim) + " features, model expects " +
               std::to_string(model.config.input_units));
  if (o.layer < 0 || o.layer >= static_cast<int>(model.config.layers.size()))
    throw_usage("--layer " + std::to_string(o.layer) + " outside the model's " +
                std::to_string(model.config.layers.size()) + " layer(s)");

  const Sequence* seq = &data.sequences.front();
  if (!o.sequence.empty()) {
    auto it = std::find_if(data.sequences.begin(), data.sequences.end(),
                           [&](const Sequence& s) { return s.id == o.sequence; });
    if (it == data.sequences.end()) throw_data("no sequence with id '" + o.sequence + "'");
    seq = &*it;
  }
  const Matrix energy = dos_energy(model, *seq, static_cast<std::size_t>(o.layer), o.max_order);

  std::vector<std::string> header{"frame"};
  for (Eigen::Index k = 0; k < energy.cols(); ++k) header.push_back("order" + std::to_string(k));
  Csv csv(header);
  for (Eigen::Index t = 0; t < energy.rows(); ++t) {
    std::vector<std::string> row{std::to_string(t)};
    for (Eigen::Index k = 0; k < energy.cols(); ++k) row.push_back(num(energy(t, k)));
    csv.row(row);
  }
  if (o.out.empty()) {
    out << csv.text();
  } else {
    const fs::path path(o.out);
    if (path.has_parent_path()) ensure_dir(path.parent_path());
    csv.save(path);
    echo_config(app, fs::path(o.out + ".config.toml"));
    out << "wrote " << energy.rows() << " frames x " << energy.cols() << " orders for sequence "
        << seq->id << " to " << o.out << "\n";
  }
  return 0;
}

int cmd_ensemble(const CLI::App& app, Options& o, std::ostream& out) {
  EnsembleConfig ec;
  ec.max_order = o.members_max_order;
  ec.state_units = o.units;
  ec.train = o.train.to_config(o.seed);
  if (o.variant == "samme") ec.variant = BoostVariant::Samme;
  else if (o.variant == "m1") ec.variant = BoostVariant::M1;
  else throw_usage("unknown boosting variant '" + o.variant + "' (expected samme or m1)");

  const Dataset data = load_jsonl(o.data);
  if (ec.variant == BoostVariant::M1 && data.num_classes() != 2)
    throw_usage("variant m1 needs exactly 2 classes");
  const auto splits = make_splits(data, parse_split_plan(o.split, o.seed));
  const fs::path dir(o.out);
  ensure_dir(dir);
  echo_config(app, dir / kConfigEcho);

  const std::size_t members = static_cast<std::size_t>(ec.max_order) + 1;
  std::vector<std::vector<double>> acc(members + 1);
  Csv folds({"fold", "model", "weight", "accuracy"});
  Csv confusion({"fold", "true", "predicted", "count"});

  for (std::size_t f = 0; f < splits.size(); ++f) {
    const std::string fold = std::to_string(f);
    FoldData fd = fold_data(data, splits[f], o.pca);
    const EnsembleModel e = fit_ernn(fd.train, ec);
    for (std::size_t m = 0; m < members; ++m) {
      const double a = evaluate(e.members[m].model, fd.test).accuracy;
      acc[m].push_back(a);
      folds.row({fold, "dos:" + std::to_string(m), num(e.members[m].weight), num(a)});
    }
    const Metrics em = evaluate_ensemble(e, fd.test);
    acc[members].push_back(em.accuracy);
    folds.row({fold, "ernn", "", num(em.accuracy)});
    add_confusion(confusion, fold, em.confusion);
    ensemble_save(e, dir / ("ensemble_fold" + fold + ".json"));
  }

  Csv summary({"model", "mean_accuracy", "std_accuracy"});
  Table table{{"model", "mean accuracy", "std"}, {}};
  for (std::size_t m = 0; m <= members; ++m) {
    const std::string name = m < members ? "dos:" + std::to_string(m) : "ernn";
    summary.row({name, num(mean_of(acc[m])), num(std_of(acc[m]))});
    table.rows.push_back({name, num(mean_of(acc[m])), num(std_of(acc[m]))});
  }
  summary.save(dir / "metrics.csv");
  folds.save(dir / "folds.csv");
  confusion.save(dir / "confusion.csv");
  table.print(out);

  double best_member = 0.0;
  for (std::size_t m = 0; m < members; ++m) best_member = std::max(best_member, mean_of(acc[m]));
  if (mean_of(acc[members]) < best_member)
    out << "note: ensemble mean accuracy is below its best member's\n";
  return 0;
}

}  // namespace

StackConfig parse_arch(const std::string& arch, int input_units, int state_units, int classes) {
  const auto colon = arch.find(':');
  const std::string head = arch.substr(0, colon);
  const bool has_n = colon != std::string::npos;
  auto n = [&] {
    if (!has_n) throw_usage("arch '" + arch + "' needs a number, e.g. " + head + ":2");
    return parse_count(arch.substr(colon + 1), arch);
  };
  auto no_n = [&] {
    if (has_n) throw_usage("arch '" + arch + "' takes no number");
  };

  StackConfig c;
  if (head == "lstm") {
    no_n();
    c = StackConfig::single(CellKind::lstm(), input_units, state_units, classes);
  } else if (head == "rnn") {
    no_n();
    c = StackConfig::single(CellKind::classical(), input_units, state_units, classes);
  } else if (head == "stacked") {
    const int depth = n();
    if (depth < 1) throw_usage("arch '" + arch + "': depth must be at least 1");
    c = StackConfig::stacked_lstm(depth, input_units, state_units, classes);
  } else if (head == "d2rnn") {
    const int depth = n();
    if (depth < 1) throw_usage("arch '" + arch + "': depth must be at least 1");
    c = StackConfig::d2rnn(depth, input_units, state_units, classes);
  } else if (head == "drnn") {
    const int order = n();
    if (order < 0) throw_usage("arch '" + arch + "': order must be non-negative");
    c = StackConfig::single(CellKind::drnn(order), input_units, state_units, classes);
  } else if (head == "dos") {
    const int order = n();
    if (order < 0) throw_usage("arch '" + arch + "': order must be non-negative");
    c = StackConfig::single(CellKind::dos(order), input_units, state_units, classes);
  } else {
    throw_usage("unknown arch '" + arch + "' (expected lstm, rnn, stacked:L, d2rnn:L, drnn:N or dos:n)");
  }
  c.validate();
  return c;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Differential recurrent networks: data, training and diagnostics", "d2rnn"};
  app.set_config("--config", "", "TOML config file; command-line flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);
  app.fallthrough();

  Options o;

  auto* synth = app.add_subcommand("synth", "generate a synthetic motion dataset (JSONL)");
  synth->add_option("--task", o.task, "velocity | acceleration | mixed")->capture_default_str();
  synth->add_option("--classes", o.synth.classes)->capture_default_str();
  synth->add_option("--count", o.synth.count, "number of sequences")->capture_default_str();
  synth->add_option("--length", o.synth.length, "frames per sequence")->capture_default_str();
  synth->add_option("--dim", o.synth.dim, "feature dimension")->capture_default_str();
  synth->add_option("--noise", o.synth.noise_sigma, "Gaussian noise sigma")->capture_default_str();
  synth->add_option("--rate", o.synth.rate, "velocity scale")->capture_default_str();
  synth->add_option("--curvature", o.synth.curvature, "acceleration scale")->capture_default_str();
  synth->add_option("--jitter", o.synth.jitter, "per-sequence velocity spread")->capture_default_str();
  synth->add_option("--latent-dim", o.synth.latent_dim)->capture_default_str();
  synth->add_option("--order-intent", o.order_intent,
                    "highest DoS order the data is meant for; warns if sequences are too short")
      ->capture_default_str();

  auto* trn = app.add_subcommand("train", "cross-validated training");
  trn->add_option("--data", o.data, "JSONL dataset")->required();
  trn->add_option("--arch", o.arch, "lstm | rnn | stacked:L | d2rnn:L | drnn:N | dos:n")
      ->capture_default_str();
  trn->add_option("--units", o.units, "state units per layer")->capture_default_str();
  trn->add_option("--split", o.split, "kfold:K | gkfold:K | mc:FRACTION:TRIALS | none")
      ->capture_default_str();
  trn->add_option("--pca", o.pca, "PCA energy to keep, fitted per training fold; 0 disables")
      ->capture_default_str();
  trn->add_flag("--tie-gates", o.tie_gates, "forget and output gates share the input gate's hidden weights");
  o.train.bind(trn);

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  ev->add_option("--model", o.model, "model checkpoint")->required();
  ev->add_option("--data", o.data, "JSONL dataset")->required();
  ev->add_option("--pca", o.pca_file, "PCA document from training");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference check on a small random model");
  gc->add_option("--arch", o.arch)->capture_default_str();
  gc->add_option("--input", o.input, "input units")->capture_default_str();
  gc->add_option("--units", o.units, "state units per layer")->capture_default_str();
  gc->add_option("--classes", o.classes)->capture_default_str();
  gc->add_option("--frames", o.frames, "sequence length")->capture_default_str();
  gc->add_option("--mode", o.train.mode, "loss mode: sequence | frame")->capture_default_str();
  gc->add_option("--corrupt", o.corrupt, "double one analytic entry, name:row:col (self-test)");

  auto* de = app.add_subcommand("dos-energy", "per-frame DoS energy of one sequence (CSV)");
  de->add_option("--model", o.model, "model checkpoint")->required();
  de->add_option("--data", o.data, "JSONL dataset")->required();
  de->add_option("--pca", o.pca_file, "PCA document from training");
  de->add_option("--layer", o.layer, "layer index, 0 is closest to the input")->capture_default_str();
  de->add_option("--sequence", o.sequence, "sequence id; defaults to the first");
  de->add_option("--max-order", o.max_order, "highest order to export; -1 uses the layer's own")
      ->capture_default_str();

  auto* en = app.add_subcommand("ensemble", "boosted ensemble of single-order DoS models");
  en->add_option("--data", o.data, "JSONL dataset")->required();
  en->add_option("--max-order", o.members_max_order, "members use orders 0..max-order")
      ->capture_default_str();
  en->add_option("--units", o.units, "state units per member")->capture_default_str();
  en->add_option("--split", o.split)->capture_default_str();
  en->add_option("--pca", o.pca, "PCA energy to keep; 0 disables")->capture_default_str();
  en->add_option("--variant", o.variant, "samme | m1")->capture_default_str();
  o.train.bind(en);

  for (CLI::App* cmd : {synth, trn, ev, gc, de, en}) {
    cmd->add_option("--seed", o.seed, "seed for every random choice")->capture_default_str();
    auto* outopt = cmd->add_option("--out", o.out, "output path");
    if (cmd == synth || cmd == trn || cmd == en) outopt->required();
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::Usage);
  }

  try {
    if (*synth) return cmd_synth(app, o, out, err);
    if (*trn) return cmd_train(app, o, out);
    if (*ev) return cmd_eval(app, o, out);
    if (*gc) return cmd_gradcheck(app, o, out);
    if (*de) return cmd_dos_energy(app, o, out);
    if (*en) return cmd_ensemble(app, o, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::Data);
  }
  return static_cast<int>(ErrorKind::Usage);
}

}  // namespace d2rnn::cli

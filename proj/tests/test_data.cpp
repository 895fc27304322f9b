#include <algorithm>
#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "d2rnn/data.hpp"
#include "d2rnn/error.hpp"
#include "d2rnn/train.hpp"
#include "helpers.hpp"

using namespace d2rnn;
using testing_support::scratch_dir;

namespace {

Dataset indexed_dataset(int per_class, int classes) {
  Dataset d;
  for (int c = 0; c < classes; ++c) d.class_names.push_back("c" + std::to_string(c));
  d.feature_dim = 1;
  for (int n = 0; n < per_class * classes; ++n) {
    Sequence s;
    s.id = std::to_string(n);
    s.label = n % classes;
    s.frames = {Vector::Constant(1, n)};
    d.sequences.push_back(s);
  }
  return d;
}

Vector mean_delta(const Sequence& s) {
  Vector acc = Vector::Zero(s.dim());
  for (std::size_t t = 1; t < s.length(); ++t) acc += s.frames[t] - s.frames[t - 1];
  return acc / static_cast<double>(s.length() - 1);
}

void expect_partition(const std::vector<Split>& splits, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto& sp : splits) {
    std::set<std::size_t> train(sp.train.begin(), sp.train.end());
    EXPECT_EQ(train.size() + sp.test.size(), n);
    for (std::size_t i : sp.test) {
      EXPECT_EQ(train.count(i), 0u);
      ++seen[i];
    }
  }
  for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(seen[i], 1) << "item " << i;
}

}  // namespace

// ---------------------------------------------------------------------------
// Synthetic generation

TEST(Synth, VelocityClassesDifferInStepSize) {
  SynthSpec spec;
  spec.noise_sigma = 0.0;
  spec.count = 40;
  const Dataset d = gen_synthetic(spec);
  EXPECT_EQ(d.size(), 40u);
  EXPECT_EQ(d.num_classes(), 2);
  double norm0 = -1, norm1 = -1;
  for (const auto& s : d.sequences) {
    const double n = mean_delta(s).norm();
    double& ref = s.label == 0 ? norm0 : norm1;
    if (ref < 0) ref = n;
    EXPECT_NEAR(n, ref, 1e-12);
  }
  EXPECT_NEAR(norm1, 2.0 * norm0, 1e-12);
}

TEST(Synth, NoiselessVelocityIsSeparableByNearestNeighbour) {
  SynthSpec spec;
  spec.noise_sigma = 0.0;
  spec.classes = 3;
  spec.count = 60;
  const Dataset d = gen_synthetic(spec);
  int correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    double best = INFINITY;
    int label = -1;
    for (std::size_t j = 0; j < d.size(); ++j) {
      if (i == j) continue;
      const double dist = (mean_delta(d.sequences[i]) - mean_delta(d.sequences[j])).norm();
      if (dist < best) {
        best = dist;
        label = d.sequences[j].label;
      }
    }
    correct += label == d.sequences[i].label;
  }
  EXPECT_EQ(correct, 60);
}

TEST(Synth, SameSeedSameData) {
  for (SynthTask task : {SynthTask::Velocity, SynthTask::Acceleration, SynthTask::Mixed}) {
    SynthSpec spec;
    spec.task = task;
    spec.classes = 4;
    spec.count = 12;
    EXPECT_EQ(format_jsonl(gen_synthetic(spec)), format_jsonl(gen_synthetic(spec)));
    SynthSpec other = spec;
    other.seed = 2;
    EXPECT_NE(format_jsonl(gen_synthetic(spec)), format_jsonl(gen_synthetic(other)));
  }
}

TEST(Synth, ShapeAndBalance) {
  SynthSpec spec;
  spec.task = SynthTask::Acceleration;
  spec.classes = 3;
  spec.count = 31;
  spec.length = 7;
  spec.dim = 5;
  const Dataset d = gen_synthetic(spec);
  EXPECT_NO_THROW(d.validate());
  EXPECT_EQ(d.feature_dim, 5);
  std::vector<int> counts(3, 0);
  for (const auto& s : d.sequences) {
    EXPECT_EQ(s.length(), 7u);
    ++counts[s.label];
  }
  EXPECT_EQ(counts, (std::vector<int>{11, 10, 10}));
}

TEST(Synth, ZeroCurvatureAccelerationIsUninformative) {
  // Control run: without curvature both classes share one distribution, so a
  // trained model can do no better than chance.
  SynthSpec spec;
  spec.task = SynthTask::Acceleration;
  spec.curvature = 0.0;
  spec.count = 100;
  spec.dim = 8;
  spec.seed = 3;
  const Dataset d = gen_synthetic(spec);
  TrainConfig tc;
  tc.learning_rate = 0.01;
  tc.epochs = 10;
  double total = 0.0;
  const auto splits = make_splits(d, KFold{5, 3, false});
  for (const auto& sp : splits) {
    Model m = Model::create(StackConfig::single(CellKind::lstm(), 8, 8, 2), 3);
    train(m, d.subset(sp.train), tc);
    total += evaluate(m, d.subset(sp.test)).accuracy;
  }
  const double mean = total / static_cast<double>(splits.size());
  EXPECT_GT(mean, 0.3);
  EXPECT_LT(mean, 0.7);
}

TEST(Synth, RejectsBadSpecs) {
  SynthSpec s;
  s.classes = 1;
  EXPECT_THROW(gen_synthetic(s), Error);
  s = SynthSpec{};
  s.length = 1;
  EXPECT_THROW(gen_synthetic(s), Error);
  s = SynthSpec{};
  s.noise_sigma = -1;
  EXPECT_THROW(gen_synthetic(s), Error);
  EXPECT_THROW(parse_synth_task("jerk"), Error);
  EXPECT_EQ(parse_synth_task(to_string(SynthTask::Mixed)), SynthTask::Mixed);
}

// ---------------------------------------------------------------------------
// JSONL

TEST(Jsonl, EmptyInputHasNoSequences) {
  for (const std::string text : {"", "{\"classes\":[\"a\",\"b\"]}\n"}) {
    try {
      parse_jsonl(text);
      FAIL() << "expected an error";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Data);
      EXPECT_NE(std::string(e.what()).find("no sequences"), std::string::npos);
    }
  }
}

TEST(Jsonl, RoundTripIsExact) {
  SynthSpec spec;
  spec.task = SynthTask::Mixed;
  spec.classes = 4;
  spec.count = 9;
  Dataset d = gen_synthetic(spec);
  d.sequences[2].group = "g7";
  d.sequences[3].frame_labels.assign(d.sequences[3].length(), 1);
  const auto dir = scratch_dir("jsonl");
  save_jsonl(d, dir / "d.jsonl");
  const Dataset back = load_jsonl(dir / "d.jsonl");
  ASSERT_EQ(back.size(), d.size());
  EXPECT_EQ(back.class_names, d.class_names);
  EXPECT_EQ(back.feature_dim, d.feature_dim);
  for (std::size_t i = 0; i < d.size(); ++i) {
    EXPECT_EQ(back.sequences[i].id, d.sequences[i].id);
    EXPECT_EQ(back.sequences[i].label, d.sequences[i].label);
    EXPECT_EQ(back.sequences[i].frame_labels, d.sequences[i].frame_labels);
    EXPECT_EQ(back.sequences[i].group, d.sequences[i].group);
    for (std::size_t t = 0; t < d.sequences[i].length(); ++t)
      EXPECT_EQ(back.sequences[i].frames[t], d.sequences[i].frames[t]);
  }
  EXPECT_EQ(format_jsonl(back), format_jsonl(d));
}

TEST(Jsonl, MixedDimensionsRejectedAtTheLine) {
  const std::string text =
      "{\"classes\":[\"a\",\"b\"]}\n"
      "{\"id\":\"x\",\"label\":0,\"frames\":[[1,2],[3,4]]}\n"
      "{\"id\":\"y\",\"label\":1,\"frames\":[[1,2],[3,4,5]]}\n";
  try {
    parse_jsonl(text);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(Jsonl, StructuralErrorsNameTheLine) {
  const std::string header = "{\"classes\":[\"a\",\"b\"]}\n";
  const std::vector<std::pair<std::string, std::string>> bad = {
      {"{\"id\":\"x\",\"label\":0,\"frames\":[[1]]}\n", "line 1"},
      {header + "{\"id\":\"x\",\"label\":2,\"frames\":[[1]]}\n", "line 2"},
      {header + "{\"id\":\"x\",\"label\":0,\"frames\":[[1]],\"colour\":1}\n", "unknown field"},
      {header + "{\"id\":\"x\",\"label\":0,\"frames\":[]}\n", "line 2"},
      {header + "{\"id\":\"x\",\"label\":0,\"frames\":[[1]],\"frame_labels\":[0,1]}\n", "line 2"},
      {header + "\n{\"id\":\"x\",\"label\":0,\"frames\":[[\"a\"]]}\n", "line 3"},
      {header + "not json\n", "line 2"},
  };
  for (const auto& [text, needle] : bad) {
    try {
      parse_jsonl(text);
      ADD_FAILURE() << "accepted: " << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::Data);
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  }
  EXPECT_THROW(load_jsonl("/nonexistent/file.jsonl"), Error);
}

// ---------------------------------------------------------------------------
// Splits

TEST(Splits, FiveFoldOnTenItems) {
  const Dataset d = indexed_dataset(5, 2);
  const auto splits = make_splits(d, KFold{5, 1, false});
  ASSERT_EQ(splits.size(), 5u);
  for (const auto& s : splits) EXPECT_EQ(s.test.size(), 2u);
  expect_partition(splits, 10);
}

TEST(Splits, KFoldPartitionsExhaustively) {
  for (int n = 2; n <= 23; ++n)
    for (int k = 2; k <= std::min(n, 7); ++k) {
      const Dataset d = indexed_dataset(n, 1);
      Dataset two = d;
      two.class_names = {"a", "b"};
      const auto splits = make_splits(two, KFold{k, static_cast<std::uint64_t>(n * 31 + k), false});
      ASSERT_EQ(splits.size(), static_cast<std::size_t>(k));
      expect_partition(splits, static_cast<std::size_t>(n));
      for (int f = 0; f < k; ++f)
        EXPECT_EQ(splits[f].test.size(), static_cast<std::size_t>(n / k + (f < n % k ? 1 : 0)));
    }
}

TEST(Splits, SameSeedSameSplits) {
  const Dataset d = indexed_dataset(20, 2);
  for (const SplitPlan plan : {SplitPlan{KFold{5, 4, false}}, SplitPlan{MonteCarlo{0.8, 3, 4}}}) {
    const auto a = make_splits(d, plan), b = make_splits(d, plan);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].train, b[i].train);
      EXPECT_EQ(a[i].test, b[i].test);
    }
  }
  EXPECT_NE(make_splits(d, KFold{5, 4, false})[0].test, make_splits(d, KFold{5, 5, false})[0].test);
}

TEST(Splits, MonteCarloIsStratified) {
  const Dataset d = indexed_dataset(100, 3);
  const auto splits = make_splits(d, MonteCarlo{0.8, 5, 1});
  ASSERT_EQ(splits.size(), 5u);
  for (const auto& s : splits) {
    std::vector<int> tr(3, 0), te(3, 0);
    for (auto i : s.train) ++tr[d.sequences[i].label];
    for (auto i : s.test) ++te[d.sequences[i].label];
    EXPECT_EQ(tr, (std::vector<int>{80, 80, 80}));
    EXPECT_EQ(te, (std::vector<int>{20, 20, 20}));
  }
  EXPECT_NE(splits[0].test, splits[1].test);
}

TEST(Splits, MonteCarloRoundsDown) {
  const Dataset d = indexed_dataset(7, 2);
  for (const auto& s : make_splits(d, MonteCarlo{0.8, 2, 1})) {
    EXPECT_EQ(s.train.size(), 10u);  // floor(5.6) per class
    EXPECT_EQ(s.test.size(), 4u);
  }
}

TEST(Splits, GroupedFoldsKeepGroupsTogether) {
  Dataset d = indexed_dataset(12, 2);
  for (std::size_t i = 0; i < d.size(); ++i) d.sequences[i].group = "g" + std::to_string(i / 4);
  const auto splits = make_splits(d, KFold{3, 2, true});
  expect_partition(splits, d.size());
  for (const auto& s : splits) {
    std::set<std::string> test_groups, train_groups;
    for (auto i : s.test) test_groups.insert(*d.sequences[i].group);
    for (auto i : s.train) train_groups.insert(*d.sequences[i].group);
    for (const auto& g : test_groups) EXPECT_EQ(train_groups.count(g), 0u);
  }
  d.sequences[0].group.reset();
  EXPECT_THROW(make_splits(d, KFold{3, 2, true}), Error);
}

TEST(Splits, NoSplitUsesEverything) {
  const auto s = make_splits(indexed_dataset(3, 2), NoSplit{});
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].train.size(), 6u);
  EXPECT_EQ(s[0].test.size(), 6u);
}

TEST(Splits, PlanParsing) {
  EXPECT_EQ(std::get<KFold>(parse_split_plan("kfold:4", 9)).k, 4);
  EXPECT_TRUE(std::get<KFold>(parse_split_plan("gkfold:3", 9)).grouped);
  const auto mc = std::get<MonteCarlo>(parse_split_plan("mc:0.7:6", 9));
  EXPECT_EQ(mc.train_fraction, 0.7);
  EXPECT_EQ(mc.trials, 6);
  EXPECT_EQ(mc.seed, 9u);
  EXPECT_TRUE(std::holds_alternative<NoSplit>(parse_split_plan("none", 1)));
  for (const char* bad : {"kfold", "kfold:x", "mc:0.8", "loo", "kfold:1", "mc:1.5:2"})
    EXPECT_THROW(make_splits(indexed_dataset(5, 2), parse_split_plan(bad, 1)), Error) << bad;
  EXPECT_THROW(make_splits(indexed_dataset(2, 2), KFold{5, 1, false}), Error);
}

// ---------------------------------------------------------------------------
// PCA preprocessing

TEST(Preprocess, FullEnergyKeepsDimension) {
  SynthSpec spec;
  spec.dim = 6;
  spec.latent_dim = 6;
  spec.count = 20;
  const Dataset d = gen_synthetic(spec);
  EXPECT_EQ(apply_preprocess(fit_preprocess(d, 1.0), d).feature_dim, 6);
}

TEST(Preprocess, RankOneTrainingDataGivesOneFeature) {
  Dataset d = indexed_dataset(5, 2);
  Vector dir(3);
  dir << 1, 2, -1;
  d.feature_dim = 3;
  for (auto& s : d.sequences)
    for (auto& f : s.frames) f = f(0) * dir;
  const PcaTransform t = fit_preprocess(d, 0.95);
  const Dataset out = apply_preprocess(t, d);
  EXPECT_EQ(out.feature_dim, 1);
  EXPECT_EQ(out.sequences[3].frames[0].size(), 1);
}

TEST(Preprocess, TransformIsReusedNotRefit) {
  SynthSpec spec;
  spec.count = 30;
  const Dataset d = gen_synthetic(spec);
  const auto split = make_splits(d, KFold{3, 1, false})[0];
  const Dataset train = d.subset(split.train), test = d.subset(split.test);
  const PcaTransform t = fit_preprocess(train, 0.9);
  const PcaTransform copy = t;
  const Dataset projected = apply_preprocess(t, test);
  EXPECT_EQ(t.mean, copy.mean);
  EXPECT_EQ(t.basis, copy.basis);
  for (std::size_t i = 0; i < test.size(); ++i)
    EXPECT_EQ(projected.sequences[i].frames[0], pca_apply(t, test.sequences[i].frames[0]));
  // A transform fitted on the test part would differ.
  EXPECT_NE(fit_preprocess(test, 0.9).mean, t.mean);
}

TEST(Dataset, ValidateAndSubset) {
  Dataset d = indexed_dataset(3, 2);
  EXPECT_NO_THROW(d.validate());
  const Dataset s = d.subset({4, 1});
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(s.sequences[0].id, "4");
  EXPECT_EQ(s.class_names, d.class_names);
  EXPECT_THROW(d.subset({6}), Error);
  d.sequences[1].label = 5;
  EXPECT_THROW(d.validate(), Error);
}

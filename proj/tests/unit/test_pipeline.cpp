#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "helmfluid/datagen.hpp"
#include "helmfluid/error.hpp"
#include "helmfluid/json_io.hpp"
#include "helmfluid/npy.hpp"
#include "helmfluid/pipeline.hpp"

using namespace helmfluid;
using namespace helmfluid::pipeline;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("helmfluid_pipeline_" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::filesystem::path toy(const std::string& name, int n, int frames = 6, SplitCounts splits = {}) {
  datagen::TranslateConfig c;
  c.grid = GridSpec(16, 16, 1.0, BoundaryMode::periodic);
  c.frames = frames;
  c.n_blobs = 2;
  c.blob_sigma = 2.0;
  const auto dir = scratch(name);
  datagen::generate_translate_dataset(c, n, dir, 5, splits.total() ? std::optional(splits) : std::nullopt);
  return dir;
}

model::ModelConfig tiny_model() {
  model::ModelConfig c;
  c.lookback = 2;
  c.scales = 2;
  c.heads = 2;
  c.channels = {4, 8};
  c.radius = 1;
  c.decoder_hidden = 4;
  return c;
}

TrainConfig tiny_train() {
  TrainConfig t;
  t.lr = 1e-3;
  t.batch_size = 2;
  t.epochs = 1;
  t.seed = 3;
  t.input_len = 3;
  t.pred_len = 2;
  return t;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Static dataset: every frame identical.
std::filesystem::path static_dataset(const std::string& name, double value) {
  const auto dir = scratch(name);
  std::filesystem::create_directories(dir);
  Manifest m;
  m.kind = "static";
  m.grid = GridSpec(8, 8);
  m.frames = 6;
  m.splits = SplitCounts{2, 1, 1};
  for (int i = 0; i < 4; ++i) {
    ManifestEntry e;
    e.file = sequence_filename(static_cast<std::size_t>(i));
    e.split = i < 2 ? Split::train : (i == 2 ? Split::val : Split::test);
    m.sequences.push_back(e);
    write_npy(dir / e.file, NpyArray::from_f32({6, 8, 8}, std::vector<float>(6 * 64, static_cast<float>(value + i))));
  }
  m.save(dir);
  return dir;
}

}  // namespace

TEST_CASE("dataset loading") {
  const auto dir = toy("load", 3, 6, SplitCounts{1, 1, 1});
  const auto d = SequenceDataset::open(dir);
  CHECK(d.size() == 3);
  CHECK(d.indices(Split::train).size() == 1);
  CHECK(d.indices(Split::val).size() == 1);
  CHECK(d.indices(Split::test).size() == 1);
  CHECK(d.sequence(2).frames == 6);
  CHECK(d.sequence(2).values.size() == 6u * 256u);
  CHECK_FALSE(d.has_masks());

  const auto big = toy("split_counts", 14);
  const auto d2 = SequenceDataset::open(big / "manifest.json");
  CHECK(d2.indices(Split::train).size() == 10);
  CHECK(d2.indices(Split::val).size() == 2);

  std::ofstream(dir / sequence_filename(1), std::ios::binary) << "garbage";
  const auto d3 = SequenceDataset::open(dir);
  try {
    d3.sequence(1);
    FAIL("expected an error");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("sequence 1") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(big);
}

TEST_CASE("normalization") {
  const auto dir = toy("norm", 7);
  const auto d = SequenceDataset::open(dir);
  const auto s = compute_norm_stats(d);
  std::vector<double> all;
  for (auto i : d.indices(Split::train)) {
    const auto& q = d.sequence(i);
    all.insert(all.end(), q.values.begin(), q.values.end());
  }
  const auto ref = field_stats(all);
  CHECK(s.mean == doctest::Approx(ref.mean).epsilon(1e-12));
  CHECK(s.std == doctest::Approx(ref.std).epsilon(1e-12));
  for (double x : {-3.0, 0.0, 0.7, 12.5}) CHECK(std::abs(s.denormalize(s.normalize(x)) - x) <= 1e-6);
  CHECK(NormStats::from_json(s.to_json()).std == s.std);

  const auto flat = static_dataset("flat", 2.0);
  const auto fs = compute_norm_stats(SequenceDataset::open(flat));
  // Train sequences hold 2 and 3, so the std is 0.5; a single constant value needs the floor.
  CHECK(fs.std == doctest::Approx(0.5));
  NormStats floor_case{4.0, std::max(0.0, kStdFloor)};
  CHECK(floor_case.normalize(4.0) == 0.0);
  std::filesystem::remove_all(dir);
  std::filesystem::remove_all(flat);
}

TEST_CASE("masked datasets normalize by scale only") {
  datagen::BoundedDyeConfig c;
  c.grid = GridSpec(24, 24, 1.0, BoundaryMode::replicate);
  c.frames = 5;
  c.n_obstacles = 2;
  c.inflow_margin = 6.0;
  const auto dir = scratch("masked_norm");
  datagen::generate_bounded_dye_dataset(c, 7, dir, 4);
  const auto d = SequenceDataset::open(dir);
  REQUIRE(d.has_masks());
  const auto s = compute_norm_stats(d);
  double sq = 0.0;
  std::size_t n = 0;
  for (auto i : d.indices(Split::train)) {
    for (double v : d.sequence(i).values) sq += v * v, ++n;
  }
  CHECK(s.mean == 0.0);
  CHECK(s.std == doctest::Approx(std::sqrt(sq / double(n))).epsilon(1e-12));

  auto mc = tiny_model();
  const Model m(mc, 2);
  const auto& seq = d.sequence(d.indices(Split::val)[0]);
  const auto p = predict_sequence(m, s, seq, 3, 2, true);
  const auto inside = seq.mask->inside();
  for (const auto& f : p.frames) {
    for (std::size_t k = 0; k < f.size(); ++k) {
      if (!inside[k]) CHECK(f[k] == 0.0);
    }
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("metric identities and hand cases") {
  const std::vector<std::vector<double>> truth{{1.0, 2.0, 3.0, 4.0}};
  CHECK(score_sequence(truth, truth).rel_l2 == 0.0);
  CHECK(score_sequence(truth, truth).mse == 0.0);
  const std::vector<std::vector<double>> zero{{0.0, 0.0, 0.0, 0.0}};
  CHECK(score_sequence(zero, truth).rel_l2 == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(score_sequence(zero, zero).rel_l2 == 0.0);

  // 2x2 by hand: diff = (1, 0, -1, 2) -> sum sq 6; truth sum sq 30.
  const std::vector<std::vector<double>> pred{{0.0, 2.0, 4.0, 2.0}};
  const auto sc = score_sequence(pred, truth);
  CHECK(std::abs(sc.rel_l2 - std::sqrt(6.0 / 30.0)) <= 1e-12);
  CHECK(std::abs(sc.mse - 1.5) <= 1e-12);

  // Two steps: numerator and denominator sum over the horizon.
  const std::vector<std::vector<double>> t2{{1.0, 2.0, 3.0, 4.0}, {1.0, 1.0, 1.0, 1.0}};
  const std::vector<std::vector<double>> p2{{0.0, 2.0, 4.0, 2.0}, {1.0, 1.0, 1.0, 3.0}};
  const auto s2 = score_sequence(p2, t2);
  CHECK(std::abs(s2.rel_l2 - std::sqrt(10.0 / 34.0)) <= 1e-12);
  CHECK(std::abs(s2.mse - (1.5 + 1.0) / 2.0) <= 1e-12);

  // Masked: D = cells {0, 3}.
  const std::vector<std::uint8_t> m{1, 0, 0, 1};
  const auto sm = score_sequence(pred, truth, m);
  CHECK(std::abs(sm.rel_l2 - std::sqrt(5.0 / 17.0)) <= 1e-12);
  CHECK(std::abs(sm.mse - 2.5) <= 1e-12);

  const std::vector<std::uint8_t> ones{1, 1, 1, 1};
  const auto so = score_sequence(p2, t2, ones);
  CHECK(so.rel_l2 == s2.rel_l2);
  CHECK(so.mse == s2.mse);

  const double a = 3.0;
  auto scaled = [&](const std::vector<std::vector<double>>& v) {
    auto o = v;
    for (auto& f : o)
      for (auto& x : f) x *= a;
    return o;
  };
  const auto ss = score_sequence(scaled(p2), scaled(t2));
  CHECK(ss.mse == doctest::Approx(a * a * s2.mse).epsilon(1e-14));
  CHECK(ss.rel_l2 == doctest::Approx(s2.rel_l2).epsilon(1e-14));
}

TEST_CASE("persistence baseline") {
  const auto flat = static_dataset("persist_static", 1.0);
  const auto d = SequenceDataset::open(flat);
  const auto m = persistence_baseline(d, Split::val, 3, 3, false);
  CHECK(m.rel_l2 == 0.0);
  CHECK(m.mse == 0.0);

  const auto dir = toy("persist_toy", 7, 10);
  const auto t = SequenceDataset::open(dir);
  const auto p = persistence_baseline(t, Split::train, 4, 6, false);
  REQUIRE(p.per_step_rel_l2.size() == 6);
  for (std::size_t i = 1; i < 6; ++i) CHECK(p.per_step_rel_l2[i] > p.per_step_rel_l2[i - 1]);

  // Shared scoring path.
  std::vector<SequenceScore> scores;
  for (auto i : t.indices(Split::train)) {
    const auto& s = t.sequence(i);
    const auto last = s.frame(3);
    std::vector<std::vector<double>> pred(6, std::vector<double>(last.begin(), last.end())), truth;
    for (int k = 0; k < 6; ++k) truth.emplace_back(s.frame(4 + k).begin(), s.frame(4 + k).end());
    scores.push_back(score_sequence(pred, truth));
  }
  CHECK(aggregate(scores).rel_l2 == p.rel_l2);
  CHECK_THROWS_AS(persistence_baseline(t, Split::train, 4, 7, false), InputError);
  std::filesystem::remove_all(flat);
  std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoint round trip") {
  const auto dir = scratch("ckpt");
  Model m(tiny_model(), 9);
  const NormStats norm{0.5, 2.0};
  save_checkpoint(dir / "a", m, tiny_train(), norm);
  Checkpoint meta;
  const auto back = load_checkpoint(dir / "a", &meta);
  save_checkpoint(dir / "b", back, meta.train_config, meta.norm);
  for (const auto& e : std::filesystem::directory_iterator(dir / "a")) {
    CHECK(slurp(e.path()) == slurp(dir / "b" / e.path().filename()));
  }
  CHECK(meta.norm.mean == 0.5);

  const auto window = ad::Tensor<float>::constant(ad::Shape4{1, 3, 8, 8}, std::vector<float>(192, 0.25f));
  auto frames = [&](const Model& x) {
    const auto y = x.forward_one_step(x.params().bind(false), window).frame;
    return std::vector<float>(y.value().begin(), y.value().end());
  };
  CHECK(frames(m) == frames(back));

  auto wide = tiny_model();
  wide.channels = {6, 8};
  write_json_file(dir / "a" / "model.json", wide.to_json());
  try {
    load_checkpoint(dir / "a");
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("embed.conv1.weight") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("training smoke, determinism and resume") {
  const auto dir = toy("train", 8, 6, SplitCounts{4, 2, 2});
  const auto d = SequenceDataset::open(dir);
  const auto run = scratch("run");
  auto tc = tiny_train();
  const auto r = train(tiny_model(), tc, d, run / "a");
  REQUIRE(r.epochs.size() == 1);
  CHECK(std::filesystem::exists(run / "a" / "checkpoint" / "params.json"));
  CHECK(std::filesystem::exists(run / "a" / "config.json"));
  CHECK(std::filesystem::exists(run / "a" / "diagnostics" / "vel_l1_h1.npy"));
  const auto log = slurp(run / "a" / "log.csv");
  CHECK(log.rfind("epoch,step,train_loss,val_rel_l2,wall_time_s\n", 0) == 0);

  tc.epochs = 3;
  train(tiny_model(), tc, d, run / "full");
  auto tc1 = tc;
  tc1.epochs = 1;
  train(tiny_model(), tc1, d, run / "resumed");
  train(tiny_model(), tc, d, run / "resumed", true);
  CHECK(slurp(run / "full" / "log.csv") == slurp(run / "resumed" / "log.csv"));

  tc.workers = 3;
  train(tiny_model(), tc, d, run / "workers");
  CHECK(slurp(run / "full" / "log.csv") == slurp(run / "workers" / "log.csv"));

  Checkpoint meta;
  const auto best = load_checkpoint(run / "full" / "checkpoint", &meta);
  const auto ev = evaluate(best, meta.norm, d, Split::test, 3, 2, false);
  CHECK(ev.sequences == 2);
  CHECK(std::isfinite(ev.rel_l2));
  std::filesystem::remove_all(run);
  std::filesystem::remove_all(dir);
}

TEST_CASE("loss decreases on the translation toy set") {
  const auto dir = toy("decrease", 14, 6);
  const auto d = SequenceDataset::open(dir);
  const auto run = scratch("decrease_run");
  auto tc = tiny_train();
  tc.epochs = 5;
  tc.lr = 3e-4;
  const auto r = train(tiny_model(), tc, d, run);
  for (std::size_t i = 1; i < r.epochs.size(); ++i) CHECK(r.epochs[i].train_loss < r.epochs[i - 1].train_loss);
  std::filesystem::remove_all(run);
  std::filesystem::remove_all(dir);
}

TEST_CASE("non-finite loss aborts with context") {
  const auto dir = toy("nan", 4, 6, SplitCounts{2, 1, 1});
  std::vector<float> bad(6 * 256, std::nanf(""));
  write_npy(dir / sequence_filename(0), NpyArray::from_f32({6, 16, 16}, bad));
  const auto d = SequenceDataset::open(dir);
  const auto run = scratch("nan_run");
  try {
    train(tiny_model(), tiny_train(), d, run);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
  }
  std::filesystem::remove_all(run);
  std::filesystem::remove_all(dir);
}

TEST_CASE("configuration errors") {
  const auto dir = toy("cfg", 4, 6, SplitCounts{2, 1, 1});
  const auto d = SequenceDataset::open(dir);
  auto tc = tiny_train();
  tc.input_len = 3;
  tc.pred_len = 4;
  CHECK_THROWS_AS(train(tiny_model(), tc, d, scratch("cfg_run")), ConfigError);
  auto mc = tiny_model();
  mc.lookback = 3;
  CHECK_THROWS_AS(train(mc, tiny_train(), d, scratch("cfg_run")), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_json({{"lr", -1.0}}), ConfigError);
  CHECK(TrainConfig::from_json(tiny_train().to_json()).to_json() == tiny_train().to_json());
  std::filesystem::remove_all(dir);
}

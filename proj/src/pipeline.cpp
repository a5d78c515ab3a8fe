#include "helmfluid/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "helmfluid/error.hpp"
#include "helmfluid/json_io.hpp"
#include "helmfluid/npy.hpp"
#include "helmfluid/parallel.hpp"

namespace helmfluid::pipeline {

using nlohmann::json;
using TF = ad::Tensor<float>;

NormStats NormStats::from_json(const json& j) {
  NormStats s;
  try {
    s.mean = j.at("mean");
    s.std = j.at("std");
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed normalization stats: ") + e.what());
  }
  if (!(s.std > 0.0)) throw FormatError("normalization std must be positive");
  return s;
}

// Dataset ----------------------------------------------------------------------

SequenceDataset SequenceDataset::open(const std::filesystem::path& manifest_path_or_dir) {
  SequenceDataset d;
  d.manifest_ = Manifest::load(manifest_path_or_dir);
  d.root_ = std::filesystem::is_directory(manifest_path_or_dir) ? manifest_path_or_dir
                                                                : manifest_path_or_dir.parent_path();
  d.cache_ = std::make_shared<Cache>();
  d.cache_->items.resize(d.manifest_.sequences.size());
  return d;
}

std::vector<std::size_t> SequenceDataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < manifest_.sequences.size(); ++i) {
    if (manifest_.sequences[i].split == split) out.push_back(i);
  }
  return out;
}

bool SequenceDataset::has_masks() const {
  return std::any_of(manifest_.sequences.begin(), manifest_.sequences.end(),
                     [](const ManifestEntry& e) { return e.mask.has_value(); });
}

const Sequence& SequenceDataset::sequence(std::size_t index) const {
  if (index >= size()) throw InputError("sequence index " + std::to_string(index) + " out of range");
  {
    std::lock_guard<std::mutex> lock(cache_->mutex);
    if (cache_->items[index]) return *cache_->items[index];
  }
  const auto& e = manifest_.sequences[index];
  const auto& g = manifest_.grid;
  auto seq = std::make_shared<Sequence>();
  seq->index = index;
  seq->grid = g;
  seq->velocity = e.velocity;
  const auto path = root_ / e.file;
  try {
    const auto a = read_npy(path);
    if (a.rank() != 3 || a.shape[1] != static_cast<std::size_t>(g.height) ||
        a.shape[2] != static_cast<std::size_t>(g.width)) {
      throw ShapeError("expected (frames, " + std::to_string(g.height) + ", " + std::to_string(g.width) + ")");
    }
    seq->frames = static_cast<int>(a.shape[0]);
    seq->values = a.to_f64();
    if (e.mask) {
      const auto m = read_npy(root_ / *e.mask);
      if (m.numel() != g.size()) throw ShapeError("mask " + *e.mask + " does not match the grid");
      std::vector<std::uint8_t> in(g.size());
      const auto mv = m.to_f64();
      for (std::size_t i = 0; i < in.size(); ++i) in[i] = mv[i] > 0.5 ? 1 : 0;
      seq->mask = BoundaryMask(g, std::move(in));
    }
  } catch (const std::exception& ex) {
    throw IoError("sequence " + std::to_string(index) + " (" + path.string() + "): " + ex.what());
  }
  std::lock_guard<std::mutex> lock(cache_->mutex);
  if (!cache_->items[index]) cache_->items[index] = std::move(seq);
  return *cache_->items[index];
}

void SequenceDataset::preload(Split split, int workers) const {
  const auto idx = indices(split);
  parallel_for(idx.size(), workers, [&](std::size_t i) { sequence(idx[i]); });
}

NormStats compute_norm_stats(const SequenceDataset& data, int workers) {
  data.preload(Split::train, workers);
  std::vector<double> all;
  for (auto i : data.indices(Split::train)) {
    const auto& s = data.sequence(i);
    all.insert(all.end(), s.values.begin(), s.values.end());
  }
  if (all.empty()) throw ConfigError("dataset has no train split to compute normalization statistics");
  const auto st = field_stats(all);
  if (data.has_masks()) {
    // Scale-only, so masked zeros stay zero after denormalization.
    return NormStats{0.0, std::max(std::sqrt(st.std * st.std + st.mean * st.mean), kStdFloor)};
  }
  return NormStats{st.mean, std::max(st.std, kStdFloor)};
}

// Configs ----------------------------------------------------------------------

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (input_len < 3) throw ConfigError("input_len must be >= 3");
  if (pred_len < 1) throw ConfigError("pred_len must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (!(grad_clip >= 0.0)) throw ConfigError("grad_clip must be >= 0");
}

json TrainConfig::to_json() const {
  return {{"lr", lr},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"seed", seed},
          {"input_len", input_len},
          {"pred_len", pred_len},
          {"eval_every", eval_every},
          {"grad_clip", grad_clip},
          {"masked_loss", masked_loss},
          {"deterministic_log", deterministic_log}};
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  try {
    c.lr = j.value("lr", c.lr);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.input_len = j.value("input_len", c.input_len);
    c.pred_len = j.value("pred_len", c.pred_len);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.masked_loss = j.value("masked_loss", c.masked_loss);
    c.deterministic_log = j.value("deterministic_log", c.deterministic_log);
    c.workers = j.value("workers", c.workers);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed train config: ") + e.what());
  }
  c.validate();
  return c;
}

// Metrics ----------------------------------------------------------------------

json Metrics::to_json() const {
  return {{"rel_l2", rel_l2},
          {"mse", mse},
          {"per_step_rel_l2", per_step_rel_l2},
          {"per_step_mse", per_step_mse},
          {"sequences", sequences}};
}

namespace {

double safe_ratio(double num, double den) {
  if (den > 0.0) return std::sqrt(num) / std::sqrt(den);
  return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
}

}  // namespace

SequenceScore score_sequence(const std::vector<std::vector<double>>& pred,
                             const std::vector<std::vector<double>>& truth, std::span<const std::uint8_t> mask) {
  if (pred.size() != truth.size() || pred.empty()) throw ShapeError("prediction and truth horizons differ");
  SequenceScore s;
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    if (pred[t].size() != truth[t].size()) throw ShapeError("prediction and truth frames differ in size");
    if (!mask.empty() && mask.size() != truth[t].size()) throw ShapeError("mask does not match the frames");
    double e = 0.0, x = 0.0;
    std::size_t cells = 0;
    for (std::size_t i = 0; i < pred[t].size(); ++i) {
      if (!mask.empty() && !mask[i]) continue;
      const double d = truth[t][i] - pred[t][i];
      e += d * d;
      x += truth[t][i] * truth[t][i];
      ++cells;
    }
    if (cells == 0) throw InputError("mask selects no cells");
    s.step_rel_l2.push_back(safe_ratio(e, x));
    s.step_mse.push_back(e / static_cast<double>(cells));
    num += e;
    den += x;
  }
  s.rel_l2 = safe_ratio(num, den);
  s.mse = std::accumulate(s.step_mse.begin(), s.step_mse.end(), 0.0) / static_cast<double>(s.step_mse.size());
  return s;
}

Metrics aggregate(const std::vector<SequenceScore>& scores) {
  Metrics m;
  m.sequences = scores.size();
  if (scores.empty()) return m;
  const std::size_t steps = scores[0].step_rel_l2.size();
  m.per_step_rel_l2.assign(steps, 0.0);
  m.per_step_mse.assign(steps, 0.0);
  for (const auto& s : scores) {
    m.rel_l2 += s.rel_l2;
    m.mse += s.mse;
    for (std::size_t t = 0; t < steps; ++t) {
      m.per_step_rel_l2[t] += s.step_rel_l2[t];
      m.per_step_mse[t] += s.step_mse[t];
    }
  }
  const double n = static_cast<double>(scores.size());
  m.rel_l2 /= n;
  m.mse /= n;
  for (std::size_t t = 0; t < steps; ++t) {
    m.per_step_rel_l2[t] /= n;
    m.per_step_mse[t] /= n;
  }
  return m;
}

// Prediction ---------------------------------------------------------------------

namespace {

void check_lengths(const Sequence& seq, int input_len, int pred_len) {
  if (seq.frames < input_len + pred_len) {
    throw InputError("sequence " + std::to_string(seq.index) + " has " + std::to_string(seq.frames) +
                     " frames, need input_len + pred_len = " + std::to_string(input_len + pred_len));
  }
}

std::vector<TF> history_tensors(const NormStats& norm, const Sequence& seq, int input_len) {
  const auto& g = seq.grid;
  std::vector<TF> out;
  for (int i = 0; i < input_len; ++i) {
    const auto f = seq.frame(i);
    std::vector<float> v(f.size());
    for (std::size_t k = 0; k < f.size(); ++k) v[k] = static_cast<float>(norm.normalize(f[k]));
    out.push_back(TF::constant(ad::Shape4{1, 1, g.height, g.width}, std::move(v)));
  }
  return out;
}

std::vector<float> mask_weights(const BoundaryMask& m) {
  const auto in = m.inside();
  return {in.begin(), in.end()};
}

}  // namespace

Prediction predict_sequence(const Model& model, const NormStats& norm, const Sequence& seq, int input_len,
                            int pred_len, bool use_mask, bool diagnostics) {
  check_lengths(seq, input_len, 0);
  const BoundaryMask* mask = use_mask && seq.mask ? &*seq.mask : nullptr;
  auto out = model.predict(history_tensors(norm, seq, input_len), pred_len, mask, diagnostics);
  Prediction p;
  p.index = seq.index;
  for (const auto& f : out.frames) {
    std::vector<double> v(f.value().size());
    for (std::size_t k = 0; k < v.size(); ++k) v[k] = norm.denormalize(f.value()[k]);
    p.frames.push_back(std::move(v));
  }
  p.diagnostics = std::move(out.diagnostics);
  return p;
}

namespace {

std::vector<std::vector<double>> truth_frames(const Sequence& seq, int input_len, int pred_len) {
  std::vector<std::vector<double>> t;
  for (int i = 0; i < pred_len; ++i) {
    const auto f = seq.frame(input_len + i);
    t.emplace_back(f.begin(), f.end());
  }
  return t;
}

}  // namespace

Metrics evaluate(const Model& model, const NormStats& norm, const SequenceDataset& data, Split split, int input_len,
                 int pred_len, bool masked, int workers) {
  const auto idx = data.indices(split);
  if (idx.empty()) throw InputError("dataset has no " + to_string(split) + " sequences");
  std::vector<SequenceScore> scores(idx.size());
  parallel_for(idx.size(), workers, [&](std::size_t i) {
    const auto& seq = data.sequence(idx[i]);
    const auto p = predict_sequence(model, norm, seq, input_len, pred_len, true);
    scores[i] = score_sequence(p.frames, truth_frames(seq, input_len, pred_len),
                               masked && seq.mask ? seq.mask->inside() : std::span<const std::uint8_t>{});
  });
  return aggregate(scores);
}

Metrics persistence_baseline(const SequenceDataset& data, Split split, int input_len, int pred_len, bool masked) {
  const auto idx = data.indices(split);
  if (idx.empty()) throw InputError("dataset has no " + to_string(split) + " sequences");
  std::vector<SequenceScore> scores;
  for (auto i : idx) {
    const auto& seq = data.sequence(i);
    check_lengths(seq, input_len, pred_len);
    const auto last = seq.frame(input_len - 1);
    std::vector<std::vector<double>> pred(static_cast<std::size_t>(pred_len), std::vector<double>(last.begin(), last.end()));
    scores.push_back(score_sequence(pred, truth_frames(seq, input_len, pred_len), masked && seq.mask ? seq.mask->inside() : std::span<const std::uint8_t>{}));
  }
  return aggregate(scores);
}

std::vector<std::array<double, 2>> mean_velocities(const Model& model, const NormStats& norm,
                                                   const SequenceDataset& data, Split split, int input_len,
                                                   VelocityWeighting weighting, int workers) {
  const auto idx = data.indices(split);
  std::vector<std::array<double, 2>> out(idx.size());
  parallel_for(idx.size(), workers, [&](std::size_t i) {
    const auto& seq = data.sequence(idx[i]);
    const auto p = predict_sequence(model, norm, seq, input_len, 1, true, true);
    const auto& v = p.diagnostics[0][0].velocity;
    const auto s = v.shape();
    const auto last = seq.frame(input_len - 1);
    double su = 0.0, sv = 0.0, sw = 0.0;
    for (int h = 0; h < s.n; ++h) {
      for (std::size_t k = 0; k < s.plane(); ++k) {
        const double w = weighting == VelocityWeighting::tracer ? std::abs(last[k]) : 1.0;
        su += w * v.value()[(static_cast<std::size_t>(h) * 2) * s.plane() + k];
        sv += w * v.value()[(static_cast<std::size_t>(h) * 2 + 1) * s.plane() + k];
        sw += w;
      }
    }
    out[i] = sw > 0.0 ? std::array<double, 2>{su / sw, sv / sw} : std::array<double, 2>{0.0, 0.0};
  });
  return out;
}

// Checkpoints ----------------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& dir, const Model& model, const TrainConfig& tc,
                     const NormStats& norm) {
  std::filesystem::create_directories(dir);
  ad::save_params(model.params(), dir);
  write_json_file(dir / "model.json", model.config().to_json());
  write_json_file(dir / "train.json", tc.to_json());
  write_json_file(dir / "norm.json", norm.to_json());
}

Checkpoint read_checkpoint_meta(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("checkpoint directory '" + dir.string() + "' not found");
  Checkpoint c;
  c.model_config = model::ModelConfig::from_json(read_json_file(dir / "model.json"));
  c.train_config = TrainConfig::from_json(read_json_file(dir / "train.json"));
  c.norm = NormStats::from_json(read_json_file(dir / "norm.json"));
  return c;
}

Model load_checkpoint(const std::filesystem::path& dir, Checkpoint* meta) {
  const auto c = read_checkpoint_meta(dir);
  Model m(c.model_config, c.train_config.seed);
  ad::load_params(m.params(), dir);
  if (meta) *meta = c;
  return m;
}

// Training ----------------------------------------------------------------------

double sample_loss_and_grad(const Model& model, const NormStats& norm, const Sequence& seq, const TrainConfig& tc,
                            std::vector<std::vector<float>>* grads) {
  check_lengths(seq, tc.input_len, tc.pred_len);
  const auto& g = seq.grid;
  const auto p = model.params().bind(grads != nullptr);
  const BoundaryMask* mask = seq.mask ? &*seq.mask : nullptr;
  const auto roll = model.rollout(p, history_tensors(norm, seq, tc.input_len), tc.pred_len, mask);
  const auto weights = tc.masked_loss && mask ? mask_weights(*mask) : std::vector<float>{};
  TF loss;
  for (int t = 0; t < tc.pred_len; ++t) {
    const auto f = seq.frame(tc.input_len + t);
    const auto target = TF::constant(ad::Shape4{1, 1, g.height, g.width}, std::vector<float>(f.begin(), f.end()));
    const auto pred = ad::affine(roll.frames[static_cast<std::size_t>(t)], static_cast<float>(norm.std),
                                 static_cast<float>(norm.mean));
    const auto term = ad::relative_l2(pred, target, std::span<const float>(weights));
    loss = loss.defined() ? ad::add(loss, term) : term;
  }
  const double value = loss.item();
  if (grads) {
    if (std::isfinite(value)) loss.backward();
    *grads = model.params().gradients(p);
  }
  return value;
}

namespace {

struct RunState {
  int epoch = 0;
  long step = 0;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string log_row(const EpochRecord& r) {
  return std::to_string(r.epoch) + "," + std::to_string(r.step) + "," + fmt(r.train_loss) + "," +
         (r.val_rel_l2 ? fmt(*r.val_rel_l2) : std::string()) + "," + fmt(r.wall_time_s) + "\n";
}

constexpr const char* kLogHeader = "epoch,step,train_loss,val_rel_l2,wall_time_s\n";

std::vector<std::string> read_log_rows(const std::filesystem::path& p, int up_to_epoch) {
  std::vector<std::string> rows;
  std::ifstream in(p);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    if (std::stoi(line.substr(0, line.find(','))) <= up_to_epoch) rows.push_back(line + "\n");
  }
  return rows;
}

void write_text(const std::filesystem::path& p, const std::string& text, bool append) {
  std::ofstream out(p, append ? std::ios::app | std::ios::binary : std::ios::trunc | std::ios::binary);
  if (!out) throw IoError("cannot write '" + p.string() + "'");
  out << text;
}

}  // namespace

TrainResult train(const model::ModelConfig& mc, const TrainConfig& tc, const SequenceDataset& data,
                  const std::filesystem::path& run_dir, bool resume,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  mc.validate();
  tc.validate();
  if (mc.lookback + 1 > tc.input_len) {
    throw ConfigError("model lookback " + std::to_string(mc.lookback) + " needs input_len >= " +
                      std::to_string(mc.lookback + 1));
  }
  if (data.manifest().frames < tc.input_len + tc.pred_len) {
    throw ConfigError("dataset sequences have " + std::to_string(data.manifest().frames) +
                      " frames, need input_len + pred_len = " + std::to_string(tc.input_len + tc.pred_len));
  }
  auto train_idx = data.indices(Split::train);
  const auto val_idx = data.indices(Split::val);
  if (train_idx.empty()) throw ConfigError("dataset has no train split");
  if (val_idx.empty()) throw ConfigError("dataset has no val split");
  data.preload(Split::train, tc.workers);
  data.preload(Split::val, tc.workers);
  const bool masked_metrics = tc.masked_loss && data.has_masks();

  const auto ckpt_dir = run_dir / "checkpoint";
  const auto last_dir = run_dir / "last";
  const auto log_path = run_dir / "log.csv";
  const auto timing_path = run_dir / "timing.csv";

  Model model(mc, tc.seed);
  ad::AdamState<float> adam;
  adam.lr = tc.lr;
  NormStats norm;
  RunState state;
  TrainResult result;

  if (resume) {
    Checkpoint meta;
    model = load_checkpoint(last_dir, &meta);
    if (meta.model_config.to_json() != mc.to_json()) throw ConfigError("model config differs from the resumed run");
    norm = meta.norm;
    ad::load_adam(adam, model.params(), last_dir);
    adam.lr = tc.lr;
    const auto s = read_json_file(last_dir / "state.json");
    state.epoch = s.at("epoch");
    state.step = s.at("step");
    state.best_val = s.at("best_val").is_null() ? std::numeric_limits<double>::infinity() : s.at("best_val").get<double>();
    state.best_epoch = s.at("best_epoch");
    std::string kept = kLogHeader;
    for (const auto& r : read_log_rows(log_path, state.epoch)) kept += r;
    write_text(log_path, kept, false);
  } else {
    std::filesystem::create_directories(run_dir);
    for (const auto& d : {ckpt_dir, last_dir, run_dir / "diagnostics"}) std::filesystem::remove_all(d);
    norm = compute_norm_stats(data, tc.workers);
    write_text(log_path, kLogHeader, false);
    write_text(timing_path, "epoch,wall_time_s\n", false);
  }
  write_json_file(run_dir / "config.json", {{"model", mc.to_json()},
                                            {"train", tc.to_json()},
                                            {"norm", norm.to_json()},
                                            {"dataset", {{"root", data.root().string()}, {"kind", data.manifest().kind}}}});

  for (int epoch = state.epoch + 1; epoch <= tc.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    auto order = train_idx;
    std::mt19937_64 rng(derive_seed(tc.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(tc.batch_size), order.size() - start);
      std::vector<double> losses(b);
      std::vector<std::vector<std::vector<float>>> grads(b);
      parallel_for(b, tc.workers, [&](std::size_t i) {
        losses[i] = sample_loss_and_grad(model, norm, data.sequence(order[start + i]), tc, &grads[i]);
      });
      for (std::size_t i = 0; i < b; ++i) {
        if (!std::isfinite(losses[i])) {
          throw DivergenceError("non-finite training loss at epoch " + std::to_string(epoch) + " step " +
                                std::to_string(state.step + 1) + " (sequence " + std::to_string(order[start + i]) + ")");
        }
      }
      auto total = std::move(grads[0]);
      for (std::size_t i = 1; i < b; ++i) {
        for (std::size_t k = 0; k < total.size(); ++k) {
          for (std::size_t j = 0; j < total[k].size(); ++j) total[k][j] += grads[i][k][j];
        }
      }
      double sq = 0.0;
      for (const auto& g : total)
        for (float x : g) sq += static_cast<double>(x) * x;
      const double norm_g = std::sqrt(sq) / static_cast<double>(b);
      double factor = 1.0 / static_cast<double>(b);
      if (tc.grad_clip > 0.0 && norm_g > tc.grad_clip) factor *= tc.grad_clip / norm_g;
      const auto f = static_cast<float>(factor);
      for (auto& g : total)
        for (auto& x : g) x *= f;
      ad::adam_step(model.params(), total, adam);
      ++state.step;
      for (double l : losses) loss_sum += l;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.step = state.step;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    if (epoch % tc.eval_every == 0 || epoch == tc.epochs) {
      const double val =
          evaluate(model, norm, data, Split::val, tc.input_len, tc.pred_len, masked_metrics, tc.workers).rel_l2;
      rec.val_rel_l2 = val;
      if (val < state.best_val) {
        state.best_val = val;
        state.best_epoch = epoch;
        save_checkpoint(ckpt_dir, model, tc, norm);
      }
    }
    state.epoch = epoch;
    save_checkpoint(last_dir, model, tc, norm);
    ad::save_adam(adam, model.params(), last_dir);
    write_json_file(last_dir / "state.json",
                    {{"epoch", state.epoch},
                     {"step", state.step},
                     {"best_val", std::isfinite(state.best_val) ? json(state.best_val) : json(nullptr)},
                     {"best_epoch", state.best_epoch}});

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rec.wall_time_s = tc.deterministic_log ? 0.0 : wall;
    write_text(log_path, log_row(rec), true);
    write_text(timing_path, std::to_string(epoch) + "," + fmt(wall) + "\n", true);
    result.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }

  if (!std::filesystem::exists(ckpt_dir / "params.json")) save_checkpoint(ckpt_dir, model, tc, norm);
  const auto best = load_checkpoint(ckpt_dir);
  const auto p = predict_sequence(best, norm, data.sequence(val_idx[0]), tc.input_len, 1, true, true);
  model::dump_diagnostics(p.diagnostics[0], run_dir / "diagnostics");

  result.best_val_rel_l2 = state.best_val;
  result.best_epoch = state.best_epoch;
  return result;
}

}  // namespace helmfluid::pipeline

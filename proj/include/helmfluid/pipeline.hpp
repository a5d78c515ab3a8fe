#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "helmfluid/autodiff.hpp"
#include "helmfluid/field.hpp"
#include "helmfluid/helm_model.hpp"
#include "helmfluid/manifest.hpp"

namespace helmfluid::pipeline {

inline constexpr double kStdFloor = 1e-8;

struct NormStats {
  double mean = 0.0;
  double std = 1.0;

  double normalize(double x) const { return (x - mean) / std; }
  double denormalize(double x) const { return x * std + mean; }
  nlohmann::json to_json() const { return {{"mean", mean}, {"std", std}}; }
  static NormStats from_json(const nlohmann::json& j);
};

struct Sequence {
  std::size_t index = 0;
  int frames = 0;
  GridSpec grid;
  std::vector<double> values;  // (frames, H, W)
  std::optional<BoundaryMask> mask;
  std::optional<std::pair<double, double>> velocity;

  std::span<const double> frame(int i) const { return std::span<const double>(values).subspan(i * grid.size(), grid.size()); }
};

/// Sequences of a generated dataset directory, read on first access.
class SequenceDataset {
 public:
  static SequenceDataset open(const std::filesystem::path& manifest_path_or_dir);

  const Manifest& manifest() const { return manifest_; }
  const std::filesystem::path& root() const { return root_; }
  const GridSpec& grid() const { return manifest_.grid; }
  std::size_t size() const { return manifest_.sequences.size(); }
  std::vector<std::size_t> indices(Split split) const;
  bool has_masks() const;

  /// Thread-safe; errors name the sequence index and file.
  const Sequence& sequence(std::size_t index) const;
  void preload(Split split, int workers = 1) const;

 private:
  Manifest manifest_;
  std::filesystem::path root_;
  struct Cache {
    std::mutex mutex;
    std::vector<std::shared_ptr<const Sequence>> items;
  };
  std::shared_ptr<Cache> cache_;
};

/// z-score statistics over all frames of the train split; std floored at kStdFloor.
/// Datasets with masks get mean 0 and std = RMS.
NormStats compute_norm_stats(const SequenceDataset& data, int workers = 1);

struct TrainConfig {
  double lr = 5e-5;
  int batch_size = 10;
  int epochs = 10;
  std::uint64_t seed = 0;
  int input_len = 10;
  int pred_len = 10;
  int eval_every = 1;
  /// Rescale the batch gradient to this global L2 norm when it is larger; 0 disables.
  double grad_clip = 0.0;
  /// Restrict loss and validation metrics to fluid cells when the dataset has masks.
  bool masked_loss = true;
  /// Write wall_time_s as 0 in log.csv so the log depends only on inputs; timings go to timing.csv.
  bool deterministic_log = true;
  int workers = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct Metrics {
  double rel_l2 = 0.0;  // mean over sequences of the horizon relative L2
  double mse = 0.0;     // mean over sequences of the horizon MSE
  std::vector<double> per_step_rel_l2;
  std::vector<double> per_step_mse;
  std::size_t sequences = 0;

  nlohmann::json to_json() const;
};

/// Horizon metrics of one sequence: rel = sqrt(sum_i ||x_i - p_i||^2) / sqrt(sum_i ||x_i||^2),
/// mse = mean_i mean_D (x_i - p_i)^2, optionally restricted to mask = 1.
struct SequenceScore {
  double rel_l2 = 0.0;
  double mse = 0.0;
  std::vector<double> step_rel_l2;
  std::vector<double> step_mse;
};
/// mask: 1 = inside D, empty for the whole frame.
SequenceScore score_sequence(const std::vector<std::vector<double>>& pred,
                             const std::vector<std::vector<double>>& truth, std::span<const std::uint8_t> mask = {});
Metrics aggregate(const std::vector<SequenceScore>& scores);

using Model = model::HelmModel<float>;

struct Prediction {
  std::size_t index = 0;
  std::vector<std::vector<double>> frames;  // denormalized, pred_len of H*W
  std::vector<std::vector<model::ScaleDiagnostics<float>>> diagnostics;
};

/// Rolls out pred_len frames from the first input_len frames of a sequence (later frames are not needed).
Prediction predict_sequence(const Model& model, const NormStats& norm, const Sequence& seq, int input_len,
                            int pred_len, bool use_mask, bool diagnostics = false);

Metrics evaluate(const Model& model, const NormStats& norm, const SequenceDataset& data, Split split, int input_len,
                 int pred_len, bool masked, int workers = 1);

/// Repeats the last observed frame for every horizon step.
Metrics persistence_baseline(const SequenceDataset& data, Split split, int input_len, int pred_len, bool masked);

enum class VelocityWeighting { uniform, tracer };

/// Mean over heads and cells of the finest-scale velocity at the first prediction step (cells/frame).
/// tracer weights each cell by |x| of the last observed frame, restricting the mean to where motion
/// is observable.
std::vector<std::array<double, 2>> mean_velocities(const Model& model, const NormStats& norm,
                                                   const SequenceDataset& data, Split split, int input_len,
                                                   VelocityWeighting weighting = VelocityWeighting::uniform,
                                                   int workers = 1);

struct Checkpoint {
  model::ModelConfig model_config;
  TrainConfig train_config;
  NormStats norm;
};

/// params.json + one NPY per parameter + model.json, train.json, norm.json.
void save_checkpoint(const std::filesystem::path& dir, const Model& model, const TrainConfig& tc,
                     const NormStats& norm);
Checkpoint read_checkpoint_meta(const std::filesystem::path& dir);
/// Model with loaded parameters; throws ShapeError listing mismatched parameters.
Model load_checkpoint(const std::filesystem::path& dir, Checkpoint* meta = nullptr);

struct EpochRecord {
  int epoch = 0;
  long step = 0;
  double train_loss = 0.0;
  std::optional<double> val_rel_l2;
  double wall_time_s = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
  double best_val_rel_l2 = 0.0;
  int best_epoch = 0;
};

/// Trains with Adam on the full-rollout loss sum_t relL2(pred_t, x_t) and writes
/// run_dir/{checkpoint/, last/, log.csv, timing.csv, config.json, diagnostics/}.
/// With resume, continues from run_dir/last after its recorded epoch.
TrainResult train(const model::ModelConfig& mc, const TrainConfig& tc, const SequenceDataset& data,
                  const std::filesystem::path& run_dir, bool resume = false,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Loss and gradients of one sample, exposed for tests and gradient checks.
double sample_loss_and_grad(const Model& model, const NormStats& norm, const Sequence& seq, const TrainConfig& tc,
                            std::vector<std::vector<float>>* grads);

}  // namespace helmfluid::pipeline

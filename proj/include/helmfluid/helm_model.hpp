#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "helmfluid/autodiff.hpp"
#include "helmfluid/field.hpp"

namespace helmfluid::model {

enum class SplatMode { forward_splat, backward_warp };
/// helmholtz: decoders emit (Phi, A) composed as grad Phi + curl A; direct: decoders emit (u, v).
enum class VelocityMode { helmholtz, direct };

std::string to_string(SplatMode m);
std::string to_string(VelocityMode m);

struct ModelConfig {
  int lookback = 9;  // tau
  int scales = 3;    // L
  int heads = 4;     // M
  std::vector<int> channels{64, 128, 128};
  int radius = 4;  // |N_r| = (2r + 1)^2
  int decoder_hidden = 64;
  double dt = 1.0;  // frames
  SplatMode splat = SplatMode::forward_splat;
  std::string rollout_mode = "autoregressive_frames";
  VelocityMode velocity = VelocityMode::helmholtz;
  /// false ablates the boundary: masked correlation block zero, no velocity or output masking.
  bool use_mask = true;
  /// Overlay a last-frame pass-through path on the random init so training starts from persistence.
  bool warm_start = true;

  void validate() const;
  int neighbors() const { return (2 * radius + 1) * (2 * radius + 1); }
  /// Smallest spatial size divisor required by the encoder.
  int size_divisor() const { return 1 << (scales - 1); }

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

template <class T>
using TensorT = ad::Tensor<T>;

/// Per-scale diagnostics; tensors are (M, C, H_l, W_l) with heads along the batch axis.
template <class T>
struct ScaleDiagnostics {
  TensorT<T> phi;       // (M, 1) helmholtz only
  TensorT<T> a;         // (M, 1) helmholtz only
  TensorT<T> decoded;   // (M, 2) velocity decoded at this scale (F)
  TensorT<T> velocity;  // (M, 2) fused velocity used for integration (v)
};

template <class T>
struct StepOutput {
  TensorT<T> frame;  // (1, 1, H, W)
  std::vector<ScaleDiagnostics<T>> diagnostics;
};

template <class T>
struct RolloutOutput {
  std::vector<TensorT<T>> frames;
  std::vector<std::vector<ScaleDiagnostics<T>>> diagnostics;
};

template <class T>
class HelmModel {
 public:
  using Tensor = TensorT<T>;
  using Bound = std::vector<Tensor>;

  HelmModel(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  ad::ParamStore<T>& params() { return params_; }
  const ad::ParamStore<T>& params() const { return params_; }

  /// Wires embed -> aggregation -> projection to copy the last frame. With zero_rest every other
  /// parameter is zeroed; otherwise only the filters on that path are overwritten.
  void init_passthrough(bool zero_rest = true);

  /// Multiscale features of a tau-frame window (1, tau, H, W).
  std::vector<Tensor> encode(const Bound& p, const Tensor& window) const;

  /// One HelmDynamics + integral + aggregation step from features of consecutive windows.
  StepOutput<T> step(const Bound& p, const std::vector<Tensor>& prev, const std::vector<Tensor>& cur,
                     const BoundaryMask* mask, bool diagnostics) const;

  /// window: (1, tau + 1, H, W).
  StepOutput<T> forward_one_step(const Bound& p, const Tensor& window, const BoundaryMask* mask = nullptr,
                                 bool diagnostics = false) const;

  /// history: frames (1, 1, H, W), at least tau + 1 of them. Predictions are fed back.
  RolloutOutput<T> rollout(const Bound& p, const std::vector<Tensor>& history, int n_steps,
                           const BoundaryMask* mask = nullptr, bool diagnostics = false) const;

  /// Convenience inference path on constant parameters.
  RolloutOutput<T> predict(const std::vector<Tensor>& history, int n_steps, const BoundaryMask* mask = nullptr,
                           bool diagnostics = false) const;

  void check_input(int height, int width) const;

 private:
  struct Conv {
    std::size_t w, b;
    int stride, pad;
  };
  Conv add_conv(const std::string& name, int cout, int cin, int k, int stride, std::mt19937_64& rng,
                bool zero = false);
  Tensor apply(const Bound& p, const Conv& c, const Tensor& x) const;

  ModelConfig cfg_;
  ad::ParamStore<T> params_;
  Conv embed1_{}, embed2_{};
  std::vector<Conv> enc1_, enc2_;                       // index l - 1 for l >= 2 (entry 0 unused)
  std::vector<Conv> dec_a1_, dec_a2_, dec_b1_, dec_b2_;  // Phi/A or u/v decoders per scale
  std::vector<Conv> agg_;                               // index l for l = 1..L-1 (0-based l - 1)
  Conv proj_{};
};

/// Writes phi_l{l}_h{h}.npy, a_l{l}_h{h}.npy, vel_l{l}_h{h}.npy (scales and heads 1-based).
template <class T>
void dump_diagnostics(const std::vector<ScaleDiagnostics<T>>& diag, const std::filesystem::path& dir);

/// Masks per scale with the any-child-fluid downsampling rule, as cell weights.
template <class T>
std::vector<std::vector<T>> mask_pyramid(const BoundaryMask& mask, int scales);

}  // namespace helmfluid::model

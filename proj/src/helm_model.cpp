#include "helmfluid/helm_model.hpp"

#include <cmath>

#include "helmfluid/advection.hpp"
#include "helmfluid/error.hpp"
#include "helmfluid/npy.hpp"

namespace helmfluid::model {

using nlohmann::json;

std::string to_string(SplatMode m) { return m == SplatMode::forward_splat ? "forward_splat" : "backward_warp"; }
std::string to_string(VelocityMode m) { return m == VelocityMode::helmholtz ? "helmholtz" : "direct"; }

void ModelConfig::validate() const {
  if (lookback < 2) throw ConfigError("lookback (tau) must be >= 2");
  if (scales < 2) throw ConfigError("scales (L) must be >= 2");
  if (heads < 1) throw ConfigError("heads (M) must be >= 1");
  if (static_cast<int>(channels.size()) != scales) {
    throw ConfigError("channels must list one width per scale (" + std::to_string(scales) + ")");
  }
  for (int c : channels) {
    if (c < 1 || c % heads != 0) {
      throw ConfigError("channel width " + std::to_string(c) + " is not divisible by heads " + std::to_string(heads));
    }
  }
  if (radius < 0) throw ConfigError("radius must be >= 0");
  if (decoder_hidden < 1) throw ConfigError("decoder_hidden must be >= 1");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (rollout_mode != "autoregressive_frames") throw ConfigError("unsupported rollout_mode '" + rollout_mode + "'");
}

json ModelConfig::to_json() const {
  return {{"lookback", lookback},
          {"scales", scales},
          {"heads", heads},
          {"channels", channels},
          {"radius", radius},
          {"decoder_hidden", decoder_hidden},
          {"dt", dt},
          {"splat_mode", to_string(splat)},
          {"rollout_mode", rollout_mode},
          {"velocity_mode", to_string(velocity)},
          {"use_mask", use_mask},
          {"warm_start", warm_start}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  try {
    c.lookback = j.value("lookback", c.lookback);
    c.scales = j.value("scales", c.scales);
    c.heads = j.value("heads", c.heads);
    c.channels = j.value("channels", c.channels);
    c.radius = j.value("radius", c.radius);
    c.decoder_hidden = j.value("decoder_hidden", c.decoder_hidden);
    c.dt = j.value("dt", c.dt);
    const std::string splat = j.value("splat_mode", to_string(c.splat));
    if (splat == "forward_splat") {
      c.splat = SplatMode::forward_splat;
    } else if (splat == "backward_warp") {
      c.splat = SplatMode::backward_warp;
    } else {
      throw ConfigError("unknown splat_mode '" + splat + "'");
    }
    const std::string vel = j.value("velocity_mode", to_string(c.velocity));
    if (vel == "helmholtz") {
      c.velocity = VelocityMode::helmholtz;
    } else if (vel == "direct") {
      c.velocity = VelocityMode::direct;
    } else {
      throw ConfigError("unknown velocity_mode '" + vel + "'");
    }
    c.rollout_mode = j.value("rollout_mode", c.rollout_mode);
    c.use_mask = j.value("use_mask", c.use_mask);
    c.warm_start = j.value("warm_start", c.warm_start);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed model config: ") + e.what());
  }
  c.validate();
  return c;
}

template <class T>
std::vector<std::vector<T>> mask_pyramid(const BoundaryMask& mask, int scales) {
  std::vector<std::vector<T>> out;
  BoundaryMask m = mask;
  for (int l = 0; l < scales; ++l) {
    if (l > 0) m = m.downsample2();
    const auto in = m.inside();
    out.emplace_back(in.begin(), in.end());
  }
  return out;
}

template <class T>
typename HelmModel<T>::Conv HelmModel<T>::add_conv(const std::string& name, int cout, int cin, int k, int stride,
                                                   std::mt19937_64& rng, bool zero) {
  const ad::Shape4 ws{cout, cin, k, k};
  std::vector<T> w(ws.numel(), T(0));
  if (!zero) {
    const double bound = std::sqrt(6.0 / (cin * k * k));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& x : w) x = static_cast<T>(u(rng));
  }
  Conv c;
  c.w = params_.add(name + ".weight", ws, std::move(w));
  c.b = params_.add(name + ".bias", ad::Shape4{1, cout, 1, 1}, std::vector<T>(static_cast<std::size_t>(cout), T(0)));
  c.stride = stride;
  c.pad = k / 2;
  return c;
}

template <class T>
HelmModel<T>::HelmModel(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const auto& ch = cfg_.channels;
  const int L = cfg_.scales;
  const int corr = 2 * cfg_.neighbors();
  embed1_ = add_conv("embed.conv1", ch[0], cfg_.lookback, 3, 1, rng);
  embed2_ = add_conv("embed.conv2", ch[0], ch[0], 3, 1, rng);
  enc1_.resize(static_cast<std::size_t>(L));
  enc2_.resize(static_cast<std::size_t>(L));
  for (int l = 1; l < L; ++l) {
    const std::string base = "encoder" + std::to_string(l + 1);
    enc1_[static_cast<std::size_t>(l)] = add_conv(base + ".conv1", ch[static_cast<std::size_t>(l)],
                                                  ch[static_cast<std::size_t>(l - 1)], 3, 2, rng);
    enc2_[static_cast<std::size_t>(l)] =
        add_conv(base + ".conv2", ch[static_cast<std::size_t>(l)], ch[static_cast<std::size_t>(l)], 3, 1, rng);
  }
  const bool helm = cfg_.velocity == VelocityMode::helmholtz;
  const std::string na = helm ? "phi" : "u", nb = helm ? "a" : "v";
  for (int l = 0; l < L; ++l) {
    const std::string base = "decoder" + std::to_string(l + 1) + ".";
    dec_a1_.push_back(add_conv(base + na + ".conv1", cfg_.decoder_hidden, corr, 3, 1, rng));
    dec_a2_.push_back(add_conv(base + na + ".conv2", 1, cfg_.decoder_hidden, 3, 1, rng, true));
    dec_b1_.push_back(add_conv(base + nb + ".conv1", cfg_.decoder_hidden, corr, 3, 1, rng));
    dec_b2_.push_back(add_conv(base + nb + ".conv2", 1, cfg_.decoder_hidden, 3, 1, rng, true));
  }
  for (int l = 0; l + 1 < L; ++l) {
    agg_.push_back(add_conv("aggregate" + std::to_string(l + 1), ch[static_cast<std::size_t>(l)],
                            ch[static_cast<std::size_t>(l + 1)] + ch[static_cast<std::size_t>(l)], 3, 1, rng));
  }
  proj_ = add_conv("project", 1, ch[0], 1, 1, rng);
  if (cfg_.warm_start) init_passthrough(false);
}

template <class T>
void HelmModel<T>::init_passthrough(bool zero_rest) {
  if (cfg_.channels[0] < 2) throw ConfigError("pass-through init needs at least 2 channels at scale 1");
  const int tau = cfg_.lookback, d1 = cfg_.channels[0];
  if (zero_rest) {
    for (std::size_t i = 0; i < params_.size(); ++i) std::fill(params_[i].value.begin(), params_[i].value.end(), T(0));
  } else {
    auto clear = [&](const Conv& c, int filter) {
      auto& w = params_[c.w].value;
      const std::size_t per = w.size() / static_cast<std::size_t>(params_[c.w].shape.n);
      std::fill_n(w.begin() + static_cast<long>(per * static_cast<std::size_t>(filter)), per, T(0));
      params_[c.b].value[static_cast<std::size_t>(filter)] = T(0);
    };
    clear(embed1_, 0);
    clear(embed1_, 1);
    clear(embed2_, 0);
    if (!agg_.empty()) clear(agg_[0], 0);
    std::fill(params_[proj_.w].value.begin(), params_[proj_.w].value.end(), T(0));
    params_[proj_.b].value[0] = T(0);
  }
  // conv1: channel 0 = +last frame, channel 1 = -last frame (center tap).
  auto& e1 = params_[embed1_.w].value;
  e1[((0 * tau + (tau - 1)) * 3 + 1) * 3 + 1] = T(1);
  e1[((1 * tau + (tau - 1)) * 3 + 1) * 3 + 1] = T(-1);
  // conv2: gelu(x) - gelu(-x) = x.
  auto& e2 = params_[embed2_.w].value;
  e2[((0 * d1 + 0) * 3 + 1) * 3 + 1] = T(1);
  e2[((0 * d1 + 1) * 3 + 1) * 3 + 1] = T(-1);
  if (!agg_.empty()) {
    const int cin = cfg_.channels[1] + d1;
    auto& a = params_[agg_[0].w].value;
    a[((0 * cin + cfg_.channels[1]) * 3 + 1) * 3 + 1] = T(1);
  }
  params_[proj_.w].value[0] = T(1);
}

template <class T>
typename HelmModel<T>::Tensor HelmModel<T>::apply(const Bound& p, const Conv& c, const Tensor& x) const {
  return ad::conv2d(x, p[c.w], p[c.b], c.stride, c.pad);
}

template <class T>
void HelmModel<T>::check_input(int height, int width) const {
  const int d = cfg_.size_divisor();
  if (height % d != 0 || width % d != 0) {
    throw ShapeError("input " + std::to_string(height) + "x" + std::to_string(width) + " must be divisible by " +
                     std::to_string(d) + " for " + std::to_string(cfg_.scales) + " scales");
  }
}

template <class T>
std::vector<typename HelmModel<T>::Tensor> HelmModel<T>::encode(const Bound& p, const Tensor& window) const {
  const auto s = window.shape();
  if (s.c != cfg_.lookback || s.n != 1) {
    throw ShapeError("embed expects a (1, " + std::to_string(cfg_.lookback) + ", H, W) window, got " + s.str());
  }
  check_input(s.h, s.w);
  std::vector<Tensor> out;
  out.push_back(apply(p, embed2_, ad::gelu(apply(p, embed1_, window))));
  for (int l = 1; l < cfg_.scales; ++l) {
    const auto& c1 = enc1_[static_cast<std::size_t>(l)];
    const auto& c2 = enc2_[static_cast<std::size_t>(l)];
    out.push_back(apply(p, c2, ad::gelu(apply(p, c1, out.back()))));
  }
  return out;
}

template <class T>
StepOutput<T> HelmModel<T>::step(const Bound& p, const std::vector<Tensor>& prev, const std::vector<Tensor>& cur,
                                 const BoundaryMask* mask, bool diagnostics) const {
  const int L = cfg_.scales, M = cfg_.heads, K = cfg_.neighbors();
  std::vector<std::vector<T>> masks;
  if (mask && cfg_.use_mask) {
    if (mask->grid().height != cur[0].shape().h || mask->grid().width != cur[0].shape().w) {
      throw ShapeError("boundary mask does not match the input grid");
    }
    masks = mask_pyramid<T>(*mask, L);
  }
  const T dt = static_cast<T>(cfg_.dt);

  std::vector<Tensor> xs(static_cast<std::size_t>(L)), decoded(static_cast<std::size_t>(L));
  std::vector<ScaleDiagnostics<T>> diag(diagnostics ? static_cast<std::size_t>(L) : 0);
  for (int l = 0; l < L; ++l) {
    const auto li = static_cast<std::size_t>(l);
    const auto xc = ad::heads_to_batch(cur[li], M);
    const auto xp = ad::heads_to_batch(prev[li], M);
    xs[li] = xc;
    const auto s = xc.shape();
    const auto plain = ad::neighbor_dot(xc, xp, cfg_.radius);
    const auto masked = masks.empty() ? Tensor::zeros(ad::Shape4{s.n, K, s.h, s.w})
                                      : ad::masked_neighbor_dot(xc, xp, std::span<const T>(masks[li]), cfg_.radius);
    const auto c = ad::scale(ad::concat_channels<T>({plain, masked}), T(1) / std::sqrt(static_cast<T>(s.c)));
    const auto da = apply(p, dec_a2_[li], ad::gelu(apply(p, dec_a1_[li], c)));
    const auto db = apply(p, dec_b2_[li], ad::gelu(apply(p, dec_b1_[li], c)));
    auto f = cfg_.velocity == VelocityMode::helmholtz ? ad::helm_compose(da, db) : ad::concat_channels<T>({da, db});
    if (!masks.empty()) f = ad::mask_multiply(f, std::span<const T>(masks[li]));
    decoded[li] = f;
    if (diagnostics) {
      if (cfg_.velocity == VelocityMode::helmholtz) {
        diag[li].phi = da;
        diag[li].a = db;
      }
      diag[li].decoded = f;
    }
  }

  // Coarse-to-fine: v^l = F^l + 2 Upsample(v^{l+1}).
  std::vector<Tensor> vel(static_cast<std::size_t>(L));
  vel[static_cast<std::size_t>(L - 1)] = decoded[static_cast<std::size_t>(L - 1)];
  for (int l = L - 2; l >= 0; --l) {
    const auto li = static_cast<std::size_t>(l);
    vel[li] = ad::add(decoded[li], ad::scale(ad::upsample2x(vel[li + 1]), T(2)));
    if (!masks.empty()) vel[li] = ad::mask_multiply(vel[li], std::span<const T>(masks[li]));
  }

  std::vector<Tensor> moved(static_cast<std::size_t>(L));
  for (int l = 0; l < L; ++l) {
    const auto li = static_cast<std::size_t>(l);
    if (diagnostics) diag[li].velocity = vel[li];
    const auto back = ad::grid_sample(xs[li], ad::bfecc_positions(ad::scale(vel[li], T(-1)), dt));
    Tensor y;
    if (cfg_.splat == SplatMode::forward_splat) {
      y = ad::forward_splat(xs[li], ad::bfecc_positions(vel[li], dt), back, static_cast<T>(advection::kSplatEps));
    } else {
      y = back;
    }
    moved[li] = ad::batch_to_heads(y, M);
  }

  Tensor agg = moved[static_cast<std::size_t>(L - 1)];
  for (int l = L - 2; l >= 0; --l) {
    const auto li = static_cast<std::size_t>(l);
    agg = apply(p, agg_[li], ad::concat_channels<T>({ad::upsample2x(agg), moved[li]}));
  }
  Tensor frame = apply(p, proj_, agg);
  if (!masks.empty()) frame = ad::mask_multiply(frame, std::span<const T>(masks[0]));
  return StepOutput<T>{frame, std::move(diag)};
}

template <class T>
StepOutput<T> HelmModel<T>::forward_one_step(const Bound& p, const Tensor& window, const BoundaryMask* mask,
                                             bool diagnostics) const {
  const auto s = window.shape();
  if (s.n != 1 || s.c != cfg_.lookback + 1) {
    throw ShapeError("forward_one_step expects (1, " + std::to_string(cfg_.lookback + 1) + ", H, W), got " + s.str());
  }
  const auto prev = encode(p, ad::slice_channels(window, 0, cfg_.lookback));
  const auto cur = encode(p, ad::slice_channels(window, 1, cfg_.lookback));
  return step(p, prev, cur, mask, diagnostics);
}

template <class T>
RolloutOutput<T> HelmModel<T>::rollout(const Bound& p, const std::vector<Tensor>& history, int n_steps,
                                       const BoundaryMask* mask, bool diagnostics) const {
  const int tau = cfg_.lookback;
  if (static_cast<int>(history.size()) < tau + 1) {
    throw InputError("rollout needs at least " + std::to_string(tau + 1) + " history frames, got " +
                     std::to_string(history.size()));
  }
  if (n_steps < 0) throw InputError("n_steps must be >= 0");
  RolloutOutput<T> out;
  if (n_steps == 0) return out;
  std::vector<Tensor> frames(history.end() - (tau + 1), history.end());
  auto window = [&](std::size_t start) {
    return ad::concat_channels<T>(std::vector<Tensor>(frames.begin() + static_cast<long>(start),
                                                      frames.begin() + static_cast<long>(start) + tau));
  };
  auto prev = encode(p, window(0));
  for (int s = 0; s < n_steps; ++s) {
    auto cur = encode(p, window(static_cast<std::size_t>(s) + 1));
    auto res = step(p, prev, cur, mask, diagnostics);
    frames.push_back(res.frame);
    out.frames.push_back(res.frame);
    if (diagnostics) out.diagnostics.push_back(std::move(res.diagnostics));
    prev = std::move(cur);
  }
  return out;
}

template <class T>
RolloutOutput<T> HelmModel<T>::predict(const std::vector<Tensor>& history, int n_steps, const BoundaryMask* mask,
                                       bool diagnostics) const {
  return rollout(params_.bind(false), history, n_steps, mask, diagnostics);
}

template <class T>
void dump_diagnostics(const std::vector<ScaleDiagnostics<T>>& diag, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write_heads = [&](const TensorT<T>& t, const std::string& stem, std::size_t l) {
    if (!t.defined()) return;
    const auto s = t.shape();
    const std::size_t block = static_cast<std::size_t>(s.c) * s.plane();
    for (int h = 0; h < s.n; ++h) {
      const auto v = t.value().subspan(static_cast<std::size_t>(h) * block, block);
      std::vector<std::size_t> shape{static_cast<std::size_t>(s.h), static_cast<std::size_t>(s.w)};
      if (s.c > 1) shape.insert(shape.begin(), static_cast<std::size_t>(s.c));
      const auto path = dir / (stem + "_l" + std::to_string(l + 1) + "_h" + std::to_string(h + 1) + ".npy");
      write_npy(path, NpyArray::from_f32(shape, std::vector<float>(v.begin(), v.end())));
    }
  };
  for (std::size_t l = 0; l < diag.size(); ++l) {
    write_heads(diag[l].phi, "phi", l);
    write_heads(diag[l].a, "a", l);
    write_heads(diag[l].velocity, "vel", l);
  }
}

template class HelmModel<float>;
template class HelmModel<double>;
template void dump_diagnostics<float>(const std::vector<ScaleDiagnostics<float>>&, const std::filesystem::path&);
template void dump_diagnostics<double>(const std::vector<ScaleDiagnostics<double>>&, const std::filesystem::path&);
template std::vector<std::vector<float>> mask_pyramid<float>(const BoundaryMask&, int);
template std::vector<std::vector<double>> mask_pyramid<double>(const BoundaryMask&, int);

}  // namespace helmfluid::model

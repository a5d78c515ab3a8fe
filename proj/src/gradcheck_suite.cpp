#include "helmfluid/gradcheck_suite.hpp"

#include <algorithm>
#include <random>

#include "helmfluid/helm_model.hpp"

namespace helmfluid {

using TD = ad::Tensor<double>;
using ad::Shape4;

namespace {

class Rand {
 public:
  explicit Rand(std::uint64_t seed) : rng_(seed) {}
  TD normal(Shape4 s, double scale = 1.0) {
    std::normal_distribution<double> d(0.0, scale);
    std::vector<double> v(s.numel());
    for (auto& x : v) x = d(rng_);
    return TD::constant(s, std::move(v));
  }
  // Cell centres plus an offset in (0.15, 0.85) so bilinear samplers stay away from kinks.
  TD positions(int n, int h, int w) {
    const auto id = ad::identity_positions<double>(n, h, w);
    std::uniform_real_distribution<double> d(0.15, 0.85);
    std::vector<double> v(id.value().begin(), id.value().end());
    const auto s = id.shape();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double hi = (i / s.plane()) % 2 == 0 ? w - 1.0 : h - 1.0;
      v[i] = std::min(std::floor(v[i]) + d(rng_), hi - 0.2);
    }
    return TD::constant(s, std::move(v));
  }
  std::vector<double> mask(std::size_t n) {
    std::bernoulli_distribution d(0.7);
    std::vector<double> m(n);
    for (auto& x : m) x = d(rng_) ? 1.0 : 0.0;
    return m;
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace

std::vector<GradCheckEntry> run_gradcheck_suite(double tol, std::uint64_t seed, std::size_t model_samples) {
  Rand r(seed);
  std::vector<GradCheckEntry> out;
  auto check = [&](const std::string& name, const ad::GradFn& fn, const std::vector<TD>& inputs,
                   std::size_t per_input = 0) {
    out.push_back({name, ad::grad_check(fn, inputs, tol, per_input, seed)});
  };
  using V = std::vector<TD>;

  check("conv2d 3x3 pad 1", [](const V& in) { return ad::conv2d(in[0], in[1], in[2], 1, 1); },
        {r.normal({2, 3, 5, 5}), r.normal({4, 3, 3, 3}), r.normal({1, 4, 1, 1})});
  check("conv2d stride 2", [](const V& in) { return ad::conv2d(in[0], in[1], in[2], 2, 1); },
        {r.normal({1, 2, 6, 6}), r.normal({3, 2, 3, 3}), r.normal({1, 3, 1, 1})});
  check("conv2d 1x1", [](const V& in) { return ad::conv2d(in[0], in[1], in[2]); },
        {r.normal({1, 3, 4, 4}), r.normal({2, 3, 1, 1}), r.normal({1, 2, 1, 1})});
  check("gelu", [](const V& in) { return ad::gelu(in[0]); }, {r.normal({1, 2, 4, 4}, 2.0)});
  check("add", [](const V& in) { return ad::add(in[0], in[1]); }, {r.normal({1, 2, 3, 3}), r.normal({1, 2, 3, 3})});
  check("sub", [](const V& in) { return ad::sub(in[0], in[1]); }, {r.normal({1, 2, 3, 3}), r.normal({1, 2, 3, 3})});
  check("mul", [](const V& in) { return ad::mul(in[0], in[1]); }, {r.normal({1, 2, 3, 3}), r.normal({1, 2, 3, 3})});
  check("affine", [](const V& in) { return ad::affine(in[0], 1.7, -0.3); }, {r.normal({1, 2, 3, 3})});
  {
    const auto m = r.mask(16);
    check("mask_multiply", [m](const V& in) { return ad::mask_multiply(in[0], std::span<const double>(m)); },
          {r.normal({2, 2, 4, 4})});
  }
  check("sum", [](const V& in) { return ad::sum(in[0]); }, {r.normal({1, 2, 3, 3})});
  check("reshape", [](const V& in) { return ad::reshape(in[0], Shape4{2, 2, 3, 3}); }, {r.normal({1, 4, 3, 3})});
  check("concat_channels", [](const V& in) { return ad::concat_channels<double>({in[0], in[1]}); },
        {r.normal({2, 1, 3, 3}), r.normal({2, 3, 3, 3})});
  check("slice_channels", [](const V& in) { return ad::slice_channels(in[0], 1, 2); }, {r.normal({2, 4, 3, 3})});
  check("split_channels", [](const V& in) { return ad::mul(ad::split_channels(in[0], 2)[0], ad::split_channels(in[0], 2)[1]); },
        {r.normal({1, 4, 3, 3})});
  check("heads_to_batch", [](const V& in) { return ad::heads_to_batch(in[0], 2); }, {r.normal({2, 4, 3, 3})});
  check("batch_to_heads", [](const V& in) { return ad::batch_to_heads(in[0], 2); }, {r.normal({4, 2, 3, 3})});
  check("upsample2x", [](const V& in) { return ad::upsample2x(in[0]); }, {r.normal({1, 2, 3, 4})});
  check("avgpool2x", [](const V& in) { return ad::avgpool2x(in[0]); }, {r.normal({1, 2, 4, 6})});
  check("neighbor_dot r=1", [](const V& in) { return ad::neighbor_dot(in[0], in[1], 1); },
        {r.normal({2, 3, 4, 4}), r.normal({2, 3, 4, 4})});
  check("neighbor_dot r=2", [](const V& in) { return ad::neighbor_dot(in[0], in[1], 2); },
        {r.normal({1, 2, 5, 5}), r.normal({1, 2, 5, 5})});
  {
    const auto m = r.mask(25);
    check("masked_neighbor_dot",
          [m](const V& in) { return ad::masked_neighbor_dot(in[0], in[1], std::span<const double>(m), 2); },
          {r.normal({1, 2, 5, 5}), r.normal({1, 2, 5, 5})});
  }
  check("helm_compose", [](const V& in) { return ad::helm_compose(in[0], in[1]); },
        {r.normal({2, 1, 5, 5}), r.normal({2, 1, 5, 5})});
  check("grid_sample", [](const V& in) { return ad::grid_sample(in[0], in[1]); },
        {r.normal({1, 2, 6, 6}), r.positions(1, 6, 6)});
  check("forward_splat", [](const V& in) { return ad::forward_splat(in[0], in[1], in[2], 1e-6); },
        {r.normal({1, 2, 6, 6}), r.positions(1, 6, 6), r.normal({1, 2, 6, 6})});
  check("rk2_step", [](const V& in) { return ad::rk2_step(in[0], in[1], 0.8); },
        {r.positions(1, 6, 6), r.normal({1, 2, 6, 6}, 0.2)});
  check("bfecc_positions", [](const V& in) { return ad::bfecc_positions(in[0], 1.0); },
        {r.normal({1, 2, 6, 6}, 0.3)});
  check("mse", [](const V& in) { return ad::mse(in[0], in[1]); }, {r.normal({1, 1, 4, 4}), r.normal({1, 1, 4, 4})});
  check("relative_l2", [](const V& in) { return ad::relative_l2(in[0], in[1]); },
        {r.normal({1, 1, 4, 4}), r.normal({1, 1, 4, 4})});
  {
    const auto m = r.mask(16);
    check("relative_l2 masked",
          [m](const V& in) { return ad::relative_l2(in[0], in[1], std::span<const double>(m)); },
          {r.normal({1, 1, 4, 4}), r.normal({1, 1, 4, 4})});
  }

  for (auto velocity : {model::VelocityMode::helmholtz, model::VelocityMode::direct}) {
    model::ModelConfig cfg;
    cfg.lookback = 2;
    cfg.scales = 2;
    cfg.heads = 2;
    cfg.channels = {8, 16};
    cfg.radius = 1;
    cfg.decoder_hidden = 8;
    cfg.velocity = velocity;
    model::HelmModel<double> m(cfg, seed);
    auto& ps = m.params();
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const auto t = r.normal(ps[i].shape, 0.15);
      ps[i].value.assign(t.value().begin(), t.value().end());
    }
    const auto window = r.normal({1, 3, 8, 8});
    const auto target = r.normal({1, 1, 8, 8});
    GridSpec g(8, 8);
    std::vector<std::uint8_t> inside(g.size(), 1);
    for (int y = 3; y < 5; ++y)
      for (int x = 3; x < 5; ++x) inside[g.index(y, x)] = 0;
    const BoundaryMask mask(g, inside);
    check(std::string("model micro ") + model::to_string(velocity),
          [&m, window, target, mask](const V& p) {
            return ad::relative_l2(m.forward_one_step(p, window, &mask).frame, target);
          },
          ps.bind(true), model_samples);
  }
  return out;
}

}  // namespace helmfluid

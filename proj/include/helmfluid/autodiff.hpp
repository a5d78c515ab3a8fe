#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "helmfluid/field.hpp"

namespace helmfluid::ad {

/// N x C x H x W, row-major with W fastest.
struct Shape4 {
  int n = 1;
  int c = 1;
  int h = 1;
  int w = 1;

  std::size_t numel() const {
    return static_cast<std::size_t>(n) * static_cast<std::size_t>(c) * static_cast<std::size_t>(h) *
           static_cast<std::size_t>(w);
  }
  std::size_t plane() const { return static_cast<std::size_t>(h) * static_cast<std::size_t>(w); }
  bool operator==(const Shape4&) const = default;
  std::string str() const;
};

template <class T>
struct Node {
  Shape4 shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  /// Reads this node's grad and accumulates into the parents' grads.
  std::function<void()> backward_fn;

  T* grad_data() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad.data();
  }
};

/// Enables a finiteness check on every op output (throws DivergenceError naming the op).
void set_debug_checks(bool enabled);
bool debug_checks();

template <class T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor constant(Shape4 shape, std::vector<T> value);
  static Tensor leaf(Shape4 shape, std::vector<T> value, bool requires_grad = true);
  static Tensor zeros(Shape4 shape) { return constant(shape, std::vector<T>(shape.numel(), T(0))); }
  static Tensor full(Shape4 shape, T v) { return constant(shape, std::vector<T>(shape.numel(), v)); }

  bool defined() const { return node_ != nullptr; }
  const Shape4& shape() const { return node_->shape; }
  std::span<const T> value() const { return node_->value; }
  /// Empty when no gradient reached this node.
  std::span<const T> grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  const char* op() const { return node_->op; }
  T item() const;

  /// Reverse-mode sweep from a scalar (numel 1) output, seeded with 1.
  void backward() const;

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& ptr() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Builds an op node. `backward` receives the node and may assume its grad is allocated; it is
/// dropped when no parent requires grad.
template <class T>
Tensor<T> custom_op(const char* name, Shape4 shape, std::vector<T> value, std::vector<Tensor<T>> parents,
                    std::function<void(Node<T>&)> backward);

// Convolution and pointwise -------------------------------------------------

/// Cross-correlation with zero padding. w: (Cout, Cin, kh, kw); b: (1, Cout, 1, 1) or undefined.
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride = 1, int pad = 0);

/// 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
template <class T>
Tensor<T> gelu(const Tensor<T>& x);

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
/// a * x + b
template <class T>
Tensor<T> affine(const Tensor<T>& x, T a, T b = T(0));
template <class T>
Tensor<T> scale(const Tensor<T>& x, T a) {
  return affine(x, a, T(0));
}
/// Multiplies every (n, c) plane by a constant H x W mask.
template <class T>
Tensor<T> mask_multiply(const Tensor<T>& x, std::span<const T> mask_hw);
template <class T>
Tensor<T> sum(const Tensor<T>& x);

// Layout ----------------------------------------------------------------------

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape4 shape);
template <class T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs);
template <class T>
Tensor<T> slice_channels(const Tensor<T>& x, int start, int count);
template <class T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x, int parts);
/// (N, C, H, W) -> (N*M, C/M, H, W); head m of sample n becomes batch entry n*M + m.
template <class T>
Tensor<T> heads_to_batch(const Tensor<T>& x, int heads);
template <class T>
Tensor<T> batch_to_heads(const Tensor<T>& x, int heads);

// Resampling ------------------------------------------------------------------

/// Bilinear x2 upsampling, half-pixel centers (align_corners = false), edge clamped.
template <class T>
Tensor<T> upsample2x(const Tensor<T>& x);
/// 2 x 2 average pooling; H and W must be even.
template <class T>
Tensor<T> avgpool2x(const Tensor<T>& x);

// Correlation -----------------------------------------------------------------

/// out[n, k, y, x] = sum_c a[n, c, y, x] * b[n, c, y + dy, x + dx], zero outside the grid,
/// k = (dy + r) * (2r + 1) + (dx + r).
template <class T>
Tensor<T> neighbor_dot(const Tensor<T>& a, const Tensor<T>& b, int radius);
/// As neighbor_dot with each neighbor weighted by mask(y + dy, x + dx).
template <class T>
Tensor<T> masked_neighbor_dot(const Tensor<T>& a, const Tensor<T>& b, std::span<const T> mask_hw, int radius);

// Fluid operators -------------------------------------------------------------

/// phi, a: (N, 1, H, W) -> (N, 2, H, W) = grad(phi) + curl(a), replicate boundary, unit spacing.
template <class T>
Tensor<T> helm_compose(const Tensor<T>& phi, const Tensor<T>& a);
/// Samples field (N, C, H, W) at positions pos (N, 2, Hp, Wp) (channel 0 = x, 1 = y).
template <class T>
Tensor<T> grid_sample(const Tensor<T>& field, const Tensor<T>& pos,
                      BoundaryMode mode = BoundaryMode::replicate);
/// Splats feat (N, C, H, W) from every cell to pos (N, 2, H, W); cells with accumulated
/// weight <= eps take fallback.
template <class T>
Tensor<T> forward_splat(const Tensor<T>& feat, const Tensor<T>& pos, const Tensor<T>& fallback, T eps,
                        BoundaryMode mode = BoundaryMode::replicate);

/// Cell-center positions (N, 2, H, W).
template <class T>
Tensor<T> identity_positions(int n, int h, int w);
/// Midpoint rule from `pos` through velocity v (N, 2, H, W).
template <class T>
Tensor<T> rk2_step(const Tensor<T>& pos, const Tensor<T>& v, T dt, BoundaryMode mode = BoundaryMode::replicate);
/// Forward RK2, backward RK2 with -v, corrected start r + (r - r_back)/2, final RK2.
template <class T>
Tensor<T> bfecc_positions(const Tensor<T>& v, T dt, BoundaryMode mode = BoundaryMode::replicate);

// Losses ----------------------------------------------------------------------

/// Mean squared error; with a mask the mean runs over masked cells only.
template <class T>
Tensor<T> mse(const Tensor<T>& pred, const Tensor<T>& target, std::span<const T> mask_hw = {});
/// sqrt(sum (pred - target)^2) / sqrt(sum target^2), optionally restricted to mask = 1.
template <class T>
Tensor<T> relative_l2(const Tensor<T>& pred, const Tensor<T>& target, std::span<const T> mask_hw = {});

// Parameters, optimizer, checks ----------------------------------------------

template <class T>
struct Param {
  std::string name;
  Shape4 shape;
  std::vector<T> value;
};

template <class T>
class ParamStore {
 public:
  std::size_t add(std::string name, Shape4 shape, std::vector<T> value);
  std::size_t size() const { return params_.size(); }
  std::size_t count() const;
  std::size_t index_of(const std::string& name) const;
  Param<T>& operator[](std::size_t i) { return params_[i]; }
  const Param<T>& operator[](std::size_t i) const { return params_[i]; }
  const std::vector<Param<T>>& params() const { return params_; }

  /// Fresh leaves wrapping the current values, one graph's worth.
  std::vector<Tensor<T>> bind(bool requires_grad = true) const;
  /// Gradients of bound leaves (zeros where none flowed).
  std::vector<std::vector<T>> gradients(const std::vector<Tensor<T>>& bound) const;

  template <class U>
  ParamStore<U> cast() const;

 private:
  std::vector<Param<T>> params_;
};

template <class T>
struct AdamState {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
};

/// Bias-corrected Adam update in place.
template <class T>
void adam_step(ParamStore<T>& params, const std::vector<std::vector<T>>& grads, AdamState<T>& state);

/// NPY per parameter plus params.json (name -> shape -> file).
template <class T>
void save_params(const ParamStore<T>& params, const std::filesystem::path& dir);
/// Loads into a store with matching names and shapes; throws ShapeError listing offenders.
template <class T>
void load_params(ParamStore<T>& params, const std::filesystem::path& dir);

template <class T>
void save_adam(const AdamState<T>& state, const ParamStore<T>& params, const std::filesystem::path& dir);
template <class T>
void load_adam(AdamState<T>& state, const ParamStore<T>& params, const std::filesystem::path& dir);

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
  bool passed = false;
  std::string worst;
};

using GradFn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

/// Compares analytic gradients of <R, fn(inputs)> (R fixed random) with central differences,
/// h = 1e-5 * max(1, |x|). Per-component error |a - n| / max(|a|, |n|, 1e-3 * max|n|).
/// max_per_input = 0 checks every component; otherwise a seeded random subset.
GradCheckReport grad_check(const GradFn& fn, const std::vector<Tensor<double>>& inputs, double tol,
                           std::size_t max_per_input = 0, std::uint64_t seed = 0);

}  // namespace helmfluid::ad

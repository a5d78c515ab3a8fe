#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

#include "helmfluid/autodiff.hpp"
#include "helmfluid/error.hpp"

namespace helmfluid::ad {

namespace {
std::atomic<bool> g_debug_checks{false};
}

void set_debug_checks(bool enabled) { g_debug_checks = enabled; }
bool debug_checks() { return g_debug_checks; }

std::string Shape4::str() const {
  return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) + ", " + std::to_string(w) +
         ")";
}

template <class T>
Tensor<T> Tensor<T>::constant(Shape4 shape, std::vector<T> value) {
  return leaf(shape, std::move(value), false);
}

template <class T>
Tensor<T> Tensor<T>::leaf(Shape4 shape, std::vector<T> value, bool requires_grad) {
  if (value.size() != shape.numel()) {
    throw ShapeError("tensor data length " + std::to_string(value.size()) + " does not match shape " + shape.str());
  }
  auto n = std::make_shared<Node<T>>();
  n->shape = shape;
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

template <class T>
T Tensor<T>::item() const {
  if (node_->value.size() != 1) throw ShapeError("item() requires a single-element tensor, got " + shape().str());
  return node_->value[0];
}

template <class T>
void Tensor<T>::backward() const {
  if (node_->value.size() != 1) throw ShapeError("backward() requires a scalar output, got " + shape().str());
  if (!node_->requires_grad) return;
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node<T>* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  node_->grad_data()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->backward_fn && !n->grad.empty()) n->backward_fn();
  }
}

template <class T>
Tensor<T> custom_op(const char* name, Shape4 shape, std::vector<T> value, std::vector<Tensor<T>> parents,
                    std::function<void(Node<T>&)> backward) {
  if (value.size() != shape.numel()) throw ShapeError(std::string(name) + ": output length does not match shape");
  if (g_debug_checks) {
    for (const T& v : value) {
      if (!std::isfinite(static_cast<double>(v))) throw DivergenceError(std::string("non-finite output from ") + name);
    }
  }
  auto n = std::make_shared<Node<T>>();
  n->shape = shape;
  n->value = std::move(value);
  n->op = name;
  for (const auto& p : parents) n->requires_grad = n->requires_grad || p.requires_grad();
  if (n->requires_grad) {
    for (const auto& p : parents) n->parents.push_back(p.ptr());
    Node<T>* self = n.get();
    n->backward_fn = [self, bw = std::move(backward)]() { bw(*self); };
  }
  return Tensor<T>(std::move(n));
}

namespace {

template <class T>
T* gptr(const Tensor<T>& t) {
  return t.requires_grad() ? t.node()->grad_data() : nullptr;
}

template <class T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

template <class T>
void require_mask(std::span<const T> mask, const Shape4& s, const char* op) {
  if (!mask.empty() && mask.size() != s.plane()) {
    throw ShapeError(std::string(op) + ": mask has " + std::to_string(mask.size()) + " cells, expected " +
                     std::to_string(s.plane()));
  }
}

}  // namespace

template <class T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  const auto xv = x.value();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double z = xv[i];
    out[i] = static_cast<T>(0.5 * z * (1.0 + std::tanh(k * (z + 0.044715 * z * z * z))));
  }
  return custom_op<T>("gelu", x.shape(), std::move(out), {x}, [x](Node<T>& self) {
    T* gx = gptr(x);
    const auto xv = x.value();
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double z = xv[i];
      const double u = k * (z + 0.044715 * z * z * z);
      const double t = std::tanh(u);
      const double d = 0.5 * (1.0 + t) + 0.5 * z * (1.0 - t * t) * k * (1.0 + 3.0 * 0.044715 * z * z);
      gx[i] += static_cast<T>(d) * self.grad[i];
    }
  });
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a, b, "add");
  std::vector<T> out(a.value().begin(), a.value().end());
  const auto bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return custom_op<T>("add", a.shape(), std::move(out), {a, b}, [a, b](Node<T>& self) {
    for (const auto* t : {&a, &b}) {
      if (T* g = gptr(*t))
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a, b, "sub");
  std::vector<T> out(a.value().begin(), a.value().end());
  const auto bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return custom_op<T>("sub", a.shape(), std::move(out), {a, b}, [a, b](Node<T>& self) {
    if (T* g = gptr(a))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    if (T* g = gptr(b))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
  });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same(a, b, "mul");
  const auto av = a.value(), bv = b.value();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return custom_op<T>("mul", a.shape(), std::move(out), {a, b}, [a, b](Node<T>& self) {
    const auto av = a.value(), bv = b.value();
    if (T* g = gptr(a))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bv[i];
    if (T* g = gptr(b))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * av[i];
  });
}

template <class T>
Tensor<T> affine(const Tensor<T>& x, T alpha, T beta) {
  const auto xv = x.value();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = alpha * xv[i] + beta;
  return custom_op<T>("affine", x.shape(), std::move(out), {x}, [x, alpha](Node<T>& self) {
    T* g = gptr(x);
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += alpha * self.grad[i];
  });
}

template <class T>
Tensor<T> mask_multiply(const Tensor<T>& x, std::span<const T> mask_hw) {
  require_mask(mask_hw, x.shape(), "mask_multiply");
  if (mask_hw.empty()) return x;
  const std::size_t hw = x.shape().plane();
  std::vector<T> mask(mask_hw.begin(), mask_hw.end());
  const auto xv = x.value();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * mask[i % hw];
  return custom_op<T>("mask_multiply", x.shape(), std::move(out), {x}, [x, mask, hw](Node<T>& self) {
    T* g = gptr(x);
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * mask[i % hw];
  });
}

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  T s = 0;
  for (T v : x.value()) s += v;
  return custom_op<T>("sum", Shape4{1, 1, 1, 1}, {s}, {x}, [x](Node<T>& self) {
    T* g = gptr(x);
    const T s = self.grad[0];
    for (std::size_t i = 0; i < x.value().size(); ++i) g[i] += s;
  });
}

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape4 shape) {
  if (shape.numel() != x.shape().numel()) {
    throw ShapeError("reshape: cannot view " + x.shape().str() + " as " + shape.str());
  }
  std::vector<T> out(x.value().begin(), x.value().end());
  return custom_op<T>("reshape", shape, std::move(out), {x}, [x](Node<T>& self) {
    T* g = gptr(x);
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
  });
}

template <class T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs) {
  if (xs.empty()) throw ShapeError("concat_channels: no inputs");
  Shape4 s = xs.front().shape();
  s.c = 0;
  for (const auto& x : xs) {
    const auto& xs_ = x.shape();
    if (xs_.n != s.n || xs_.h != s.h || xs_.w != s.w) {
      throw ShapeError("concat_channels: mismatched " + xs.front().shape().str() + " vs " + xs_.str());
    }
    s.c += xs_.c;
  }
  const std::size_t hw = s.plane();
  std::vector<T> out(s.numel());
  for (int n = 0; n < s.n; ++n) {
    std::size_t off = static_cast<std::size_t>(n) * s.c * hw;
    for (const auto& x : xs) {
      const std::size_t len = static_cast<std::size_t>(x.shape().c) * hw;
      std::copy_n(x.value().data() + static_cast<std::size_t>(n) * len, len, out.data() + off);
      off += len;
    }
  }
  return custom_op<T>("concat_channels", s, std::move(out), xs, [xs, s, hw](Node<T>& self) {
    for (int n = 0; n < s.n; ++n) {
      std::size_t off = static_cast<std::size_t>(n) * s.c * hw;
      for (const auto& x : xs) {
        const std::size_t len = static_cast<std::size_t>(x.shape().c) * hw;
        if (T* g = gptr(x)) {
          T* dst = g + static_cast<std::size_t>(n) * len;
          for (std::size_t i = 0; i < len; ++i) dst[i] += self.grad[off + i];
        }
        off += len;
      }
    }
  });
}

template <class T>
Tensor<T> slice_channels(const Tensor<T>& x, int start, int count) {
  const Shape4 in = x.shape();
  if (start < 0 || count < 1 || start + count > in.c) {
    throw ShapeError("slice_channels: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                     ") out of range for " + in.str());
  }
  Shape4 s = in;
  s.c = count;
  const std::size_t hw = in.plane();
  const std::size_t len = static_cast<std::size_t>(count) * hw;
  std::vector<T> out(s.numel());
  for (int n = 0; n < in.n; ++n) {
    std::copy_n(x.value().data() + (static_cast<std::size_t>(n) * in.c + start) * hw, len,
                out.data() + static_cast<std::size_t>(n) * len);
  }
  return custom_op<T>("slice_channels", s, std::move(out), {x}, [x, in, start, len, hw](Node<T>& self) {
    T* g = gptr(x);
    for (int n = 0; n < in.n; ++n) {
      T* dst = g + (static_cast<std::size_t>(n) * in.c + start) * hw;
      const T* src = self.grad.data() + static_cast<std::size_t>(n) * len;
      for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
    }
  });
}

template <class T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& x, int parts) {
  if (parts < 1 || x.shape().c % parts != 0) {
    throw ShapeError("split_channels: " + std::to_string(x.shape().c) + " channels not divisible by " +
                     std::to_string(parts));
  }
  const int per = x.shape().c / parts;
  std::vector<Tensor<T>> out;
  for (int p = 0; p < parts; ++p) out.push_back(slice_channels(x, p * per, per));
  return out;
}

template <class T>
Tensor<T> heads_to_batch(const Tensor<T>& x, int heads) {
  const Shape4 s = x.shape();
  if (heads < 1 || s.c % heads != 0) {
    throw ShapeError("heads_to_batch: " + std::to_string(s.c) + " channels not divisible by " +
                     std::to_string(heads));
  }
  // Channel-major layout makes this a pure view change.
  return reshape(x, Shape4{s.n * heads, s.c / heads, s.h, s.w});
}

template <class T>
Tensor<T> batch_to_heads(const Tensor<T>& x, int heads) {
  const Shape4 s = x.shape();
  if (heads < 1 || s.n % heads != 0) throw ShapeError("batch_to_heads: batch not divisible by heads");
  return reshape(x, Shape4{s.n / heads, s.c * heads, s.h, s.w});
}

template <class T>
Tensor<T> mse(const Tensor<T>& pred, const Tensor<T>& target, std::span<const T> mask_hw) {
  require_same(pred, target, "mse");
  require_mask(mask_hw, pred.shape(), "mse");
  const std::size_t hw = pred.shape().plane();
  std::vector<T> mask(mask_hw.begin(), mask_hw.end());
  const auto pv = pred.value(), tv = target.value();
  double acc = 0.0, count = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double m = mask.empty() ? 1.0 : mask[i % hw];
    const double d = static_cast<double>(pv[i]) - tv[i];
    acc += m * d * d;
    count += m;
  }
  if (count == 0.0) throw InputError("mse: empty region");
  return custom_op<T>("mse", Shape4{1, 1, 1, 1}, {static_cast<T>(acc / count)}, {pred, target},
                      [pred, target, mask, hw, count](Node<T>& self) {
                        const auto pv = pred.value(), tv = target.value();
                        const double s = 2.0 * self.grad[0] / count;
                        T* gp = gptr(pred);
                        T* gt = gptr(target);
                        for (std::size_t i = 0; i < pv.size(); ++i) {
                          const double m = mask.empty() ? 1.0 : mask[i % hw];
                          const T d = static_cast<T>(s * m * (static_cast<double>(pv[i]) - tv[i]));
                          if (gp) gp[i] += d;
                          if (gt) gt[i] -= d;
                        }
                      });
}

template <class T>
Tensor<T> relative_l2(const Tensor<T>& pred, const Tensor<T>& target, std::span<const T> mask_hw) {
  require_same(pred, target, "relative_l2");
  require_mask(mask_hw, pred.shape(), "relative_l2");
  const std::size_t hw = pred.shape().plane();
  std::vector<T> mask(mask_hw.begin(), mask_hw.end());
  const auto pv = pred.value(), tv = target.value();
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double m = mask.empty() ? 1.0 : mask[i % hw];
    const double d = static_cast<double>(pv[i]) - tv[i];
    num += m * d * d;
    den += m * static_cast<double>(tv[i]) * tv[i];
  }
  if (den == 0.0) throw InputError("relative_l2: target has zero norm over the region");
  const double sn = std::sqrt(num), sd = std::sqrt(den);
  return custom_op<T>(
      "relative_l2", Shape4{1, 1, 1, 1}, {static_cast<T>(sn / sd)}, {pred, target},
      [pred, target, mask, hw, sn, sd](Node<T>& self) {
        const auto pv = pred.value(), tv = target.value();
        const double g = self.grad[0];
        T* gp = gptr(pred);
        T* gt = gptr(target);
        const double a = sn > 0.0 ? g / (sn * sd) : 0.0;
        const double b = g * sn / (sd * sd * sd);
        for (std::size_t i = 0; i < pv.size(); ++i) {
          const double m = mask.empty() ? 1.0 : mask[i % hw];
          const double d = static_cast<double>(pv[i]) - tv[i];
          if (gp) gp[i] += static_cast<T>(a * m * d);
          if (gt) gt[i] += static_cast<T>(-a * m * d - b * m * tv[i]);
        }
      });
}

#define HELMFLUID_AD_INSTANTIATE(T)                                                                       \
  template class Tensor<T>;                                                                               \
  template Tensor<T> custom_op<T>(const char*, Shape4, std::vector<T>, std::vector<Tensor<T>>,           \
                                  std::function<void(Node<T>&)>);                                         \
  template Tensor<T> gelu<T>(const Tensor<T>&);                                                           \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> affine<T>(const Tensor<T>&, T, T);                                                   \
  template Tensor<T> mask_multiply<T>(const Tensor<T>&, std::span<const T>);                              \
  template Tensor<T> sum<T>(const Tensor<T>&);                                                            \
  template Tensor<T> reshape<T>(const Tensor<T>&, Shape4);                                                \
  template Tensor<T> concat_channels<T>(const std::vector<Tensor<T>>&);                                   \
  template Tensor<T> slice_channels<T>(const Tensor<T>&, int, int);                                       \
  template std::vector<Tensor<T>> split_channels<T>(const Tensor<T>&, int);                               \
  template Tensor<T> heads_to_batch<T>(const Tensor<T>&, int);                                            \
  template Tensor<T> batch_to_heads<T>(const Tensor<T>&, int);                                            \
  template Tensor<T> mse<T>(const Tensor<T>&, const Tensor<T>&, std::span<const T>);                      \
  template Tensor<T> relative_l2<T>(const Tensor<T>&, const Tensor<T>&, std::span<const T>);

HELMFLUID_AD_INSTANTIATE(float)
HELMFLUID_AD_INSTANTIATE(double)

}  // namespace helmfluid::ad

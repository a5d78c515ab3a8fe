#include <algorithm>
#include <cmath>

#include "helmfluid/autodiff.hpp"
#include "helmfluid/diffops.hpp"
#include "helmfluid/error.hpp"

namespace helmfluid::ad {

namespace {

template <class T>
Tensor<T> correlate(const char* name, const Tensor<T>& a, const Tensor<T>& b, std::vector<T> mask, int radius) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError(std::string(name) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
  if (radius < 0) throw ShapeError(std::string(name) + ": radius must be >= 0");
  const Shape4 s = a.shape();
  if (!mask.empty() && mask.size() != s.plane()) throw ShapeError(std::string(name) + ": mask size mismatch");
  const int side = 2 * radius + 1;
  const int k_count = side * side;
  const Shape4 os{s.n, k_count, s.h, s.w};
  const std::size_t hw = s.plane();

  // Visits every valid (output cell, neighbor) pair of offset (dy, dx).
  auto for_offsets = [radius, side, s](auto&& body) {
    for (int dy = -radius; dy <= radius; ++dy) {
      for (int dx = -radius; dx <= radius; ++dx) {
        const int k = (dy + radius) * side + (dx + radius);
        const int y0 = std::max(0, -dy), y1 = std::min(s.h, s.h - dy);
        const int x0 = std::max(0, -dx), x1 = std::min(s.w, s.w - dx);
        body(k, dy, dx, y0, y1, x0, x1);
      }
    }
  };

  std::vector<T> out(os.numel(), T(0));
  const auto av = a.value(), bv = b.value();
  for (int n = 0; n < s.n; ++n) {
    for_offsets([&](int k, int dy, int dx, int y0, int y1, int x0, int x1) {
      T* o = out.data() + (static_cast<std::size_t>(n) * k_count + k) * hw;
      for (int c = 0; c < s.c; ++c) {
        const T* ap = av.data() + (static_cast<std::size_t>(n) * s.c + c) * hw;
        const T* bp = bv.data() + (static_cast<std::size_t>(n) * s.c + c) * hw;
        for (int y = y0; y < y1; ++y) {
          const int row = y * s.w, nrow = (y + dy) * s.w + dx;
          if (mask.empty()) {
            for (int x = x0; x < x1; ++x) o[row + x] += ap[row + x] * bp[nrow + x];
          } else {
            for (int x = x0; x < x1; ++x) o[row + x] += ap[row + x] * (bp[nrow + x] * mask[nrow + x]);
          }
        }
      }
    });
  }
  return custom_op<T>(name, os, std::move(out), {a, b},
                      [a, b, mask = std::move(mask), for_offsets, s, hw, k_count](Node<T>& self) {
                        const auto av = a.value(), bv = b.value();
                        T* ga = a.requires_grad() ? a.node()->grad_data() : nullptr;
                        T* gb = b.requires_grad() ? b.node()->grad_data() : nullptr;
                        for (int n = 0; n < s.n; ++n) {
                          for_offsets([&](int k, int dy, int dx, int y0, int y1, int x0, int x1) {
                            const T* g = self.grad.data() + (static_cast<std::size_t>(n) * k_count + k) * hw;
                            for (int c = 0; c < s.c; ++c) {
                              const std::size_t off = (static_cast<std::size_t>(n) * s.c + c) * hw;
                              for (int y = y0; y < y1; ++y) {
                                const int row = y * s.w, nrow = (y + dy) * s.w + dx;
                                for (int x = x0; x < x1; ++x) {
                                  const T gm = mask.empty() ? g[row + x] : g[row + x] * mask[nrow + x];
                                  if (ga) ga[off + row + x] += gm * bv[off + nrow + x];
                                  if (gb) gb[off + nrow + x] += gm * av[off + row + x];
                                }
                              }
                            }
                          });
                        }
                      });
}

}  // namespace

template <class T>
Tensor<T> neighbor_dot(const Tensor<T>& a, const Tensor<T>& b, int radius) {
  return correlate<T>("neighbor_dot", a, b, {}, radius);
}

template <class T>
Tensor<T> masked_neighbor_dot(const Tensor<T>& a, const Tensor<T>& b, std::span<const T> mask_hw, int radius) {
  if (mask_hw.size() != a.shape().plane()) {
    throw ShapeError("masked_neighbor_dot: mask has " + std::to_string(mask_hw.size()) + " cells, expected " +
                     std::to_string(a.shape().plane()));
  }
  return correlate<T>("masked_neighbor_dot", a, b, std::vector<T>(mask_hw.begin(), mask_hw.end()), radius);
}

template <class T>
Tensor<T> helm_compose(const Tensor<T>& phi, const Tensor<T>& a) {
  const Shape4 s = phi.shape();
  if (s.c != 1 || !(a.shape() == s)) {
    throw ShapeError("helm_compose: expected matching (N, 1, H, W) inputs, got " + s.str() + " and " +
                     a.shape().str());
  }
  const Shape4 os{s.n, 2, s.h, s.w};
  const std::size_t hw = s.plane();
  const auto mode = BoundaryMode::replicate;
  std::vector<T> out(os.numel());
  std::vector<T> tmp(hw);
  for (int n = 0; n < s.n; ++n) {
    std::span<const T> p = phi.value().subspan(n * hw, hw), q = a.value().subspan(n * hw, hw);
    std::span<T> u(out.data() + 2 * n * hw, hw), v(out.data() + (2 * n + 1) * hw, hw);
    diffops::derivative_x<T>(p, s.h, s.w, 1.0, mode, u);
    diffops::derivative_y<T>(q, s.h, s.w, 1.0, mode, tmp);
    for (std::size_t i = 0; i < hw; ++i) u[i] += tmp[i];
    diffops::derivative_y<T>(p, s.h, s.w, 1.0, mode, v);
    diffops::derivative_x<T>(q, s.h, s.w, 1.0, mode, tmp);
    for (std::size_t i = 0; i < hw; ++i) v[i] -= tmp[i];
  }
  return custom_op<T>("helm_compose", os, std::move(out), {phi, a}, [phi, a, s, hw](Node<T>& self) {
    const auto mode = BoundaryMode::replicate;
    T* gp = phi.requires_grad() ? phi.node()->grad_data() : nullptr;
    T* ga = a.requires_grad() ? a.node()->grad_data() : nullptr;
    std::vector<T> neg(hw);
    for (int n = 0; n < s.n; ++n) {
      std::span<const T> gu(self.grad.data() + 2 * n * hw, hw), gv(self.grad.data() + (2 * n + 1) * hw, hw);
      if (gp) {
        std::span<T> dst(gp + n * hw, hw);
        diffops::derivative_x_adjoint<T>(gu, s.h, s.w, 1.0, mode, dst);
        diffops::derivative_y_adjoint<T>(gv, s.h, s.w, 1.0, mode, dst);
      }
      if (ga) {
        std::span<T> dst(ga + n * hw, hw);
        for (std::size_t i = 0; i < hw; ++i) neg[i] = -gv[i];
        diffops::derivative_y_adjoint<T>(gu, s.h, s.w, 1.0, mode, dst);
        diffops::derivative_x_adjoint<T>(std::span<const T>(neg), s.h, s.w, 1.0, mode, dst);
      }
    }
  });
}

template <class T>
Tensor<T> grid_sample(const Tensor<T>& field, const Tensor<T>& pos, BoundaryMode mode) {
  const Shape4 fs = field.shape(), ps = pos.shape();
  if (ps.c != 2 || ps.n != fs.n) {
    throw ShapeError("grid_sample: positions " + ps.str() + " incompatible with field " + fs.str());
  }
  const Shape4 os{fs.n, fs.c, ps.h, ps.w};
  const std::size_t fhw = fs.plane(), phw = ps.plane();
  std::vector<T> out(os.numel());
  const auto fv = field.value(), pv = pos.value();
  for (int n = 0; n < fs.n; ++n) {
    const T* px = pv.data() + 2 * n * phw;
    const T* py = px + phw;
    for (std::size_t q = 0; q < phw; ++q) {
      const auto st = bilinear_stencil<T>(fs.h, fs.w, mode, px[q], py[q]);
      for (int c = 0; c < fs.c; ++c) {
        const T* f = fv.data() + (static_cast<std::size_t>(n) * fs.c + c) * fhw;
        T acc = 0;
        for (int k = 0; k < 4; ++k) acc += st.weight[k] * f[st.index[k]];
        out[(static_cast<std::size_t>(n) * fs.c + c) * phw + q] = acc;
      }
    }
  }
  return custom_op<T>("grid_sample", os, std::move(out), {field, pos}, [field, pos, mode, fhw, phw](Node<T>& self) {
    const Shape4 fs = field.shape();
    const auto fv = field.value(), pv = pos.value();
    T* gf = field.requires_grad() ? field.node()->grad_data() : nullptr;
    T* gp = pos.requires_grad() ? pos.node()->grad_data() : nullptr;
    for (int n = 0; n < fs.n; ++n) {
      const T* px = pv.data() + 2 * n * phw;
      const T* py = px + phw;
      for (std::size_t q = 0; q < phw; ++q) {
        const auto st = bilinear_stencil<T>(fs.h, fs.w, mode, px[q], py[q]);
        T dx = 0, dy = 0;
        for (int c = 0; c < fs.c; ++c) {
          const std::size_t fo = (static_cast<std::size_t>(n) * fs.c + c) * fhw;
          const T g = self.grad[(static_cast<std::size_t>(n) * fs.c + c) * phw + q];
          for (int k = 0; k < 4; ++k) {
            if (gf) gf[fo + st.index[k]] += st.weight[k] * g;
            dx += st.dwdx[k] * fv[fo + st.index[k]] * g;
            dy += st.dwdy[k] * fv[fo + st.index[k]] * g;
          }
        }
        if (gp) {
          gp[2 * n * phw + q] += dx;
          gp[(2 * n + 1) * phw + q] += dy;
        }
      }
    }
  });
}

template <class T>
Tensor<T> forward_splat(const Tensor<T>& feat, const Tensor<T>& pos, const Tensor<T>& fallback, T eps,
                        BoundaryMode mode) {
  const Shape4 fs = feat.shape();
  if (!(pos.shape() == Shape4{fs.n, 2, fs.h, fs.w}) || !(fallback.shape() == fs)) {
    throw ShapeError("forward_splat: incompatible shapes " + fs.str() + ", " + pos.shape().str() + ", " +
                     fallback.shape().str());
  }
  const std::size_t hw = fs.plane();
  const std::size_t chw = static_cast<std::size_t>(fs.c) * hw;
  std::vector<T> mass(static_cast<std::size_t>(fs.n) * chw, T(0)), weight(static_cast<std::size_t>(fs.n) * hw, T(0));
  const auto fv = feat.value(), pv = pos.value();
  for (int n = 0; n < fs.n; ++n) {
    const T* px = pv.data() + 2 * n * hw;
    const T* py = px + hw;
    T* m = mass.data() + n * chw;
    T* w = weight.data() + n * hw;
    const T* f = fv.data() + n * chw;
    for (std::size_t s = 0; s < hw; ++s) {
      const auto st = bilinear_stencil<T>(fs.h, fs.w, mode, px[s], py[s]);
      for (int k = 0; k < 4; ++k) {
        w[st.index[k]] += st.weight[k];
        for (int c = 0; c < fs.c; ++c) m[c * hw + st.index[k]] += st.weight[k] * f[c * hw + s];
      }
    }
  }
  std::vector<T> out(mass.size());
  const auto bv = fallback.value();
  for (int n = 0; n < fs.n; ++n) {
    for (int c = 0; c < fs.c; ++c) {
      for (std::size_t t = 0; t < hw; ++t) {
        const std::size_t i = n * chw + c * hw + t;
        const T w = weight[n * hw + t];
        out[i] = w > eps ? mass[i] / w : bv[i];
      }
    }
  }
  return custom_op<T>(
      "forward_splat", fs, std::move(out), {feat, pos, fallback},
      [feat, pos, fallback, eps, mode, hw, chw, mass = std::move(mass), weight = std::move(weight)](Node<T>& self) {
        const Shape4 fs = feat.shape();
        const auto fv = feat.value(), pv = pos.value();
        T* gf = feat.requires_grad() ? feat.node()->grad_data() : nullptr;
        T* gp = pos.requires_grad() ? pos.node()->grad_data() : nullptr;
        T* gb = fallback.requires_grad() ? fallback.node()->grad_data() : nullptr;
        std::vector<T> dm(chw), dw(hw);
        for (int n = 0; n < fs.n; ++n) {
          std::fill(dw.begin(), dw.end(), T(0));
          for (int c = 0; c < fs.c; ++c) {
            for (std::size_t t = 0; t < hw; ++t) {
              const std::size_t i = n * chw + c * hw + t;
              const T w = weight[n * hw + t];
              const T g = self.grad[i];
              if (w > eps) {
                dm[c * hw + t] = g / w;
                dw[t] -= g * mass[i] / (w * w);
              } else {
                dm[c * hw + t] = 0;
                if (gb) gb[i] += g;
              }
            }
          }
          if (!gf && !gp) continue;
          const T* px = pv.data() + 2 * n * hw;
          const T* py = px + hw;
          const T* f = fv.data() + n * chw;
          for (std::size_t s = 0; s < hw; ++s) {
            const auto st = bilinear_stencil<T>(fs.h, fs.w, mode, px[s], py[s]);
            T ax = 0, ay = 0;
            for (int k = 0; k < 4; ++k) {
              const std::size_t t = st.index[k];
              T q = dw[t];
              for (int c = 0; c < fs.c; ++c) {
                q += f[c * hw + s] * dm[c * hw + t];
                if (gf) gf[n * chw + c * hw + s] += st.weight[k] * dm[c * hw + t];
              }
              ax += st.dwdx[k] * q;
              ay += st.dwdy[k] * q;
            }
            if (gp) {
              gp[2 * n * hw + s] += ax;
              gp[(2 * n + 1) * hw + s] += ay;
            }
          }
        }
      });
}

template <class T>
Tensor<T> identity_positions(int n, int h, int w) {
  const Shape4 s{n, 2, h, w};
  std::vector<T> v(s.numel());
  const std::size_t hw = s.plane();
  for (int b = 0; b < n; ++b) {
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        v[2 * b * hw + r * w + c] = static_cast<T>(c);
        v[(2 * b + 1) * hw + r * w + c] = static_cast<T>(r);
      }
    }
  }
  return Tensor<T>::constant(s, std::move(v));
}

template <class T>
Tensor<T> rk2_step(const Tensor<T>& pos, const Tensor<T>& v, T dt, BoundaryMode mode) {
  const auto k1 = grid_sample(v, pos, mode);
  const auto mid = add(pos, scale(k1, dt / 2));
  return add(pos, scale(grid_sample(v, mid, mode), dt));
}

template <class T>
Tensor<T> bfecc_positions(const Tensor<T>& v, T dt, BoundaryMode mode) {
  const Shape4 s = v.shape();
  if (s.c != 2) throw ShapeError("bfecc_positions: velocity must have 2 channels, got " + s.str());
  const auto id = identity_positions<T>(s.n, s.h, s.w);
  const auto fwd = rk2_step(id, v, dt, mode);
  const auto back = rk2_step(fwd, scale(v, T(-1)), dt, mode);
  const auto corrected = sub(affine(id, T(1.5)), scale(back, T(0.5)));
  return rk2_step(corrected, v, dt, mode);
}

#define HELMFLUID_AD_FLUID_INSTANTIATE(T)                                                                     \
  template Tensor<T> neighbor_dot<T>(const Tensor<T>&, const Tensor<T>&, int);                              \
  template Tensor<T> masked_neighbor_dot<T>(const Tensor<T>&, const Tensor<T>&, std::span<const T>, int);   \
  template Tensor<T> helm_compose<T>(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> grid_sample<T>(const Tensor<T>&, const Tensor<T>&, BoundaryMode);                      \
  template Tensor<T> forward_splat<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T, BoundaryMode); \
  template Tensor<T> identity_positions<T>(int, int, int);                                                  \
  template Tensor<T> rk2_step<T>(const Tensor<T>&, const Tensor<T>&, T, BoundaryMode);                      \
  template Tensor<T> bfecc_positions<T>(const Tensor<T>&, T, BoundaryMode);

HELMFLUID_AD_FLUID_INSTANTIATE(float)
HELMFLUID_AD_FLUID_INSTANTIATE(double)

}  // namespace helmfluid::ad

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "helmfluid/autodiff.hpp"
#include "helmfluid/error.hpp"

namespace helmfluid::ad {

namespace {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapM = Eigen::Map<RowMatrix<T>>;
template <class T>
using CMapM = Eigen::Map<const RowMatrix<T>>;

struct ConvGeom {
  int cin, h, w, kh, kw, stride, pad, ho, wo;
  std::size_t rows() const { return static_cast<std::size_t>(cin) * kh * kw; }
  std::size_t cols() const { return static_cast<std::size_t>(ho) * wo; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

template <class T>
void im2col(const T* x, const ConvGeom& g, T* col) {
  std::size_t row = 0;
  for (int c = 0; c < g.cin; ++c) {
    const T* plane = x + static_cast<std::size_t>(c) * g.h * g.w;
    for (int ky = 0; ky < g.kh; ++ky) {
      for (int kx = 0; kx < g.kw; ++kx, ++row) {
        T* dst = col + row * g.cols();
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          T* d = dst + static_cast<std::size_t>(oy) * g.wo;
          if (iy < 0 || iy >= g.h) {
            std::fill_n(d, g.wo, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * g.w;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            d[ox] = (ix < 0 || ix >= g.w) ? T(0) : src[ix];
          }
        }
      }
    }
  }
}

template <class T>
void col2im(const T* col, const ConvGeom& g, T* x) {
  std::size_t row = 0;
  for (int c = 0; c < g.cin; ++c) {
    T* plane = x + static_cast<std::size_t>(c) * g.h * g.w;
    for (int ky = 0; ky < g.kh; ++ky) {
      for (int kx = 0; kx < g.kw; ++kx, ++row) {
        const T* src = col + row * g.cols();
        for (int oy = 0; oy < g.ho; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.h) continue;
          T* dst = plane + static_cast<std::size_t>(iy) * g.w;
          const T* s = src + static_cast<std::size_t>(oy) * g.wo;
          for (int ox = 0; ox < g.wo; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.w) dst[ix] += s[ox];
          }
        }
      }
    }
  }
}

}  // namespace

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride, int pad) {
  const Shape4 xs = x.shape(), ws = w.shape();
  if (ws.c != xs.c) {
    throw ShapeError("conv2d: input has " + std::to_string(xs.c) + " channels, kernel expects " +
                     std::to_string(ws.c));
  }
  if (b.defined() && !(b.shape() == Shape4{1, ws.n, 1, 1})) throw ShapeError("conv2d: bias shape " + b.shape().str());
  if (stride < 1 || pad < 0) throw ShapeError("conv2d: invalid stride/pad");
  ConvGeom g{xs.c, xs.h, xs.w, ws.h, ws.w, stride, pad, 0, 0};
  g.ho = (xs.h + 2 * pad - ws.h) / stride + 1;
  g.wo = (xs.w + 2 * pad - ws.w) / stride + 1;
  if (g.ho < 1 || g.wo < 1) throw ShapeError("conv2d: kernel larger than padded input");
  const int cout = ws.n;
  const Shape4 os{xs.n, cout, g.ho, g.wo};
  const std::size_t in_stride = static_cast<std::size_t>(xs.c) * xs.h * xs.w;
  const std::size_t out_stride = static_cast<std::size_t>(cout) * g.cols();

  std::vector<T> cols;
  if (!g.pointwise()) {
    cols.resize(static_cast<std::size_t>(xs.n) * g.rows() * g.cols());
    for (int n = 0; n < xs.n; ++n)
      im2col(x.value().data() + n * in_stride, g, cols.data() + static_cast<std::size_t>(n) * g.rows() * g.cols());
  }
  std::vector<T> out(os.numel());
  CMapM<T> W(w.value().data(), cout, static_cast<Eigen::Index>(g.rows()));
  for (int n = 0; n < xs.n; ++n) {
    const T* cp = g.pointwise() ? x.value().data() + n * in_stride
                                : cols.data() + static_cast<std::size_t>(n) * g.rows() * g.cols();
    CMapM<T> C(cp, static_cast<Eigen::Index>(g.rows()), static_cast<Eigen::Index>(g.cols()));
    MapM<T> O(out.data() + n * out_stride, cout, static_cast<Eigen::Index>(g.cols()));
    O.noalias() = W * C;
    if (b.defined()) {
      for (int o = 0; o < cout; ++o) O.row(o).array() += b.value()[static_cast<std::size_t>(o)];
    }
  }

  const bool any = x.requires_grad() || w.requires_grad() || (b.defined() && b.requires_grad());
  if (!any) cols.clear();
  std::vector<Tensor<T>> parents{x, w};
  if (b.defined()) parents.push_back(b);
  return custom_op<T>(
      "conv2d", os, std::move(out), parents,
      [x, w, b, g, cout, in_stride, out_stride, cols = std::move(cols)](Node<T>& self) {
        const Shape4 xs = x.shape();
        const auto rows = static_cast<Eigen::Index>(g.rows()), ncol = static_cast<Eigen::Index>(g.cols());
        CMapM<T> W(w.value().data(), cout, rows);
        std::vector<T> dcol;
        T* gx = x.requires_grad() ? x.node()->grad_data() : nullptr;
        T* gw = w.requires_grad() ? w.node()->grad_data() : nullptr;
        T* gb = b.defined() && b.requires_grad() ? b.node()->grad_data() : nullptr;
        if (gx && !g.pointwise()) dcol.resize(g.rows() * g.cols());
        for (int n = 0; n < xs.n; ++n) {
          CMapM<T> G(self.grad.data() + n * out_stride, cout, ncol);
          const T* cp = g.pointwise() ? x.value().data() + n * in_stride
                                      : cols.data() + static_cast<std::size_t>(n) * g.rows() * g.cols();
          CMapM<T> C(cp, rows, ncol);
          if (gw) {
            MapM<T> GW(gw, cout, rows);
            GW.noalias() += G * C.transpose();
          }
          if (gb) {
            for (int o = 0; o < cout; ++o) {
              const T* row = self.grad.data() + n * out_stride + static_cast<std::size_t>(o) * ncol;
              T acc = T(0);
              for (long k = 0; k < static_cast<long>(ncol); ++k) acc += row[k];
              gb[o] += acc;
            }
          }
          if (gx) {
            if (g.pointwise()) {
              MapM<T> GX(gx + n * in_stride, rows, ncol);
              GX.noalias() += W.transpose() * G;
            } else {
              MapM<T> DC(dcol.data(), rows, ncol);
              DC.noalias() = W.transpose() * G;
              col2im(dcol.data(), g, gx + n * in_stride);
            }
          }
        }
      });
}

namespace {

// Source index pair and weight for x2 upsampling with half-pixel centers.
struct UpTap {
  int i0, i1;
  double l1;
};

std::vector<UpTap> up_taps(int n_in) {
  std::vector<UpTap> taps(static_cast<std::size_t>(2 * n_in));
  for (int o = 0; o < 2 * n_in; ++o) {
    double src = (o + 0.5) / 2.0 - 0.5;
    if (src < 0) src = 0;
    const int i0 = std::min(static_cast<int>(std::floor(src)), n_in - 1);
    const int i1 = std::min(i0 + 1, n_in - 1);
    taps[static_cast<std::size_t>(o)] = {i0, i1, src - i0};
  }
  return taps;
}

}  // namespace

template <class T>
Tensor<T> upsample2x(const Tensor<T>& x) {
  const Shape4 in = x.shape();
  const Shape4 os{in.n, in.c, in.h * 2, in.w * 2};
  const auto ty = up_taps(in.h), tx = up_taps(in.w);
  const std::size_t planes = static_cast<std::size_t>(in.n) * in.c;
  std::vector<T> out(os.numel());
  const auto xv = x.value();
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = xv.data() + p * in.plane();
    T* dst = out.data() + p * os.plane();
    for (int oy = 0; oy < os.h; ++oy) {
      const auto& a = ty[static_cast<std::size_t>(oy)];
      for (int ox = 0; ox < os.w; ++ox) {
        const auto& b = tx[static_cast<std::size_t>(ox)];
        const double v0 = (1 - b.l1) * src[a.i0 * in.w + b.i0] + b.l1 * src[a.i0 * in.w + b.i1];
        const double v1 = (1 - b.l1) * src[a.i1 * in.w + b.i0] + b.l1 * src[a.i1 * in.w + b.i1];
        dst[oy * os.w + ox] = static_cast<T>((1 - a.l1) * v0 + a.l1 * v1);
      }
    }
  }
  return custom_op<T>("upsample2x", os, std::move(out), {x}, [x, ty, tx, planes](Node<T>& self) {
    const Shape4 in = x.shape();
    const int ow = in.w * 2, oh = in.h * 2;
    T* g = x.node()->grad_data();
    for (std::size_t p = 0; p < planes; ++p) {
      T* dst = g + p * in.plane();
      const T* src = self.grad.data() + p * static_cast<std::size_t>(oh) * ow;
      for (int oy = 0; oy < oh; ++oy) {
        const auto& a = ty[static_cast<std::size_t>(oy)];
        for (int ox = 0; ox < ow; ++ox) {
          const auto& b = tx[static_cast<std::size_t>(ox)];
          const double s = src[oy * ow + ox];
          dst[a.i0 * in.w + b.i0] += static_cast<T>(s * (1 - a.l1) * (1 - b.l1));
          dst[a.i0 * in.w + b.i1] += static_cast<T>(s * (1 - a.l1) * b.l1);
          dst[a.i1 * in.w + b.i0] += static_cast<T>(s * a.l1 * (1 - b.l1));
          dst[a.i1 * in.w + b.i1] += static_cast<T>(s * a.l1 * b.l1);
        }
      }
    }
  });
}

template <class T>
Tensor<T> avgpool2x(const Tensor<T>& x) {
  const Shape4 in = x.shape();
  if (in.h % 2 || in.w % 2) throw ShapeError("avgpool2x: spatial size must be even, got " + in.str());
  const Shape4 os{in.n, in.c, in.h / 2, in.w / 2};
  const std::size_t planes = static_cast<std::size_t>(in.n) * in.c;
  std::vector<T> out(os.numel());
  const auto xv = x.value();
  for (std::size_t p = 0; p < planes; ++p) {
    const T* src = xv.data() + p * in.plane();
    T* dst = out.data() + p * os.plane();
    for (int y = 0; y < os.h; ++y)
      for (int c = 0; c < os.w; ++c)
        dst[y * os.w + c] = T(0.25) * (src[2 * y * in.w + 2 * c] + src[2 * y * in.w + 2 * c + 1] +
                                       src[(2 * y + 1) * in.w + 2 * c] + src[(2 * y + 1) * in.w + 2 * c + 1]);
  }
  return custom_op<T>("avgpool2x", os, std::move(out), {x}, [x, os, planes](Node<T>& self) {
    const Shape4 in = x.shape();
    T* g = x.node()->grad_data();
    for (std::size_t p = 0; p < planes; ++p) {
      T* dst = g + p * in.plane();
      const T* src = self.grad.data() + p * os.plane();
      for (int y = 0; y < os.h; ++y) {
        for (int c = 0; c < os.w; ++c) {
          const T s = T(0.25) * src[y * os.w + c];
          dst[2 * y * in.w + 2 * c] += s;
          dst[2 * y * in.w + 2 * c + 1] += s;
          dst[(2 * y + 1) * in.w + 2 * c] += s;
          dst[(2 * y + 1) * in.w + 2 * c + 1] += s;
        }
      }
    }
  });
}

#define HELMFLUID_AD_CONV_INSTANTIATE(T)                                                          \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, int); \
  template Tensor<T> upsample2x<T>(const Tensor<T>&);                                           \
  template Tensor<T> avgpool2x<T>(const Tensor<T>&);

HELMFLUID_AD_CONV_INSTANTIATE(float)
HELMFLUID_AD_CONV_INSTANTIATE(double)

}  // namespace helmfluid::ad

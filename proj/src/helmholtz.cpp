#include "helmfluid/helmholtz.hpp"

#include "helmfluid/diffops.hpp"
#include "helmfluid/spectral.hpp"

namespace helmfluid::helmholtz {

VectorField2D HodgeParts::reconstruct() const {
  const auto& g = curl_free.grid();
  std::vector<double> u(g.size()), v(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    u[i] = curl_free.u()[i] + div_free.u()[i] + mean_u;
    v[i] = curl_free.v()[i] + div_free.v()[i] + mean_v;
  }
  return VectorField2D(g, std::move(u), std::move(v));
}

VectorField2D compose_helm(const ScalarField2D& phi, const ScalarField2D& a) {
  if (!(phi.grid() == a.grid())) throw ShapeError("compose_helm: potential and stream function grids differ");
  const auto grad = diffops::gradient(phi);
  const auto curl = diffops::curl_of_scalar(a);
  std::vector<double> u(phi.size()), v(phi.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    u[i] = grad.u()[i] + curl.u()[i];
    v[i] = grad.v()[i] + curl.v()[i];
  }
  return VectorField2D(phi.grid(), std::move(u), std::move(v));
}

HodgeParts hodge_decompose_spectral(const VectorField2D& f) {
  using spectral::Complex;
  const auto& g = f.grid();
  spectral::require_periodic(g, "hodge_decompose_spectral");
  const auto su = spectral::forward(f.u(), g.height, g.width);
  const auto sv = spectral::forward(f.v(), g.height, g.width);
  const auto kx = spectral::wavenumbers(g.width, g.spacing);
  const auto ky = spectral::wavenumbers(g.height, g.spacing);

  std::vector<Complex> gu(su.size()), gv(su.size()), du(su.size()), dv(su.size());
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      const std::size_t i = g.index(r, c);
      // Nyquist components of k are zeroed.
      const double ax = 2 * c == g.width ? 0.0 : kx[static_cast<std::size_t>(c)];
      const double ay = 2 * r == g.height ? 0.0 : ky[static_cast<std::size_t>(r)];
      const double k2 = ax * ax + ay * ay;
      if (i == 0) continue;  // harmonic mode handled separately
      if (k2 == 0.0) {
        du[i] = su[i];
        dv[i] = sv[i];
        continue;
      }
      // Gradient part: k (k . F) / |k|^2, the spectral image of grad(Phi) with lap(Phi) = div F.
      const Complex kdotf = ax * su[i] + ay * sv[i];
      gu[i] = ax * kdotf / k2;
      gv[i] = ay * kdotf / k2;
      du[i] = su[i] - gu[i];
      dv[i] = sv[i] - gv[i];
    }
  }
  HodgeParts parts;
  const double n = static_cast<double>(g.size());
  parts.mean_u = su[0].real() / n;
  parts.mean_v = sv[0].real() / n;
  parts.curl_free = VectorField2D(g, spectral::inverse_real(std::move(gu), g.height, g.width),
                                  spectral::inverse_real(std::move(gv), g.height, g.width));
  parts.div_free = VectorField2D(g, spectral::inverse_real(std::move(du), g.height, g.width),
                                 spectral::inverse_real(std::move(dv), g.height, g.width));
  return parts;
}

}  // namespace helmfluid::helmholtz

#pragma once

#include "helmfluid/field.hpp"

namespace helmfluid::helmholtz {

/// Curl-free, divergence-free and harmonic (mean) parts of a periodic vector field.
struct HodgeParts {
  VectorField2D curl_free;
  VectorField2D div_free;
  double mean_u = 0.0;
  double mean_v = 0.0;

  /// curl_free + div_free + harmonic.
  VectorField2D reconstruct() const;
};

/// grad(phi) + curl(a) with the finite-difference operators of `diffops`.
VectorField2D compose_helm(const ScalarField2D& phi, const ScalarField2D& a);

/// Fourier projection onto gradient and solenoidal subspaces. Potentials use the
/// zero-mean gauge; the k = 0 mode is returned as the harmonic part.
/// Throws UnsupportedDomainError on a non-periodic grid.
HodgeParts hodge_decompose_spectral(const VectorField2D& f);

}  // namespace helmfluid::helmholtz

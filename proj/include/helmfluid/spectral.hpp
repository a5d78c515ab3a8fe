#pragma once

#include <complex>
#include <vector>

#include "helmfluid/field.hpp"

namespace helmfluid::spectral {

using Complex = std::complex<double>;

/// In-place 2D DFT of a row-major H x W array. The inverse is normalized by 1/(H*W).
/// Safe to call concurrently; plans are cached behind a mutex.
void fft2(std::vector<Complex>& data, int height, int width, bool inverse);

std::vector<Complex> forward(std::span<const double> real, int height, int width);
/// Real part of the normalized inverse transform.
std::vector<double> inverse_real(std::vector<Complex> spectrum, int height, int width);

/// Signed integer frequency of FFT bin i for length n (Nyquist maps to -n/2).
inline int frequency(int i, int n) { return i <= (n - 1) / 2 ? i : i - n; }

/// Angular wavenumbers 2*pi*m / (n*spacing) along each axis.
std::vector<double> wavenumbers(int n, double spacing);

void require_periodic(const GridSpec& grid, const char* op);

// Spectral (ik) derivatives; outputs are real parts of the inverse transform.
VectorField2D gradient(const ScalarField2D& phi);
VectorField2D curl_of_scalar(const ScalarField2D& a);
ScalarField2D divergence(const VectorField2D& f);
ScalarField2D vorticity(const VectorField2D& f);

}  // namespace helmfluid::spectral

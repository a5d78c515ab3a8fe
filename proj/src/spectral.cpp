#include "helmfluid/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <utility>

namespace helmfluid::spectral {

namespace {

class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(int height, int width, bool inverse) {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto key = std::make_tuple(height, width, inverse);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    const std::size_t n = static_cast<std::size_t>(height) * width;
    auto* scratch = fftw_alloc_complex(n);
    fftw_plan plan = fftw_plan_dft_2d(height, width, scratch, scratch, inverse ? FFTW_BACKWARD : FFTW_FORWARD,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(scratch);
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<int, int, bool>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

}  // namespace

void fft2(std::vector<Complex>& data, int height, int width, bool inverse) {
  if (data.size() != static_cast<std::size_t>(height) * width) throw ShapeError("fft2: size mismatch");
  fftw_plan plan = plan_cache().get(height, width, inverse);
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, ptr, ptr);
  if (inverse) {
    const double s = 1.0 / static_cast<double>(data.size());
    for (auto& c : data) c *= s;
  }
}

std::vector<Complex> forward(std::span<const double> real, int height, int width) {
  std::vector<Complex> out(real.begin(), real.end());
  fft2(out, height, width, false);
  return out;
}

std::vector<double> inverse_real(std::vector<Complex> spectrum, int height, int width) {
  fft2(spectrum, height, width, true);
  std::vector<double> out(spectrum.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = spectrum[i].real();
  return out;
}

std::vector<double> wavenumbers(int n, double spacing) {
  std::vector<double> k(static_cast<std::size_t>(n));
  const double base = 2.0 * std::numbers::pi / (static_cast<double>(n) * spacing);
  for (int i = 0; i < n; ++i) k[static_cast<std::size_t>(i)] = base * frequency(i, n);
  return k;
}

void require_periodic(const GridSpec& grid, const char* op) {
  if (grid.boundary != BoundaryMode::periodic) {
    throw UnsupportedDomainError(std::string(op) + " requires a periodic grid");
  }
}

namespace {

// Multiplies a spectrum by i*k along one axis.
std::vector<Complex> ik(const std::vector<Complex>& s, const GridSpec& g, bool along_x) {
  const auto kx = wavenumbers(g.width, g.spacing);
  const auto ky = wavenumbers(g.height, g.spacing);
  std::vector<Complex> out(s.size());
  for (int r = 0; r < g.height; ++r) {
    for (int c = 0; c < g.width; ++c) {
      const std::size_t i = g.index(r, c);
      const double k = along_x ? kx[static_cast<std::size_t>(c)] : ky[static_cast<std::size_t>(r)];
      out[i] = Complex(0.0, k) * s[i];
    }
  }
  return out;
}

}  // namespace

VectorField2D gradient(const ScalarField2D& phi) {
  const auto& g = phi.grid();
  require_periodic(g, "spectral gradient");
  const auto s = forward(phi.data(), g.height, g.width);
  return VectorField2D(g, inverse_real(ik(s, g, true), g.height, g.width),
                       inverse_real(ik(s, g, false), g.height, g.width));
}

VectorField2D curl_of_scalar(const ScalarField2D& a) {
  const auto& g = a.grid();
  require_periodic(g, "spectral curl");
  const auto s = forward(a.data(), g.height, g.width);
  auto v = inverse_real(ik(s, g, true), g.height, g.width);
  for (double& x : v) x = -x;
  return VectorField2D(g, inverse_real(ik(s, g, false), g.height, g.width), std::move(v));
}

ScalarField2D divergence(const VectorField2D& f) {
  const auto& g = f.grid();
  require_periodic(g, "spectral divergence");
  auto su = ik(forward(f.u(), g.height, g.width), g, true);
  const auto sv = ik(forward(f.v(), g.height, g.width), g, false);
  for (std::size_t i = 0; i < su.size(); ++i) su[i] += sv[i];
  return ScalarField2D(g, inverse_real(std::move(su), g.height, g.width));
}

ScalarField2D vorticity(const VectorField2D& f) {
  const auto& g = f.grid();
  require_periodic(g, "spectral vorticity");
  auto sv = ik(forward(f.v(), g.height, g.width), g, true);
  const auto su = ik(forward(f.u(), g.height, g.width), g, false);
  for (std::size_t i = 0; i < sv.size(); ++i) sv[i] -= su[i];
  return ScalarField2D(g, inverse_real(std::move(sv), g.height, g.width));
}

}  // namespace helmfluid::spectral

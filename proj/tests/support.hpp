#pragma once

// Fixtures shared by the unit tests and the acceptance binary.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <vector>

#include "flof/deformation.hpp"
#include "flof/grid.hpp"
#include "flof/levelset.hpp"
#include "flof/scenes.hpp"

namespace flof::testing {

// Uniform doubles from raw mt19937 output, identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint32_t seed) : eng_(seed) {}
  double uniform() { return static_cast<double>(eng_()) / 4294967296.0; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int lo, int hi) { return lo + static_cast<int>(uniform() * (hi - lo + 1)); }

 private:
  std::mt19937 eng_;
};

inline ScalarField random_field(const Extents& ext, Rng& rng, double lo = -1.0, double hi = 1.0) {
  ScalarField f(ext);
  for (double& v : f.storage()) v = rng.uniform(lo, hi);
  return f;
}

inline VectorField random_vectors(const Extents& ext, Rng& rng, double lo = -1.0, double hi = 1.0) {
  VectorField v(ext);
  for (int c = 0; c < v.components(); ++c) v[c] = random_field(ext, rng, lo, hi);
  return v;
}

// Blurred noise rescaled so the largest component magnitude equals `magnitude`.
inline VectorField smooth_deformation(const Extents& ext, Rng& rng, double sigma, double magnitude) {
  VectorField v = gaussian_blur(random_vectors(ext, rng), sigma);
  const double m = max_abs(v);
  if (m > 0.0) v *= magnitude / m;
  return v;
}

inline ScalarField sphere_sdf(const Extents& ext, const Point& center, double radius, double clamp = 40.0) {
  ScalarField f(ext);
  for_each_cell(ext, [&](std::size_t i, const Coord& c) {
    double d = 0.0;
    for (int a = 0; a < ext.rank(); ++a) d += (c[a] - center[a]) * (c[a] - center[a]);
    f[i] = std::clamp(std::sqrt(d) - radius, -clamp, clamp);
  });
  return f;
}

// The registration fixture: translating circles, 64^2 x 32 frames, offset by
// 6 cells along axis 1.
struct CircleFixture {
  std::vector<ScalarField> frames_a, frames_b;
  SpaceTimeSDF a, b;
};

inline const CircleFixture& circle_fixture() {
  static const CircleFixture fx = [] {
    CircleFixture f;
    f.frames_a = scenes::generate("translating-circle", {64, 32, -3.0, 1});
    f.frames_b = scenes::generate("translating-circle", {64, 32, 3.0, 1});
    f.a = assemble_spacetime(f.frames_a);
    f.b = assemble_spacetime(f.frames_b);
    return f;
  }();
  return fx;
}

// Smaller variant for unit tests.
inline std::pair<SpaceTimeSDF, SpaceTimeSDF> small_circle_pair(double half_offset = 2.0) {
  const auto fa = scenes::generate("translating-circle", {32, 12, -half_offset, 1});
  const auto fb = scenes::generate("translating-circle", {32, 12, half_offset, 1});
  AssemblyParams p;
  p.gamma_max = 20.0;
  p.repeat_first = 2;
  return {assemble_spacetime(fa, p), assemble_spacetime(fb, p)};
}

inline double max_abs_diff(const ScalarField& a, const ScalarField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline bool bit_equal(const ScalarField& a, const ScalarField& b) {
  return a.extents() == b.extents() &&
         std::memcmp(a.storage().data(), b.storage().data(), a.size() * sizeof(double)) == 0;
}

// A 64^2 ring, the same ring with a gap cut through it, and a shifted ring
// whose squared SDF difference to the target equals the broken one's.
struct RingFixture {
  ScalarField target, broken, shifted;
};

inline RingFixture ring_fixture() {
  const Extents ext{64, 64};
  auto ring = [](double x, double y, double dx) { return std::abs(std::hypot(x - 32.0 - dx, y - 32.0) - 16.0) - 2.0; };
  RingFixture f{ScalarField(ext), ScalarField(ext), ScalarField(ext)};
  for_each_cell(ext, [&](std::size_t i, const Coord& c) {
    f.target[i] = ring(c[0], c[1], 0.0);
    const double gap = std::max(std::abs(c[1] - 32.0) - 2.5, std::abs(c[0] - 48.0) - 5.0);
    f.broken[i] = std::max(f.target[i], -gap);
  });
  auto l2 = [&](const ScalarField& g) {
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) s += (g[i] - f.target[i]) * (g[i] - f.target[i]);
    return s;
  };
  const double goal = l2(f.broken);
  double lo = 0.0, hi = 3.0;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    for_each_cell(ext, [&](std::size_t i, const Coord& c) { f.shifted[i] = ring(c[0], c[1], mid); });
    (l2(f.shifted) < goal ? lo : hi) = mid;
  }
  return f;
}

inline double squared_difference(const ScalarField& a, const ScalarField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Mean |a - b| over cells with |a| < band.
inline double band_mean_abs_diff(const ScalarField& a, const ScalarField& b, double band) {
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a[i]) >= band) continue;
    total += std::abs(a[i] - b[i]);
    ++count;
  }
  return count ? total / static_cast<double>(count) : 0.0;
}

}  // namespace flof::testing

#pragma once

// Deterministic procedural 2D scenes. Each frame is a level set (negative
// inside) or, for smoke, a density field, on a res x res grid.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "flof/grid.hpp"

namespace flof::scenes {

struct SceneParams {
  int resolution = 64;
  int frames = 32;
  double offset = 0.0;  // scene parameter (position shift in cells)
  std::uint32_t seed = 1;
};

inline const std::vector<std::string>& names() {
  static const std::vector<std::string> n = {"translating-circle", "falling-drop", "star", "quadrant-star",
                                             "gaussian-smoke-density"};
  return n;
}

template <class Fn>
ScalarField raster(int res, Fn&& fn) {
  ScalarField f(Extents{res, res});
  for_each_cell(f.extents(), [&](std::size_t i, const Coord& c) { f[i] = fn(static_cast<double>(c[0]), static_cast<double>(c[1])); });
  return f;
}

inline double circle_sdf(double x, double y, double cx, double cy, double r) { return std::hypot(x - cx, y - cy) - r; }

// Five-pointed star as a polar level set |p - c| - r(theta).
inline double star_levelset(double x, double y, double cx, double cy, double r, double angle = 0.0) {
  const double th = std::atan2(y - cy, x - cx) - angle;
  return std::hypot(x - cx, y - cy) - r * (1.0 + 0.35 * std::cos(5.0 * th));
}

// Circle of radius res*10/64 moving along axis 0 at res/(2 frames) cells per
// frame; `offset` shifts it along axis 1.
struct TranslatingCircle {
  int res;
  int frames;
  double offset;
  double radius() const { return res * 10.0 / 64.0; }
  double speed() const { return 0.5 * res / frames; }
  double center_x(int t) const { return 0.25 * res + speed() * t; }
  double center_y() const { return 0.5 * res + offset; }
  ScalarField frame(int t) const {
    return raster(res, [&](double x, double y) { return circle_sdf(x, y, center_x(t), center_y(), radius()); });
  }
};

// A drop falling into a pool; `offset` shifts the drop along axis 0.
struct FallingDrop {
  int res;
  int frames;
  double offset;
  double pool_height() const { return 0.25 * res; }
  double drop_radius() const { return 0.08 * res; }
  double drop_x() const { return 0.5 * res + offset; }
  double start_y() const { return 0.8 * res; }
  // Reaches the pool surface at 60% of the sequence.
  double gravity() const {
    const double fall = start_y() - drop_radius() - pool_height();
    const double t_hit = 0.6 * (frames - 1);
    return 2.0 * fall / (t_hit * t_hit);
  }
  double drop_y(int t) const { return start_y() - 0.5 * gravity() * t * t; }
  double impact_time() const { return 0.6 * (frames - 1); }
  ScalarField frame(int t) const {
    const double since = t - impact_time();
    const double bump = since > 0.0 ? 0.12 * res * (since / frames) * std::exp(-since / (0.2 * frames)) * 8.0 : 0.0;
    const double w = 0.06 * res;
    return raster(res, [&](double x, double y) {
      const double surface = pool_height() + bump * std::exp(-0.5 * (x - drop_x()) * (x - drop_x()) / (w * w));
      const double pool = y - surface;
      const double drop = circle_sdf(x, y, drop_x(), drop_y(t), drop_radius());
      return std::min(pool, drop);
    });
  }
};

// Star translated by `offset` along axis 0, slowly rotating over time.
struct Star {
  int res;
  int frames;
  double offset;
  ScalarField frame(int t) const {
    const double cx = 0.5 * res + offset, cy = 0.5 * res;
    return raster(res, [&](double x, double y) { return star_levelset(x, y, cx, cy, 0.18 * res, 0.02 * t); });
  }
};

// Static star centered in one quadrant; 0 selects the low half of an axis.
inline ScalarField quadrant_star_frame(int res, int quadrant_x, int quadrant_y) {
  const double cx = (quadrant_x == 0 ? 0.25 : 0.75) * res;
  const double cy = (quadrant_y == 0 ? 0.25 : 0.75) * res;
  return raster(res, [&](double x, double y) { return star_levelset(x, y, cx, cy, 0.12 * res); });
}

// Two deformations for the alignment fixture (axis 1 pointing "up"):
// u1 moves the bottom half left by res/2, u2 moves everything up by res/2.
// Applied in sequence they carry the bottom-right star to the top-left
// quadrant; cells whose lookup leaves the domain come up empty.
inline std::pair<VectorField, VectorField> quadrant_deformations(int res) {
  const Extents ext{res, res};
  VectorField u1(ext), u2(ext);
  const double half = 0.5 * res;
  for_each_cell(ext, [&](std::size_t i, const Coord& c) {
    if (c[1] < res / 2) u1[0][i] = -half;
    u2[1][i] = half;
  });
  return {std::move(u1), std::move(u2)};
}

// Rising Gaussian blob with a seeded satellite blob; densities in [0, ~1].
struct GaussianSmoke {
  int res;
  int frames;
  double offset;
  std::uint32_t seed;
  ScalarField frame(int t) const {
    std::mt19937 rng(seed);
    // Raw engine output only, so values are identical on every platform.
    const double u0 = static_cast<double>(rng()) / 4294967296.0;
    const double u1 = static_cast<double>(rng()) / 4294967296.0;
    const double rise = 0.45 * res / frames;
    const double cx = 0.5 * res + offset, cy = 0.25 * res + rise * t;
    const double s = 0.1 * res;
    const double sx = cx + (u0 - 0.5) * 0.2 * res, sy = cy + 0.12 * res;
    const double ss = (0.04 + 0.02 * u1) * res;
    return raster(res, [&](double x, double y) {
      const double main = std::exp(-0.5 * ((x - cx) * (x - cx) + (y - cy) * (y - cy)) / (s * s));
      const double sat = 0.6 * std::exp(-0.5 * ((x - sx) * (x - sx) + (y - sy) * (y - sy)) / (ss * ss));
      return std::min(1.0, main + sat);
    });
  }
};

inline bool is_density_scene(const std::string& name) { return name == "gaussian-smoke-density"; }

inline std::vector<ScalarField> generate(const std::string& name, const SceneParams& p) {
  if (p.resolution < 32) throw Error("gen_scene: resolution must be at least 32");
  if (p.frames < 2) throw Error("gen_scene: need at least 2 frames");
  std::vector<ScalarField> out;
  out.reserve(p.frames);
  for (int t = 0; t < p.frames; ++t) {
    if (name == "translating-circle")
      out.push_back(TranslatingCircle{p.resolution, p.frames, p.offset}.frame(t));
    else if (name == "falling-drop")
      out.push_back(FallingDrop{p.resolution, p.frames, p.offset}.frame(t));
    else if (name == "star")
      out.push_back(Star{p.resolution, p.frames, p.offset}.frame(t));
    else if (name == "quadrant-star")
      out.push_back(quadrant_star_frame(p.resolution, 1, 0));
    else if (name == "gaussian-smoke-density")
      out.push_back(GaussianSmoke{p.resolution, p.frames, p.offset, p.seed}.frame(t));
    else
      throw Error("gen_scene: unknown scene '" + name + "'");
  }
  return out;
}

}  // namespace flof::scenes

#pragma once

// Truncated signed-distance fields and their assembly into space-time volumes.
// Negative values are inside.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "flof/grid.hpp"

namespace flof {

inline bool is_inside(double v) { return v < 0.0; }

// Level-set function (negative inside the smoke surface) from a density field.
inline ScalarField iso_from_density(const ScalarField& density, double level_fraction = 0.1) {
  if (!(level_fraction > 0.0 && level_fraction < 1.0))
    throw Error("iso_from_density: level fraction must be in (0, 1)");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double d : density.values()) {
    if (d < 0.0 || !std::isfinite(d)) throw Error("iso_from_density: density must be finite and non-negative");
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  if (hi <= 0.0 || hi == lo) throw Error("iso_from_density: density defines no surface");
  const double level = level_fraction * hi;
  ScalarField out(density.extents());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = level - density[i];
  return out;
}

namespace detail {

// Solves the first-order upwind Eikonal update sum_k max(x - a_k, 0)^2 = 1
// for the given (unsorted) neighbor minima.
inline double godunov_update(std::array<double, kMaxRank> a, int rank) {
  std::sort(a.begin(), a.begin() + rank);
  double x = a[0] + 1.0;
  for (int m = 2; m <= rank; ++m) {
    if (x <= a[m - 1]) break;
    double s = 0.0, s2 = 0.0;
    for (int k = 0; k < m; ++k) {
      s += a[k];
      s2 += a[k] * a[k];
    }
    const double disc = s * s - m * (s2 - 1.0);
    if (disc < 0.0) break;
    x = (s + std::sqrt(disc)) / m;
  }
  return x;
}

}  // namespace detail

// Signed Euclidean distance to the zero crossings of `levelset`, clamped to
// +-gamma_max. Cells next to a crossing are initialized from the linearly
// interpolated crossing positions and kept fixed; the rest is filled by
// fast sweeping. Signs of the input are preserved.
inline ScalarField redistance(const ScalarField& levelset, double gamma_max) {
  const Extents& ext = levelset.extents();
  const int rank = ext.rank();
  const double inf = std::numeric_limits<double>::infinity();

  bool any_in = false, any_out = false;
  for (double v : levelset.values()) (is_inside(v) ? any_in : any_out) = true;
  if (!any_in || !any_out) throw Error("redistance: level set has no sign change");

  std::vector<double> dist(ext.size(), inf);
  std::vector<char> fixed(ext.size(), 0);
  for_each_cell(ext, [&](std::size_t i, const Coord& c) {
    const double phi = levelset[i];
    if (phi == 0.0) {
      dist[i] = 0.0;
      fixed[i] = 1;
      return;
    }
    double inv_sq = 0.0;
    bool crossing = false;
    for (int a = 0; a < rank; ++a) {
      double theta = inf;
      for (int dir = -1; dir <= 1; dir += 2) {
        const int n = c[a] + dir;
        if (n < 0 || n >= ext[a]) continue;
        const double nb = levelset[i + dir * static_cast<std::ptrdiff_t>(ext.stride(a))];
        if (is_inside(nb) == is_inside(phi)) continue;
        theta = std::min(theta, phi / (phi - nb));
      }
      if (theta < inf) {
        crossing = true;
        inv_sq += 1.0 / (theta * theta);
      }
    }
    if (crossing) {
      dist[i] = 1.0 / std::sqrt(inv_sq);
      fixed[i] = 1;
    }
  });

  const int orderings = 1 << rank;
  for (int pass = 0; pass < 3; ++pass) {
    bool changed = false;
    for (int m = 0; m < orderings; ++m) {
      Coord v{};
      for (std::size_t k = 0; k < ext.size(); ++k, ext.increment(v)) {
        Coord c = v;
        for (int a = 0; a < rank; ++a)
          if (m & (1 << a)) c[a] = ext[a] - 1 - v[a];
        const std::size_t i = ext.index(c);
        if (fixed[i]) continue;
        std::array<double, kMaxRank> nb{};
        for (int a = 0; a < rank; ++a) {
          const std::size_t s = ext.stride(a);
          double best = inf;
          if (c[a] > 0) best = std::min(best, dist[i - s]);
          if (c[a] < ext[a] - 1) best = std::min(best, dist[i + s]);
          nb[a] = best;
        }
        if (*std::min_element(nb.begin(), nb.begin() + rank) == inf) continue;
        const double x = detail::godunov_update(nb, rank);
        if (x < dist[i]) {
          // Changes below round-off do not count towards another pass.
          if (dist[i] - x > 1e-12) changed = true;
          dist[i] = x;
        }
      }
    }
    if (!changed) break;
  }

  ScalarField out(ext);
  for (std::size_t i = 0; i < ext.size(); ++i) {
    const double d = std::min(dist[i], gamma_max);
    out[i] = is_inside(levelset[i]) ? -d : d;
  }
  return out;
}

struct AssemblyParams {
  double gamma_max = 40.0;
  // Fraction of each spatial extent left empty on both sides.
  double margin = 0.10;
  // Copies of the first frame prepended in time.
  int repeat_first = 5;
};

// Placement of the original frames inside an assembled space-time volume.
struct SpaceTimeLayout {
  std::vector<int> pad;  // cells added on each side of every spatial axis
  int frames_repeated = 0;
  int frames = 0;  // original frame count

  int time_index(int frame) const { return frame + frames_repeated; }
};

struct SpaceTimeSDF {
  ScalarField field;  // spatial axes followed by time
  double gamma_max = 40.0;
  double margin = 0.10;
  SpaceTimeLayout layout;

  int frames_repeated() const { return layout.frames_repeated; }
};

inline SpaceTimeLayout make_layout(const Extents& frame, const AssemblyParams& params, int frames) {
  if (params.margin < 0.0 || params.margin >= 0.5) throw Error("margin must be in [0, 0.5)");
  if (params.repeat_first < 0) throw Error("repeat_first must be non-negative");
  SpaceTimeLayout layout;
  layout.frames = frames;
  layout.frames_repeated = params.repeat_first;
  for (int a = 0; a < frame.rank(); ++a)
    layout.pad.push_back(static_cast<int>(std::lround(params.margin * frame[a])));
  return layout;
}

// Pads and repeats frames according to `layout`, then stacks them along a new
// last axis. Shared by the SDF and the density paths.
inline ScalarField stack_frames(std::span<const ScalarField> frames, const SpaceTimeLayout& layout, double fill) {
  if (frames.size() < 2) throw Error("assemble: need at least 2 frames");
  const Extents& dims = frames.front().extents();
  std::vector<ScalarField> slabs;
  slabs.reserve(frames.size() + layout.frames_repeated);
  for (const auto& f : frames) {
    if (!(f.extents() == dims)) throw Error("assemble: inconsistent frame extents " + f.extents().str() + " vs " + dims.str());
    slabs.push_back(pad(f, layout.pad, layout.pad, fill));
  }
  slabs.insert(slabs.begin(), layout.frames_repeated, slabs.front());
  return stack(slabs);
}

// Builds one truncated space-time SDF from per-frame level sets (negative inside).
inline SpaceTimeSDF assemble_spacetime(std::span<const ScalarField> frames, const AssemblyParams& params = {}) {
  if (frames.empty()) throw Error("assemble: need at least 2 frames");
  SpaceTimeSDF st;
  st.gamma_max = params.gamma_max;
  st.margin = params.margin;
  st.layout = make_layout(frames.front().extents(), params, static_cast<int>(frames.size()));
  st.field = redistance(stack_frames(frames, st.layout, params.gamma_max), params.gamma_max);
  return st;
}

// Density frames on the same grid as the SDF built from them (empty margin, repeated start).
inline ScalarField assemble_density(std::span<const ScalarField> frames, const SpaceTimeLayout& layout) {
  return stack_frames(frames, layout, 0.0);
}

inline double beta_image(double gamma_max) { return -0.2 / gamma_max; }

// Input scaling for the flow solve; flips the sign so the inside is positive.
inline ScalarField scale_for_flow(const ScalarField& sdf, double gamma_max) {
  const double s = beta_image(gamma_max);
  ScalarField out(sdf.extents());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * sdf[i];
  return out;
}

inline ScalarField scale_for_flow(const SpaceTimeSDF& sdf) { return scale_for_flow(sdf.field, sdf.gamma_max); }

// Spatial slab at time t; fractional t blends the two adjacent slabs linearly.
inline ScalarField extract_time_slice(const ScalarField& st, double t) {
  const int last = st.rank() - 1;
  const int nt = st.extents()[last];
  if (!(t >= 0.0 && t <= nt - 1)) throw Error("time slice out of range");
  const int t0 = static_cast<int>(std::floor(t));
  const double f = t - t0;
  if (f == 0.0) return slab(st, t0);
  ScalarField a = slab(st, t0);
  const ScalarField b = slab(st, t0 + 1);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = (1.0 - f) * a[i] + f * b[i];
  return a;
}

inline ScalarField extract_time_slice(const SpaceTimeSDF& st, double t) { return extract_time_slice(st.field, t); }

}  // namespace flof

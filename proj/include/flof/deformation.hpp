#pragma once

// Eulerian deformations use the backward-lookup convention:
// applying u to phi gives phi'(x) = phi(x - u(x)).

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "flof/grid.hpp"
#include "flof/levelset.hpp"

namespace flof {

// First-order semi-Lagrangian step a'(x) = a(x - alpha v(x)).
inline ScalarField advect(const ScalarField& a, const VectorField& v, double alpha) {
  require_same_extents(a.extents(), v.extents(), "advect");
  if (alpha < 0.0 || alpha > 1.0) throw Error("advect: alpha must be in [0, 1]");
  if (alpha == 0.0) return a;
  const Extents& ext = a.extents();
  ScalarField out(ext);
  for_each_cell(ext, [&](std::size_t i, const Coord& c) {
    Point p{};
    for (int k = 0; k < ext.rank(); ++k) p[k] = c[k] - alpha * v[k][i];
    out[i] = sample_linear(a, p);
  });
  return out;
}

// advect() evaluated only on the slab t of the last axis.
inline ScalarField advect_slab(const ScalarField& a, const VectorField& v, double alpha, int t) {
  require_same_extents(a.extents(), v.extents(), "advect");
  if (alpha < 0.0 || alpha > 1.0) throw Error("advect: alpha must be in [0, 1]");
  if (alpha == 0.0) return slab(a, t);
  const Extents& ext = a.extents();
  const int last = ext.rank() - 1;
  if (t < 0 || t >= ext[last]) throw Error("advect: slab index out of range");
  const Extents sub = ext.drop_last();
  const std::size_t offset = static_cast<std::size_t>(t) * ext.stride(last);
  ScalarField out(sub);
  for_each_cell(sub, [&](std::size_t j, const Coord& c) {
    const std::size_t i = offset + j;
    Point p{};
    for (int k = 0; k < last; ++k) p[k] = c[k] - alpha * v[k][i];
    p[last] = t - alpha * v[last][i];
    out[j] = sample_linear(a, p);
  });
  return out;
}

// Combines a sequence of deformations (applied in order, each with its
// weight) into one field:
//   comb = a1 u1;  comb = a_i u_i + comb(x - u_i(x))  for i = 2..n.
// The alignment lookup uses the unscaled u_i; the weights only enter the sum.
inline VectorField align_velocity(std::span<const VectorField* const> defos, std::span<const double> alphas) {
  if (defos.empty()) throw Error("align_velocity: no deformations");
  if (defos.size() != alphas.size()) throw Error("align_velocity: weight count does not match deformation count");
  const Extents& ext = defos.front()->extents();
  for (const auto* d : defos) require_same_extents(ext, d->extents(), "align_velocity");
  const int n = ext.rank();

  VectorField comb = alphas[0] * *defos[0];
  for (std::size_t s = 1; s < defos.size(); ++s) {
    const VectorField& ui = *defos[s];
    const double ai = alphas[s];
    VectorField next(ext);
    for_each_cell(ext, [&](std::size_t i, const Coord& c) {
      Point p{};
      for (int k = 0; k < n; ++k) p[k] = c[k] - ui[k][i];
      const Point prev = sample_linear(comb, p);
      for (int k = 0; k < n; ++k) next[k][i] = ai * ui[k][i] + prev[k];
    });
    comb = std::move(next);
  }
  return comb;
}

inline VectorField align_velocity(std::initializer_list<const VectorField*> defos, std::initializer_list<double> alphas) {
  return align_velocity(std::span<const VectorField* const>(defos.begin(), defos.size()),
                        std::span<const double>(alphas.begin(), alphas.size()));
}

// ---------------------------------------------------------------------------
// Error metric

// Indicator h(s1, s2): 0 where the signs agree (0 counts as outside),
// min(1, |s1 - s2|) otherwise (cell size 1).
inline double error_indicator(double s1, double s2) {
  if (is_inside(s1) == is_inside(s2)) return 0.0;
  return std::min(1.0, std::abs(s1 - s2));
}

inline double error_metric(const ScalarField& phi1, const ScalarField& phi2) {
  require_same_extents(phi1.extents(), phi2.extents(), "error_metric");
  return parallel_sum(phi1.size(), [&](std::size_t i) { return error_indicator(phi1[i], phi2[i]); });
}

// ---------------------------------------------------------------------------
// Surface projection

struct ProjectionDeltas {
  VectorField delta;
  std::vector<char> assigned;
};

// Per-cell line search on the narrow band |phi_tgt| < tau: starting at the
// cell, walk along the target normal (towards lower target values when the
// target exceeds the deformed source value, otherwise upwards) in steps of
// 0.5 cells up to 2 tau until the target crosses the deformed source value,
// then bisect 16 times. Cells without a bracket stay unassigned.
inline ProjectionDeltas projection_deltas(const ScalarField& deformed_src, const ScalarField& phi_tgt, double tau) {
  require_same_extents(deformed_src.extents(), phi_tgt.extents(), "project_surface");
  const Extents& ext = phi_tgt.extents();
  const int n = ext.rank();
  bool any_in = false, any_out = false;
  for (double v : phi_tgt.values()) (is_inside(v) ? any_in : any_out) = true;
  if (!any_in || !any_out) throw Error("project_surface: target has no zero crossing");

  const VectorField grad = gradient(phi_tgt);
  ProjectionDeltas out{VectorField(ext), std::vector<char>(ext.size(), 0)};
  const double step = 0.5;
  const int max_steps = static_cast<int>(std::floor(2.0 * tau / step));

  for_each_cell(ext, [&](std::size_t i, const Coord& c) {
    if (!(std::abs(phi_tgt[i]) < tau)) return;
    const double iso = deformed_src[i];
    const double f0 = phi_tgt[i] - iso;
    if (f0 == 0.0) {
      out.assigned[i] = 1;
      return;
    }
    Point dir{};
    double len = 0.0;
    for (int k = 0; k < n; ++k) len += grad[k][i] * grad[k][i];
    len = std::sqrt(len);
    if (len < 1e-8) return;
    const double sgn = f0 > 0.0 ? -1.0 : 1.0;
    for (int k = 0; k < n; ++k) dir[k] = sgn * grad[k][i] / len;

    auto f = [&](double s) {
      Point p{};
      for (int k = 0; k < n; ++k) p[k] = c[k] + s * dir[k];
      return sample_linear(phi_tgt, p) - iso;
    };
    double lo = 0.0, hi = -1.0;
    for (int k = 1; k <= max_steps; ++k) {
      const double s = k * step;
      const double fs = f(s);
      if (fs == 0.0 || (fs > 0.0) != (f0 > 0.0)) {
        lo = s - step;
        hi = s;
        break;
      }
    }
    if (hi < 0.0) return;
    for (int it = 0; it < 16; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double fm = f(mid);
      if (fm == 0.0) {
        lo = hi = mid;
        break;
      }
      if ((fm > 0.0) == (f0 > 0.0))
        lo = mid;
      else
        hi = mid;
    }
    const double s = 0.5 * (lo + hi);
    for (int k = 0; k < n; ++k) out.delta[k][i] = s * dir[k];
    out.assigned[i] = 1;
  });
  return out;
}

// Spreads assigned deltas outward, one ring per iteration; ring k (0-based)
// receives the mean of its assigned neighbors scaled by (1 - k / tau).
inline void extrapolate_deltas(ProjectionDeltas& pd, double tau) {
  const Extents& ext = pd.delta.extents();
  const int n = ext.rank();
  const int iterations = static_cast<int>(std::ceil(tau));
  for (int k = 0; k < iterations; ++k) {
    const double fade = 1.0 - k / tau;
    std::vector<char> next = pd.assigned;
    VectorField& d = pd.delta;
    for_each_cell(ext, [&](std::size_t i, const Coord& c) {
      if (pd.assigned[i]) return;
      Point acc{};
      int count = 0;
      for (int a = 0; a < n; ++a) {
        const std::size_t s = ext.stride(a);
        if (c[a] > 0 && pd.assigned[i - s]) {
          for (int q = 0; q < n; ++q) acc[q] += d[q][i - s];
          ++count;
        }
        if (c[a] < ext[a] - 1 && pd.assigned[i + s]) {
          for (int q = 0; q < n; ++q) acc[q] += d[q][i + s];
          ++count;
        }
      }
      if (count == 0) return;
      // Written cells are unassigned in this iteration, so neighbors never read them.
      for (int q = 0; q < n; ++q) d[q][i] = fade * acc[q] / count;
      next[i] = 1;
    });
    pd.assigned = std::move(next);
  }
}

// Update for u that snaps the deformed source surface onto the target:
// narrow-band line search, extrapolation, Gaussian smoothing. The caller adds
// the result to u. Both level sets are in distance units.
inline VectorField project_surface(const ScalarField& phi_src, const ScalarField& phi_tgt, const VectorField& u,
                                   double sigma_proj, double tau_proj) {
  require_same_extents(phi_src.extents(), phi_tgt.extents(), "project_surface");
  const ScalarField deformed = advect(phi_src, u, 1.0);
  ProjectionDeltas pd = projection_deltas(deformed, phi_tgt, tau_proj);
  extrapolate_deltas(pd, tau_proj);
  VectorField delta = gaussian_blur(pd.delta, sigma_proj);
  zero_boundary(delta);
  return delta;
}

}  // namespace flof

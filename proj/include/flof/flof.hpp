#pragma once

// Full registration of two space-time SDFs: coarse-to-fine optical flow with
// residual iterations, kernel annealing and surface projection at the finest
// level. Every step is gated by the volumetric error metric.

#include <string>
#include <utility>
#include <vector>

#include "flof/deformation.hpp"
#include "flof/grid.hpp"
#include "flof/levelset.hpp"
#include "flof/optical_flow.hpp"

namespace flof {

struct TraceEntry {
  int level = 0;  // 0 is the input resolution
  std::string extents;
  std::string stage;  // "flow" or "projection"
  int iteration = 0;
  double sigma = 0.0;
  double error_before = 0.0;
  double error_after = 0.0;
  bool accepted = false;
  int cg_iterations = 0;
  double cg_residual = 0.0;
};

struct MatchResult {
  VectorField deformation;
  double error_initial = 0.0;
  double error_final = 0.0;
  std::vector<TraceEntry> level_trace;
};

// Switches for ablations; the defaults run the complete algorithm.
struct FlofStages {
  bool hierarchy = true;
  bool residual = true;  // false: a single flow solve per level
  bool projection = true;
};

namespace detail {

inline ScalarField scaled(const ScalarField& f, double s) {
  ScalarField out(f.extents());
  for (std::size_t i = 0; i < f.size(); ++i) out[i] = s * f[i];
  return out;
}

// phi1/phi2 are SDFs (error metric, projection); flow1/flow2 are the
// prepared flow-solve inputs on the same grid.
inline VectorField flof_level(const ScalarField& phi1, const ScalarField& phi2, const ScalarField& flow1,
                              const ScalarField& flow2, int level, const FlofParams& params, const FlofStages& stages,
                              std::vector<TraceEntry>& trace) {
  const Extents& ext = phi1.extents();
  VectorField u(ext);
  if (stages.hierarchy && ext.min_extent() >= 2 * params.s_max) {
    const VectorField coarse = flof_level(downsample(phi1), downsample(phi2), downsample(flow1), downsample(flow2),
                                          level + 1, params, stages, trace);
    u = upsample(coarse, ext);
    zero_boundary(u);
  }

  double err = error_metric(advect(phi1, u, 1.0), phi2);

  double sigma = params.sigma_of;
  const int iterations = stages.residual ? params.l_max : 1;
  for (int l = 1; l <= iterations; ++l) {
    FlowStats stats;
    const VectorField ul = flow_single_level(advect(flow1, u, 1.0), flow2, sigma, params, &stats);
    VectorField candidate = align_velocity({&u, &ul}, {1.0, 1.0});
    const double e = error_metric(advect(phi1, candidate, 1.0), phi2);
    TraceEntry entry{level, ext.str(), "flow", l, sigma, err, e, e <= err, stats.cg_iterations, stats.cg_residual};
    trace.push_back(entry);
    if (!entry.accepted) break;
    u = std::move(candidate);
    err = e;
    sigma *= 0.75;
  }

  if (level == 0 && stages.projection) {
    double sigma_proj = params.sigma_proj;
    for (int k = 1; k <= params.k_max; ++k) {
      VectorField candidate = u + project_surface(phi1, phi2, u, sigma_proj, params.tau_proj);
      const double e = error_metric(advect(phi1, candidate, 1.0), phi2);
      TraceEntry entry{level, ext.str(), "projection", k, sigma_proj, err, e, e <= err, 0, 0.0};
      trace.push_back(entry);
      if (!entry.accepted) break;
      u = std::move(candidate);
      err = e;
      sigma_proj *= 0.75;
    }
  }
  return u;
}

}  // namespace detail

// Same as run_flof, but the optical flow solves see flow1/flow2 (used as
// given, no scaling) instead of the scaled SDFs.
inline MatchResult run_flof_with_flow_inputs(const ScalarField& phi1, const ScalarField& phi2, const ScalarField& flow1,
                                             const ScalarField& flow2, const FlofParams& params = {},
                                             const FlofStages& stages = {}) {
  params.validate();
  require_same_extents(phi1.extents(), phi2.extents(), "flof");
  require_same_extents(phi1.extents(), flow1.extents(), "flof");
  require_same_extents(phi1.extents(), flow2.extents(), "flof");
  MatchResult result;
  result.error_initial = error_metric(phi1, phi2);
  result.deformation = detail::flof_level(phi1, phi2, flow1, flow2, 0, params, stages, result.level_trace);
  result.error_final = error_metric(advect(phi1, result.deformation, 1.0), phi2);
  return result;
}

// Deformation u with advect(phi1, u, 1) ~ phi2. Inputs are SDFs in cell units;
// the flow solves use them scaled by beta_image.
inline MatchResult run_flof(const ScalarField& phi1, const ScalarField& phi2, const FlofParams& params = {},
                            const FlofStages& stages = {}) {
  return run_flof_with_flow_inputs(phi1, phi2, detail::scaled(phi1, params.beta_image),
                                   detail::scaled(phi2, params.beta_image), params, stages);
}

inline MatchResult run_flof(const SpaceTimeSDF& phi1, const SpaceTimeSDF& phi2, const FlofParams& params = {},
                            const FlofStages& stages = {}) {
  return run_flof(phi1.field, phi2.field, params, stages);
}

struct MatchPair {
  MatchResult forward;   // warps the first input onto the second
  MatchResult backward;  // warps the second input onto the first
};

// Two independent solves; neither result is derived from the other.
inline MatchPair match_pair(const ScalarField& a, const ScalarField& b, const FlofParams& params = {}) {
  return {run_flof(a, b, params), run_flof(b, a, params)};
}

inline MatchPair match_pair(const SpaceTimeSDF& a, const SpaceTimeSDF& b, const FlofParams& params = {}) {
  return match_pair(a.field, b.field, params);
}

}  // namespace flof

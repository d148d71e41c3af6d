#pragma once

// One resolution level of the regularized optical flow problem
//   (G^T G + beta_s L + beta_t I) u = -G^T (phi2 - phi1),
// with G the discrete gradient of phi2 and L the negative Laplacian.
// The system is applied matrix-free; boundary cells are pinned to u = 0.

#include <cmath>
#include <functional>
#include <string>

#include "flof/grid.hpp"
#include "flof/levelset.hpp"

namespace flof {

struct FlofParams {
  double beta_s = 1e-3;
  double beta_t = 1e-4;
  double sigma_of = 4.0;
  double sigma_proj = 4.0;
  double tau_proj = 4.0;
  int s_max = 10;
  int l_max = 3;
  int k_max = 3;
  double gamma_max = 40.0;
  double beta_image = -0.2 / 40.0;
  double cg_tol = 1e-2;
  int cg_max_iter = 600;

  void validate() const {
    if (beta_s < 0 || beta_t < 0 || sigma_of < 0 || sigma_proj < 0 || tau_proj < 0 || gamma_max <= 0)
      throw Error("flof params: weights and radii must be non-negative");
    if (s_max < 2) throw Error("flof params: s_max must be >= 2");
    if (l_max < 1 || k_max < 1 || cg_max_iter < 1) throw Error("flof params: iteration caps must be >= 1");
    if (!(cg_tol > 0)) throw Error("flof params: cg_tol must be positive");
  }
};

namespace detail {

inline double dot(const VectorField& a, const VectorField& b) {
  double s = 0.0;
  for (int c = 0; c < a.components(); ++c) {
    const auto& x = a[c].storage();
    const auto& y = b[c].storage();
    s += parallel_sum(x.size(), [&](std::size_t i) { return x[i] * y[i]; });
  }
  return s;
}

// y += alpha * x
inline void axpy(double alpha, const VectorField& x, VectorField& y) {
  for (int c = 0; c < x.components(); ++c) {
    const auto& xs = x[c].storage();
    auto& ys = y[c].storage();
    parallel_for(xs.size(), [&](std::size_t i) { ys[i] += alpha * xs[i]; });
  }
}

}  // namespace detail

struct FlowSystem {
  VectorField phi2_gradient;  // G
  VectorField rhs;            // b
  double beta_s = 0.0;
  double beta_t = 0.0;

  const Extents& extents() const { return rhs.extents(); }

  VectorField apply(const VectorField& u) const {
    const Extents& ext = extents();
    const int n = ext.rank();
    VectorField out(ext);
    for_each_cell(ext, [&](std::size_t i, const Coord& c) {
      if (ext.on_boundary(c)) {
        for (int k = 0; k < n; ++k) out[k][i] = u[k][i];
        return;
      }
      double gu = 0.0;
      for (int k = 0; k < n; ++k) gu += phi2_gradient[k][i] * u[k][i];
      for (int k = 0; k < n; ++k) {
        const ScalarField& uk = u[k];
        double lap = 0.0;
        for (int a = 0; a < n; ++a) {
          const std::size_t s = ext.stride(a);
          lap += 2.0 * uk[i];
          // Neighbors on the boundary hold u = 0.
          if (c[a] - 1 > 0) lap -= uk[i - s];
          if (c[a] + 1 < ext[a] - 1) lap -= uk[i + s];
        }
        out[k][i] = phi2_gradient[k][i] * gu + beta_s * lap + beta_t * uk[i];
      }
    });
    return out;
  }

  VectorField diagonal() const {
    const Extents& ext = extents();
    const int n = ext.rank();
    VectorField d(ext);
    for_each_cell(ext, [&](std::size_t i, const Coord& c) {
      for (int k = 0; k < n; ++k) {
        const double g = phi2_gradient[k][i];
        d[k][i] = ext.on_boundary(c) ? 1.0 : g * g + beta_s * 2.0 * n + beta_t;
      }
    });
    return d;
  }
};

// phi1 and phi2 are expected to be scaled for the solve already.
inline FlowSystem assemble(const ScalarField& phi1, const ScalarField& phi2, const FlofParams& params) {
  require_same_extents(phi1.extents(), phi2.extents(), "optical flow assemble");
  FlowSystem sys;
  sys.beta_s = params.beta_s;
  sys.beta_t = params.beta_t;
  sys.phi2_gradient = gradient(phi2);
  const Extents& ext = phi2.extents();
  sys.rhs = VectorField(ext);
  for_each_cell(ext, [&](std::size_t i, const Coord& c) {
    if (ext.on_boundary(c)) return;
    const double diff = phi2[i] - phi1[i];
    for (int k = 0; k < ext.rank(); ++k) sys.rhs[k][i] = -sys.phi2_gradient[k][i] * diff;
  });
  return sys;
}

struct CgResult {
  VectorField u;
  int iterations = 0;
  double relative_residual = 0.0;  // ||b - A u|| / ||b||, recomputed from the returned u
  bool converged = false;
};

// Jacobi-preconditioned conjugate gradient. `on_iterate`, if set, sees every iterate.
inline CgResult solve_cg(const FlowSystem& sys, const FlofParams& params,
                         const std::function<void(int, const VectorField&)>& on_iterate = {}) {
  const Extents& ext = sys.extents();
  CgResult res;
  res.u = VectorField(ext);
  const double bnorm = std::sqrt(detail::dot(sys.rhs, sys.rhs));
  if (!std::isfinite(bnorm)) throw Error("solve_cg: non-finite right-hand side");
  if (bnorm == 0.0) {
    res.converged = true;
    return res;
  }

  const VectorField diag = sys.diagonal();
  auto precondition = [&](const VectorField& r) {
    VectorField z(ext);
    for (int c = 0; c < r.components(); ++c)
      for (std::size_t i = 0; i < r.size(); ++i) z[c][i] = r[c][i] / diag[c][i];
    return z;
  };

  VectorField r = sys.rhs;
  VectorField z = precondition(r);
  VectorField p = z;
  double rz = detail::dot(r, z);
  double rel = 1.0;
  while (res.iterations < params.cg_max_iter) {
    const VectorField ap = sys.apply(p);
    const double pap = detail::dot(p, ap);
    const double alpha = rz / pap;
    if (!std::isfinite(alpha) || pap <= 0.0)
      throw Error("solve_cg: breakdown at iteration " + std::to_string(res.iterations) +
                  " (p.Ap = " + std::to_string(pap) + ")");
    detail::axpy(alpha, p, res.u);
    detail::axpy(-alpha, ap, r);
    ++res.iterations;
    if (on_iterate) on_iterate(res.iterations, res.u);
    rel = std::sqrt(detail::dot(r, r)) / bnorm;
    if (!std::isfinite(rel)) throw Error("solve_cg: non-finite residual at iteration " + std::to_string(res.iterations));
    if (rel <= params.cg_tol) break;
    z = precondition(r);
    const double rz_next = detail::dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (int c = 0; c < p.components(); ++c)
      for (std::size_t i = 0; i < p.size(); ++i) p[c][i] = z[c][i] + beta * p[c][i];
  }

  VectorField true_r = sys.rhs;
  detail::axpy(-1.0, sys.apply(res.u), true_r);
  res.relative_residual = std::sqrt(detail::dot(true_r, true_r)) / bnorm;
  res.converged = rel <= params.cg_tol;
  return res;
}

struct FlowStats {
  int cg_iterations = 0;
  double cg_residual = 0.0;
  bool cg_converged = true;
};

// assemble + solve + Gaussian smoothing of the solution.
inline VectorField flow_single_level(const ScalarField& phi1, const ScalarField& phi2, double sigma_of,
                                     const FlofParams& params, FlowStats* stats = nullptr) {
  const FlowSystem sys = assemble(phi1, phi2, params);
  CgResult cg = solve_cg(sys, params);
  if (stats) *stats = {cg.iterations, cg.relative_residual, cg.converged};
  VectorField u = gaussian_blur(cg.u, sigma_of);
  zero_boundary(u);
  return u;
}

}  // namespace flof

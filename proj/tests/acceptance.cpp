// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>

#include "flof/flof.hpp"
#include "flof/io.hpp"
#include "oracles.hpp"
#include "spaces.hpp"

using namespace flof;
using flof::testing::Rng;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void set_threads(const char* n) {
  if (n)
    setenv("FLOF_THREADS", n, 1);
  else
    unsetenv("FLOF_THREADS");
}

Outcome energy_gradient() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  const Extents ext{8, 8, 8};
  double worst = 0.0;
  for (int instance = 0; instance < 3; ++instance) {
    const ScalarField phi1 = flof::testing::random_field(ext, rng);
    const ScalarField phi2 = flof::testing::random_field(ext, rng);
    FlofParams p;
    p.beta_s = rng.uniform(0.01, 1.0);
    p.beta_t = rng.uniform(0.001, 0.1);
    VectorField u = flof::testing::random_vectors(ext, rng);
    zero_boundary(u);
    const FlowSystem sys = assemble(phi1, phi2, p);
    VectorField analytic = sys.apply(u);
    detail::axpy(-1.0, sys.rhs, analytic);
    const double h = 1e-4;
    double num = 0.0, den = 0.0;
    for (int k = 0; k < 3; ++k) {
      for_each_cell(ext, [&](std::size_t i, const Coord& c) {
        if (ext.on_boundary(c)) return;
        VectorField up = u, dn = u;
        up[k][i] += h;
        dn[k][i] -= h;
        const double fd =
            (flof::testing::flow_energy(phi1, phi2, up, p) - flof::testing::flow_energy(phi1, phi2, dn, p)) / (2 * h);
        num += (fd - analytic[k][i]) * (fd - analytic[k][i]);
        den += analytic[k][i] * analytic[k][i];
      });
    }
    worst = std::max(worst, std::sqrt(num / den));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && secs < 5.0, fmt("max relative deviation %.2e over 3 random 8^3 systems (<= 1e-4), %.2fs (< 5s)", worst, secs)};
}

Outcome cg_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(102);
  double worst_residual = 0.0, worst_direct = 0.0, worst_reported_gap = 0.0;
  for (const Extents& ext : {Extents{4, 4, 4}, Extents{4, 3, 4}, Extents{4, 4}, Extents{3, 3, 3}}) {
    for (int instance = 0; instance < 3; ++instance) {
      FlofParams p;
      p.beta_s = rng.uniform(1e-4, 1e-1);
      p.beta_t = rng.uniform(1e-5, 1e-2);
      const FlowSystem sys = assemble(flof::testing::random_field(ext, rng), flof::testing::random_field(ext, rng, -2, 2), p);
      const Eigen::MatrixXd a = flof::testing::materialize(sys);
      const Eigen::VectorXd b = flof::testing::flatten(sys.rhs);
      const Eigen::VectorXd direct = a.fullPivLu().solve(b);
      const CgResult cg = solve_cg(sys, p);
      const double res = (a * flof::testing::flatten(cg.u) - b).norm() / b.norm();
      worst_residual = std::max(worst_residual, res);
      worst_direct = std::max(worst_direct, (a * direct - b).norm() / b.norm());
      worst_reported_gap = std::max(worst_reported_gap, std::abs(res - cg.relative_residual));
    }
  }
  const double secs = seconds_since(t0);
  return {worst_residual <= 1e-2 && worst_direct <= 1e-10 && worst_reported_gap <= 1e-10 && secs < 5.0,
          fmt("CG residual vs dense operator %.2e (<= 1e-2), direct residual %.1e, reported-residual gap %.1e, %.2fs (< 5s)",
              worst_residual, worst_direct, worst_reported_gap, secs)};
}

const flof::testing::CircleFixture& fixture() { return flof::testing::circle_fixture(); }

Outcome registration() {
  set_threads("1");
  const auto t0 = std::chrono::steady_clock::now();
  const MatchResult r = run_flof(fixture().a, fixture().b);
  const double secs = seconds_since(t0);
  set_threads(nullptr);
  const double ratio = r.error_final / r.error_initial;
  return {ratio <= 0.10 && secs <= 60.0,
          fmt("error %.1f -> %.1f, ratio %.4f (<= 0.10), single-threaded %.1fs (<= 60s)", r.error_initial, r.error_final,
              ratio, secs)};
}

Outcome ablation() {
  const auto& f = fixture();
  const MatchResult one = run_flof(f.a, f.b, {}, FlofStages{false, false, false});
  const MatchResult residual = run_flof(f.a, f.b, {}, FlofStages{true, true, false});
  const MatchResult full = run_flof(f.a, f.b, {}, FlofStages{true, true, true});
  return {one.error_final > residual.error_final && residual.error_final > full.error_final,
          fmt("one flow step %.1f > residual iterations %.1f > with projection %.1f", one.error_final,
              residual.error_final, full.error_final)};
}

// Indicator input: +-1 by the sign of the same assembled volumes, run through
// the identical pipeline; both deformations are scored on the SDF fixture.
Outcome sdf_vs_indicator() {
  const auto& f = fixture();
  auto indicator = [](const ScalarField& s) {
    ScalarField o(s.extents());
    for (std::size_t i = 0; i < s.size(); ++i) o[i] = is_inside(s[i]) ? -1.0 : 1.0;
    return o;
  };
  const MatchResult sdf = run_flof(f.a, f.b);
  const MatchResult ind = run_flof(indicator(f.a.field), indicator(f.b.field));
  const double e_sdf = error_metric(advect(f.a.field, sdf.deformation, 1.0), f.b.field);
  const double e_ind = error_metric(advect(f.a.field, ind.deformation, 1.0), f.b.field);
  return {e_sdf <= 0.5 * e_ind, fmt("SDF input %.1f vs indicator input %.1f, ratio %.3f (<= 0.5)", e_sdf, e_ind, e_sdf / e_ind)};
}

Outcome star_alignment() {
  const int res = 64;
  const ScalarField star = scenes::quadrant_star_frame(res, 1, 0);
  const ScalarField target = scenes::quadrant_star_frame(res, 0, 1);
  const auto [u1, u2] = scenes::quadrant_deformations(res);
  const double aligned = error_metric(advect(star, align_velocity({&u1, &u2}, {1.0, 1.0}), 1.0), target);
  const double additive = error_metric(advect(star, u1 + u2, 1.0), target);
  const double unmoved = error_metric(star, target);
  return {aligned <= 0.1 * additive && additive >= 0.8 * unmoved,
          fmt("aligned %.1f <= 0.1 x additive %.1f; additive >= 0.8 x unmoved %.1f", aligned, additive, unmoved)};
}

Outcome composition() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(103);
  const Extents ext{32, 32, 16};
  const double gamma = 40.0;
  double total = 0.0, worst = 0.0;
  const int pairs = 200;
  for (int pair = 0; pair < pairs; ++pair) {
    const Point center{rng.uniform(12, 20), rng.uniform(12, 20), rng.uniform(6, 10)};
    const ScalarField phi = flof::testing::sphere_sdf(ext, center, rng.uniform(5, 8), gamma);
    const VectorField u1 = flof::testing::smooth_deformation(ext, rng, 3.0, rng.uniform(1.0, 3.0));
    const VectorField u2 = flof::testing::smooth_deformation(ext, rng, 3.0, rng.uniform(1.0, 3.0));
    const ScalarField twice = advect(advect(phi, u1, 1.0), u2, 1.0);
    const ScalarField once = advect(phi, align_velocity({&u1, &u2}, {1.0, 1.0}), 1.0);
    const double m = flof::testing::band_mean_abs_diff(twice, once, 0.5 * gamma);
    total += m;
    worst = std::max(worst, m);
  }
  const double secs = seconds_since(t0);
  return {worst <= 0.15 && secs < 30.0,
          fmt("%d pairs, mean %.4f, worst pair mean %.4f (<= 0.15), %.1fs (< 30s)", pairs, total / pairs, worst, secs)};
}

Outcome metric_axioms() {
  Rng rng(104);
  bool ok = true;
  for (int k = 0; k < 50; ++k) {
    const ScalarField a = flof::testing::random_field({9, 7, 3}, rng, -50, 50);
    const ScalarField b = flof::testing::random_field({9, 7, 3}, rng, -50, 50);
    ok = ok && error_metric(a, a) == 0.0 && error_metric(a, b) == error_metric(b, a);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double h = error_indicator(a[i], b[i]);
      ok = ok && h >= 0.0 && h <= 1.0;
    }
  }
  ok = ok && error_indicator(40.0, -40.0) == 1.0;
  const auto ring = flof::testing::ring_fixture();
  const double broken = error_metric(ring.broken, ring.target);
  const double shifted = error_metric(ring.shifted, ring.target);
  const double l2_gap = std::abs(flof::testing::squared_difference(ring.broken, ring.target) -
                                 flof::testing::squared_difference(ring.shifted, ring.target)) /
                        flof::testing::squared_difference(ring.broken, ring.target);
  return {ok && l2_gap <= 1e-6 && broken >= 2.0 * shifted,
          fmt("axioms %s; broken %.1f vs shifted %.1f at equal L2, factor %.2f (>= 2)", ok ? "hold" : "VIOLATED", broken,
              shifted, broken / shifted)};
}

Outcome endpoints() {
  // Real registrations for the 1D space, synthetic smooth fields for 2D.
  ParameterSpace line = flof::testing::line_space();
  FlofParams p;
  p.gamma_max = 20.0;
  p.beta_image = beta_image(20.0);
  p.s_max = 6;
  const MatchPair pair = match_pair(line.samples[0].volume, line.samples[1].volume, p);
  line.deformations = {{0, 1, pair.forward.deformation}, {1, 0, pair.backward.deformation}};
  ParameterSpace tri = flof::testing::triangle_space();
  Rng rng(105);
  for (auto& d : tri.deformations) d.field = flof::testing::smooth_deformation(tri.extents(), rng, 3.0, 3.0);
  int checked = 0, failed = 0;
  for (const ParameterSpace* s : {&line, &tri}) {
    for (int v = 0; v < static_cast<int>(s->samples.size()); ++v)
      for (BlendMode m : {BlendMode::Linear, BlendMode::Union, BlendMode::Nearest})
        for (int t = 0; t < s->time_extent(); ++t) {
          ++checked;
          if (!flof::testing::bit_equal(synthesize(*s, s->samples[v].r, t, m).slice, slab(s->samples[v].volume, t)))
            ++failed;
        }
  }
  return {failed == 0, fmt("%d vertex slices byte-equal to inputs, %d mismatches (1D and 2D, linear/union/nearest)",
                           checked - failed, failed)};
}

Outcome partition_of_unity() {
  Rng rng(106);
  double worst_sum = 0.0, most_negative = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const double a = rng.uniform();
    const std::vector<double> x1{1.0 - a, a};
    double x = rng.uniform(), y = rng.uniform();
    if (x + y > 1.0) x = 1.0 - x, y = 1.0 - y;
    const std::vector<double> x2{x, y, 1.0 - x - y};
    for (const auto& w : {union_weights(x1).weights, union_weights(x2).weights}) {
      double s = 0.0;
      for (double v : w) {
        s += v;
        most_negative = std::min(most_negative, v);
      }
      worst_sum = std::max(worst_sum, std::abs(s - 1.0));
    }
  }
  bool exact = true;
  const double alphas[] = {0.0, 0.25, 0.5, 0.75, 1.0};
  for (double al : alphas) {
    const UnionWeights1D w = union_weights_1d(al);
    exact = exact && w.w1 == std::clamp(1.0 - 2.0 * al, 0.0, 1.0) && w.w2 == std::clamp(2.0 * al - 1.0, 0.0, 1.0) &&
            w.w12 == 1.0 - w.w1 - w.w2;
  }
  return {worst_sum <= 1e-9 && most_negative >= 0.0 && exact,
          fmt("10^4 points per dimension, max |sum - 1| %.1e (<= 1e-9), min weight %.1e (>= 0), 1D formulas %s",
              worst_sum, most_negative, exact ? "exact" : "MISMATCH")};
}

Outcome smoke_mass() {
  FlofParams p;
  p.gamma_max = 20.0;
  p.beta_image = beta_image(20.0);
  p.s_max = 6;
  const ParameterSpace s =
      flof::testing::smoke_space([&](const SpaceTimeSDF& a, const SpaceTimeSDF& b) { return run_flof(a, b, p).deformation; });
  double worst = 0.0;
  for (double a : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    const std::vector<double> x{a};
    for (int t = 0; t < s.time_extent(); ++t) {
      const double expected = (1.0 - a) * sum(slab(s.samples[0].volume, t)) + a * sum(slab(s.samples[1].volume, t));
      const double got = sum(synthesize(s, x, t, BlendMode::Linear).slice);
      worst = std::max(worst, std::abs(got - expected) / expected);
    }
  }
  return {worst <= 1e-6, fmt("max relative mass error %.2e (<= 1e-6)", worst)};
}

Outcome round_trip_and_determinism() {
  Rng rng(107);
  bool format_ok = true;
  for (int k = 0; k < 10; ++k) {
    io::Volume v;
    v.kind = k % 2 ? io::FileKind::Deformation : io::FileKind::Scalar;
    const int axes = 1 + k % 4;
    for (int a = 0; a < axes; ++a) v.extents.push_back(static_cast<std::uint32_t>(rng.integer(1, 9)));
    v.components = static_cast<std::uint8_t>(k % 2 ? axes : 1);
    for (std::size_t i = 0; i < v.cells() * v.components; ++i) v.payload.push_back(static_cast<float>(rng.uniform(-1e3, 1e3)));
    const auto bytes = io::encode(v);
    format_ok = format_ok && io::encode(io::decode(bytes)) == bytes;
  }
  const auto [a, b] = flof::testing::small_circle_pair();
  FlofParams p;
  p.gamma_max = 20.0;
  p.beta_image = beta_image(20.0);
  p.s_max = 6;
  const MatchResult first = run_flof(a, b, p);
  const MatchResult again = run_flof(a, b, p);
  set_threads("1");
  const MatchResult serial = run_flof(a, b, p);
  set_threads(nullptr);
  // Field round trip: float storage reproduces itself exactly.
  const VectorField stored = io::to_deformation(io::to_volume(first.deformation));
  format_ok = format_ok && io::encode(io::to_volume(stored)) == io::encode(io::to_volume(first.deformation));
  const bool runs_ok = first.deformation == again.deformation && first.deformation == serial.deformation &&
                       first.error_final == serial.error_final;
  return {format_ok && runs_ok, fmt("volume encode/decode %s; repeated and single-threaded runs %s",
                                    format_ok ? "byte-identical" : "DIFFER", runs_ok ? "bit-identical" : "DIFFER")};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> checks[] = {
      {"energy-gradient consistency", energy_gradient},
      {"CG oracle equivalence", cg_oracle},
      {"registration fixture", registration},
      {"ablation ordering", ablation},
      {"SDF vs indicator input", sdf_vs_indicator},
      {"alignment star fixture", star_alignment},
      {"alignment composition", composition},
      {"error-metric axioms", metric_axioms},
      {"interpolation endpoints", endpoints},
      {"weight partition of unity", partition_of_unity},
      {"smoke mass", smoke_mass},
      {"format round-trip and determinism", round_trip_and_determinism},
  };
  int failures = 0;
  for (const auto& [name, run] : checks) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s  %-34s %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(std::size(checks)) - failures, std::size(checks));
  return failures == 0 ? 0 : 1;
}

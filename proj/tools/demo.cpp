// Registers two translating-circle sequences and prints the error trace.

#include <chrono>
#include <cstdio>

#include "flof/flof.hpp"
#include "flof/scenes.hpp"

int main() {
  using namespace flof;
  const SpaceTimeSDF a = assemble_spacetime(scenes::generate("translating-circle", {64, 32, -3.0, 1}));
  const SpaceTimeSDF b = assemble_spacetime(scenes::generate("translating-circle", {64, 32, 3.0, 1}));
  std::printf("space-time volume %s\n", a.field.extents().str().c_str());
  const auto t0 = std::chrono::steady_clock::now();
  const MatchResult r = run_flof(a, b);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (const auto& e : r.level_trace)
    std::printf("level %d %-10s %-10s iter %d  sigma %.2f  %.1f -> %.1f  %s\n", e.level, e.extents.c_str(),
                e.stage.c_str(), e.iteration, e.sigma, e.error_before, e.error_after, e.accepted ? "accepted" : "rejected");
  std::printf("error %.1f -> %.1f (%.1f%%) in %.1fs\n", r.error_initial, r.error_final,
              100.0 * r.error_final / r.error_initial, secs);
}

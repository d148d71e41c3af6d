#pragma once

// Synthesis of in-between simulations from precomputed deformations over 1D
// (segments) and 2D (triangles) parameter spaces.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "flof/deformation.hpp"
#include "flof/grid.hpp"
#include "flof/levelset.hpp"

namespace flof {

// ---------------------------------------------------------------------------
// Barycentric coordinates

struct Barycentric {
  std::vector<double> weights;
  bool inside = false;
};

// Weights of x with respect to the simplex r_1..r_n (n = dim + 1), from
// p' = [(r_1 - r_n) ... (r_{n-1} - r_n)]^-1 (x - r_n) and a last weight of
// 1 - sum(p').
inline Barycentric barycentric(std::span<const double> x, std::span<const std::vector<double>> vertices,
                               double tolerance = 1e-9) {
  const int n = static_cast<int>(vertices.size());
  const int d = n - 1;
  if (n < 2) throw Error("barycentric: need at least two vertices");
  if (static_cast<int>(x.size()) != d) throw Error("barycentric: point dimension does not match simplex");
  for (const auto& v : vertices)
    if (static_cast<int>(v.size()) != d) throw Error("barycentric: vertex dimension does not match simplex");

  Eigen::MatrixXd m(d, d);
  Eigen::VectorXd rhs(d);
  double scale = 0.0;
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < d; ++i) {
      m(i, j) = vertices[j][i] - vertices[n - 1][i];
      scale = std::max(scale, std::abs(m(i, j)));
    }
  }
  for (int i = 0; i < d; ++i) rhs(i) = x[i] - vertices[n - 1][i];
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  lu.setThreshold(1e-12);
  if (scale == 0.0 || !lu.isInvertible()) throw Error("barycentric: degenerate simplex");
  const Eigen::VectorXd p = lu.solve(rhs);

  Barycentric out;
  out.weights.resize(n);
  double rest = 1.0;
  for (int i = 0; i < d; ++i) {
    out.weights[i] = p(i);
    rest -= p(i);
  }
  out.weights[d] = rest;
  out.inside = std::all_of(out.weights.begin(), out.weights.end(), [&](double w) { return w >= -tolerance; });
  return out;
}

// ---------------------------------------------------------------------------
// Union blending weights

struct UnionWeights1D {
  double w1 = 0.0, w12 = 0.0, w2 = 0.0;
};

inline UnionWeights1D union_weights_1d(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error("union_weights_1d: alpha must be in [0, 1]");
  UnionWeights1D w;
  w.w1 = std::clamp(1.0 - 2.0 * alpha, 0.0, 1.0);
  w.w2 = std::clamp(2.0 * alpha - 1.0, 0.0, 1.0);
  w.w12 = 1.0 - w.w1 - w.w2;
  return w;
}

// A data point of the subdivided simplex: an input (one member) or the
// union of the inputs of a face, placed at the face center.
struct DataPoint {
  std::vector<int> members;  // local vertex indices
};

struct SubdividedSimplex {
  std::vector<DataPoint> points;
  std::vector<std::vector<int>> cells;  // sub-simplices as indices into points
};

// 1D: v0, v0 u v1, v1.   2D: v0, v1, v2, the three edge unions, the center union;
// one corner triangle per vertex and three triangles around the center.
inline const SubdividedSimplex& subdivision(int dim) {
  static const SubdividedSimplex seg{{{{0}}, {{0, 1}}, {{1}}}, {{0, 1}, {1, 2}}};
  static const SubdividedSimplex tri{
      {{{0}}, {{1}}, {{2}}, {{0, 1}}, {{1, 2}}, {{0, 2}}, {{0, 1, 2}}},
      {{0, 3, 5}, {1, 3, 4}, {2, 4, 5}, {3, 4, 6}, {4, 5, 6}, {5, 3, 6}}};
  if (dim == 1) return seg;
  if (dim == 2) return tri;
  throw Error("union blending supports 1D and 2D parameter spaces");
}

struct UnionBlend {
  std::vector<double> weights;  // one per subdivision data point
  int cell = -1;                // active sub-simplex
};

// Weights over the subdivision data points for parent barycentric coordinates x.
inline UnionBlend union_weights(std::span<const double> x) {
  const int dim = static_cast<int>(x.size()) - 1;
  const SubdividedSimplex& sub = subdivision(dim);
  auto position = [&](const DataPoint& p) {
    std::vector<double> pos(dim, 0.0);
    for (int m : p.members)
      if (m < dim) pos[m] += 1.0 / p.members.size();
    return pos;
  };
  const std::vector<double> px(x.begin(), x.begin() + dim);

  UnionBlend best;
  double best_min = -std::numeric_limits<double>::infinity();
  std::vector<double> best_local;
  for (int c = 0; c < static_cast<int>(sub.cells.size()); ++c) {
    std::vector<std::vector<double>> verts;
    for (int idx : sub.cells[c]) verts.push_back(position(sub.points[idx]));
    const Barycentric local = barycentric(px, verts);
    const double lo = *std::min_element(local.weights.begin(), local.weights.end());
    if (lo > best_min) {
      best_min = lo;
      best.cell = c;
      best_local = local.weights;
    }
    if (local.inside) break;
  }
  // Points numerically outside every sub-simplex snap to the closest one.
  double total = 0.0;
  for (double& w : best_local) {
    w = std::max(w, 0.0);
    total += w;
  }
  best.weights.assign(sub.points.size(), 0.0);
  for (std::size_t k = 0; k < best_local.size(); ++k) best.weights[sub.cells[best.cell][k]] = best_local[k] / total;
  return best;
}

// ---------------------------------------------------------------------------
// Blending primitives

inline ScalarField temporal_filter(const ScalarField& slice_t, const ScalarField& slice_next) {
  require_same_extents(slice_t.extents(), slice_next.extents(), "temporal_filter");
  ScalarField out(slice_t.extents());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(slice_t[i], slice_next[i]);
  return out;
}

inline ScalarField smoke_normalize(const ScalarField& deformed, double original_mass) {
  if (!(original_mass > 0.0)) throw Error("smoke_normalize: original mass must be positive");
  const double current = sum(deformed);
  if (!(current > 0.0)) throw Error("smoke_normalize: deformed density has no mass");
  ScalarField out(deformed.extents());
  const double s = original_mass / current;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * deformed[i];
  return out;
}

// out += w * f
inline void accumulate(ScalarField& out, const ScalarField& f, double w) {
  if (w == 0.0) return;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * f[i];
}

// 1D linear blend of two space-time inputs at slab t.
inline ScalarField interp_linear_1d(const ScalarField& b1, const ScalarField& b2, const VectorField& u12,
                                    const VectorField& u21, std::span<const double> x, int t) {
  require_same_extents(b1.extents(), b2.extents(), "interp_linear_1d");
  if (x.size() != 2) throw Error("interp_linear_1d: expected two weights");
  if (x[0] == 1.0) return slab(b1, t);
  if (x[1] == 1.0) return slab(b2, t);
  const ScalarField d1 = advect_slab(b1, u12, std::clamp(1.0 - x[0], 0.0, 1.0), t);
  const ScalarField d2 = advect_slab(b2, u21, std::clamp(1.0 - x[1], 0.0, 1.0), t);
  ScalarField out(d1.extents());
  accumulate(out, d1, x[0]);
  accumulate(out, d2, x[1]);
  return out;
}

// ---------------------------------------------------------------------------
// Parameter spaces

enum class VolumeKind { LiquidSdf, SmokeDensity };
enum class BlendMode { Linear, Union, Nearest };

inline std::string to_string(VolumeKind k) { return k == VolumeKind::LiquidSdf ? "liquid-sdf" : "smoke-density"; }
inline VolumeKind parse_kind(const std::string& s) {
  if (s == "liquid-sdf") return VolumeKind::LiquidSdf;
  if (s == "smoke-density") return VolumeKind::SmokeDensity;
  throw Error("unknown volume kind '" + s + "'");
}
inline std::string to_string(BlendMode m) {
  switch (m) {
    case BlendMode::Linear: return "linear";
    case BlendMode::Union: return "union";
    case BlendMode::Nearest: return "nearest";
  }
  return "linear";
}
inline BlendMode parse_mode(const std::string& s) {
  if (s == "linear") return BlendMode::Linear;
  if (s == "union") return BlendMode::Union;
  if (s == "nearest") return BlendMode::Nearest;
  throw Error("unknown blend mode '" + s + "'");
}

struct Sample {
  std::string name;
  std::vector<double> r;
  ScalarField volume;  // space-time, last axis is time
};

struct DirectedDeformation {
  int from = 0;
  int to = 0;
  VectorField field;
};

struct ParameterSpace {
  std::string name = "space";
  VolumeKind kind = VolumeKind::LiquidSdf;
  std::vector<Sample> samples;
  std::vector<std::vector<int>> simplices;
  std::vector<DirectedDeformation> deformations;
  SpaceTimeLayout layout;  // where the original frames sit in the volumes

  int dimension() const { return samples.empty() ? 0 : static_cast<int>(samples.front().r.size()); }
  const Extents& extents() const { return samples.front().volume.extents(); }
  int time_extent() const { return extents()[extents().rank() - 1]; }

  const DirectedDeformation* find(int from, int to) const {
    for (const auto& d : deformations)
      if (d.from == from && d.to == to) return &d;
    return nullptr;
  }

  // Deformation resampled to the volume grid when stored at a coarser resolution.
  VectorField deformation(int from, int to) const {
    const DirectedDeformation* d = find(from, to);
    if (!d) throw Error("missing deformation " + std::to_string(from) + "->" + std::to_string(to));
    return resample(d->field, extents());
  }

  // Directed edges a simplex needs: consecutive vertices, closing the cycle
  // for triangles.
  static std::vector<std::pair<int, int>> chain_edges(const std::vector<int>& s) {
    const int n = static_cast<int>(s.size());
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i) edges.emplace_back(s[i], s[(i + 1) % n]);
    return edges;
  }

  void validate() const {
    if (samples.size() < 2) throw Error("parameter space needs at least two samples");
    const int d = dimension();
    if (d < 1 || d > 2) throw Error("parameter spaces must be 1D or 2D");
    for (const auto& s : samples) {
      if (static_cast<int>(s.r.size()) != d) throw Error("sample '" + s.name + "' has wrong parameter dimension");
      require_same_extents(extents(), s.volume.extents(), "parameter space volumes");
    }
    if (simplices.empty()) throw Error("parameter space has no simplices");
    for (const auto& sx : simplices) {
      if (static_cast<int>(sx.size()) != d + 1) throw Error("simplex has wrong vertex count");
      std::vector<std::vector<double>> verts;
      for (int v : sx) {
        if (v < 0 || v >= static_cast<int>(samples.size())) throw Error("simplex references unknown sample");
        verts.push_back(samples[v].r);
      }
      barycentric(verts.front(), verts);  // throws on degenerate simplices
      for (auto [a, b] : chain_edges(sx))
        if (!find(a, b)) throw Error("simplex is missing deformation " + std::to_string(a) + "->" + std::to_string(b));
    }
    for (const auto& def : deformations)
      if (def.field.rank() != extents().rank()) throw Error("deformation rank does not match volumes");
  }
};

struct Location {
  int simplex = -1;
  std::vector<double> weights;  // barycentric, in simplex vertex order
};

inline Location locate(const ParameterSpace& space, std::span<const double> x) {
  if (static_cast<int>(x.size()) != space.dimension())
    throw Error("parameter point has " + std::to_string(x.size()) + " coordinates, space is " +
                std::to_string(space.dimension()) + "D");
  for (int s = 0; s < static_cast<int>(space.simplices.size()); ++s) {
    std::vector<std::vector<double>> verts;
    for (int v : space.simplices[s]) verts.push_back(space.samples[v].r);
    Barycentric b = barycentric(x, verts);
    if (b.inside) {
      for (double& w : b.weights) w = std::clamp(w, 0.0, 1.0);
      return {s, b.weights};
    }
  }
  throw Error("parameter point is outside the parameter space");
}

struct Synthesis {
  ScalarField slice;
  int simplex = -1;
  std::vector<double> barycentric;
  // Linear: barycentric weights. Union: weights of the subdivision data points.
  // Nearest: one-hot over the simplex vertices.
  std::vector<double> blend_weights;
};

namespace detail {

// Input `local` of the simplex deformed towards barycentric position x and
// evaluated on slab t. The chain u(i->i+1), u(i+1->i+2), ... is applied with
// weights 1 - x_i, 1 - x_i - x_{i+1}, ... and merged by alignment.
inline ScalarField deformed_input(const ParameterSpace& space, const std::vector<int>& simplex, int local,
                                  std::span<const double> x, int t) {
  const int n = static_cast<int>(simplex.size());
  const int d = n - 1;
  std::vector<VectorField> chain;
  std::vector<double> alphas;
  double covered = 0.0;
  for (int k = 0; k < d; ++k) {
    covered += x[(local + k) % n];
    alphas.push_back(std::clamp(1.0 - covered, 0.0, 1.0));
    chain.push_back(space.deformation(simplex[(local + k) % n], simplex[(local + k + 1) % n]));
  }
  const ScalarField& volume = space.samples[simplex[local]].volume;
  if (std::all_of(alphas.begin(), alphas.end(), [](double a) { return a == 0.0; })) return slab(volume, t);
  std::vector<const VectorField*> ptrs;
  for (const auto& c : chain) ptrs.push_back(&c);
  const VectorField comb = align_velocity(ptrs, alphas);
  return advect_slab(volume, comb, 1.0, t);
}

inline ScalarField synthesize_slab(const ParameterSpace& space, const Location& loc, BlendMode mode, int t,
                                   std::vector<double>& blend_weights) {
  const std::vector<int>& simplex = space.simplices[loc.simplex];
  const std::span<const double> x = loc.weights;
  const int n = static_cast<int>(simplex.size());
  const Extents sub = space.extents().drop_last();
  const bool smoke = space.kind == VolumeKind::SmokeDensity;

  auto input = [&](int local) {
    ScalarField f = deformed_input(space, simplex, local, x, t);
    if (smoke && x[local] != 1.0) {
      const double mass = sum(slab(space.samples[simplex[local]].volume, t));
      if (mass > 0.0) f = smoke_normalize(f, mass);
    }
    return f;
  };

  if (mode == BlendMode::Nearest) {
    int nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    const auto& r = space.samples;
    std::vector<double> px(space.dimension());
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < space.dimension(); ++k) px[k] += x[i] * r[simplex[i]].r[k];
    for (int i = 0; i < n; ++i) {
      double dist = 0.0;
      for (int k = 0; k < space.dimension(); ++k) dist += std::pow(px[k] - r[simplex[i]].r[k], 2);
      if (dist < best) {
        best = dist;
        nearest = i;
      }
    }
    blend_weights.assign(n, 0.0);
    blend_weights[nearest] = 1.0;
    return input(nearest);
  }

  // Exact inputs at the vertices.
  for (int i = 0; i < n; ++i) {
    if (x[i] == 1.0) {
      blend_weights = mode == BlendMode::Union ? union_weights(x).weights : loc.weights;
      return slab(space.samples[simplex[i]].volume, t);
    }
  }

  if (mode == BlendMode::Linear) {
    blend_weights = loc.weights;
    ScalarField out(sub);
    for (int i = 0; i < n; ++i)
      if (x[i] != 0.0) accumulate(out, input(i), x[i]);
    return out;
  }

  if (smoke) throw Error("union blending requires SDF volumes");
  const UnionBlend ub = union_weights(x);
  blend_weights = ub.weights;
  const SubdividedSimplex& subdiv = subdivision(n - 1);
  std::vector<std::optional<ScalarField>> deformed(n);
  auto get = [&](int i) -> const ScalarField& {
    if (!deformed[i]) deformed[i] = input(i);
    return *deformed[i];
  };
  ScalarField out(sub);
  for (std::size_t p = 0; p < subdiv.points.size(); ++p) {
    if (ub.weights[p] == 0.0) continue;
    const auto& members = subdiv.points[p].members;
    if (members.size() == 1) {
      accumulate(out, get(members[0]), ub.weights[p]);
      continue;
    }
    ScalarField u = get(members[0]);
    for (std::size_t m = 1; m < members.size(); ++m) {
      const ScalarField& o = get(members[m]);
      for (std::size_t i = 0; i < u.size(); ++i) u[i] = std::min(u[i], o[i]);
    }
    accumulate(out, u, ub.weights[p]);
  }
  return out;
}

}  // namespace detail

// One spatial slice of the in-between at parameter point x and time index t
// of the stored volumes (fractional t blends the adjacent slabs).
inline Synthesis synthesize(const ParameterSpace& space, std::span<const double> x, double t, BlendMode mode) {
  const int nt = space.time_extent();
  if (!(t >= 0.0 && t <= nt - 1)) throw Error("time index out of range");
  Synthesis out;
  const Location loc = locate(space, x);
  out.simplex = loc.simplex;
  out.barycentric = loc.weights;
  const int t0 = static_cast<int>(std::floor(t));
  const double f = t - t0;
  out.slice = detail::synthesize_slab(space, loc, mode, t0, out.blend_weights);
  if (f > 0.0) {
    std::vector<double> ignored;
    const ScalarField next = detail::synthesize_slab(space, loc, mode, t0 + 1, ignored);
    for (std::size_t i = 0; i < out.slice.size(); ++i) out.slice[i] = (1.0 - f) * out.slice[i] + f * next[i];
  }
  return out;
}

// Frame `frame` of the original sequences (before time padding), cropped to
// the original spatial domain.
inline Synthesis synthesize_frame(const ParameterSpace& space, std::span<const double> x, double frame,
                                  BlendMode mode) {
  const SpaceTimeLayout& l = space.layout;
  if (!(frame >= 0.0 && frame <= l.frames - 1)) throw Error("frame index out of range");
  Synthesis s = synthesize(space, x, frame + l.frames_repeated, mode);
  s.slice = crop(s.slice, l.pad, l.pad);
  return s;
}

// Stored input frame of a sample, same domain as synthesize_frame.
inline ScalarField input_frame(const ParameterSpace& space, int sample, int frame) {
  const SpaceTimeLayout& l = space.layout;
  return crop(slab(space.samples.at(sample).volume, l.time_index(frame)), l.pad, l.pad);
}

// Names matching Synthesis::blend_weights: sample names, unions as "a|b".
inline std::vector<std::string> blend_labels(const ParameterSpace& space, int simplex, BlendMode mode) {
  const std::vector<int>& s = space.simplices.at(simplex);
  std::vector<std::string> out;
  if (mode != BlendMode::Union) {
    for (int v : s) out.push_back(space.samples[v].name);
    return out;
  }
  for (const auto& p : subdivision(static_cast<int>(s.size()) - 1).points) {
    std::string label;
    for (int m : p.members) label += (label.empty() ? "" : "|") + space.samples[s[m]].name;
    out.push_back(label);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Frame cache

// Synthesized slices kept for a sliding window of time indices (20% of the
// sequence length) around the most recent request.
class FrameCache {
 public:
  explicit FrameCache(int time_extent, double window_fraction = 0.2)
      : window_(std::max(1, static_cast<int>(std::ceil(window_fraction * time_extent)))) {}

  int window() const { return window_; }

  std::optional<Synthesis> get(const std::string& key, int t) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find({key, t});
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void put(const std::string& key, int t, Synthesis value) {
    std::unique_lock lock(mutex_);
    entries_[{key, t}] = std::move(value);
    for (auto it = entries_.begin(); it != entries_.end();) {
      if (std::abs(it->first.second - t) > window_)
        it = entries_.erase(it);
      else
        ++it;
    }
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
  }

 private:
  int window_;
  mutable std::shared_mutex mutex_;
  std::map<std::pair<std::string, int>, Synthesis> entries_;
};

}  // namespace flof

#pragma once

// Dense N-dimensional grids (N <= 4) with cell size 1 on every axis,
// including time. Data is stored with axis 0 fastest.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "flof/parallel.hpp"

namespace flof {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxRank = 4;

using Coord = std::array<int, kMaxRank>;
// Continuous position in cell coordinates; cell i has its center at i.
using Point = std::array<double, kMaxRank>;

class Extents {
 public:
  Extents() = default;
  Extents(std::initializer_list<int> n) : Extents(std::span<const int>(n.begin(), n.size())) {}
  explicit Extents(std::span<const int> n) {
    if (n.empty() || n.size() > kMaxRank)
      throw Error("grid rank must be in [1, " + std::to_string(kMaxRank) + "], got " +
                  std::to_string(n.size()));
    rank_ = static_cast<int>(n.size());
    std::size_t s = 1;
    for (int a = 0; a < rank_; ++a) {
      if (n[a] <= 0) throw Error("grid extents must be positive");
      n_[a] = n[a];
      stride_[a] = s;
      s *= static_cast<std::size_t>(n[a]);
    }
    size_ = s;
  }

  int rank() const { return rank_; }
  int operator[](int axis) const { return n_[axis]; }
  std::size_t stride(int axis) const { return stride_[axis]; }
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  std::vector<int> to_vector() const { return {n_.begin(), n_.begin() + rank_}; }

  int min_extent() const { return *std::min_element(n_.begin(), n_.begin() + rank_); }

  std::size_t index(const Coord& c) const {
    std::size_t i = 0;
    for (int a = 0; a < rank_; ++a) i += static_cast<std::size_t>(c[a]) * stride_[a];
    return i;
  }

  Coord coord(std::size_t idx) const {
    Coord c{};
    for (int a = 0; a < rank_; ++a) {
      c[a] = static_cast<int>(idx % static_cast<std::size_t>(n_[a]));
      idx /= static_cast<std::size_t>(n_[a]);
    }
    return c;
  }

  // Advances c to the next cell in storage order.
  void increment(Coord& c) const {
    for (int a = 0; a < rank_; ++a) {
      if (++c[a] < n_[a]) return;
      c[a] = 0;
    }
  }

  bool on_boundary(const Coord& c) const {
    for (int a = 0; a < rank_; ++a)
      if (c[a] == 0 || c[a] == n_[a] - 1) return true;
    return false;
  }

  // Same extents with the last axis removed.
  Extents drop_last() const {
    if (rank_ < 2) throw Error("cannot drop the only axis of a grid");
    return Extents(std::span<const int>(n_.data(), rank_ - 1));
  }

  Extents append(int n) const {
    auto v = to_vector();
    v.push_back(n);
    return Extents(v);
  }

  std::string str() const {
    std::ostringstream os;
    for (int a = 0; a < rank_; ++a) os << (a ? "x" : "") << n_[a];
    return os.str();
  }

  friend bool operator==(const Extents& x, const Extents& y) {
    if (x.rank_ != y.rank_) return false;
    for (int a = 0; a < x.rank_; ++a)
      if (x.n_[a] != y.n_[a]) return false;
    return true;
  }

 private:
  std::array<int, kMaxRank> n_{};
  std::array<std::size_t, kMaxRank> stride_{};
  std::size_t size_ = 0;
  int rank_ = 0;
};

inline void require_same_extents(const Extents& a, const Extents& b, const char* what) {
  if (!(a == b))
    throw Error(std::string(what) + ": extents mismatch (" + a.str() + " vs " + b.str() + ")");
}

// fn(idx, coord) for every cell, in parallel chunks.
template <class Fn>
void for_each_cell(const Extents& ext, Fn&& fn) {
  parallel_chunks(ext.size(), [&](std::size_t, std::size_t begin, std::size_t end) {
    Coord c = ext.coord(begin);
    for (std::size_t i = begin; i < end; ++i, ext.increment(c)) fn(i, c);
  });
}

template <class T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  explicit Grid(Extents ext, T fill = T{}) : ext_(std::move(ext)), data_(ext_.size(), fill) {}
  Grid(Extents ext, std::vector<T> data) : ext_(std::move(ext)), data_(std::move(data)) {
    if (data_.size() != ext_.size())
      throw Error("grid data length " + std::to_string(data_.size()) + " does not match extents " +
                  ext_.str());
  }

  const Extents& extents() const { return ext_; }
  int rank() const { return ext_.rank(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  T& at(const Coord& c) { return data_[ext_.index(c)]; }
  const T& at(const Coord& c) const { return data_[ext_.index(c)]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  friend bool operator==(const Grid& a, const Grid& b) { return a.ext_ == b.ext_ && a.data_ == b.data_; }

 private:
  Extents ext_;
  std::vector<T> data_;
};

using ScalarField = Grid<double>;

// One component grid per axis; components are displacements in cells.
class VectorField {
 public:
  VectorField() = default;
  explicit VectorField(const Extents& ext) : ext_(ext), comp_(ext.rank(), ScalarField(ext)) {}

  const Extents& extents() const { return ext_; }
  int rank() const { return ext_.rank(); }
  int components() const { return static_cast<int>(comp_.size()); }
  std::size_t size() const { return ext_.size(); }
  bool empty() const { return comp_.empty(); }

  ScalarField& operator[](int c) { return comp_[c]; }
  const ScalarField& operator[](int c) const { return comp_[c]; }

  Point at(std::size_t idx) const {
    Point p{};
    for (int c = 0; c < components(); ++c) p[c] = comp_[c][idx];
    return p;
  }
  void set(std::size_t idx, const Point& p) {
    for (int c = 0; c < components(); ++c) comp_[c][idx] = p[c];
  }

  VectorField& operator+=(const VectorField& o) {
    require_same_extents(ext_, o.ext_, "vector add");
    for (int c = 0; c < components(); ++c) {
      auto& d = comp_[c].storage();
      const auto& s = o.comp_[c].storage();
      parallel_for(d.size(), [&](std::size_t i) { d[i] += s[i]; });
    }
    return *this;
  }

  VectorField& operator*=(double s) {
    for (auto& f : comp_)
      for (double& v : f.storage()) v *= s;
    return *this;
  }

  friend VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
  friend VectorField operator*(double s, VectorField v) { return v *= s; }

  friend bool operator==(const VectorField& a, const VectorField& b) {
    return a.ext_ == b.ext_ && a.comp_ == b.comp_;
  }

 private:
  Extents ext_;
  std::vector<ScalarField> comp_;
};

inline bool all_finite(const ScalarField& f) {
  return std::all_of(f.values().begin(), f.values().end(), [](double v) { return std::isfinite(v); });
}

inline bool all_finite(const VectorField& v) {
  for (int c = 0; c < v.components(); ++c)
    if (!all_finite(v[c])) return false;
  return true;
}

inline double max_abs(const ScalarField& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, std::abs(v));
  return m;
}

inline double max_abs(const VectorField& v) {
  double m = 0.0;
  for (int c = 0; c < v.components(); ++c) m = std::max(m, max_abs(v[c]));
  return m;
}

inline double sum(const ScalarField& f) {
  const auto& d = f.storage();
  return parallel_sum(d.size(), [&](std::size_t i) { return d[i]; });
}

// Sets every vector on a domain face to zero.
inline void zero_boundary(VectorField& v) {
  const Extents& ext = v.extents();
  for_each_cell(ext, [&](std::size_t i, const Coord& c) {
    if (ext.on_boundary(c))
      for (int k = 0; k < v.components(); ++k) v[k][i] = 0.0;
  });
}

// ---------------------------------------------------------------------------
// Multilinear sampling

// Corner indices and weights of the multilinear stencil around a point.
// Positions are clamped to [0, n-1] per axis. Zero-weight corners are dropped,
// so a cell-center query returns that cell's value exactly.
struct LinearStencil {
  std::array<std::size_t, 1 << kMaxRank> index{};
  std::array<double, 1 << kMaxRank> weight{};
  int count = 0;

  LinearStencil(const Extents& ext, const Point& pos) {
    std::array<std::size_t, kMaxRank> lo{}, hi{};
    std::array<double, kMaxRank> frac{};
    for (int a = 0; a < ext.rank(); ++a) {
      const double x = std::clamp(pos[a], 0.0, static_cast<double>(ext[a] - 1));
      const int i0 = std::min(static_cast<int>(std::floor(x)), ext[a] - 1);
      frac[a] = x - i0;
      lo[a] = static_cast<std::size_t>(i0) * ext.stride(a);
      hi[a] = static_cast<std::size_t>(std::min(i0 + 1, ext[a] - 1)) * ext.stride(a);
    }
    const int corners = 1 << ext.rank();
    for (int m = 0; m < corners; ++m) {
      double w = 1.0;
      std::size_t idx = 0;
      for (int a = 0; a < ext.rank(); ++a) {
        if (m & (1 << a)) {
          w *= frac[a];
          idx += hi[a];
        } else {
          w *= 1.0 - frac[a];
          idx += lo[a];
        }
      }
      if (w != 0.0) {
        index[count] = idx;
        weight[count] = w;
        ++count;
      }
    }
  }

  double apply(const ScalarField& f) const {
    double s = 0.0;
    for (int k = 0; k < count; ++k) s += weight[k] * f[index[k]];
    return s;
  }
};

inline double sample_linear(const ScalarField& f, const Point& pos) {
  return LinearStencil(f.extents(), pos).apply(f);
}

inline Point sample_linear(const VectorField& v, const Point& pos) {
  const LinearStencil st(v.extents(), pos);
  Point out{};
  for (int c = 0; c < v.components(); ++c) out[c] = st.apply(v[c]);
  return out;
}

inline Point to_point(const Coord& c, int rank) {
  Point p{};
  for (int a = 0; a < rank; ++a) p[a] = c[a];
  return p;
}

// ---------------------------------------------------------------------------
// Differential operators and filters

// Central differences inside, one-sided differences on the faces.
inline VectorField gradient(const ScalarField& f) {
  const Extents& ext = f.extents();
  for (int a = 0; a < ext.rank(); ++a)
    if (ext[a] < 2) throw Error("gradient: every axis needs at least 2 cells, got " + ext.str());
  VectorField g(ext);
  for_each_cell(ext, [&](std::size_t i, const Coord& c) {
    for (int a = 0; a < ext.rank(); ++a) {
      const std::size_t s = ext.stride(a);
      double d;
      if (c[a] == 0)
        d = f[i + s] - f[i];
      else if (c[a] == ext[a] - 1)
        d = f[i] - f[i - s];
      else
        d = 0.5 * (f[i + s] - f[i - s]);
      g[a][i] = d;
    }
  });
  return g;
}

// Truncated Gaussian taps exp(-k^2 / 2 sigma^2) for k = -R..R, R = ceil(3 sigma),
// normalized to unit sum.
inline std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> w(2 * radius + 1);
  double z = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    w[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
    z += w[k + radius];
  }
  for (double& x : w) x /= z;
  return w;
}

// Separable Gaussian. Taps falling outside the domain are dropped and the
// remaining weights renormalized.
inline ScalarField gaussian_blur(const ScalarField& f, double sigma) {
  if (sigma < 0.0) throw Error("gaussian_blur: sigma must be non-negative");
  if (sigma == 0.0) return f;
  const std::vector<double> w = gaussian_kernel(sigma);
  const int radius = static_cast<int>(w.size() / 2);
  const Extents& ext = f.extents();
  ScalarField src = f;
  ScalarField dst(ext);
  for (int a = 0; a < ext.rank(); ++a) {
    const std::size_t s = ext.stride(a);
    const int n = ext[a];
    for_each_cell(ext, [&](std::size_t i, const Coord& c) {
      const int lo = std::max(-radius, -c[a]);
      const int hi = std::min(radius, n - 1 - c[a]);
      double acc = 0.0, norm = 0.0;
      for (int k = lo; k <= hi; ++k) {
        const double wk = w[k + radius];
        acc += wk * src[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(i) + k * static_cast<std::ptrdiff_t>(s))];
        norm += wk;
      }
      dst[i] = acc / norm;
    });
    std::swap(src, dst);
  }
  return src;
}

inline VectorField gaussian_blur(const VectorField& v, double sigma) {
  if (sigma == 0.0) return v;
  VectorField out(v.extents());
  for (int c = 0; c < v.components(); ++c) out[c] = gaussian_blur(v[c], sigma);
  return out;
}

// ---------------------------------------------------------------------------
// Resolution changes

inline Extents half_extents(const Extents& ext) {
  std::vector<int> n(ext.rank());
  for (int a = 0; a < ext.rank(); ++a) n[a] = (ext[a] + 1) / 2;
  return Extents(n);
}

// Box average of the (up to 2^N) fine cells covering each coarse cell.
inline ScalarField downsample(const ScalarField& f) {
  const Extents& fine = f.extents();
  for (int a = 0; a < fine.rank(); ++a)
    if (fine[a] < 2) throw Error("downsample: degenerate axis in " + fine.str());
  const Extents coarse = half_extents(fine);
  ScalarField out(coarse);
  const int corners = 1 << fine.rank();
  for_each_cell(coarse, [&](std::size_t i, const Coord& c) {
    double acc = 0.0;
    int count = 0;
    for (int m = 0; m < corners; ++m) {
      Coord fc{};
      bool inside = true;
      for (int a = 0; a < fine.rank(); ++a) {
        fc[a] = 2 * c[a] + ((m >> a) & 1);
        if (fc[a] >= fine[a]) inside = false;
      }
      if (!inside) continue;
      acc += f.at(fc);
      ++count;
    }
    out[i] = acc / count;
  });
  return out;
}

// Displacements are in cells, so halving the resolution halves the vectors.
inline VectorField downsample(const VectorField& v) {
  VectorField out(half_extents(v.extents()));
  for (int c = 0; c < v.components(); ++c) out[c] = downsample(v[c]);
  out *= 0.5;
  return out;
}

// Doubles the resolution (to `fine`, whose extents must be 2n or 2n-1) by
// multilinear interpolation and doubles the vectors.
inline VectorField upsample(const VectorField& v, const Extents& fine) {
  const Extents& coarse = v.extents();
  if (fine.rank() != coarse.rank()) throw Error("upsample: rank mismatch");
  for (int a = 0; a < fine.rank(); ++a)
    if ((fine[a] + 1) / 2 != coarse[a])
      throw Error("upsample: " + fine.str() + " is not a doubling of " + coarse.str());
  VectorField out(fine);
  for_each_cell(fine, [&](std::size_t i, const Coord& c) {
    Point p{};
    for (int a = 0; a < fine.rank(); ++a) p[a] = 0.5 * (c[a] - 0.5);
    Point u = sample_linear(v, p);
    for (int k = 0; k < fine.rank(); ++k) out[k][i] = 2.0 * u[k];
  });
  return out;
}

inline VectorField upsample(const VectorField& v) {
  std::vector<int> n(v.rank());
  for (int a = 0; a < v.rank(); ++a) n[a] = 2 * v.extents()[a];
  return upsample(v, Extents(n));
}

// General per-axis rescaling of a deformation onto another grid covering the
// same domain; vector components are scaled by the per-axis resolution ratio.
inline VectorField resample(const VectorField& v, const Extents& target) {
  const Extents& src = v.extents();
  if (src == target) return v;
  if (target.rank() != src.rank()) throw Error("resample: rank mismatch");
  std::array<double, kMaxRank> scale{};
  for (int a = 0; a < src.rank(); ++a) scale[a] = static_cast<double>(target[a]) / src[a];
  VectorField out(target);
  for_each_cell(target, [&](std::size_t i, const Coord& c) {
    Point p{};
    for (int a = 0; a < src.rank(); ++a) p[a] = (c[a] + 0.5) / scale[a] - 0.5;
    Point u = sample_linear(v, p);
    for (int k = 0; k < src.rank(); ++k) out[k][i] = scale[k] * u[k];
  });
  return out;
}

// ---------------------------------------------------------------------------
// Slabs along the last axis (time for space-time volumes)

inline ScalarField slab(const ScalarField& f, int t) {
  const Extents& ext = f.extents();
  const int last = ext.rank() - 1;
  if (t < 0 || t >= ext[last]) throw Error("slab index " + std::to_string(t) + " out of range");
  const Extents sub = ext.drop_last();
  const auto begin = f.storage().begin() + static_cast<std::ptrdiff_t>(t * ext.stride(last));
  return ScalarField(sub, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(sub.size())));
}

inline ScalarField stack(std::span<const ScalarField> slabs) {
  if (slabs.empty()) throw Error("stack: no slabs");
  const Extents sub = slabs.front().extents();
  std::vector<double> data;
  data.reserve(sub.size() * slabs.size());
  for (const auto& s : slabs) {
    require_same_extents(sub, s.extents(), "stack");
    data.insert(data.end(), s.storage().begin(), s.storage().end());
  }
  return ScalarField(sub.append(static_cast<int>(slabs.size())), std::move(data));
}

// Grows every axis by lo[a] cells before and hi[a] cells after, filling with `fill`.
inline ScalarField pad(const ScalarField& f, std::span<const int> lo, std::span<const int> hi, double fill) {
  const Extents& ext = f.extents();
  std::vector<int> n(ext.rank());
  for (int a = 0; a < ext.rank(); ++a) n[a] = ext[a] + lo[a] + hi[a];
  ScalarField out(Extents(n), fill);
  for_each_cell(ext, [&](std::size_t i, const Coord& c) {
    Coord d = c;
    for (int a = 0; a < ext.rank(); ++a) d[a] += lo[a];
    out.at(d) = f[i];
  });
  return out;
}

// Inverse of pad.
inline ScalarField crop(const ScalarField& f, std::span<const int> lo, std::span<const int> hi) {
  const Extents& ext = f.extents();
  std::vector<int> n(ext.rank());
  for (int a = 0; a < ext.rank(); ++a) {
    n[a] = ext[a] - lo[a] - hi[a];
    if (n[a] <= 0) throw Error("crop: nothing left of " + ext.str());
  }
  const Extents sub(n);
  ScalarField out(sub);
  for_each_cell(sub, [&](std::size_t i, const Coord& c) {
    Coord d = c;
    for (int a = 0; a < ext.rank(); ++a) d[a] += lo[a];
    out[i] = f.at(d);
  });
  return out;
}

}  // namespace flof

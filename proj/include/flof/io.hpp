#pragma once

// FLOF volume files and JSON descriptions of datasets and parameter spaces.
//
// Volume layout (little-endian):
//   8 bytes  magic "FLOF\0\0\0\0"
//   u16      format version (1)
//   u8       kind (0 scalar, 1 deformation)
//   u8       axis count
//   u32      extent per axis
//   u8       component count
//   f32      payload, component fastest, then axis 0, axis 1, ...

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "json.hpp"

#include "flof/grid.hpp"
#include "flof/interpolation.hpp"
#include "flof/levelset.hpp"

namespace flof::io {

static_assert(std::endian::native == std::endian::little, "FLOF files are written on little-endian hosts only");

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr char kMagic[8] = {'F', 'L', 'O', 'F', 0, 0, 0, 0};
inline constexpr std::uint16_t kVersion = 1;

enum class FileKind : std::uint8_t { Scalar = 0, Deformation = 1 };

struct Volume {
  FileKind kind = FileKind::Scalar;
  std::vector<std::uint32_t> extents;
  std::uint8_t components = 1;
  std::vector<float> payload;

  std::size_t cells() const {
    std::size_t n = 1;
    for (auto e : extents) n *= e;
    return n;
  }
};

inline std::size_t header_size(std::size_t axes) { return 8 + 2 + 1 + 1 + 4 * axes + 1; }

namespace detail {

template <class T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <class T>
T take(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw Error("volume file truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode(const Volume& v) {
  if (v.extents.empty() || v.extents.size() > 255) throw Error("volume: bad axis count");
  if (v.components == 0) throw Error("volume: component count must be positive");
  if (v.payload.size() != v.cells() * v.components) throw Error("volume: payload size does not match header");
  std::vector<std::uint8_t> out;
  out.reserve(header_size(v.extents.size()) + 4 * v.payload.size());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  detail::put(out, kVersion);
  detail::put(out, static_cast<std::uint8_t>(v.kind));
  detail::put(out, static_cast<std::uint8_t>(v.extents.size()));
  for (auto e : v.extents) detail::put(out, e);
  detail::put(out, v.components);
  const auto* p = reinterpret_cast<const std::uint8_t*>(v.payload.data());
  out.insert(out.end(), p, p + 4 * v.payload.size());
  return out;
}

inline Volume decode(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) throw Error("not a FLOF volume (bad magic)");
  std::size_t pos = 8;
  const auto version = detail::take<std::uint16_t>(bytes, pos);
  if (version != kVersion) throw Error("unsupported FLOF version " + std::to_string(version));
  Volume v;
  const auto kind = detail::take<std::uint8_t>(bytes, pos);
  if (kind > 1) throw Error("unknown FLOF kind " + std::to_string(kind));
  v.kind = static_cast<FileKind>(kind);
  const auto axes = detail::take<std::uint8_t>(bytes, pos);
  if (axes == 0) throw Error("FLOF volume has no axes");
  for (int a = 0; a < axes; ++a) v.extents.push_back(detail::take<std::uint32_t>(bytes, pos));
  v.components = detail::take<std::uint8_t>(bytes, pos);
  const std::size_t expected = v.cells() * v.components * 4;
  if (bytes.size() - pos != expected)
    throw Error("FLOF payload is " + std::to_string(bytes.size() - pos) + " bytes, header implies " +
                std::to_string(expected));
  v.payload.resize(v.cells() * v.components);
  std::memcpy(v.payload.data(), bytes.data() + pos, expected);
  return v;
}

inline std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path.string());
}

inline Volume read_volume(const fs::path& path) { return decode(read_bytes(path)); }
inline void write_volume(const fs::path& path, const Volume& v) { write_bytes(path, encode(v)); }

inline Volume to_volume(const ScalarField& f) {
  Volume v;
  v.kind = FileKind::Scalar;
  for (int e : f.extents().to_vector()) v.extents.push_back(static_cast<std::uint32_t>(e));
  v.payload.assign(f.storage().begin(), f.storage().end());
  return v;
}

inline Volume to_volume(const VectorField& u) {
  Volume v;
  v.kind = FileKind::Deformation;
  for (int e : u.extents().to_vector()) v.extents.push_back(static_cast<std::uint32_t>(e));
  v.components = static_cast<std::uint8_t>(u.components());
  v.payload.resize(u.size() * u.components());
  for (std::size_t i = 0; i < u.size(); ++i)
    for (int c = 0; c < u.components(); ++c) v.payload[i * u.components() + c] = static_cast<float>(u[c][i]);
  return v;
}

inline Extents extents_of(const Volume& v) {
  if (v.extents.size() > static_cast<std::size_t>(kMaxRank)) throw Error("FLOF volume has too many axes");
  std::vector<int> n;
  for (auto e : v.extents) n.push_back(static_cast<int>(e));
  return Extents(n);
}

inline ScalarField to_scalar(const Volume& v) {
  if (v.kind != FileKind::Scalar || v.components != 1) throw Error("expected a scalar FLOF volume");
  return ScalarField(extents_of(v), std::vector<double>(v.payload.begin(), v.payload.end()));
}

inline VectorField to_deformation(const Volume& v) {
  if (v.kind != FileKind::Deformation) throw Error("expected a deformation FLOF volume");
  const Extents ext = extents_of(v);
  if (v.components != ext.rank()) throw Error("deformation component count does not match axis count");
  VectorField u(ext);
  for (std::size_t i = 0; i < u.size(); ++i)
    for (int c = 0; c < u.components(); ++c) u[c][i] = v.payload[i * v.components + c];
  return u;
}

inline ScalarField read_scalar(const fs::path& path) { return to_scalar(read_volume(path)); }
inline VectorField read_deformation(const fs::path& path) { return to_deformation(read_volume(path)); }
inline void write_scalar(const fs::path& path, const ScalarField& f) { write_volume(path, to_volume(f)); }
inline void write_deformation(const fs::path& path, const VectorField& u) { write_volume(path, to_volume(u)); }

// ---------------------------------------------------------------------------
// JSON

inline json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline fs::path resolve(const fs::path& base_file, const std::string& rel) {
  const fs::path p(rel);
  return p.is_absolute() ? p : base_file.parent_path() / p;
}

// Per-scene frame sequence as written by gen-scene.
struct DatasetManifest {
  std::string name;
  std::vector<double> r;
  VolumeKind kind = VolumeKind::LiquidSdf;
  std::vector<int> dims;
  std::vector<std::string> frame_files;  // relative to the manifest
  std::vector<double> masses;            // smoke only, one per frame

  int frames() const { return static_cast<int>(frame_files.size()); }

  json to_json() const {
    json j{{"name", name}, {"r", r}, {"kind", to_string(kind)}, {"dims", dims},
           {"frame_count", frames()}, {"frames", frame_files}};
    if (kind == VolumeKind::SmokeDensity) j["masses"] = masses;
    return j;
  }

  static DatasetManifest from_json(const json& j) {
    DatasetManifest m;
    try {
      m.name = j.at("name").get<std::string>();
      m.r = j.value("r", std::vector<double>{});
      m.kind = parse_kind(j.at("kind").get<std::string>());
      m.dims = j.at("dims").get<std::vector<int>>();
      m.frame_files = j.at("frames").get<std::vector<std::string>>();
      if (j.contains("masses")) m.masses = j.at("masses").get<std::vector<double>>();
    } catch (const json::exception& e) {
      throw Error(std::string("manifest: ") + e.what());
    }
    if (j.contains("frame_count") && j.at("frame_count").get<int>() != m.frames())
      throw Error("manifest: frame_count does not match the frame list");
    if (m.kind == VolumeKind::SmokeDensity && m.masses.size() != m.frame_files.size())
      throw Error("manifest: mass table length must equal the frame count");
    return m;
  }
};

inline DatasetManifest read_manifest(const fs::path& path) { return DatasetManifest::from_json(read_json(path)); }

inline std::vector<ScalarField> read_frames(const fs::path& manifest_path, const DatasetManifest& m) {
  std::vector<ScalarField> frames;
  for (const auto& f : m.frame_files) {
    ScalarField frame = read_scalar(resolve(manifest_path, f));
    if (frame.extents().to_vector() != m.dims)
      throw Error("frame " + f + " has extents " + frame.extents().str() + ", manifest says otherwise");
    frames.push_back(std::move(frame));
  }
  return frames;
}

inline json layout_to_json(const SpaceTimeLayout& l) {
  return {{"pad", l.pad}, {"frames_repeated", l.frames_repeated}, {"frames", l.frames}};
}

inline SpaceTimeLayout layout_from_json(const json& j) {
  SpaceTimeLayout l;
  l.pad = j.at("pad").get<std::vector<int>>();
  l.frames_repeated = j.at("frames_repeated").get<int>();
  l.frames = j.at("frames").get<int>();
  return l;
}

// Parameter space description:
// {"name", "kind", "layout", "samples": [{"name", "r", "volume"}], "simplices": [[i, j, ...]],
//  "deformations": [{"from", "to", "file"}]}; file paths relative to the JSON file.
inline ParameterSpace load_space(const fs::path& path) {
  const json j = read_json(path);
  ParameterSpace space;
  try {
    space.name = j.value("name", path.stem().string());
    space.kind = parse_kind(j.value("kind", std::string("liquid-sdf")));
    if (j.contains("layout")) space.layout = layout_from_json(j.at("layout"));
    for (const auto& s : j.at("samples")) {
      Sample sample;
      sample.name = s.at("name").get<std::string>();
      sample.r = s.at("r").get<std::vector<double>>();
      sample.volume = read_scalar(resolve(path, s.at("volume").get<std::string>()));
      space.samples.push_back(std::move(sample));
    }
    space.simplices = j.at("simplices").get<std::vector<std::vector<int>>>();
    for (const auto& d : j.at("deformations")) {
      DirectedDeformation def;
      def.from = d.at("from").get<int>();
      def.to = d.at("to").get<int>();
      def.field = read_deformation(resolve(path, d.at("file").get<std::string>()));
      space.deformations.push_back(std::move(def));
    }
  } catch (const json::exception& e) {
    throw Error("space " + path.string() + ": " + e.what());
  }
  if (space.layout.pad.empty()) {
    space.layout.pad.assign(space.samples.empty() ? 0 : space.extents().rank() - 1, 0);
    space.layout.frames = space.samples.empty() ? 0 : space.time_extent();
  }
  space.validate();
  return space;
}

}  // namespace flof::io

// flof: scene generation, space-time SDF assembly, matching, error
// evaluation, in-between synthesis and the HTTP service.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "flof/flof.hpp"
#include "flof/interpolation.hpp"
#include "flof/io.hpp"
#include "flof/levelset.hpp"
#include "flof/raster.hpp"
#include "flof/scenes.hpp"
#include "flof/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace flof;

namespace {

void fail_line(const std::string& command, const std::string& message) {
  std::cerr << json{{"error", message}, {"command", command}}.dump() << std::endl;
}

std::string frame_name(int t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%04d.flof", t);
  return buf;
}

FlofParams load_params(const std::string& path) {
  FlofParams p;
  if (path.empty()) return p;
  const json j = io::read_json(path);
  auto num = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  num("beta_s", p.beta_s);
  num("beta_t", p.beta_t);
  num("sigma_of", p.sigma_of);
  num("sigma_proj", p.sigma_proj);
  num("tau_proj", p.tau_proj);
  num("s_max", p.s_max);
  num("l_max", p.l_max);
  num("k_max", p.k_max);
  num("gamma_max", p.gamma_max);
  num("cg_tol", p.cg_tol);
  num("cg_max_iter", p.cg_max_iter);
  p.beta_image = j.contains("beta_image") ? j.at("beta_image").get<double>() : beta_image(p.gamma_max);
  for (const auto& [key, value] : j.items()) {
    static const std::vector<std::string> known = {"beta_s",   "beta_t", "sigma_of", "sigma_proj", "tau_proj",
                                                   "s_max",    "l_max",  "k_max",    "gamma_max",  "cg_tol",
                                                   "cg_max_iter", "beta_image"};
    if (std::find(known.begin(), known.end(), key) == known.end()) throw Error("unknown parameter '" + key + "'");
  }
  p.validate();
  return p;
}

json params_json(const FlofParams& p) {
  return {{"beta_s", p.beta_s},       {"beta_t", p.beta_t},     {"sigma_of", p.sigma_of},
          {"sigma_proj", p.sigma_proj}, {"tau_proj", p.tau_proj}, {"s_max", p.s_max},
          {"l_max", p.l_max},         {"k_max", p.k_max},       {"gamma_max", p.gamma_max},
          {"beta_image", p.beta_image}, {"cg_tol", p.cg_tol},     {"cg_max_iter", p.cg_max_iter}};
}

json trace_json(const std::vector<TraceEntry>& trace) {
  json out = json::array();
  for (const auto& e : trace)
    out.push_back({{"level", e.level},
                   {"extents", e.extents},
                   {"stage", e.stage},
                   {"iteration", e.iteration},
                   {"sigma", e.sigma},
                   {"error_before", e.error_before},
                   {"error_after", e.error_after},
                   {"accepted", e.accepted},
                   {"cg_iterations", e.cg_iterations},
                   {"cg_residual", e.cg_residual}});
  return out;
}

json result_json(const MatchResult& r) {
  return {{"error_initial", r.error_initial}, {"error_final", r.error_final}, {"level_trace", trace_json(r.level_trace)}};
}

// ---------------------------------------------------------------------------

struct GenScene {
  std::string scene, out, name;
  int res = 64, frames = 32;
  double offset = 0.0;
  unsigned seed = 1;
  std::vector<double> r;

  void run() const {
    scenes::SceneParams p{res, frames, offset, seed};
    const auto seq = scenes::generate(scene, p);
    io::DatasetManifest m;
    m.name = name.empty() ? scene : name;
    m.r = r;
    m.kind = scenes::is_density_scene(scene) ? VolumeKind::SmokeDensity : VolumeKind::LiquidSdf;
    m.dims = seq.front().extents().to_vector();
    for (int t = 0; t < static_cast<int>(seq.size()); ++t) {
      m.frame_files.push_back(frame_name(t));
      io::write_scalar(fs::path(out) / m.frame_files.back(), seq[t]);
      if (m.kind == VolumeKind::SmokeDensity) m.masses.push_back(sum(seq[t]));
    }
    io::write_json(fs::path(out) / "manifest.json", m.to_json());
    std::cout << json{{"manifest", (fs::path(out) / "manifest.json").string()}, {"frames", m.frames()}}.dump() << '\n';
  }
};

struct BuildSdf {
  std::string in, out;
  double gamma = 40.0, margin = 0.1;
  int repeat_first = 5;

  void run() const {
    const fs::path manifest_path = fs::is_directory(in) ? fs::path(in) / "manifest.json" : fs::path(in);
    const io::DatasetManifest m = io::read_manifest(manifest_path);
    const std::vector<ScalarField> frames = io::read_frames(manifest_path, m);
    const AssemblyParams ap{gamma, margin, repeat_first};
    json sidecar{{"name", m.name}, {"r", m.r}, {"kind", to_string(m.kind)}, {"gamma_max", gamma}, {"margin", margin}};
    SpaceTimeSDF st;
    if (m.kind == VolumeKind::SmokeDensity) {
      std::vector<ScalarField> iso;
      for (const auto& f : frames) iso.push_back(iso_from_density(f));
      st = assemble_spacetime(iso, ap);
      const fs::path density = fs::path(out).replace_extension(".density.flof");
      io::write_scalar(density, assemble_density(frames, st.layout));
      sidecar["density"] = density.filename().string();
    } else {
      st = assemble_spacetime(frames, ap);
    }
    io::write_scalar(out, st.field);
    sidecar["layout"] = io::layout_to_json(st.layout);
    sidecar["extents"] = st.field.extents().to_vector();
    io::write_json(out + ".json", sidecar);
    std::cout << json{{"volume", out}, {"extents", st.field.extents().str()}}.dump() << '\n';
  }
};

struct Match {
  std::string src, dst, params, out;

  void run() const {
    const FlofParams p = load_params(params);
    const ScalarField a = io::read_scalar(src);
    const ScalarField b = io::read_scalar(dst);
    const auto start = std::chrono::steady_clock::now();
    const MatchPair pair = match_pair(a, b, p);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    io::write_deformation(fs::path(out) / "forward.flof", pair.forward.deformation);
    io::write_deformation(fs::path(out) / "backward.flof", pair.backward.deformation);
    const json report{{"src", src},
                      {"dst", dst},
                      {"params", params_json(p)},
                      {"forward", result_json(pair.forward)},
                      {"backward", result_json(pair.backward)},
                      {"error_initial", pair.forward.error_initial},
                      {"error_final", pair.forward.error_final},
                      {"seconds", seconds}};
    io::write_json(fs::path(out) / "report.json", report);
    std::cout << json{{"error_initial", pair.forward.error_initial},
                      {"error_final", pair.forward.error_final},
                      {"backward_error_final", pair.backward.error_final}}
                     .dump()
              << '\n';
  }
};

struct ErrorCmd {
  std::string a, b;
  void run() const { std::cout << error_metric(io::read_scalar(a), io::read_scalar(b)) << '\n'; }
};

struct Interp {
  std::string space, weights, mode = "linear", out;
  double frame = 0.0;
  bool temporal = false;

  void run() const {
    const ParameterSpace s = io::load_space(space);
    const std::vector<double> x = parse_list(weights);
    const BlendMode m = parse_mode(mode);
    Synthesis syn = synthesize_frame(s, x, frame, m);
    if (temporal) {
      if (s.kind != VolumeKind::LiquidSdf) throw Error("the temporal filter applies to SDF spaces only");
      if (frame + 1 <= s.layout.frames - 1) syn.slice = temporal_filter(syn.slice, synthesize_frame(s, x, frame + 1, m).slice);
    }
    const fs::path path(out);
    if (path.extension() == ".png") {
      const auto png = slice_png(syn.slice, s.kind == VolumeKind::SmokeDensity);
      io::write_bytes(path, png);
    } else {
      io::write_scalar(path, syn.slice);
    }
    std::cout << json{{"simplex", syn.simplex},
                      {"barycentric", syn.barycentric},
                      {"weights", syn.blend_weights},
                      {"labels", blend_labels(s, syn.simplex, m)},
                      {"out", out}}
                     .dump()
              << '\n';
  }
};

struct Serve {
  std::string space, host = "127.0.0.1";
  int port = 8080;

  void run() const {
    Service service(io::load_space(space));
    httplib::Server server;
    service.mount(server);
    std::cout << json{{"listening", host + ":" + std::to_string(port)}}.dump() << std::endl;
    if (!server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FlOF space-time SDF registration and interpolation"};
  app.require_subcommand(1);

  GenScene gen;
  auto* c_gen = app.add_subcommand("gen-scene", "Write a procedural frame sequence and its manifest");
  c_gen->add_option("--scene", gen.scene, "Scene name")->required()->check(CLI::IsMember(scenes::names()));
  c_gen->add_option("--res", gen.res, "Resolution per axis")->check(CLI::Range(32, 4096));
  c_gen->add_option("--frames", gen.frames, "Frame count")->check(CLI::Range(2, 100000));
  c_gen->add_option("--offset", gen.offset, "Scene parameter (position shift in cells)");
  c_gen->add_option("--seed", gen.seed, "Seed for randomized scenes");
  c_gen->add_option("--name", gen.name, "Dataset name");
  c_gen->add_option("--r", gen.r, "Parameter-space coordinates")->delimiter(',');
  c_gen->add_option("--out", gen.out, "Output directory")->required();

  BuildSdf build;
  auto* c_build = app.add_subcommand("build-sdf", "Assemble a space-time SDF from a frame sequence");
  c_build->add_option("--in", build.in, "Dataset directory or manifest")->required();
  c_build->add_option("--gamma", build.gamma, "Distance clamp")->check(CLI::PositiveNumber);
  c_build->add_option("--margin", build.margin, "Empty margin fraction per side");
  c_build->add_option("--repeat-first", build.repeat_first, "Copies of the first frame")->check(CLI::NonNegativeNumber);
  c_build->add_option("--out", build.out, "Output volume")->required();

  Match match;
  auto* c_match = app.add_subcommand("match", "Compute forward and backward deformations");
  c_match->add_option("--src", match.src, "Source space-time SDF")->required()->check(CLI::ExistingFile);
  c_match->add_option("--dst", match.dst, "Target space-time SDF")->required()->check(CLI::ExistingFile);
  c_match->add_option("--params", match.params, "JSON parameter overrides")->check(CLI::ExistingFile);
  c_match->add_option("--out", match.out, "Output directory")->required();

  ErrorCmd err;
  auto* c_err = app.add_subcommand("error", "Print the volumetric error between two SDF volumes");
  c_err->add_option("--a", err.a)->required()->check(CLI::ExistingFile);
  c_err->add_option("--b", err.b)->required()->check(CLI::ExistingFile);

  Interp interp;
  auto* c_interp = app.add_subcommand("interp", "Synthesize one frame of an in-between");
  c_interp->add_option("--space", interp.space, "Parameter space JSON")->required()->check(CLI::ExistingFile);
  c_interp->add_option("--weights", interp.weights, "Parameter point, comma separated")->required();
  c_interp->add_option("--frame", interp.frame, "Frame index");
  c_interp->add_option("--mode", interp.mode, "linear, union or nearest");
  c_interp->add_flag("--temporal-filter", interp.temporal, "Union with the next frame");
  c_interp->add_option("--out", interp.out, "Output .flof or .png")->required();

  Serve serve;
  auto* c_serve = app.add_subcommand("serve", "Serve frames over HTTP");
  c_serve->add_option("--space", serve.space, "Parameter space JSON")->required()->check(CLI::ExistingFile);
  c_serve->add_option("--port", serve.port)->check(CLI::Range(1, 65535));
  c_serve->add_option("--host", serve.host);

  std::string command = "flof";
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    fail_line(command, e.what());
    return 2;
  }

  try {
    if (*c_gen) command = "gen-scene", gen.run();
    if (*c_build) command = "build-sdf", build.run();
    if (*c_match) command = "match", match.run();
    if (*c_err) command = "error", err.run();
    if (*c_interp) command = "interp", interp.run();
    if (*c_serve) command = "serve", serve.run();
  } catch (const std::exception& e) {
    fail_line(command, e.what());
    return 1;
  }
  return 0;
}

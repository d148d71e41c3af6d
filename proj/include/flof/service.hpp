#pragma once

// HTTP front end for interactive in-between selection.
//   GET /space[?space=NAME]                 parameter space description
//   GET /frame?w=X[,Y]&t=T&mode=M[&space=]  PNG of the synthesized frame
//   GET /health
// Bad input answers 400 with {"error": ...}; unknown spaces answer 404.

#include <charconv>
#include <cmath>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "flof/interpolation.hpp"
#include "flof/raster.hpp"

// After Eigen: <resolv.h>, pulled in by httplib, defines a _res macro.
#include <httplib.h>

namespace flof {

struct Reply {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;
};

inline Reply json_reply(int status, const nlohmann::json& j) { return {status, "application/json", j.dump(), {}}; }
inline Reply error_reply(int status, const std::string& message) {
  return json_reply(status, {{"error", message}, {"status", status}});
}

// Comma-separated doubles; throws on anything else.
inline std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find(',', pos), text.size());
    const std::string item = text.substr(pos, end - pos);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size() || !std::isfinite(v))
      throw Error("malformed number list '" + text + "'");
    out.push_back(v);
    pos = end + 1;
  }
  return out;
}

inline std::string join(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

class Service {
 public:
  explicit Service(ParameterSpace space) { add(std::move(space)); }

  void add(ParameterSpace space) {
    if (default_.empty()) default_ = space.name;
    auto entry = std::make_unique<Entry>(std::move(space));
    const std::string name = entry->space.name;
    entries_[name] = std::move(entry);
  }

  using Params = std::multimap<std::string, std::string>;

  Reply handle(const std::string& path, const Params& params) const {
    if (path == "/health") return json_reply(200, {{"status", "ok"}});
    if (path != "/space" && path != "/frame") return error_reply(404, "unknown endpoint " + path);
    const std::string name = get(params, "space").value_or(default_);
    auto it = entries_.find(name);
    if (it == entries_.end()) return error_reply(404, "unknown space '" + name + "'");
    const Entry& e = *it->second;
    if (path == "/space") return json_reply(200, describe(e.space));
    try {
      return frame(e, params);
    } catch (const Error& err) {
      return error_reply(400, err.what());
    }
  }

  static nlohmann::json describe(const ParameterSpace& s) {
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& smp : s.samples) samples.push_back({{"name", smp.name}, {"r", smp.r}});
    std::vector<std::string> modes = {"linear", "nearest"};
    if (s.kind == VolumeKind::LiquidSdf) modes.insert(modes.begin() + 1, "union");
    return {{"name", s.name},         {"kind", to_string(s.kind)}, {"dimension", s.dimension()},
            {"samples", samples},     {"simplices", s.simplices},  {"modes", modes},
            {"frames", s.layout.frames}};
  }

  void mount(httplib::Server& server) const {
    for (const char* route : {"/health", "/space", "/frame"}) {
      server.Get(route, [this](const httplib::Request& req, httplib::Response& res) {
        Params params(req.params.begin(), req.params.end());
        const Reply r = handle(req.path, params);
        res.status = r.status;
        for (const auto& [k, v] : r.headers) res.set_header(k, v);
        res.set_content(r.body, r.content_type);
      });
    }
  }

  std::size_t cached_frames(const std::string& name) const { return entries_.at(name)->cache.size(); }

 private:
  struct Entry {
    explicit Entry(ParameterSpace s) : space(std::move(s)), cache(std::max(1, space.layout.frames)) {}
    ParameterSpace space;
    mutable FrameCache cache;
  };

  static std::optional<std::string> get(const Params& params, const std::string& key) {
    auto it = params.find(key);
    if (it == params.end()) return std::nullopt;
    return it->second;
  }

  static Reply frame(const Entry& e, const Params& params) {
    const auto w = get(params, "w");
    if (!w) throw Error("missing parameter w");
    const std::vector<double> x = parse_list(*w);
    double t = 0.0;
    if (const auto t_text = get(params, "t")) {
      const std::vector<double> v = parse_list(*t_text);
      if (v.size() != 1) throw Error("t must be a single number");
      t = v[0];
    }
    const BlendMode mode = parse_mode(get(params, "mode").value_or("linear"));

    const bool integral = t == std::floor(t);
    const std::string key = to_string(mode) + "|" + join(x);
    std::optional<Synthesis> syn;
    if (integral) syn = e.cache.get(key, static_cast<int>(t));
    if (!syn) {
      syn = synthesize_frame(e.space, x, t, mode);
      if (integral) e.cache.put(key, static_cast<int>(t), *syn);
    }

    Reply r;
    r.content_type = "image/png";
    const auto png = slice_png(syn->slice, e.space.kind == VolumeKind::SmokeDensity);
    r.body.assign(png.begin(), png.end());
    r.headers.emplace_back("X-Flof-Weights", join(syn->blend_weights));
    r.headers.emplace_back("X-Flof-Simplex", std::to_string(syn->simplex));
    std::string labels;
    for (const auto& l : blend_labels(e.space, syn->simplex, mode)) labels += (labels.empty() ? "" : ",") + l;
    r.headers.emplace_back("X-Flof-Weight-Labels", labels);
    r.headers.emplace_back("Access-Control-Expose-Headers", "X-Flof-Weights, X-Flof-Simplex, X-Flof-Weight-Labels");
    return r;
  }

  std::string default_;
  std::map<std::string, std::unique_ptr<Entry>> entries_;
};

}  // namespace flof

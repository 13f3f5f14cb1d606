#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "wynn/adaptive.hpp"
#include "wynn/analysis.hpp"
#include "wynn/model.hpp"
#include "wynn/noise.hpp"
#include "wynn/types.hpp"

namespace wynn {

/// Invalid run configuration. `path` is a JSON pointer to the offending
/// value, `line` its 1-based line in the source text when it could be located.
class ConfigError : public Error {
 public:
  ConfigError(std::string path, const std::string& msg, long line = 0)
      : Error(render(path, msg, line)), path_(std::move(path)), line_(line) {}
  const std::string& path() const { return path_; }
  long line() const { return line_; }

 private:
  static std::string render(const std::string& path, const std::string& msg, long line) {
    std::string s = "config";
    if (line > 0) s += " line " + std::to_string(line);
    if (!path.empty()) s += " at " + path;
    return s + ": " + msg;
  }
  std::string path_;
  long line_;
};

struct BoxSpec {
  std::vector<double> lower, upper;
  std::vector<int> resolution;  // design boxes only
};

struct ModelConfig {
  std::string name;
  int p = 2;  // used by "polynomial" only
  std::optional<BoxSpec> design_box;
  std::optional<std::vector<std::vector<double>>> design_points;
  std::optional<BoxSpec> parameter_space;
};

enum class SourceKind { Simulated, Replay, Interactive };

struct SourceConfig {
  SourceKind kind = SourceKind::Simulated;
  std::string path;  // replay file
};

struct OracleConfig {
  std::optional<std::vector<double>> theta;  // defaults to theta_true
  double tolerance = 1e-4;
  long max_iterations = 100000;
};

struct MCConfig {
  std::size_t replicates = 10;
  std::vector<long> checkpoints;  // defaults to {wynn.n_max}
  unsigned workers = 0;
};

struct OutputConfig {
  std::string prefix = "wynn";
};

struct RunConfig {
  ModelConfig model;
  ErrorVariant noise = IIDGaussian{0.1};
  std::optional<std::vector<double>> theta_true;
  SourceConfig source;
  WynnConfig wynn;
  OracleConfig oracle;
  MCConfig mc;
  std::uint64_t seed = 0;
  OutputConfig output;

  Problem problem() const;
  Scenario scenario() const;
  std::vector<long> checkpoints() const { return mc.checkpoints.empty() ? std::vector<long>{wynn.n_max} : mc.checkpoints; }
};

namespace config_detail {

using json = nlohmann::json;

inline long line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<long>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

/// Best-effort line of a JSON pointer: walks the keys in order through the
/// text, each search starting after the previous match.
inline long locate(const std::string& text, const std::string& pointer) {
  if (text.empty() || pointer.empty()) return 0;
  std::size_t pos = 0;
  std::size_t start = 1;
  bool found = false;
  while (start <= pointer.size()) {
    const std::size_t end = std::min(pointer.find('/', start), pointer.size());
    const std::string key = pointer.substr(start, end - start);
    start = end + 1;
    if (!key.empty() && std::all_of(key.begin(), key.end(), ::isdigit)) continue;  // array index
    const std::size_t hit = text.find("\"" + key + "\"", pos);
    if (hit == std::string::npos) break;
    pos = hit + 1;
    found = true;
  }
  return found ? line_of_offset(text, pos) : 0;
}

class Reader {
 public:
  explicit Reader(const std::string& text) : text_(text) {}

  [[noreturn]] void fail(const std::string& path, const std::string& msg) const {
    throw ConfigError(path.empty() ? "/" : path, msg, locate(text_, path));
  }

  void keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) const {
    if (!j.is_object()) fail(path, "expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!ok.count(it.key())) fail(path + "/" + it.key(), "unknown key '" + it.key() + "'");
  }

  const json& req(const json& j, const std::string& path, const char* key) const {
    if (!j.contains(key)) fail(path, std::string("missing required key '") + key + "'");
    return j.at(key);
  }

  double number(const json& j, const std::string& path) const {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
  }
  long integer(const json& j, const std::string& path, long min) const {
    if (!j.is_number_integer()) fail(path, "expected an integer");
    const long v = j.get<long>();
    if (v < min) fail(path, "must be >= " + std::to_string(min));
    return v;
  }
  std::uint64_t uint64(const json& j, const std::string& path) const {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
      fail(path, "expected a non-negative integer");
    return j.get<std::uint64_t>();
  }
  bool boolean(const json& j, const std::string& path) const {
    if (!j.is_boolean()) fail(path, "expected true or false");
    return j.get<bool>();
  }
  std::string string(const json& j, const std::string& path) const {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
  }
  std::vector<double> numbers(const json& j, const std::string& path) const {
    if (!j.is_array() || j.empty()) fail(path, "expected a nonempty array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], path + "/" + std::to_string(i)));
    return out;
  }

  const std::string& text() const { return text_; }

 private:
  const std::string& text_;
};

inline BoxSpec read_box(const Reader& r, const json& j, const std::string& path, bool with_resolution) {
  if (with_resolution) r.keys(j, path, {"lower", "upper", "resolution"});
  else r.keys(j, path, {"lower", "upper"});
  BoxSpec b;
  b.lower = r.numbers(r.req(j, path, "lower"), path + "/lower");
  b.upper = r.numbers(r.req(j, path, "upper"), path + "/upper");
  if (b.lower.size() != b.upper.size()) r.fail(path, "lower and upper differ in length");
  if (with_resolution) {
    if (j.contains("resolution")) {
      const json& res = j.at("resolution");
      if (res.is_number_integer()) {
        b.resolution.assign(b.lower.size(), static_cast<int>(r.integer(res, path + "/resolution", 2)));
      } else {
        if (!res.is_array() || res.size() != b.lower.size())
          r.fail(path + "/resolution", "expected an integer or one integer per axis");
        for (std::size_t i = 0; i < res.size(); ++i)
          b.resolution.push_back(static_cast<int>(r.integer(res[i], path + "/resolution/" + std::to_string(i), 2)));
      }
    } else {
      b.resolution.assign(b.lower.size(), 201);
    }
  }
  for (std::size_t i = 0; i < b.lower.size(); ++i) {
    const bool ok = with_resolution ? b.lower[i] < b.upper[i] : b.lower[i] <= b.upper[i];
    if (!ok) r.fail(path + "/lower/" + std::to_string(i), "lower bound must be below the upper bound");
  }
  return b;
}

inline json write_box(const BoxSpec& b, bool with_resolution) {
  json j{{"lower", b.lower}, {"upper", b.upper}};
  if (with_resolution) j["resolution"] = b.resolution;
  return j;
}

inline ErrorVariant read_noise(const Reader& r, const json& j) {
  const std::string path = "/noise";
  const std::string kind = r.string(r.req(j, path, "kind"), path + "/kind");
  try {
    if (kind == "iid_gaussian") {
      r.keys(j, path, {"kind", "sigma"});
      ErrorVariant v = IIDGaussian{r.number(r.req(j, path, "sigma"), path + "/sigma")};
      (void)ErrorProcess{v};
      return v;
    }
    if (kind == "iid_scaled_t") {
      r.keys(j, path, {"kind", "df", "scale"});
      ErrorVariant v = IIDScaledT{r.number(r.req(j, path, "df"), path + "/df"),
                                  r.number(r.req(j, path, "scale"), path + "/scale")};
      (void)ErrorProcess{v};
      return v;
    }
    if (kind == "heteroscedastic") {
      r.keys(j, path, {"kind", "sigma", "decay"});
      ErrorVariant v = Heteroscedastic{r.number(r.req(j, path, "sigma"), path + "/sigma"),
                                       r.number(r.req(j, path, "decay"), path + "/decay")};
      (void)ErrorProcess{v};
      return v;
    }
    if (kind == "non_ah") {
      r.keys(j, path, {"kind", "sigma_odd", "sigma_even"});
      ErrorVariant v = NonAH{r.number(r.req(j, path, "sigma_odd"), path + "/sigma_odd"),
                             r.number(r.req(j, path, "sigma_even"), path + "/sigma_even")};
      (void)ErrorProcess{v};
      return v;
    }
  } catch (const InvalidInput& e) {
    r.fail(path, e.what());
  }
  r.fail(path + "/kind", "unknown noise kind '" + kind + "'");
}

inline json write_noise(const ErrorVariant& v) {
  return std::visit(
      [](const auto& n) -> json {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, IIDGaussian>) return {{"kind", "iid_gaussian"}, {"sigma", n.sigma}};
        else if constexpr (std::is_same_v<T, IIDScaledT>)
          return {{"kind", "iid_scaled_t"}, {"df", n.df}, {"scale", n.scale}};
        else if constexpr (std::is_same_v<T, Heteroscedastic>)
          return {{"kind", "heteroscedastic"}, {"sigma", n.sigma}, {"decay", n.decay}};
        else return {{"kind", "non_ah"}, {"sigma_odd", n.sigma_odd}, {"sigma_even", n.sigma_even}};
      },
      v);
}

}  // namespace config_detail

inline Problem RunConfig::problem() const {
  const int p = model.name == "polynomial" ? model.p : 2;
  Problem pr = default_problem(model.name, p);
  if (model.design_box) pr.design_space = DesignSpace::box(to_eigen(model.design_box->lower), to_eigen(model.design_box->upper),
                                                           model.design_box->resolution);
  if (model.design_points) {
    std::vector<Vector> pts;
    for (const auto& x : *model.design_points) pts.push_back(to_eigen(x));
    pr.design_space = DesignSpace::finite(std::move(pts));
  }
  if (model.parameter_space)
    pr.parameter_space = ParameterSpace(to_eigen(model.parameter_space->lower), to_eigen(model.parameter_space->upper));
  return pr;
}

inline Scenario RunConfig::scenario() const {
  Scenario sc;
  sc.problem = problem();
  if (!theta_true) throw ConfigError("/theta_true", "required for simulation");
  sc.theta_true = to_eigen(*theta_true);
  sc.noise = noise;
  sc.wynn = wynn;
  sc.oracle_tolerance = oracle.tolerance;
  sc.oracle_max_iterations = oracle.max_iterations;
  return sc;
}

/// Parses and validates a configuration document. Unknown keys are errors.
inline RunConfig parse_config(const std::string& text) {
  using config_detail::json;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what(), config_detail::line_of_offset(text, e.byte));
  }
  const config_detail::Reader r(text);
  r.keys(j, "", {"model", "noise", "theta_true", "source", "wynn", "estimator", "oracle", "mc", "seed", "output"});

  RunConfig c;
  {
    const json& m = r.req(j, "", "model");
    r.keys(m, "/model", {"name", "p", "design_space", "parameter_space"});
    c.model.name = r.string(r.req(m, "/model", "name"), "/model/name");
    const auto& names = builtin_model_names();
    if (std::find(names.begin(), names.end(), c.model.name) == names.end())
      r.fail("/model/name", "unknown model '" + c.model.name + "'");
    if (m.contains("p")) {
      if (c.model.name != "polynomial") r.fail("/model/p", "only the polynomial model takes p");
      c.model.p = static_cast<int>(r.integer(m.at("p"), "/model/p", 1));
    }
    if (m.contains("design_space")) {
      const json& d = m.at("design_space");
      if (d.is_object() && d.contains("points")) {
        r.keys(d, "/model/design_space", {"points"});
        const json& pts = d.at("points");
        if (!pts.is_array() || pts.empty()) r.fail("/model/design_space/points", "expected a nonempty array of points");
        std::vector<std::vector<double>> out;
        for (std::size_t i = 0; i < pts.size(); ++i)
          out.push_back(r.numbers(pts[i], "/model/design_space/points/" + std::to_string(i)));
        c.model.design_points = std::move(out);
      } else {
        c.model.design_box = config_detail::read_box(r, d, "/model/design_space", true);
      }
    }
    if (m.contains("parameter_space"))
      c.model.parameter_space = config_detail::read_box(r, m.at("parameter_space"), "/model/parameter_space", false);
  }
  if (j.contains("noise")) c.noise = config_detail::read_noise(r, j.at("noise"));
  if (j.contains("theta_true")) c.theta_true = r.numbers(j.at("theta_true"), "/theta_true");
  if (j.contains("source")) {
    const json& s = j.at("source");
    r.keys(s, "/source", {"kind", "path"});
    const std::string kind = r.string(r.req(s, "/source", "kind"), "/source/kind");
    if (kind == "simulated") c.source.kind = SourceKind::Simulated;
    else if (kind == "replay") c.source.kind = SourceKind::Replay;
    else if (kind == "interactive") c.source.kind = SourceKind::Interactive;
    else r.fail("/source/kind", "unknown source kind '" + kind + "'");
    if (s.contains("path")) {
      if (c.source.kind != SourceKind::Replay) r.fail("/source/path", "only replay sources take a path");
      c.source.path = r.string(s.at("path"), "/source/path");
    } else if (c.source.kind == SourceKind::Replay) {
      r.fail("/source", "replay source needs 'path'");
    }
  }
  if (j.contains("wynn")) {
    const json& w = j.at("wynn");
    r.keys(w, "/wynn", {"n_max", "pd_floor", "polish", "refresh_every", "theta_check_points_per_axis"});
    if (w.contains("n_max")) c.wynn.n_max = r.integer(w.at("n_max"), "/wynn/n_max", 1);
    if (w.contains("pd_floor")) {
      c.wynn.pd_floor = r.number(w.at("pd_floor"), "/wynn/pd_floor");
      if (!(c.wynn.pd_floor > 0.0)) r.fail("/wynn/pd_floor", "must be positive");
    }
    if (w.contains("polish")) c.wynn.polish = r.boolean(w.at("polish"), "/wynn/polish");
    if (w.contains("refresh_every"))
      c.wynn.refresh_every = static_cast<int>(r.integer(w.at("refresh_every"), "/wynn/refresh_every", 1));
    if (w.contains("theta_check_points_per_axis"))
      c.wynn.theta_check_points_per_axis =
          static_cast<int>(r.integer(w.at("theta_check_points_per_axis"), "/wynn/theta_check_points_per_axis", 1));
  }
  if (j.contains("estimator")) {
    const json& e = j.at("estimator");
    r.keys(e, "/estimator", {"kind", "grid_points_per_axis", "max_iterations", "step_tolerance"});
    if (e.contains("kind")) {
      const std::string kind = r.string(e.at("kind"), "/estimator/kind");
      if (kind == "least_squares") c.wynn.estimator = EstimatorKind::LeastSquares;
      else if (kind == "grid_only") c.wynn.estimator = EstimatorKind::GridOnly;
      else r.fail("/estimator/kind", "unknown estimator '" + kind + "'");
    }
    if (e.contains("grid_points_per_axis"))
      c.wynn.fit.grid_points_per_axis =
          static_cast<int>(r.integer(e.at("grid_points_per_axis"), "/estimator/grid_points_per_axis", 1));
    if (e.contains("max_iterations"))
      c.wynn.fit.max_iterations = static_cast<int>(r.integer(e.at("max_iterations"), "/estimator/max_iterations", 0));
    if (e.contains("step_tolerance")) {
      c.wynn.fit.step_tolerance = r.number(e.at("step_tolerance"), "/estimator/step_tolerance");
      if (!(c.wynn.fit.step_tolerance > 0.0)) r.fail("/estimator/step_tolerance", "must be positive");
    }
  }
  if (j.contains("oracle")) {
    const json& o = j.at("oracle");
    r.keys(o, "/oracle", {"theta", "tolerance", "max_iterations"});
    if (o.contains("theta")) c.oracle.theta = r.numbers(o.at("theta"), "/oracle/theta");
    if (o.contains("tolerance")) {
      c.oracle.tolerance = r.number(o.at("tolerance"), "/oracle/tolerance");
      if (!(c.oracle.tolerance >= 0.0)) r.fail("/oracle/tolerance", "must be >= 0");
    }
    if (o.contains("max_iterations")) c.oracle.max_iterations = r.integer(o.at("max_iterations"), "/oracle/max_iterations", 1);
  }
  if (j.contains("mc")) {
    const json& m = j.at("mc");
    r.keys(m, "/mc", {"replicates", "checkpoints", "workers"});
    if (m.contains("replicates"))
      c.mc.replicates = static_cast<std::size_t>(r.integer(m.at("replicates"), "/mc/replicates", 1));
    if (m.contains("checkpoints")) {
      const json& cp = m.at("checkpoints");
      if (!cp.is_array() || cp.empty()) r.fail("/mc/checkpoints", "expected a nonempty array of integers");
      for (std::size_t i = 0; i < cp.size(); ++i) {
        const long n = r.integer(cp[i], "/mc/checkpoints/" + std::to_string(i), 1);
        if (!c.mc.checkpoints.empty() && n <= c.mc.checkpoints.back())
          r.fail("/mc/checkpoints/" + std::to_string(i), "checkpoints must be strictly increasing");
        c.mc.checkpoints.push_back(n);
      }
    }
    if (m.contains("workers")) c.mc.workers = static_cast<unsigned>(r.integer(m.at("workers"), "/mc/workers", 0));
  }
  if (j.contains("seed")) c.seed = r.uint64(j.at("seed"), "/seed");
  if (j.contains("output")) {
    const json& o = j.at("output");
    r.keys(o, "/output", {"prefix"});
    if (o.contains("prefix")) c.output.prefix = r.string(o.at("prefix"), "/output/prefix");
    if (c.output.prefix.empty()) r.fail("/output/prefix", "must be nonempty");
  }

  // cross-field checks
  Problem pr;
  try {
    pr = c.problem();
  } catch (const InvalidInput& e) {
    r.fail("/model", e.what());
  }
  const auto p = static_cast<std::size_t>(pr.model.p);
  if (c.model.parameter_space && c.model.parameter_space->lower.size() != p)
    r.fail("/model/parameter_space", "dimension must equal the model's p = " + std::to_string(p));
  if (pr.design_space.dim() != 1)
    r.fail("/model/design_space", "the built-in models take one-dimensional design points");
  if (c.theta_true) {
    if (c.theta_true->size() != p) r.fail("/theta_true", "expected " + std::to_string(p) + " components");
    if (!pr.parameter_space.contains(to_eigen(*c.theta_true)))
      r.fail("/theta_true", "must lie in the parameter space");
  }
  if (c.oracle.theta) {
    if (c.oracle.theta->size() != p) r.fail("/oracle/theta", "expected " + std::to_string(p) + " components");
    if (!pr.parameter_space.contains(to_eigen(*c.oracle.theta)))
      r.fail("/oracle/theta", "must lie in the parameter space");
  }
  return c;
}

/// Complete document with every default spelled out; parse_config of the
/// result reproduces the same configuration.
inline nlohmann::json config_to_json(const RunConfig& c) {
  using config_detail::json;
  json model{{"name", c.model.name}};
  if (c.model.name == "polynomial") model["p"] = c.model.p;
  if (c.model.design_points) model["design_space"] = json{{"points", *c.model.design_points}};
  else if (c.model.design_box) model["design_space"] = config_detail::write_box(*c.model.design_box, true);
  if (c.model.parameter_space) model["parameter_space"] = config_detail::write_box(*c.model.parameter_space, false);

  json source{{"kind", c.source.kind == SourceKind::Simulated ? "simulated"
                       : c.source.kind == SourceKind::Replay  ? "replay"
                                                              : "interactive"}};
  if (c.source.kind == SourceKind::Replay) source["path"] = c.source.path;

  json oracle{{"tolerance", c.oracle.tolerance}, {"max_iterations", c.oracle.max_iterations}};
  if (c.oracle.theta) oracle["theta"] = *c.oracle.theta;

  json mc{{"replicates", c.mc.replicates}, {"workers", c.mc.workers}};
  if (!c.mc.checkpoints.empty()) mc["checkpoints"] = c.mc.checkpoints;

  json out{{"model", model},
           {"noise", config_detail::write_noise(c.noise)},
           {"source", source},
           {"wynn",
            {{"n_max", c.wynn.n_max},
             {"pd_floor", c.wynn.pd_floor},
             {"polish", c.wynn.polish},
             {"refresh_every", c.wynn.refresh_every},
             {"theta_check_points_per_axis", c.wynn.theta_check_points_per_axis}}},
           {"estimator",
            {{"kind", c.wynn.estimator == EstimatorKind::LeastSquares ? "least_squares" : "grid_only"},
             {"grid_points_per_axis", c.wynn.fit.grid_points_per_axis},
             {"max_iterations", c.wynn.fit.max_iterations},
             {"step_tolerance", c.wynn.fit.step_tolerance}}},
           {"oracle", oracle},
           {"mc", mc},
           {"seed", c.seed},
           {"output", {{"prefix", c.output.prefix}}}};
  if (c.theta_true) out["theta_true"] = *c.theta_true;
  return out;
}

inline std::string serialize_config(const RunConfig& c) { return config_to_json(c).dump(2) + "\n"; }

}  // namespace wynn

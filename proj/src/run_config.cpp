#include "ofs/run_config.hpp"

#include <algorithm>
#include <cstdint>
#include <set>

#include "ofs/errors.hpp"
#include "ofs/io.hpp"

namespace ofs {

namespace {

class Reader {
 public:
  Reader(const std::string& text, const std::string& source) : text_(text), source_(source) {}

  [[noreturn]] void fail(const std::string& pointer, const std::string& problem) const {
    const int line = locate_pointer_line(text_, pointer);
    std::string where = source_;
    if (line > 0) where += ":" + std::to_string(line);
    throw ConfigError(where + ": " + (pointer.empty() ? "/" : pointer) + ": " + problem);
  }

  void keys(const Json& j, const std::string& ptr, const std::set<std::string>& allowed) const {
    if (!j.is_object()) fail(ptr, "expected an object");
    for (const auto& [k, v] : j.items()) {
      if (!allowed.count(k)) fail(ptr + "/" + k, "unknown key '" + k + "'");
    }
  }

  double number(const Json& j, const std::string& ptr) const {
    if (!j.is_number()) fail(ptr, "expected a number");
    return j.get<double>();
  }

  std::int64_t integer(const Json& j, const std::string& ptr) const {
    if (!j.is_number_integer()) fail(ptr, "expected an integer");
    return j.get<std::int64_t>();
  }

  int small_int(const Json& j, const std::string& ptr) const {
    const std::int64_t v = integer(j, ptr);
    if (v < 0 || v > 1'000'000'000) fail(ptr, "out of range");
    return static_cast<int>(v);
  }

  std::uint64_t seed(const Json& j, const std::string& ptr) const {
    if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
      fail(ptr, "expected a non-negative integer");
    }
    return j.get<std::uint64_t>();
  }

  bool boolean(const Json& j, const std::string& ptr) const {
    if (!j.is_boolean()) fail(ptr, "expected true or false");
    return j.get<bool>();
  }

  std::string string(const Json& j, const std::string& ptr) const {
    if (!j.is_string()) fail(ptr, "expected a string");
    return j.get<std::string>();
  }

  Vector vector(const Json& j, const std::string& ptr) const {
    if (!j.is_array()) fail(ptr, "expected an array of numbers");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = number(j[i], ptr + "/" + std::to_string(i));
    return v;
  }

  template <class F>
  auto enum_value(const Json& j, const std::string& ptr, F parse) const {
    const std::string s = string(j, ptr);
    try {
      return parse(s);
    } catch (const ConfigError& e) {
      fail(ptr, e.what());
    }
  }

 private:
  const std::string& text_;
  const std::string& source_;
};

void apply_adapt(const Reader& r, const Json& j, const std::string& ptr, AdaptConfig& a) {
  r.keys(j, ptr, {"enabled", "target_acceptance", "window"});
  if (j.contains("enabled")) a.enabled = r.boolean(j["enabled"], ptr + "/enabled");
  if (j.contains("target_acceptance")) {
    a.target_acceptance = r.number(j["target_acceptance"], ptr + "/target_acceptance");
    if (!(a.target_acceptance >= 0.0 && a.target_acceptance < 1.0)) {
      r.fail(ptr + "/target_acceptance", "must lie in [0, 1)");
    }
  }
  if (j.contains("window")) {
    a.window = r.small_int(j["window"], ptr + "/window");
    if (a.window < 1) r.fail(ptr + "/window", "must be at least 1");
  }
}

}  // namespace

int locate_pointer_line(const std::string& text, const std::string& pointer) {
  std::size_t pos = 0;
  std::size_t start = 1;
  while (start <= pointer.size() && !pointer.empty()) {
    std::size_t end = pointer.find('/', start);
    if (end == std::string::npos) end = pointer.size();
    const std::string token = pointer.substr(start, end - start);
    start = end + 1;
    const bool index = !token.empty() && std::all_of(token.begin(), token.end(), ::isdigit);
    if (index) continue;  // array positions keep the enclosing key's line
    const std::size_t hit = text.find("\"" + token + "\"", pos);
    if (hit == std::string::npos) return 0;
    pos = hit + 1;
  }
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(std::min(pos, text.size())), '\n'));
}

const ExperimentConfig& RunConfig::require_scenario() const {
  if (!scenario) throw ConfigError(source + ": /scenario: required by this command");
  return experiment;
}

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    const std::size_t byte = std::min<std::size_t>(e.byte, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(byte > 0 ? byte - 1 : 0), '\n'));
    throw ConfigError(source + ":" + std::to_string(line) + ": malformed JSON: " + e.what());
  }
  const Reader r(text, source);
  r.keys(doc, "", {"scenario", "model", "prior", "chain", "sandwich", "coverage", "output", "seed",
                   "threads", "poisson"});

  RunConfig cfg;
  cfg.source = source;
  if (doc.contains("scenario")) {
    cfg.scenario = r.enum_value(doc["scenario"], "/scenario", scenario_from_string);
    cfg.experiment = ExperimentConfig::defaults(*cfg.scenario);
  }
  ExperimentConfig& e = cfg.experiment;
  PoissonDemoConfig& pd = cfg.poisson;
  pd = PoissonDemoConfig::defaults();

  if (doc.contains("seed")) cfg.seed = r.seed(doc["seed"], "/seed");
  if (doc.contains("threads")) {
    const int t = r.small_int(doc["threads"], "/threads");
    if (t < 1) r.fail("/threads", "must be at least 1");
    cfg.threads = static_cast<unsigned>(t);
  }
  if (doc.contains("model")) {
    const Json& m = doc["model"];
    r.keys(m, "/model", {"theta0", "beta", "grid_size", "taper_range", "pairwise_grid", "replicates",
                         "oracle_n"});
    if (m.contains("theta0")) e.theta0 = r.vector(m["theta0"], "/model/theta0");
    if (m.contains("beta")) e.beta = r.vector(m["beta"], "/model/beta");
    if (m.contains("grid_size")) e.grid_size = r.small_int(m["grid_size"], "/model/grid_size");
    if (m.contains("taper_range")) e.taper_range = r.number(m["taper_range"], "/model/taper_range");
    if (m.contains("pairwise_grid")) e.pairwise_grid = r.small_int(m["pairwise_grid"], "/model/pairwise_grid");
    if (m.contains("replicates")) e.replicates = r.small_int(m["replicates"], "/model/replicates");
    if (m.contains("oracle_n")) e.oracle_n = r.small_int(m["oracle_n"], "/model/oracle_n");
  }
  if (doc.contains("prior")) {
    const Json& p = doc["prior"];
    r.keys(p, "/prior", {"scale"});
    if (p.contains("scale")) {
      e.prior_scale = r.number(p["scale"], "/prior/scale");
      pd.prior_scale = e.prior_scale;
    }
  }
  if (doc.contains("chain")) {
    const Json& c = doc["chain"];
    r.keys(c, "/chain", {"iterations", "burn_in", "thin", "adapt"});
    if (c.contains("iterations")) pd.iterations = e.chain.iterations = r.small_int(c["iterations"], "/chain/iterations");
    if (c.contains("burn_in")) pd.burn_in = e.chain.burn_in = r.small_int(c["burn_in"], "/chain/burn_in");
    if (c.contains("thin")) pd.thin = e.chain.thin = r.small_int(c["thin"], "/chain/thin");
    if (c.contains("adapt")) {
      apply_adapt(r, c["adapt"], "/chain/adapt", e.chain.adapt);
      pd.adapt = e.chain.adapt;
    }
  }
  if (doc.contains("sandwich")) {
    const Json& s = doc["sandwich"];
    r.keys(s, "/sandwich", {"combos", "bootstrap_k"});
    if (s.contains("combos")) {
      const Json& list = s["combos"];
      if (!list.is_array()) r.fail("/sandwich/combos", "expected an array of {\"p\", \"q\"} objects");
      e.combos.clear();
      for (std::size_t i = 0; i < list.size(); ++i) {
        const std::string ptr = "/sandwich/combos/" + std::to_string(i);
        r.keys(list[i], ptr, {"p", "q"});
        if (!list[i].contains("p") || !list[i].contains("q")) r.fail(ptr, "needs both p and q");
        e.combos.push_back({r.enum_value(list[i]["p"], ptr + "/p", p_method_from_string),
                            r.enum_value(list[i]["q"], ptr + "/q", q_method_from_string)});
      }
    }
    if (s.contains("bootstrap_k")) e.bootstrap_k = r.small_int(s["bootstrap_k"], "/sandwich/bootstrap_k");
  }
  if (doc.contains("coverage")) {
    const Json& c = doc["coverage"];
    r.keys(c, "/coverage", {"n_datasets", "alpha_grid", "methods"});
    if (c.contains("n_datasets")) e.n_datasets = r.small_int(c["n_datasets"], "/coverage/n_datasets");
    if (c.contains("alpha_grid")) {
      const Vector a = r.vector(c["alpha_grid"], "/coverage/alpha_grid");
      e.alpha_grid.assign(a.data(), a.data() + a.size());
    }
    if (c.contains("methods")) {
      const Json& list = c["methods"];
      if (!list.is_array()) r.fail("/coverage/methods", "expected an array of method names");
      e.methods.clear();
      for (std::size_t i = 0; i < list.size(); ++i) {
        e.methods.push_back(
            r.enum_value(list[i], "/coverage/methods/" + std::to_string(i), method_from_string));
      }
    }
  }
  if (doc.contains("output")) {
    const Json& o = doc["output"];
    r.keys(o, "/output", {"dir"});
    if (o.contains("dir")) cfg.out_dir = r.string(o["dir"], "/output/dir");
  }
  if (doc.contains("poisson")) {
    const Json& p = doc["poisson"];
    r.keys(p, "/poisson", {"sites", "domain", "time_span", "theta", "beta", "spatial_range",
                           "temporal_range", "exclude"});
    if (p.contains("sites")) pd.sites = r.small_int(p["sites"], "/poisson/sites");
    if (p.contains("domain")) pd.domain = r.number(p["domain"], "/poisson/domain");
    if (p.contains("time_span")) pd.time_span = r.number(p["time_span"], "/poisson/time_span");
    if (p.contains("theta")) pd.theta = r.vector(p["theta"], "/poisson/theta");
    if (p.contains("beta")) pd.beta = r.vector(p["beta"], "/poisson/beta");
    if (p.contains("spatial_range")) pd.spatial_range = r.number(p["spatial_range"], "/poisson/spatial_range");
    if (p.contains("temporal_range")) pd.temporal_range = r.number(p["temporal_range"], "/poisson/temporal_range");
    if (p.contains("exclude")) {
      const Json& list = p["exclude"];
      if (!list.is_array()) r.fail("/poisson/exclude", "expected an array of coordinate names");
      std::vector<std::string> names;
      for (std::size_t i = 0; i < list.size(); ++i) {
        names.push_back(r.string(list[i], "/poisson/exclude/" + std::to_string(i)));
      }
      pd.exclude = names;
    }
  }

  override_seed(cfg, cfg.seed);
  e.threads = cfg.threads;
  try {
    if (cfg.scenario) e.validate();
    pd.validate();
  } catch (const ConfigError& err) {
    throw ConfigError(source + ": " + err.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return parse_run_config(text, path.string());
}

void override_seed(RunConfig& config, std::uint64_t seed) {
  config.seed = seed;
  config.experiment.master_seed = seed;
  config.poisson.seed = seed;
}

}  // namespace ofs

#include "config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "hetens/error.hpp"
#include "hetens/format.hpp"

namespace hetens::cli {

namespace {

std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

/// Line of the last key of `path`, found by walking the keys in order through
/// the text. Returns 0 when a key cannot be located.
std::size_t key_line(const std::string& text, const std::vector<std::string>& path) {
  std::size_t pos = 0;
  for (const auto& key : path) {
    if (key.empty() || key.front() == '[') continue;
    const auto found = text.find('"' + key + '"', pos);
    if (found == std::string::npos) return 0;
    pos = found + 1;
  }
  return pos == 0 ? 0 : line_col(text, pos - 1).first;
}

class Reader {
 public:
  Reader(const std::string& text, std::string origin) : text_(text), origin_(std::move(origin)) {}

  [[noreturn]] void fail(const std::vector<std::string>& path, const std::string& msg) const {
    std::string dotted;
    for (const auto& p : path) {
      if (!dotted.empty() && p.front() != '[') dotted += '.';
      dotted += p;
    }
    std::string where = origin_;
    if (const auto line = key_line(text_, path); line > 0) where += ":" + std::to_string(line);
    throw ConfigError(where + ": " + (dotted.empty() ? "" : dotted + ": ") + msg);
  }

  void check_keys(const Json& obj, const std::vector<std::string>& path, const std::set<std::string>& allowed) const {
    if (!obj.is_object()) fail(path, "expected an object");
    for (const auto& [key, value] : obj.items()) {
      if (!allowed.count(key)) {
        auto p = path;
        p.push_back(key);
        fail(p, "unknown key");
      }
    }
  }

  std::size_t count(const Json& v, const std::vector<std::string>& path) const {
    if (!v.is_number_integer() || v.get<long long>() < 0) fail(path, "expected a nonnegative integer");
    return v.get<std::size_t>();
  }
  std::uint64_t u64(const Json& v, const std::vector<std::string>& path) const {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      fail(path, "expected a nonnegative integer");
    }
    return v.get<std::uint64_t>();
  }
  double real(const Json& v, const std::vector<std::string>& path) const {
    if (!v.is_number()) fail(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(path, "expected a finite number");
    return d;
  }
  std::string string(const Json& v, const std::vector<std::string>& path) const {
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }
  bool boolean(const Json& v, const std::vector<std::string>& path) const {
    if (!v.is_boolean()) fail(path, "expected true or false");
    return v.get<bool>();
  }

  ParamGrid grid(const Json& obj, const std::vector<std::string>& path) const {
    if (!obj.is_object() || obj.empty()) fail(path, "expected a nonempty object of axes");
    std::vector<ParamAxis> axes;
    for (const auto& [name, spec] : obj.items()) {
      auto p = path;
      p.push_back(name);
      ParamAxis axis{name, {}};
      if (spec.is_array()) {
        for (const auto& v : spec) axis.values.push_back(real(v, p));
      } else if (spec.is_object()) {
        check_keys(spec, p, {"base", "from", "to"});
        if (!spec.contains("base") || !spec.contains("from") || !spec.contains("to")) {
          fail(p, "exponent ranges need 'base', 'from' and 'to'");
        }
        const double base = real(spec["base"], p);
        if (!spec["from"].is_number_integer() || !spec["to"].is_number_integer()) fail(p, "exponents must be integers");
        const auto from = spec["from"].get<long long>(), to = spec["to"].get<long long>();
        if (from > to) fail(p, "'from' exceeds 'to'");
        for (long long e = from; e <= to; ++e) axis.values.push_back(std::pow(base, static_cast<double>(e)));
      } else {
        fail(p, "expected a list of values or an exponent range");
      }
      if (axis.values.empty()) fail(p, "axis has no values");
      axes.push_back(std::move(axis));
    }
    try {
      return ParamGrid(std::move(axes));
    } catch (const ConfigError& e) {
      fail(path, e.what());
    }
  }

 private:
  const std::string& text_;
  std::string origin_;
};

Json grid_json(const ParamGrid& grid) {
  Json out = Json::object();
  for (const auto& a : grid.axes()) out[a.name] = a.values;
  return out;
}

std::uint64_t fnv(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

ExperimentConfig profile_defaults(const std::string& profile) {
  ExperimentConfig cfg;
  cfg.methods = {Method::kEsvm, Method::kEmlp, Method::kRf, Method::kSim};
  if (profile == "paper") {
    cfg.t = 1001;
    cfg.b = 10;
    cfg.stride = 13;
    cfg.stride_mode = StrideMode::kExact;
    cfg.repetitions = 100;
  } else if (profile == "desk") {
    cfg.t = 101;
    cfg.b = 5;
    cfg.stride = 13;
    cfg.stride_mode = StrideMode::kApportioned;
    cfg.repetitions = 20;
  } else {
    throw ConfigError("unknown profile '" + profile + "' (expected 'paper' or 'desk')");
  }
  return cfg;
}

void refresh_snapshot(RunConfig& rc) {
  const auto& c = rc.experiment;
  Json s = Json::object();
  s["profile"] = rc.profile;
  s["seed"] = c.master_seed;
  s["threads"] = c.threads;
  Json datasets = Json::array();
  for (const auto& d : c.datasets) {
    Json e = Json::object();
    e["uri"] = d.uri;
    if (!d.synthetic()) {
      if (const auto* name = std::get_if<std::string>(&d.csv.label_column)) e["label_column"] = *name;
      else e["label_column"] = std::get<std::size_t>(d.csv.label_column);
      e["delimiter"] = std::string(1, d.csv.delimiter);
      e["categorical"] = d.csv.categorical;
      e["auto_categorical"] = d.csv.auto_categorical;
    }
    datasets.push_back(std::move(e));
  }
  s["data"] = {{"datasets", datasets},
               {"train_fraction", c.train_fraction},
               {"train_n", c.train_n},
               {"test_n", c.test_n}};
  s["learners"] = {{"mlp", {{"epochs", c.ensemble.mlp.epochs}, {"learning_rate", c.ensemble.mlp.learning_rate}}},
                   {"svm",
                    {{"tolerance", c.ensemble.svm.tolerance},
                     {"stall_factor", c.ensemble.svm.stall_factor},
                     {"max_iterations", c.ensemble.svm.max_iterations}}}};
  s["homogeneous"] = {{"t", c.t},
                      {"b", c.b},
                      {"subbag_rate", c.ensemble.subbag_rate},
                      {"svm_grid", grid_json(c.svm_grid)},
                      {"mlp_grid", grid_json(c.mlp_grid)}};
  s["simplex"] = {{"stride", c.stride},
                  {"stride_mode", c.stride_mode == StrideMode::kExact ? "exact" : "apportioned"}};
  Json methods = Json::array();
  for (Method m : c.methods) methods.push_back(std::string(to_string(m)));
  s["eval"] = {{"methods", methods}, {"repetitions", c.repetitions}, {"cv_folds", c.cv_folds}, {"alpha", rc.alpha}};
  rc.snapshot = s;
  Json hashed = s;
  hashed.erase("threads");
  rc.hash = fnv(hashed.dump());
}

RunConfig parse_config(const std::string& text, const std::string& origin, const Overrides& overrides,
                       const std::filesystem::path& base_dir) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte == 0 ? 0 : e.byte - 1);
    throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": syntax error: " + e.what());
  }
  Reader rd(text, origin);
  rd.check_keys(j, {}, {"profile", "seed", "threads", "data", "learners", "homogeneous", "simplex", "eval"});

  RunConfig rc;
  rc.profile = overrides.profile.value_or(j.contains("profile") ? rd.string(j["profile"], {"profile"}) : "desk");
  try {
    rc.experiment = profile_defaults(rc.profile);
  } catch (const ConfigError& e) {
    rd.fail({"profile"}, e.what());
  }
  auto& c = rc.experiment;
  if (j.contains("seed")) c.master_seed = rd.u64(j["seed"], {"seed"});
  if (j.contains("threads")) c.threads = rd.count(j["threads"], {"threads"});

  if (j.contains("data")) {
    const auto& d = j["data"];
    rd.check_keys(d, {"data"}, {"datasets", "train_fraction", "train_n", "test_n"});
    if (d.contains("datasets")) {
      if (!d["datasets"].is_array()) rd.fail({"data", "datasets"}, "expected a list");
      for (std::size_t i = 0; i < d["datasets"].size(); ++i) {
        const auto& e = d["datasets"][i];
        const std::vector<std::string> p{"data", "datasets", "[" + std::to_string(i) + "]"};
        DatasetSpec spec;
        if (e.is_string()) {
          spec.uri = e.get<std::string>();
        } else {
          rd.check_keys(e, p, {"uri", "label_column", "delimiter", "categorical", "auto_categorical"});
          if (!e.contains("uri")) rd.fail(p, "missing 'uri'");
          spec.uri = rd.string(e["uri"], {"data", "datasets", "uri"});
          if (e.contains("label_column")) {
            if (e["label_column"].is_string()) spec.csv.label_column = e["label_column"].get<std::string>();
            else spec.csv.label_column = rd.count(e["label_column"], {"data", "datasets", "label_column"});
          }
          if (e.contains("delimiter")) {
            const auto delim = rd.string(e["delimiter"], {"data", "datasets", "delimiter"});
            if (delim.size() != 1) rd.fail({"data", "datasets", "delimiter"}, "expected a single character");
            spec.csv.delimiter = delim[0];
          }
          if (e.contains("categorical")) {
            if (!e["categorical"].is_array()) rd.fail({"data", "datasets", "categorical"}, "expected a list");
            for (const auto& col : e["categorical"]) {
              spec.csv.categorical.push_back(rd.string(col, {"data", "datasets", "categorical"}));
            }
          }
          if (e.contains("auto_categorical")) {
            spec.csv.auto_categorical = rd.boolean(e["auto_categorical"], {"data", "datasets", "auto_categorical"});
          }
        }
        if (!spec.synthetic() && !base_dir.empty() && std::filesystem::path(spec.uri).is_relative()) {
          spec.uri = (base_dir / spec.uri).lexically_normal().string();
        }
        c.datasets.push_back(std::move(spec));
      }
    }
    if (d.contains("train_fraction")) c.train_fraction = rd.real(d["train_fraction"], {"data", "train_fraction"});
    if (d.contains("train_n")) c.train_n = rd.count(d["train_n"], {"data", "train_n"});
    if (d.contains("test_n")) c.test_n = rd.count(d["test_n"], {"data", "test_n"});
  }

  if (j.contains("learners")) {
    const auto& l = j["learners"];
    rd.check_keys(l, {"learners"}, {"mlp", "svm"});
    if (l.contains("mlp")) {
      rd.check_keys(l["mlp"], {"learners", "mlp"}, {"epochs", "learning_rate"});
      if (l["mlp"].contains("epochs")) c.ensemble.mlp.epochs = rd.count(l["mlp"]["epochs"], {"learners", "mlp", "epochs"});
      if (l["mlp"].contains("learning_rate")) {
        c.ensemble.mlp.learning_rate = rd.real(l["mlp"]["learning_rate"], {"learners", "mlp", "learning_rate"});
      }
    }
    if (l.contains("svm")) {
      const auto& s = l["svm"];
      rd.check_keys(s, {"learners", "svm"}, {"tolerance", "stall_factor", "max_iterations"});
      if (s.contains("tolerance")) c.ensemble.svm.tolerance = rd.real(s["tolerance"], {"learners", "svm", "tolerance"});
      if (s.contains("stall_factor")) {
        c.ensemble.svm.stall_factor = rd.count(s["stall_factor"], {"learners", "svm", "stall_factor"});
      }
      if (s.contains("max_iterations")) {
        c.ensemble.svm.max_iterations = rd.u64(s["max_iterations"], {"learners", "svm", "max_iterations"});
      }
      if (!(c.ensemble.svm.tolerance > 0.0)) rd.fail({"learners", "svm", "tolerance"}, "must be positive");
    }
  }

  if (j.contains("homogeneous")) {
    const auto& h = j["homogeneous"];
    rd.check_keys(h, {"homogeneous"}, {"t", "b", "subbag_rate", "svm_grid", "mlp_grid"});
    if (h.contains("t")) c.t = rd.count(h["t"], {"homogeneous", "t"});
    if (h.contains("b")) c.b = rd.count(h["b"], {"homogeneous", "b"});
    if (h.contains("subbag_rate")) c.ensemble.subbag_rate = rd.real(h["subbag_rate"], {"homogeneous", "subbag_rate"});
    if (h.contains("svm_grid")) c.svm_grid = rd.grid(h["svm_grid"], {"homogeneous", "svm_grid"});
    if (h.contains("mlp_grid")) c.mlp_grid = rd.grid(h["mlp_grid"], {"homogeneous", "mlp_grid"});
  }

  if (j.contains("simplex")) {
    const auto& s = j["simplex"];
    rd.check_keys(s, {"simplex"}, {"stride", "stride_mode"});
    if (s.contains("stride")) c.stride = rd.count(s["stride"], {"simplex", "stride"});
    if (s.contains("stride_mode")) {
      const auto mode = rd.string(s["stride_mode"], {"simplex", "stride_mode"});
      if (mode == "exact") c.stride_mode = StrideMode::kExact;
      else if (mode == "apportioned") c.stride_mode = StrideMode::kApportioned;
      else rd.fail({"simplex", "stride_mode"}, "expected 'exact' or 'apportioned'");
    }
  }

  if (j.contains("eval")) {
    const auto& e = j["eval"];
    rd.check_keys(e, {"eval"}, {"methods", "repetitions", "cv_folds", "alpha"});
    if (e.contains("methods")) {
      if (!e["methods"].is_array()) rd.fail({"eval", "methods"}, "expected a list");
      c.methods.clear();
      for (const auto& m : e["methods"]) {
        try {
          c.methods.push_back(parse_method(rd.string(m, {"eval", "methods"})));
        } catch (const ConfigError& err) {
          rd.fail({"eval", "methods"}, err.what());
        }
      }
    }
    if (e.contains("repetitions")) c.repetitions = rd.count(e["repetitions"], {"eval", "repetitions"});
    if (e.contains("cv_folds")) c.cv_folds = rd.count(e["cv_folds"], {"eval", "cv_folds"});
    if (e.contains("alpha")) {
      rc.alpha = rd.real(e["alpha"], {"eval", "alpha"});
      if (rc.alpha != 0.05 && rc.alpha != 0.10) rd.fail({"eval", "alpha"}, "expected 0.05 or 0.10");
    }
  }

  if (overrides.seed) c.master_seed = *overrides.seed;
  c.threads = resolve_threads(overrides.threads, c.threads);

  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  refresh_snapshot(rc);
  return rc;
}

RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string(), overrides, path.parent_path());
}

std::size_t resolve_threads(std::optional<std::size_t> flag, std::size_t fallback) {
  if (flag) return std::max<std::size_t>(1, *flag);
  if (const char* env = std::getenv("HETENS_THREADS"); env && *env) {
    char* end = nullptr;
    const auto v = std::strtoull(env, &end, 10);
    if (*end != '\0' || v == 0) throw ConfigError("HETENS_THREADS must be a positive integer");
    return static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, fallback);
}

}  // namespace hetens::cli

#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <limits>

#include "error.hpp"

namespace aqsgee {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& msg) {
  throw ConfigError("config: " + (where.empty() ? std::string("document") : "'" + where + "'") + " " + msg);
}

bool non_negative_integer(const Json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

// Typed view of one JSON object with a closed key set.
class Section {
 public:
  Section(const Json& j, std::string path, std::initializer_list<const char*> allowed) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "must be an object");
    for (const auto& [key, value] : j_.items()) {
      (void)value;
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
        fail(where(key), "is not a recognised key");
    }
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }
  const Json& at(const char* key) const { return j_.at(key); }
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void require(const char* key) const {
    if (!has(key)) fail(where(key), "is required");
  }

  double number(const char* key, double fallback) const {
    if (!has(key)) return fallback;
    const Json& v = at(key);
    if (!v.is_number()) fail(where(key), "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(where(key), "must be finite");
    return x;
  }

  double positive(const char* key, double fallback) const {
    const double x = number(key, fallback);
    if (!(x > 0.0)) fail(where(key), "must be positive");
    return x;
  }

  std::uint64_t unsigned_int(const char* key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const Json& v = at(key);
    if (!non_negative_integer(v)) fail(where(key), "must be a non-negative integer");
    return v.get<std::uint64_t>();
  }

  bool boolean(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    const Json& v = at(key);
    if (!v.is_boolean()) fail(where(key), "must be true or false");
    return v.get<bool>();
  }

  std::string string(const char* key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const Json& v = at(key);
    if (!v.is_string()) fail(where(key), "must be a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const char* key) const {
    const Json& v = at(key);
    if (!v.is_array() || v.empty()) fail(where(key), "must be a non-empty array of numbers");
    std::vector<double> out;
    for (const Json& e : v) {
      if (!e.is_number()) fail(where(key), "must be a non-empty array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<std::size_t> sizes(const char* key) const {
    const Json& v = at(key);
    if (!v.is_array() || v.empty()) fail(where(key), "must be a non-empty array of positive integers");
    std::vector<std::size_t> out;
    for (const Json& e : v) {
      if (!non_negative_integer(e) || e.get<std::uint64_t>() == 0)
        fail(where(key), "must be a non-empty array of positive integers");
      out.push_back(e.get<std::size_t>());
    }
    return out;
  }

 private:
  const Json& j_;
  std::string path_;
};

// Runs a parser and turns library validation errors into config errors.
template <class F>
auto guarded(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const LoadError&) {
    throw;
  } catch (const Error& e) {
    fail(where, e.what());
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

// A custom matrix is either a CSV path or an inline array of rows.
Mat read_matrix(const Section& s, const char* key, const fs::path& base) {
  const Json& v = s.at(key);
  if (v.is_string()) return load_matrix_csv(resolve(base, v.get<std::string>()).string());
  if (!v.is_array() || v.empty()) fail(s.where(key), "must be a CSV path or an array of rows");
  const std::size_t rows = v.size();
  Mat out(rows, rows);
  for (std::size_t a = 0; a < rows; ++a) {
    const Json& row = v[a];
    if (!row.is_array() || row.size() != rows) fail(s.where(key), "must be a square array of rows");
    for (std::size_t b = 0; b < rows; ++b) {
      if (!row[b].is_number()) fail(s.where(key), "entries must be numbers");
      out(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = row[b].get<double>();
    }
  }
  return out;
}

LinkKind read_link(const Section& s, const char* key, LinkKind fallback) {
  if (!s.has(key)) return fallback;
  const std::string name = s.string(key, "");
  return guarded(s.where(key), [&] { return parse_link(name); });
}

Structure read_structure(const Section& s, const char* key) {
  const std::string name = s.string(key, "exchangeable");
  return guarded(s.where(key), [&] { return parse_structure(name); });
}

MethodSpec read_model(const Json& j, const std::string& path, const fs::path& base, std::string* label) {
  const Section s(j, path, {"method", "structure", "alpha", "matrix", "shrinkage", "ridge", "label"});
  MethodSpec spec;
  const std::string method = s.string("method", "aqs");
  spec.method = guarded(s.where("method"), [&] { return parse_method(method); });
  spec.structure = read_structure(s, "structure");
  spec.alpha = s.number("alpha", 0.0);
  if (spec.structure == Structure::kCustom) {
    if (spec.method != Method::kGee) fail(s.where("structure"), "custom applies to method gee only");
    s.require("matrix");
    spec.custom = read_matrix(s, "matrix", base);
  } else if (s.has("matrix")) {
    fail(s.where("matrix"), "requires structure custom");
  }
  // Only experiments know the true correlation; they are the callers passing a label.
  if (spec.method == Method::kOracle && label == nullptr)
    fail(s.where("method"), "oracle is only available in compare experiments");
  if (s.has("shrinkage")) {
    spec.reg.shrinkage = s.number("shrinkage", 0.0);
    if (spec.reg.shrinkage < 0.0) fail(s.where("shrinkage"), "must be non-negative");
  }
  if (s.has("ridge")) {
    spec.reg.ridge = s.number("ridge", 0.0);
    if (spec.reg.ridge < 0.0) fail(s.where("ridge"), "must be non-negative");
  }
  if (label != nullptr) *label = s.string("label", default_label(spec));
  else if (s.has("label")) fail(s.where("label"), "is only used by compare");
  return spec;
}

SolverOptions read_solver(const Json& doc) {
  SolverOptions opt;
  if (!doc.contains("solver")) return opt;
  const Section s(doc.at("solver"), "solver",
                  {"tol", "max_iter", "max_halvings", "scoring", "multistart", "multistart_scale", "multistart_seed",
                   "ci_level", "ci_sandwich"});
  opt.tol_g = s.positive("tol", opt.tol_g);
  opt.max_iter = static_cast<int>(s.unsigned_int("max_iter", static_cast<std::uint64_t>(opt.max_iter)));
  if (opt.max_iter < 1) fail(s.where("max_iter"), "must be at least 1");
  opt.max_halvings = static_cast<int>(s.unsigned_int("max_halvings", static_cast<std::uint64_t>(opt.max_halvings)));
  opt.scoring = s.boolean("scoring", opt.scoring);
  opt.multistart = static_cast<int>(s.unsigned_int("multistart", 0));
  opt.multistart_scale = s.positive("multistart_scale", opt.multistart_scale);
  opt.multistart_seed = s.unsigned_int("multistart_seed", opt.multistart_seed);
  opt.ci_level = s.number("ci_level", opt.ci_level);
  if (!(opt.ci_level > 0.0 && opt.ci_level < 1.0)) fail(s.where("ci_level"), "must lie in (0, 1)");
  opt.ci_sandwich = s.boolean("ci_sandwich", opt.ci_sandwich);
  return opt;
}

GeneratorConfig read_generator(const Json& doc, const fs::path& base, std::uint64_t seed) {
  if (!doc.contains("generator")) fail("generator", "is required");
  const Section s(doc.at("generator"), "generator", {"n", "m", "p", "link", "beta0", "rbar", "intercept", "inflation"});
  GeneratorConfig g;
  for (const char* k : {"n", "m", "p", "beta0"}) s.require(k);
  g.n = s.unsigned_int("n", 0);
  g.m = s.unsigned_int("m", 0);
  g.p = s.unsigned_int("p", 0);
  g.link = read_link(s, "link", LinkKind::kLinear);
  g.beta0 = to_vec(s.numbers("beta0"));
  g.intercept = s.boolean("intercept", false);
  g.inflation = s.number("inflation", 0.0);
  if (s.has("rbar")) {
    const Section r(s.at("rbar"), "generator.rbar", {"structure", "alpha", "matrix"});
    g.rbar.structure = read_structure(r, "structure");
    g.rbar.alpha = r.number("alpha", 0.0);
    if (g.rbar.structure == Structure::kCustom) {
      r.require("matrix");
      g.rbar.custom = read_matrix(r, "matrix", base);
    } else if (r.has("matrix")) {
      fail(r.where("matrix"), "requires structure custom");
    }
  }
  g.seed = seed;
  guarded("generator", [&] {
    g.validate();
    return 0;
  });
  return g;
}

fs::path read_data_path(const Section& s, const fs::path& base) {
  s.require("data");
  return resolve(base, s.string("data", ""));
}

void check_command(const Json& doc, const char* expected) {
  if (!doc.contains("command")) return;
  const Json& c = doc.at("command");
  if (!c.is_string() || c.get<std::string>() != expected)
    fail("command", std::string("does not match the requested command '") + expected + "'");
}

}  // namespace

Json read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ConfigError("config: " + path.string() + " is not valid JSON (" + e.what() + ")");
  }
}

FitConfig parse_fit_config(const Json& doc, const fs::path& base, bool with_data) {
  const Section s(doc, "", {"command", "data", "link", "model", "solver", "beta_init"});
  check_command(doc, "fit");
  FitConfig c;
  if (with_data) c.data = read_data_path(s, base);
  else if (s.has("data")) fail("data", "is not used here; the dataset is passed separately");
  c.link = read_link(s, "link", LinkKind::kLinear);
  c.model = read_model(s.has("model") ? s.at("model") : Json::object(), "model", base, nullptr);
  c.solver = read_solver(doc);
  if (s.has("beta_init")) c.beta_init = to_vec(s.numbers("beta_init"));
  return c;
}

DiagnoseConfig parse_diagnose_config(const Json& doc, const fs::path& base) {
  const Section s(doc, "", {"command", "data", "link", "model", "solver", "beta", "delta", "r", "sampling", "n_grid",
                            "c0", "bound_c"});
  check_command(doc, "diagnose");
  DiagnoseConfig c;
  c.data = read_data_path(s, base);
  c.link = read_link(s, "link", LinkKind::kLinear);
  c.model = read_model(s.has("model") ? s.at("model") : Json::object(), "model", base, nullptr);
  c.solver = read_solver(doc);
  if (s.has("beta")) c.beta = to_vec(s.numbers("beta"));
  c.delta = s.number("delta", c.delta);
  if (!(c.delta > 0.0 && c.delta < 0.5)) fail("delta", "must lie in (0, 1/2)");
  if (s.has("r")) c.r = s.numbers("r");
  for (double r : c.r)
    if (!(r > 0.0) || !std::isfinite(r)) fail("r", "radii must be positive");
  if (s.has("sampling")) {
    const Section b(s.at("sampling"), "sampling", {"random_points", "seed"});
    c.sampling.random_points = b.unsigned_int("random_points", c.sampling.random_points);
    c.sampling.seed = b.unsigned_int("seed", c.sampling.seed);
  }
  if (s.has("n_grid")) c.n_grid = s.sizes("n_grid");
  c.c0 = s.number("c0", c.c0);
  c.bound_c = s.positive("bound_c", c.bound_c);
  return c;
}

SimulateConfig parse_simulate_config(const Json& doc, const fs::path& base) {
  const Section s(doc, "", {"command", "generator", "seed", "replication"});
  check_command(doc, "simulate");
  SimulateConfig c;
  c.generator = read_generator(doc, base, s.unsigned_int("seed", 1));
  c.replication = s.unsigned_int("replication", 0);
  return c;
}

CompareConfig parse_compare_config(const Json& doc, const fs::path& base) {
  const Section s(doc, "", {"command", "generator", "seed", "experiment", "methods", "reps", "n_grid", "delta",
                            "closed_form", "threshold", "solver"});
  check_command(doc, "compare");
  CompareConfig c;
  c.generator = read_generator(doc, base, s.unsigned_int("seed", 1));
  const std::string exp = s.string("experiment", "efficiency");
  if (exp == "efficiency") c.experiment = Experiment::kEfficiency;
  else if (exp == "consistency") c.experiment = Experiment::kConsistency;
  else if (exp == "identity") c.experiment = Experiment::kIdentity;
  else fail("experiment", "must be one of efficiency, consistency, identity");

  s.require("reps");
  c.reps = s.unsigned_int("reps", 0);
  if (c.reps < kMinCompareReps)
    fail("reps", "must be at least " + std::to_string(kMinCompareReps) + " (got " + std::to_string(c.reps) + ")");

  s.require("methods");
  const Json& ms = s.at("methods");
  if (!ms.is_array() || ms.empty()) fail("methods", "must be a non-empty array");
  for (std::size_t k = 0; k < ms.size(); ++k) {
    const std::string where = "methods[" + std::to_string(k) + "]";
    NamedMethod nm;
    nm.spec = read_model(ms[k], where, base, &nm.label);
    for (const auto& prev : c.methods)
      if (prev.label == nm.label) fail(where, "duplicates the label '" + nm.label + "'");
    c.methods.push_back(std::move(nm));
  }

  if (s.has("n_grid")) {
    if (c.experiment != Experiment::kConsistency) fail("n_grid", "applies to the consistency experiment only");
    c.n_grid = s.sizes("n_grid");
  } else if (c.experiment == Experiment::kConsistency) {
    fail("n_grid", "is required for the consistency experiment");
  }
  c.delta = s.number("delta", c.delta);
  if (!(c.delta > 0.0 && c.delta < 0.5)) fail("delta", "must lie in (0, 1/2)");
  c.closed_form = s.boolean("closed_form", false);
  c.threshold = s.positive("threshold", c.threshold);
  c.solver = read_solver(doc);
  return c;
}

std::string config_hash(const Json& doc) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : doc.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string_view experiment_name(Experiment e) {
  switch (e) {
    case Experiment::kEfficiency: return "efficiency";
    case Experiment::kConsistency: return "consistency";
    case Experiment::kIdentity: return "identity";
  }
  return "?";
}

}  // namespace aqsgee

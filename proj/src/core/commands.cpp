#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "parallel.hpp"

namespace aqsgee {

namespace fs = std::filesystem;

namespace {

Json to_json(const Vec& v) {
  Json out = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v(k));
  return out;
}

Json to_json(const Mat& m) {
  Json out = Json::array();
  for (Eigen::Index a = 0; a < m.rows(); ++a) out.push_back(to_json(Vec(m.row(a).transpose())));
  return out;
}

std::string num(double x) { return format_double(x); }
std::string num(std::size_t x) { return std::to_string(x); }
std::string flag(bool b) { return b ? "true" : "false"; }

class Csv {
 public:
  explicit Csv(std::vector<std::string> header) : width_(header.size()) { line(header); }
  void row(const std::vector<std::string>& cells) {
    if (cells.size() != width_) throw std::logic_error("csv row width mismatch");
    line(cells);
  }
  std::string str() const { return os_.str(); }

 private:
  void line(const std::vector<std::string>& cells) {
    for (std::size_t k = 0; k < cells.size(); ++k) os_ << (k ? "," : "") << cells[k];
    os_ << '\n';
  }
  std::size_t width_;
  std::ostringstream os_;
};

// Shared state of one command invocation.
struct Run {
  Json config;
  std::string hash;
  fs::path base;
  fs::path out;
  unsigned workers = 1;
  Json outputs = Json::array();

  void write(const std::string& name, const std::string& text) {
    const fs::path path = out / name;
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + path.string());
    f << text;
    f.close();
    if (!f) throw IoError("failed writing " + path.string());
    outputs.push_back(name);
  }
  void write_json(const std::string& name, const Json& doc) { write(name, doc.dump(2) + "\n"); }

  Json header(std::string_view command) const {
    return Json{{"command", command}, {"config_hash", hash}, {"config", config}};
  }
};

Json solver_json(const SolverOptions& o) {
  return Json{{"tol", o.tol_g},
              {"max_iter", o.max_iter},
              {"max_halvings", o.max_halvings},
              {"scoring", o.scoring},
              {"multistart", o.multistart},
              {"ci_level", o.ci_level},
              {"ci_sandwich", o.ci_sandwich}};
}

Json generator_json(const GeneratorConfig& g, const Mat& rbar) {
  Json r{{"structure", structure_name(g.rbar.structure)}, {"alpha", g.rbar.alpha}, {"matrix", to_json(rbar)}};
  return Json{{"n", g.n},           {"m", g.m},          {"p", g.p},
              {"link", link_name(g.link)}, {"beta0", to_json(g.beta0)}, {"rbar", r},
              {"intercept", g.intercept}, {"inflation", g.inflation}, {"seed", g.seed},
              {"approximate_correlation", g.approximate_correlation()}};
}

// ------------------------------------------------------------------- fit

Json fit_json(const FitResult& r) {
  Json j{{"method", r.method},
         {"converged", r.converged},
         {"iterations", r.iterations},
         {"g_norm", r.g_norm},
         {"g_init_norm", r.g_init_norm},
         {"fallbacks", r.fallbacks},
         {"ridge_events", r.ridge_events},
         {"starts", r.starts},
         {"roots_found", r.roots_found},
         {"shrinkage", r.shrinkage},
         {"ridge", r.ridge},
         {"beta", to_json(r.beta)},
         {"beta_init", to_json(r.beta_init)}};
  if (r.cov) {
    const CovarianceEstimates& c = *r.cov;
    j["se_model"] = to_json(c.se_model);
    j["se_sandwich"] = to_json(c.se_sandwich);
    j["cov_model"] = to_json(c.cov_model);
    j["cov_sandwich"] = to_json(c.cov_sandwich);
    j["ci"] = Json{{"level", c.ci_level},
                   {"sandwich", c.ci_sandwich},
                   {"lower", to_json(Vec(c.ci.col(0)))},
                   {"upper", to_json(Vec(c.ci.col(1)))}};
  } else {
    for (const char* k : {"se_model", "se_sandwich", "cov_model", "cov_sandwich", "ci"}) j[k] = nullptr;
  }
  return j;
}

Json data_json(const fs::path& path, const LongitudinalDataset& d) {
  return Json{{"path", path.string()}, {"n", d.n()}, {"m", d.m()}, {"p", d.p()}};
}

CommandResult cmd_fit(Run& run) {
  const FitConfig c = parse_fit_config(run.config, run.base);
  const auto data = std::make_shared<const LongitudinalDataset>(load_dataset_csv(c.data.string()));
  const FitResult r = fit(data, Link(c.link), c.model, c.solver, c.beta_init);

  Json doc = run.header("fit");
  doc["data"] = data_json(c.data, *data);
  doc["link"] = link_name(c.link);
  doc["solver"] = solver_json(c.solver);
  doc["result"] = fit_json(r);
  run.write_json("fit.json", doc);

  Csv trace({"config_hash", "iteration", "g_norm_inf", "g_norm_2", "step_norm", "halvings", "fallback"});
  for (const IterationRecord& it : r.trace)
    trace.row({run.hash, std::to_string(it.iteration), num(it.g_norm_inf), num(it.g_norm_2), num(it.step_norm),
               std::to_string(it.halvings), flag(it.fallback)});
  run.write("fit_trace.csv", trace.str());

  CommandResult out;
  out.summary = Json{{"result", Json{{"beta", to_json(r.beta)}, {"converged", r.converged}, {"iterations", r.iterations}}}};
  if (!r.converged) {
    out.exit_code = static_cast<int>(ErrorCode::kNotConverged);
    out.message = "fit did not converge after " + std::to_string(r.iterations) +
                  " iterations (|g|_inf = " + num(r.g_norm) + "); results written anyway";
  }
  return out;
}

// -------------------------------------------------------------- diagnose

std::vector<std::size_t> default_n_grid(std::size_t n) {
  std::vector<std::size_t> grid;
  for (std::size_t d : {8, 4, 2, 1}) {
    const std::size_t k = n / d;
    if (k >= 1 && (grid.empty() || k > grid.back())) grid.push_back(k);
  }
  return grid;
}

CommandResult cmd_diagnose(Run& run) {
  const DiagnoseConfig c = parse_diagnose_config(run.config, run.base);
  const auto data = std::make_shared<const LongitudinalDataset>(load_dataset_csv(c.data.string()));
  const Link link(c.link);

  Vec center;
  std::string center_source = "config";
  if (c.beta) {
    center = *c.beta;
  } else {
    const FitResult r = fit(data, link, c.model, c.solver);
    if (!r.converged)
      throw ConvergenceError("diagnostics need a converged fit or an explicit beta; the fit stopped at |g|_inf = " +
                             num(r.g_norm));
    center = r.beta;
    center_source = "fit";
  }
  const EstimatingContext ctx = make_context(data, link, c.model, c.solver);

  Csv grid({"config_hash", "r", "delta", "points", "lambda_min_h", "lambda_max_h", "gamma", "a_n", "k2", "k3", "eta",
            "pi", "rho", "q", "delta_n", "tau_star", "c_star", "c1", "c1_prime", "c2", "c3", "c4", "c5"});
  Json constants = Json::array();
  for (double r : c.r) {
    const RegularityConstants k = regularity_constants(ctx, center, r, c.delta, c.sampling);
    grid.row({run.hash, num(k.r), num(k.delta), num(k.points), num(k.lambda_min_h), num(k.lambda_max_h),
              num(k.gamma), num(k.a_n), num(k.k2), num(k.k3), num(k.eta), num(k.pi), num(k.rho), num(k.q),
              num(k.delta_n), num(k.tau_star), num(k.c_star), num(k.c1), num(k.c1_prime), num(k.c2), num(k.c3),
              num(k.c4), num(k.c5)});
    constants.push_back(Json{{"r", k.r},         {"points", k.points},   {"lambda_min_h", k.lambda_min_h},
                             {"lambda_max_h", k.lambda_max_h}, {"gamma", k.gamma}, {"a_n", k.a_n},
                             {"k2", k.k2},       {"k3", k.k3},           {"eta", k.eta},
                             {"pi", k.pi},       {"rho", k.rho},         {"q", k.q},
                             {"delta_n", k.delta_n}, {"tau_star", k.tau_star}, {"c_star", k.c_star},
                             {"c1", k.c1},       {"c1_prime", k.c1_prime}, {"c2", k.c2},
                             {"c3", k.c3},       {"c4", k.c4},           {"c5", k.c5}});
  }
  run.write("diagnostics_grid.csv", grid.str());

  const EtaSlope slope = eta_slope(ctx, center, c.r, c.sampling);
  const std::vector<std::size_t> n_grid = c.n_grid.empty() ? default_n_grid(data->n()) : c.n_grid;
  const HypothesisReport hyp = hypothesis_check(*data, n_grid, center, link, c.delta, c.c0, c.bound_c);
  Csv hcsv({"config_hash", "n", "lambda_min", "lambda_max", "ratio", "rank_deficient", "sum_lambda_min",
            "sum_lambda_max", "weighted_lower", "weighted_scale", "condition_ii"});
  Json hrows = Json::array();
  for (const HypothesisRow& h : hyp.rows) {
    hcsv.row({run.hash, num(h.n), num(h.lambda_min), num(h.lambda_max), num(h.ratio), flag(h.rank_deficient),
              num(h.sum_lambda_min), num(h.sum_lambda_max), num(h.weighted_lower), num(h.weighted_scale),
              flag(h.condition_ii)});
    hrows.push_back(Json{{"n", h.n},
                         {"lambda_min", h.lambda_min},
                         {"lambda_max", h.lambda_max},
                         {"ratio", h.ratio},
                         {"rank_deficient", h.rank_deficient},
                         {"weighted_lower", h.weighted_lower},
                         {"condition_ii", h.condition_ii}});
  }
  run.write("hypothesis_grid.csv", hcsv.str());

  Json doc = run.header("diagnose");
  doc["data"] = data_json(c.data, *data);
  doc["link"] = link_name(c.link);
  doc["model"] = Json{{"method", method_name(c.model.method)}, {"correlation", correlation_kind_name(ctx.model().kind())}};
  doc["delta"] = c.delta;
  doc["r"] = c.r;
  doc["sampling"] = Json{{"random_points", c.sampling.random_points}, {"seed", c.sampling.seed}};
  doc["beta_center"] = to_json(center);
  doc["beta_center_source"] = center_source;
  doc["constants"] = constants;
  doc["eta_slope"] = Json{{"a_n", slope.a_n}, {"slope", slope.slope}};
  doc["hypothesis"] = Json{{"c0", hyp.c0},
                           {"bound_c", hyp.bound_c},
                           {"lambda_min_increasing", hyp.lambda_min_increasing},
                           {"rows", hrows}};
  run.write_json("diagnostics.json", doc);

  CommandResult out;
  out.summary = Json{{"result", Json{{"beta_center", to_json(center)}, {"constants", constants}}}};
  return out;
}

// -------------------------------------------------------------- simulate

CommandResult cmd_simulate(Run& run) {
  const SimulateConfig c = parse_simulate_config(run.config, run.base);
  const Generator gen(c.generator);
  const LongitudinalDataset d = gen.dataset(c.replication);
  std::ostringstream os;
  write_dataset_csv(d, os);
  run.write("dataset.csv", os.str());

  Json doc = run.header("simulate");
  doc["seed"] = c.generator.seed;
  doc["replication"] = c.replication;
  doc["generator"] = generator_json(c.generator, gen.rbar());
  doc["rows"] = d.n() * d.m();
  doc["files"] = Json{{"dataset", "dataset.csv"}};
  run.write_json("manifest.json", doc);

  CommandResult out;
  out.summary = Json{{"result", Json{{"rows", d.n() * d.m()}}}};
  return out;
}

// --------------------------------------------------------------- compare

const std::vector<std::string> kLongHeader{"config_hash", "experiment", "method", "n", "statistic", "coord", "value", "se"};

void efficiency(Run& run, const CompareConfig& c, Json& results) {
  const EfficiencyReport rep = efficiency_comparison(c.generator, c.methods, c.reps, run.workers, c.solver);
  const auto p = static_cast<Eigen::Index>(c.generator.p);
  std::vector<std::string> header{"config_hash", "experiment", "method", "n", "reps", "used_reps", "converged",
                                  "convergence_rate", "median_error"};
  for (const char* stat : {"bias", "variance", "variance_se", "coverage"})
    for (Eigen::Index j = 0; j < p; ++j) header.push_back(std::string(stat) + "_" + std::to_string(j + 1));
  Csv summary(header);
  Csv plot(kLongHeader);
  const std::string n = num(rep.n), exp = "efficiency";
  Json methods = Json::array();
  for (const MethodSummary& m : rep.methods) {
    std::vector<std::string> row{run.hash, exp, m.label, n, num(rep.reps), num(rep.used_reps), num(m.converged),
                                 num(m.convergence_rate), num(m.median_error)};
    for (const Vec* v : {&m.mean_bias, &m.variance, &m.variance_se, &m.coverage})
      for (Eigen::Index j = 0; j < p; ++j) row.push_back(num((*v)(j)));
    summary.row(row);
    for (Eigen::Index j = 0; j < p; ++j) {
      const std::string coord = std::to_string(j + 1);
      plot.row({run.hash, exp, m.label, n, "bias", coord, num(m.mean_bias(j)), ""});
      plot.row({run.hash, exp, m.label, n, "variance", coord, num(m.variance(j)), num(m.variance_se(j))});
      plot.row({run.hash, exp, m.label, n, "coverage", coord, num(m.coverage(j)), ""});
    }
    plot.row({run.hash, exp, m.label, n, "median_error", "", num(m.median_error), ""});
    methods.push_back(Json{{"label", m.label},
                           {"convergence_rate", m.convergence_rate},
                           {"variance", to_json(m.variance)},
                           {"coverage", to_json(m.coverage)}});
  }
  run.write("summary.csv", summary.str());
  run.write("plot.csv", plot.str());

  Csv cmp({"config_hash", "a", "b", "coord", "var_a", "var_b", "diff", "diff_se", "ratio", "ratio_se"});
  for (const VarianceComparison& v : rep.comparisons)
    cmp.row({run.hash, v.a, v.b, std::to_string(v.coord + 1), num(v.var_a), num(v.var_b), num(v.diff),
             num(v.diff_se), num(v.ratio), num(v.ratio_se)});
  run.write("comparisons.csv", cmp.str());
  results = Json{{"n", rep.n}, {"used_reps", rep.used_reps}, {"methods", methods}};
}

void consistency(Run& run, const CompareConfig& c, Json& results) {
  Csv summary({"config_hash", "experiment", "method", "n", "reps", "converged", "failed", "median_error",
               "p90_error", "lambda_max_m", "slln_median"});
  Csv plot(kLongHeader);
  const std::string exp = "consistency";
  results = Json::array();
  for (const NamedMethod& m : c.methods) {
    const ConsistencyReport rep =
        consistency_trace(c.generator, c.n_grid, m, c.reps, run.workers, c.delta, c.closed_form, c.solver);
    Json rows = Json::array();
    for (const ConsistencyRow& r : rep.rows) {
      const std::string n = num(r.n);
      summary.row({run.hash, exp, m.label, n, num(rep.reps), num(r.converged), num(r.failed), num(r.median_error),
                   num(r.p90_error), num(r.lambda_max_m), num(r.slln_median)});
      plot.row({run.hash, exp, m.label, n, "median_error", "", num(r.median_error), ""});
      plot.row({run.hash, exp, m.label, n, "p90_error", "", num(r.p90_error), ""});
      plot.row({run.hash, exp, m.label, n, "slln_median", "", num(r.slln_median), ""});
      rows.push_back(Json{{"n", r.n}, {"median_error", r.median_error}, {"failed", r.failed}});
    }
    results.push_back(Json{{"label", m.label}, {"rows", rows}});
  }
  run.write("summary.csv", summary.str());
  run.write("plot.csv", plot.str());
}

void identity(Run& run, const CompareConfig& c, Json& results) {
  const IdentityReport rep = quasi_score_identity_check(c.generator, c.methods, c.reps, run.workers, c.threshold);
  Csv summary({"config_hash", "experiment", "method", "check", "row", "col", "lhs", "rhs", "se", "pass"});
  Csv plot(kLongHeader);
  const std::string exp = "identity", n = num(c.generator.n);
  for (const IdentityEntry& e : rep.entries) {
    const std::string row = std::to_string(e.row + 1), col = std::to_string(e.col + 1);
    summary.row({run.hash, exp, e.family, e.check, row, col, num(e.lhs), num(e.rhs), num(e.se), flag(e.pass)});
    plot.row({run.hash, exp, e.family, n, e.check + "_lhs_minus_rhs", row + ":" + col, num(e.lhs - e.rhs), num(e.se)});
  }
  run.write("summary.csv", summary.str());
  run.write("plot.csv", plot.str());
  results = Json{{"all_pass", rep.all_pass}, {"se_defined", rep.se_defined}, {"mbar", to_json(rep.mbar)}};
}

CommandResult cmd_compare(Run& run) {
  const CompareConfig c = parse_compare_config(run.config, run.base);
  const Generator gen(c.generator);
  Json results;
  switch (c.experiment) {
    case Experiment::kEfficiency: efficiency(run, c, results); break;
    case Experiment::kConsistency: consistency(run, c, results); break;
    case Experiment::kIdentity: identity(run, c, results); break;
  }
  Json doc = run.header("compare");
  doc["experiment"] = experiment_name(c.experiment);
  doc["seed"] = c.generator.seed;
  doc["reps"] = c.reps;
  doc["generator"] = generator_json(c.generator, gen.rbar());
  Json labels = Json::array();
  for (const NamedMethod& m : c.methods) labels.push_back(m.label);
  doc["methods"] = labels;
  doc["solver"] = solver_json(c.solver);
  doc["files"] = run.outputs;
  doc["results"] = results;
  run.write_json("manifest.json", doc);

  CommandResult out;
  out.summary = Json{{"result", results}};
  return out;
}

}  // namespace

CommandResult run_command(std::string_view command, const CommandOptions& options) {
  CommandResult result;
  Run run;
  try {
    using Handler = CommandResult (*)(Run&);
    Handler handler = nullptr;
    if (command == "fit") handler = cmd_fit;
    else if (command == "diagnose") handler = cmd_diagnose;
    else if (command == "simulate") handler = cmd_simulate;
    else if (command == "compare") handler = cmd_compare;
    else throw InvalidArgument("unknown command '" + std::string(command) + "' (expected fit, diagnose, simulate or compare)");

    if (options.config.empty()) throw ConfigError("config: no config file given");
    run.config = read_config_file(options.config);
    run.hash = config_hash(run.config);
    run.base = options.config.parent_path();
    run.out = options.out.empty() ? fs::path(".") : options.out;
    run.workers = resolve_workers(options.workers);
    std::error_code ec;
    fs::create_directories(run.out, ec);
    if (ec) throw IoError("cannot create output directory " + run.out.string() + ": " + ec.message());

    result = handler(run);
  } catch (const Error& e) {
    result.exit_code = static_cast<int>(e.code());
    result.message = e.what();
  } catch (const std::exception& e) {
    result.exit_code = 1;
    result.message = std::string("internal error: ") + e.what();
  }
  Json summary{{"command", command},
               {"status", result.exit_code == 0 ? "ok" : "error"},
               {"exit_code", result.exit_code},
               {"config_hash", run.hash.empty() ? Json(nullptr) : Json(run.hash)},
               {"outputs", run.outputs}};
  if (!result.message.empty()) summary["message"] = result.message;
  if (result.summary.is_object() && result.summary.contains("result")) summary["result"] = result.summary["result"];
  result.summary = std::move(summary);
  return result;
}

}  // namespace aqsgee

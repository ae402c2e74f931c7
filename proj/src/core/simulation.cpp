#include "simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "error.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "stats.hpp"

namespace aqsgee {

namespace {

MethodSpec indep_spec() {
  MethodSpec s;
  s.method = Method::kIndep;
  return s;
}

constexpr std::uint64_t kDesignStream = 0;
constexpr std::uint64_t kResponseStream = 1;
constexpr double kMaxFailureRate = 0.05;

std::shared_ptr<const LongitudinalDataset> share(LongitudinalDataset d) {
  return std::make_shared<const LongitudinalDataset>(std::move(d));
}

}  // namespace

Mat CorrelationSpec::matrix(std::size_t m) const {
  if (structure == Structure::kCustom) {
    validate_correlation_matrix(custom, m);
    return custom;
  }
  return structured_correlation(structure, alpha, m);
}

void GeneratorConfig::validate() const {
  if (n == 0 || m == 0 || p == 0) throw InvalidArgument("generator needs n, m, p >= 1");
  if (static_cast<std::size_t>(beta0.size()) != p) throw InvalidArgument("beta0 must have length p");
  if (!beta0.allFinite()) throw InvalidArgument("beta0 must be finite");
  if (!(inflation >= 0.0 && inflation < 1.0)) throw InvalidArgument("inflation must lie in [0, 1)");
  if (!design.empty()) {
    if (design.size() < n) throw InvalidArgument("fixed design has fewer than n individuals");
    for (const auto& x : design)
      if (static_cast<std::size_t>(x.rows()) != m || static_cast<std::size_t>(x.cols()) != p)
        throw InvalidArgument("fixed design individual has the wrong shape");
  }
  rbar.matrix(m);
}

Generator::Generator(GeneratorConfig config) : cfg_(std::move(config)) {
  cfg_.validate();
  rbar_ = cfg_.rbar.matrix(cfg_.m);
  rbar_sqrt_ = symmetric_sqrt(rbar_);
  rbar_inv_ = symmetric_inverse(rbar_).inverse;
  const auto m = static_cast<Eigen::Index>(cfg_.m);
  const auto p = static_cast<Eigen::Index>(cfg_.p);
  if (!cfg_.design.empty()) {
    design_.assign(cfg_.design.begin(), cfg_.design.begin() + static_cast<std::ptrdiff_t>(cfg_.n));
  } else {
    std::mt19937_64 rng(derive_seed(cfg_.seed, kDesignStream, 0));
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    design_.reserve(cfg_.n);
    for (std::size_t i = 0; i < cfg_.n; ++i) {
      Mat x(m, p);
      for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index k = 0; k < p; ++k) x(j, k) = (cfg_.intercept && k == 0) ? 1.0 : unif(rng);
      design_.push_back(std::move(x));
    }
  }
  // Mean and variance must be representable at beta0.
  const Link link(cfg_.link);
  for (const auto& x : design_) {
    const Vec eta = x * cfg_.beta0;
    for (Eigen::Index j = 0; j < eta.size(); ++j) link.d1(eta(j));
  }
}

LongitudinalDataset Generator::dataset(std::uint64_t rep) const {
  std::mt19937_64 rng(derive_seed(cfg_.seed, kResponseStream, rep));
  std::normal_distribution<double> normal;
  const auto m = static_cast<Eigen::Index>(cfg_.m);
  const Link link(cfg_.link);
  std::vector<Vec> ys;
  ys.reserve(cfg_.n);
  Vec z(m), prev_z = Vec::Zero(m);
  for (std::size_t i = 0; i < cfg_.n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) z(j) = normal(rng);
    double scale = 1.0;
    if (cfg_.inflation > 0.0 && i > 0)
      scale = std::sqrt((1.0 - cfg_.inflation) + cfg_.inflation * prev_z.squaredNorm() / static_cast<double>(m));
    const Vec u = rbar_sqrt_ * z;
    const Vec eta = design_[i] * cfg_.beta0;
    Vec y(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      const Link::Values v = link.values(eta(j));
      y(j) = v.mu + std::sqrt(v.d1) * scale * u(j);
    }
    ys.push_back(std::move(y));
    prev_z = z;
  }
  return LongitudinalDataset(design_, std::move(ys));
}

LongitudinalDataset generate_dataset(const GeneratorConfig& config) { return Generator(config).dataset(0); }

std::string default_label(const MethodSpec& spec) {
  if (spec.method == Method::kGee) {
    if (spec.structure == Structure::kCustom) return "gee(custom)";
    return "gee(" + std::string(structure_name(spec.structure)) + "," + format_double(spec.alpha) + ")";
  }
  return std::string(method_name(spec.method));
}

EstimatingContext context_at_truth(const Generator& gen, std::shared_ptr<const LongitudinalDataset> data,
                                   const MethodSpec& spec) {
  const Link link(gen.config().link);
  if (spec.method == Method::kOracle)
    return EstimatingContext(data, link, CorrelationModel::fixed(gen.rbar()));
  if (spec.method == Method::kPle)
    return EstimatingContext(data, link, CorrelationModel::ple(data, gen.config().beta0, link, spec.reg));
  return make_context(data, link, spec);
}

// ------------------------------------------------------------ identity check

IdentityReport quasi_score_identity_check(const GeneratorConfig& config, const std::vector<NamedMethod>& families,
                                          std::size_t reps, unsigned workers, double threshold) {
  if (reps == 0) throw InvalidArgument("reps must be positive");
  if (families.empty()) throw InvalidArgument("at least one estimating-function family is required");
  const Generator gen(config);
  const Vec& beta0 = config.beta0;
  const auto p = static_cast<Eigen::Index>(config.p);
  const std::size_t nf = families.size();

  // Per replication: q gbar' and D_q for each family, then gbar gbar' and D_gbar.
  struct RepOut {
    std::vector<Mat> outer;
    std::vector<Mat> jac;
    Mat gg;
    Mat gjac;
  };
  std::vector<RepOut> out(reps);
  MethodSpec oracle;
  oracle.method = Method::kOracle;
  parallel_for(reps, workers, [&](std::size_t r) {
    const auto data = share(gen.dataset(r));
    const auto gbar_ctx = context_at_truth(gen, data, oracle);
    const auto gbar_ev = gbar_ctx.evaluate(beta0, true);
    RepOut& o = out[r];
    o.gg = gbar_ev.g * gbar_ev.g.transpose();
    o.gjac = gbar_ev.d;
    for (const auto& f : families) {
      const auto ctx = context_at_truth(gen, data, f.spec);
      const auto ev = ctx.evaluate(beta0, true);
      o.outer.push_back(ev.g * gbar_ev.g.transpose());
      o.jac.push_back(ev.d);
    }
  });

  IdentityReport rep;
  rep.reps = reps;
  rep.se_defined = reps >= 2;
  rep.threshold = threshold;
  rep.mbar = Mat::Zero(p, p);
  const Link link(config.link);
  for (const auto& x : gen.design()) {
    const Vec eta = x * beta0;
    Vec sd(eta.size());
    for (Eigen::Index j = 0; j < eta.size(); ++j) sd(j) = std::sqrt(link.d1(eta(j)));
    const Mat sx = sd.asDiagonal() * x;
    rep.mbar += sx.transpose() * gen.rbar_inverse() * sx;
  }

  auto add = [&](const std::string& fam, const std::string& check, Eigen::Index a, Eigen::Index b,
                 const std::function<double(const RepOut&)>& lhs_of, const std::function<double(const RepOut&)>& rhs_of) {
    std::vector<double> lhs(reps), diff(reps), rhs(reps);
    for (std::size_t r = 0; r < reps; ++r) {
      lhs[r] = lhs_of(out[r]);
      rhs[r] = rhs_of(out[r]);
      diff[r] = lhs[r] - rhs[r];
    }
    IdentityEntry e;
    e.family = fam;
    e.check = check;
    e.row = static_cast<int>(a);
    e.col = static_cast<int>(b);
    e.lhs = mean_se(lhs).mean;
    e.rhs = mean_se(rhs).mean;
    const MeanSe d = mean_se(diff);
    e.se = d.se;
    e.pass = rep.se_defined && std::abs(d.mean) <= threshold * d.se + 1e-10 * (1.0 + std::abs(e.rhs));
    rep.entries.push_back(e);
  };

  for (std::size_t f = 0; f < nf; ++f)
    for (Eigen::Index a = 0; a < p; ++a)
      for (Eigen::Index b = 0; b < p; ++b)
        add(families[f].label, "score_covariance", a, b, [&](const RepOut& o) { return o.outer[f](a, b); },
            [&](const RepOut& o) { return o.jac[f](a, b); });
  for (Eigen::Index a = 0; a < p; ++a)
    for (Eigen::Index b = 0; b < p; ++b) {
      const double exact = rep.mbar(a, b);
      add("oracle", "cov_gbar", a, b, [&](const RepOut& o) { return o.gg(a, b); },
          [&](const RepOut&) { return exact; });
      add("oracle", "info_gbar", a, b, [&](const RepOut& o) { return o.gjac(a, b); },
          [&](const RepOut&) { return exact; });
    }
  rep.all_pass = std::all_of(rep.entries.begin(), rep.entries.end(), [](const IdentityEntry& e) { return e.pass; });
  return rep;
}

// --------------------------------------------------------- consistency trace

ConsistencyReport consistency_trace(const GeneratorConfig& config, const std::vector<std::size_t>& n_grid,
                                    const NamedMethod& method, std::size_t reps, unsigned workers, double delta,
                                    bool closed_form, const SolverOptions& opt) {
  if (n_grid.empty()) throw InvalidArgument("n_grid must not be empty");
  for (std::size_t k = 0; k < n_grid.size(); ++k) {
    if (n_grid[k] == 0) throw InvalidArgument("n_grid entries must be positive");
    if (k > 0 && n_grid[k] <= n_grid[k - 1]) throw InvalidArgument("n_grid must be strictly increasing");
  }
  if (reps == 0) throw InvalidArgument("reps must be positive");
  const bool use_closed = closed_form && config.link == LinkKind::kLinear && method.spec.method != Method::kAqs;
  if (closed_form && !use_closed) throw Unsupported("closed form needs the linear link and a beta-free method");

  GeneratorConfig big = config;
  big.n = n_grid.back();
  const Generator gen(big);
  const Link link(config.link);
  const std::size_t ng = n_grid.size();

  struct Cell {
    bool converged = false;
    double error = 0.0;
    Vec g;
  };
  std::vector<std::vector<Cell>> cells(reps, std::vector<Cell>(ng));
  parallel_for(reps, workers, [&](std::size_t r) {
    const LongitudinalDataset full = gen.dataset(r);
    for (std::size_t k = 0; k < ng; ++k) {
      const auto data = share(full.prefix(n_grid[k]));
      Cell& c = cells[r][k];
      try {
        FitResult f;
        if (use_closed) {
          MethodSpec spec = method.spec;
          if (spec.method == Method::kOracle) {
            f = closed_form_linear(context_at_truth(gen, data, spec), opt);
          } else {
            f = closed_form_linear(make_context(data, link, spec, opt), opt);
          }
        } else if (method.spec.method == Method::kOracle) {
          f = newton_solve(context_at_truth(gen, data, method.spec), config.beta0, opt);
        } else {
          f = fit(data, link, method.spec, opt);
        }
        c.converged = f.converged;
        c.error = (f.beta - config.beta0).norm();
      } catch (const Error&) {
        c.converged = false;
      }
      c.g = context_at_truth(gen, data, method.spec).estimating_function(config.beta0);
    }
  });

  ConsistencyReport rep;
  rep.method = method.label;
  rep.delta = delta;
  rep.reps = reps;
  for (std::size_t k = 0; k < ng; ++k) {
    ConsistencyRow row;
    row.n = n_grid[k];
    std::vector<double> errors;
    Mat mhat = Mat::Zero(static_cast<Eigen::Index>(config.p), static_cast<Eigen::Index>(config.p));
    for (std::size_t r = 0; r < reps; ++r) {
      const Cell& c = cells[r][k];
      if (c.converged) errors.push_back(c.error);
      mhat += c.g * c.g.transpose();
    }
    mhat /= static_cast<double>(reps);
    row.converged = errors.size();
    row.failed = reps - errors.size();
    if (static_cast<double>(row.failed) > kMaxFailureRate * static_cast<double>(reps))
      throw ConvergenceError(std::to_string(row.failed) + " of " + std::to_string(reps) + " fits failed at n = " +
                             std::to_string(row.n) + " (limit 5%)");
    row.median_error = median(errors);
    row.p90_error = quantile(errors, 0.9);
    row.lambda_max_m = lambda_max(mhat);
    std::vector<double> stats;
    for (std::size_t r = 0; r < reps; ++r)
      stats.push_back(cells[r][k].g.norm() / std::pow(row.lambda_max_m, 0.5 + delta));
    row.slln_median = median(stats);
    rep.rows.push_back(row);
  }
  return rep;
}

// ------------------------------------------------------ efficiency comparison

const VarianceComparison* EfficiencyReport::find(const std::string& a, const std::string& b, int coord) const {
  for (const auto& c : comparisons)
    if (c.a == a && c.b == b && c.coord == coord) return &c;
  return nullptr;
}

EfficiencyReport efficiency_comparison(const GeneratorConfig& config, const std::vector<NamedMethod>& methods,
                                       std::size_t reps, unsigned workers, const SolverOptions& opt) {
  if (methods.empty()) throw InvalidArgument("at least one method is required");
  if (reps < 2) throw InvalidArgument("efficiency comparison needs at least two replications");
  for (std::size_t a = 0; a < methods.size(); ++a)
    for (std::size_t b = a + 1; b < methods.size(); ++b)
      if (methods[a].label == methods[b].label) throw InvalidArgument("duplicate method label '" + methods[a].label + "'");
  const Generator gen(config);
  const Link link(config.link);
  const std::size_t nm = methods.size();
  const auto p = static_cast<Eigen::Index>(config.p);

  struct Cell {
    bool converged = false;
    Vec beta;
    std::vector<char> covered;
  };
  std::vector<std::vector<Cell>> cells(reps, std::vector<Cell>(nm));
  parallel_for(reps, workers, [&](std::size_t r) {
    const auto data = share(gen.dataset(r));
    for (std::size_t k = 0; k < nm; ++k) {
      const MethodSpec& spec = methods[k].spec;
      Cell& c = cells[r][k];
      try {
        FitResult f;
        const bool beta_free = spec.method != Method::kAqs;
        if (spec.method == Method::kOracle) {
          const auto ctx = context_at_truth(gen, data, spec);
          f = link.kind() == LinkKind::kLinear ? closed_form_linear(ctx, opt)
                                               : newton_solve(ctx, fit(data, link, indep_spec(), opt).beta, opt);
        } else if (beta_free && link.kind() == LinkKind::kLinear) {
          f = closed_form_linear(make_context(data, link, spec, opt), opt);
        } else {
          f = fit(data, link, spec, opt);
        }
        c.converged = f.converged && f.cov.has_value();
        c.beta = f.beta;
        if (c.converged)
          for (Eigen::Index j = 0; j < p; ++j)
            c.covered.push_back(f.cov->ci(j, 0) <= config.beta0(j) && config.beta0(j) <= f.cov->ci(j, 1) ? 1 : 0);
      } catch (const Error&) {
        c.converged = false;
      }
    }
  });

  EfficiencyReport rep;
  rep.n = config.n;
  rep.reps = reps;
  std::vector<std::size_t> used;
  for (std::size_t r = 0; r < reps; ++r) {
    bool all = true;
    for (std::size_t k = 0; k < nm; ++k) all = all && cells[r][k].converged;
    if (all) used.push_back(r);
  }
  rep.used_reps = used.size();
  const std::size_t failed = reps - used.size();
  if (static_cast<double>(failed) > kMaxFailureRate * static_cast<double>(reps))
    throw ConvergenceError(std::to_string(failed) + " of " + std::to_string(reps) +
                           " replications had a failed fit (limit 5%)");
  const auto nu = static_cast<double>(used.size());
  if (used.size() < 2) throw ConvergenceError("fewer than two usable replications");

  // Squared deviations per method/coord/replication drive all variance SEs.
  std::vector<std::vector<Vec>> sq(nm);
  for (std::size_t k = 0; k < nm; ++k) {
    MethodSummary s;
    s.label = methods[k].label;
    std::size_t conv = 0;
    for (std::size_t r = 0; r < reps; ++r) conv += cells[r][k].converged ? 1 : 0;
    s.converged = conv;
    s.convergence_rate = static_cast<double>(conv) / static_cast<double>(reps);
    Vec mean = Vec::Zero(p);
    for (std::size_t r : used) mean += cells[r][k].beta;
    mean /= nu;
    s.mean_bias = mean - config.beta0;
    s.covariance = Mat::Zero(p, p);
    s.coverage = Vec::Zero(p);
    std::vector<double> errs;
    for (std::size_t r : used) {
      const Vec dev = cells[r][k].beta - mean;
      s.covariance += dev * dev.transpose();
      sq[k].push_back(dev.cwiseProduct(dev) * (nu / (nu - 1.0)));
      for (Eigen::Index j = 0; j < p; ++j) s.coverage(j) += cells[r][k].covered[static_cast<std::size_t>(j)];
      errs.push_back((cells[r][k].beta - config.beta0).norm());
    }
    s.covariance /= nu - 1.0;
    s.variance = s.covariance.diagonal();
    s.coverage /= nu;
    s.median_error = median(errs);
    s.variance_se.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      std::vector<double> d;
      for (const Vec& v : sq[k]) d.push_back(v(j));
      s.variance_se(j) = mean_se(d).se;
    }
    rep.methods.push_back(std::move(s));
  }
  for (std::size_t a = 0; a < nm; ++a)
    for (std::size_t b = 0; b < nm; ++b) {
      if (a == b) continue;
      for (Eigen::Index j = 0; j < p; ++j) {
        VarianceComparison c;
        c.a = methods[a].label;
        c.b = methods[b].label;
        c.coord = static_cast<int>(j);
        c.var_a = rep.methods[a].variance(j);
        c.var_b = rep.methods[b].variance(j);
        c.ratio = c.var_a / c.var_b;
        std::vector<double> diff, infl;
        for (std::size_t u = 0; u < used.size(); ++u) {
          const double da = sq[a][u](j);
          const double db = sq[b][u](j);
          diff.push_back(da - db);
          infl.push_back((da - c.var_a) / c.var_b - c.ratio * (db - c.var_b) / c.var_b);
        }
        c.diff = c.var_a - c.var_b;
        c.diff_se = mean_se(diff).se;
        c.ratio_se = mean_se(infl).se;
        rep.comparisons.push_back(c);
      }
    }
  return rep;
}

// ------------------------------------------------------------- trace check

TraceCheck residual_trace_check(const GeneratorConfig& config, std::size_t reps, unsigned workers, double threshold) {
  if (reps == 0) throw InvalidArgument("reps must be positive");
  const Generator gen(config);
  const Link link(config.link);
  std::vector<std::vector<double>> per(reps);
  parallel_for(reps, workers, [&](std::size_t r) {
    const LongitudinalDataset d = gen.dataset(r);
    per[r].reserve(d.n());
    for (std::size_t i = 0; i < d.n(); ++i)
      per[r].push_back(standardized_residual(d, i, config.beta0, link).squaredNorm());
  });
  std::vector<double> all;
  for (const auto& v : per) all.insert(all.end(), v.begin(), v.end());
  const MeanSe ms = mean_se(all);
  TraceCheck t;
  t.mean = ms.mean;
  t.se = ms.se;
  t.expected = static_cast<double>(config.m);
  t.pass = std::isfinite(ms.se) && std::abs(ms.mean - t.expected) <= threshold * ms.se;
  return t;
}

}  // namespace aqsgee

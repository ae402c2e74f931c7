#include "estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "error.hpp"
#include "linalg.hpp"
#include "model.hpp"

namespace aqsgee {

Method parse_method(std::string_view name) {
  if (name == "indep" || name == "independence") return Method::kIndep;
  if (name == "gee") return Method::kGee;
  if (name == "ple") return Method::kPle;
  if (name == "aqs") return Method::kAqs;
  if (name == "oracle") return Method::kOracle;
  throw InvalidArgument("unknown method '" + std::string(name) + "' (expected indep, gee, ple, aqs or oracle)");
}

std::string_view method_name(Method m) {
  switch (m) {
    case Method::kIndep: return "indep";
    case Method::kGee: return "gee";
    case Method::kPle: return "ple";
    case Method::kAqs: return "aqs";
    case Method::kOracle: return "oracle";
  }
  return "indep";
}

EstimatingContext::EstimatingContext(std::shared_ptr<const LongitudinalDataset> data, Link link,
                                     CorrelationModel model)
    : data_(std::move(data)), link_(link), model_(std::move(model)) {
  if (!data_) throw InvalidArgument("estimating context needs a dataset");
  if (data_->m() != model_.m()) throw InvalidArgument("correlation dimension does not match m");
}

EstimatingContext::Evaluation EstimatingContext::evaluate(const Vec& beta, bool jacobian) const {
  const auto p = static_cast<Eigen::Index>(data_->p());
  Evaluation ev;
  ev.g = Vec::Zero(p);
  ev.h = Mat::Zero(p, p);
  ev.m = Mat::Zero(p, p);
  if (jacobian) ev.d = Mat::Zero(p, p);
  ev.min_rinv_eigen = std::numeric_limits<double>::infinity();
  ev.max_rinv_eigen = 0.0;

  Mat sx, rsx, ht;
  Vec w, gt;
  ev.ridge_events = model_.sweep(*data_, beta, link_, jacobian, [&](const IndividualState& s, const PrefixCorrelation& pc) {
    const Mat& x = data_->X(pc.t);
    sx.noalias() = s.sd.asDiagonal() * x;
    w.noalias() = pc.rinv * s.ehat;
    gt.noalias() = sx.transpose() * w;
    rsx.noalias() = pc.rinv * sx;
    ht.noalias() = sx.transpose() * rsx;
    ev.g += gt;
    ev.h += ht;
    ev.m.noalias() += gt * gt.transpose();
    ev.min_rinv_eigen = std::min(ev.min_rinv_eigen, 1.0 / pc.lambda_max);
    ev.max_rinv_eigen = std::max(ev.max_rinv_eigen, 1.0 / pc.lambda_min);
    if (jacobian) {
      ev.d += ht;
      if (link_.kind() != LinkKind::kLinear) {
        ev.d.noalias() -= x.transpose() * w.cwiseProduct(s.g1).asDiagonal() * x;
        ev.d.noalias() -= rsx.transpose() * s.resid.cwiseProduct(s.g2).asDiagonal() * x;
      }
      if (!pc.dr.empty() && model_.beta_dependent()) {
        for (Eigen::Index l = 0; l < p; ++l) ev.d.col(l).noalias() += rsx.transpose() * (pc.dr[static_cast<std::size_t>(l)] * w);
      }
    }
  });
  return ev;
}

Vec EstimatingContext::estimating_function(const Vec& beta) const { return evaluate(beta, false).g; }

Mat EstimatingContext::contributions(const Vec& beta) const {
  Mat out(static_cast<Eigen::Index>(data_->p()), static_cast<Eigen::Index>(data_->n()));
  model_.sweep(*data_, beta, link_, false, [&](const IndividualState& s, const PrefixCorrelation& pc) {
    out.col(static_cast<Eigen::Index>(pc.t)) = (s.sd.asDiagonal() * data_->X(pc.t)).transpose() * (pc.rinv * s.ehat);
  });
  return out;
}

EstimatingContext::JacobianDecomposition EstimatingContext::estimating_jacobian(const Vec& beta,
                                                                               const std::optional<Vec>& beta0) const {
  const auto p = static_cast<Eigen::Index>(data_->p());
  if (beta0) check_beta(*data_, *beta0);
  JacobianDecomposition jd;
  jd.split = beta0.has_value();
  for (Mat* a : {&jd.h, &jd.b1, &jd.b2, &jd.b3, &jd.e1, &jd.e2, &jd.e3}) *a = Mat::Zero(p, p);

  model_.sweep(*data_, beta, link_, true, [&](const IndividualState& s, const PrefixCorrelation& pc) {
    const Mat& x = data_->X(pc.t);
    const Mat sx = s.sd.asDiagonal() * x;
    const Mat rsx = pc.rinv * sx;
    jd.h += sx.transpose() * rsx;
    // Residual-weighted terms are linear in the residual r = y - mu(beta).
    auto add_terms = [&](const Vec& r, Mat& t1, Mat& t2, Mat& t3) {
      const Vec w = pc.rinv * r.cwiseQuotient(s.sd);
      t1 += x.transpose() * w.cwiseProduct(s.g1).asDiagonal() * x;
      t2 += rsx.transpose() * r.cwiseProduct(s.g2).asDiagonal() * x;
      if (model_.beta_dependent())
        for (Eigen::Index l = 0; l < p; ++l)
          t3.col(l) -= rsx.transpose() * (pc.dr[static_cast<std::size_t>(l)] * w);
    };
    if (beta0) {
      const Vec mu0 = marginal_mean(*data_, pc.t, *beta0, link_);
      add_terms(mu0 - s.mu, jd.b1, jd.b2, jd.b3);
      add_terms(data_->y(pc.t) - mu0, jd.e1, jd.e2, jd.e3);
    } else {
      add_terms(s.resid, jd.e1, jd.e2, jd.e3);
    }
  });
  jd.d = jd.h - jd.b() - jd.e();
  return jd;
}

Mat h_indep(const LongitudinalDataset& data, const Vec& beta, const Link& link) {
  check_beta(data, beta);
  const auto p = static_cast<Eigen::Index>(data.p());
  Mat h = Mat::Zero(p, p);
  for (std::size_t i = 0; i < data.n(); ++i) {
    const Vec eta = data.X(i) * beta;
    Vec a(eta.size());
    for (Eigen::Index j = 0; j < eta.size(); ++j) a(j) = link.d1(eta(j));
    h.noalias() += data.X(i).transpose() * a.asDiagonal() * data.X(i);
  }
  return h;
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("normal quantile needs 0 < p < 1");
  if (p > 0.5) return -normal_quantile(1.0 - p);
  // Abramowitz-Stegun 26.2.23 start (|error| < 4.5e-4), then Newton on the
  // lower tail, where erfc keeps full relative accuracy.
  const double t = std::sqrt(-2.0 * std::log(p));
  double z = -(t - (2.515517 + 0.802853 * t + 0.010328 * t * t) /
                       (1.0 + 1.432788 * t + 0.189269 * t * t + 0.001308 * t * t * t));
  for (int it = 0; it < 50; ++it) {
    const double cdf = 0.5 * std::erfc(-z / std::numbers::sqrt2);
    const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    const double step = (cdf - p) / pdf;
    z -= step;
    if (std::abs(step) < 1e-15 * (1.0 + std::abs(z))) break;
  }
  return z;
}

CovarianceEstimates covariance_estimates(const EstimatingContext& ctx, const Vec& beta, double ci_level,
                                         bool ci_sandwich) {
  if (!(ci_level > 0.0 && ci_level < 1.0)) throw InvalidArgument("ci_level must lie in (0, 1)");
  const auto ev = ctx.evaluate(beta, false);
  CovarianceEstimates c;
  c.h = symmetrize(ev.h);
  c.m = symmetrize(ev.m);
  const SymmetricInverse hinv = symmetric_inverse(c.h, 1e-12 * std::max(1.0, c.h.cwiseAbs().maxCoeff()));
  c.cov_model = hinv.inverse;
  c.cov_sandwich = symmetrize(hinv.inverse * c.m * hinv.inverse);
  c.se_model = c.cov_model.diagonal().cwiseMax(0.0).cwiseSqrt();
  c.se_sandwich = c.cov_sandwich.diagonal().cwiseMax(0.0).cwiseSqrt();
  c.ci_level = ci_level;
  c.ci_sandwich = ci_sandwich;
  const double z = normal_quantile(0.5 + 0.5 * ci_level);
  const Vec& se = ci_sandwich ? c.se_sandwich : c.se_model;
  c.ci.resize(beta.size(), 2);
  c.ci.col(0) = beta - z * se;
  c.ci.col(1) = beta + z * se;
  return c;
}

namespace {

struct Attempt {
  bool ok = false;
  Vec beta;
  EstimatingContext::Evaluation ev;
  int halvings = 0;
  double step_norm = 0.0;
};

bool try_evaluate(const EstimatingContext& ctx, const Vec& beta, EstimatingContext::Evaluation& out) {
  if (!beta.allFinite()) return false;
  try {
    out = ctx.evaluate(beta, false);
  } catch (const OverflowError&) {
    return false;
  } catch (const SingularityError&) {
    return false;
  }
  return out.g.allFinite();
}

Attempt backtrack(const EstimatingContext& ctx, const Vec& beta, const Vec& delta, double g2, int max_halvings) {
  Attempt a;
  double lambda = 1.0;
  for (int h = 0; h <= max_halvings; ++h, lambda *= 0.5) {
    const Vec cand = beta + lambda * delta;
    EstimatingContext::Evaluation ev;
    if (try_evaluate(ctx, cand, ev) && ev.g.norm() < g2) {
      a.ok = true;
      a.beta = cand;
      a.ev = std::move(ev);
      a.halvings = h;
      a.step_norm = (lambda * delta).norm();
      return a;
    }
  }
  return a;
}

bool solve_step(const Mat& a, const Vec& g, Vec& delta) {
  Eigen::FullPivLU<Mat> lu(a);
  if (!lu.isInvertible() || !(lu.rcond() > 1e-14)) return false;
  delta = lu.solve(g);
  return delta.allFinite();
}

FitResult newton_single(const EstimatingContext& ctx, const Vec& beta_init, const SolverOptions& opt) {
  FitResult r;
  r.method = std::string(correlation_kind_name(ctx.model().kind()));
  r.beta_init = beta_init;
  r.shrinkage = ctx.model().shrinkage();
  r.ridge = ctx.model().ridge();
  Vec beta = beta_init;
  const bool need_jac = !opt.scoring;
  auto ev = ctx.evaluate(beta, need_jac);
  r.ridge_events = ev.ridge_events;
  r.g_init_norm = ev.g.lpNorm<Eigen::Infinity>();
  const double threshold = opt.tol_g * (1.0 + r.g_init_norm);
  r.trace.push_back({0, r.g_init_norm, ev.g.norm(), 0.0, 0, false});

  bool prev_unconditional = false;
  for (int it = 1; it <= opt.max_iter; ++it) {
    if (ev.g.lpNorm<Eigen::Infinity>() <= threshold) {
      r.converged = true;
      break;
    }
    r.iterations = it;
    const double g2 = ev.g.norm();
    IterationRecord rec;
    rec.iteration = it;
    Vec delta;
    Attempt a;
    bool used_h = opt.scoring;
    if (!opt.scoring && solve_step(ev.d, ev.g, delta)) a = backtrack(ctx, beta, delta, g2, opt.max_halvings);
    if (!a.ok && !opt.scoring) {
      used_h = true;
      ++r.fallbacks;
      rec.fallback = true;
    }
    Vec delta_h;
    const bool h_ok = solve_step(ev.h, ev.g, delta_h);
    if (!a.ok && used_h && h_ok) a = backtrack(ctx, beta, delta_h, g2, opt.max_halvings);
    if (!a.ok) {
      // One unconditional scoring step, then give up if that does not help.
      if (prev_unconditional || !h_ok) break;
      EstimatingContext::Evaluation forced;
      if (!try_evaluate(ctx, beta + delta_h, forced)) break;
      a.ok = true;
      a.beta = beta + delta_h;
      a.ev = std::move(forced);
      a.halvings = -1;
      a.step_norm = delta_h.norm();
      prev_unconditional = true;
      rec.fallback = true;
    } else {
      prev_unconditional = false;
    }
    beta = a.beta;
    if (need_jac) {
      try {
        ev = ctx.evaluate(beta, true);
      } catch (const Error&) {
        break;
      }
    } else {
      ev = std::move(a.ev);
    }
    r.ridge_events = ev.ridge_events;
    rec.g_norm_inf = ev.g.lpNorm<Eigen::Infinity>();
    rec.g_norm_2 = ev.g.norm();
    rec.step_norm = a.step_norm;
    rec.halvings = a.halvings;
    r.trace.push_back(rec);
  }
  if (!r.converged && ev.g.lpNorm<Eigen::Infinity>() <= threshold) r.converged = true;
  r.beta = beta;
  r.g_norm = ev.g.lpNorm<Eigen::Infinity>();
  return r;
}

void require_full_rank(const EstimatingContext& ctx, const Vec& beta) {
  Mat h;
  try {
    h = h_indep(ctx.data(), beta, ctx.link());
  } catch (const OverflowError&) {
    h = h_indep(ctx.data(), Vec::Zero(beta.size()), ctx.link());
  }
  const Vec ev = eigenvalues(symmetrize(h));
  const double lmax = ev(ev.size() - 1);
  if (!(ev(0) > 1e-10 * std::max(lmax, 1e-300)))
    throw SingularityError("rank-deficient design: lambda_min(H_indep) = " + format_double(ev(0)), SingularityError::npos,
                           ev(0));
}

}  // namespace

FitResult newton_solve(const EstimatingContext& ctx, const Vec& beta_init, const SolverOptions& opt) {
  check_beta(ctx.data(), beta_init);
  if (opt.max_iter < 1 || opt.max_halvings < 0 || !(opt.tol_g > 0.0))
    throw InvalidArgument("invalid solver options");
  require_full_rank(ctx, beta_init);

  FitResult best = newton_single(ctx, beta_init, opt);
  best.roots_found = best.converged ? 1 : 0;
  if (opt.multistart > 0) {
    std::mt19937_64 rng(opt.multistart_seed);
    std::normal_distribution<double> normal;
    int roots = best.roots_found;
    int fallbacks = best.fallbacks;
    for (int k = 0; k < opt.multistart; ++k) {
      Vec start = beta_init;
      for (Eigen::Index j = 0; j < start.size(); ++j)
        start(j) += opt.multistart_scale * (1.0 + std::abs(beta_init(j))) * normal(rng);
      FitResult cand = newton_single(ctx, start, opt);
      fallbacks += cand.fallbacks;
      if (!cand.converged) continue;
      ++roots;
      if (!best.converged || (cand.beta - beta_init).norm() < (best.beta - beta_init).norm() - 1e-12) {
        cand.beta_init = beta_init;
        best = std::move(cand);
      }
    }
    best.roots_found = roots;
    best.fallbacks = fallbacks;
    best.starts = 1 + opt.multistart;
  }
  if (best.converged) {
    try {
      best.cov = covariance_estimates(ctx, best.beta, opt.ci_level, opt.ci_sandwich);
    } catch (const SingularityError&) {
      best.cov.reset();
    }
  }
  return best;
}

FitResult closed_form_linear(const EstimatingContext& ctx, const SolverOptions& opt) {
  if (ctx.link().kind() != LinkKind::kLinear) throw Unsupported("closed form exists only for the linear link");
  if (ctx.model().beta_dependent()) throw Unsupported("AQS has no closed-form root");
  const auto p = static_cast<Eigen::Index>(ctx.data().p());
  Mat lhs = Mat::Zero(p, p);
  Vec rhs = Vec::Zero(p);
  std::size_t ridge_events = ctx.model().sweep(ctx.data(), Vec::Zero(p), ctx.link(), false,
                                               [&](const IndividualState&, const PrefixCorrelation& pc) {
                                                 const Mat& x = ctx.data().X(pc.t);
                                                 const Mat rx = pc.rinv * x;
                                                 lhs.noalias() += x.transpose() * rx;
                                                 rhs.noalias() += rx.transpose() * ctx.data().y(pc.t);
                                               });
  const Vec ev = eigenvalues(symmetrize(lhs));
  if (!(ev(0) > 1e-10 * std::max(ev(ev.size() - 1), 1e-300)))
    throw SingularityError("rank-deficient design: weighted normal matrix is singular", SingularityError::npos, ev(0));
  FitResult r;
  r.method = std::string(correlation_kind_name(ctx.model().kind()));
  r.beta = lhs.ldlt().solve(rhs);
  r.beta_init = r.beta;
  r.converged = true;
  r.ridge_events = ridge_events;
  r.shrinkage = ctx.model().shrinkage();
  r.ridge = ctx.model().ridge();
  r.g_norm = ctx.estimating_function(r.beta).lpNorm<Eigen::Infinity>();
  r.roots_found = 1;
  r.cov = covariance_estimates(ctx, r.beta, opt.ci_level, opt.ci_sandwich);
  return r;
}

EstimatingContext make_context(std::shared_ptr<const LongitudinalDataset> data, const Link& link,
                               const MethodSpec& spec, const SolverOptions& opt, const Vec* pilot) {
  if (!data) throw InvalidArgument("no dataset");
  const std::size_t m = data->m();
  switch (spec.method) {
    case Method::kIndep:
      return EstimatingContext(data, link, CorrelationModel::identity(m));
    case Method::kGee:
    case Method::kOracle: {
      const Mat r = spec.structure == Structure::kCustom ? spec.custom
                                                         : structured_correlation(spec.structure, spec.alpha, m);
      return EstimatingContext(data, link, CorrelationModel::fixed(r, spec.structure, spec.alpha));
    }
    case Method::kPle: {
      Vec beta_tilde;
      if (pilot) {
        beta_tilde = *pilot;
      } else {
        EstimatingContext indep(data, link, CorrelationModel::identity(m));
        SolverOptions po = opt;
        po.multistart = 0;
        const FitResult f = newton_solve(indep, Vec::Zero(static_cast<Eigen::Index>(data->p())), po);
        if (!f.converged) throw ConvergenceError("independence pilot for PLE did not converge");
        beta_tilde = f.beta;
      }
      return EstimatingContext(data, link, CorrelationModel::ple(data, beta_tilde, link, spec.reg));
    }
    case Method::kAqs:
      return EstimatingContext(data, link, CorrelationModel::aqs(data, link, spec.reg));
  }
  throw InvalidArgument("unknown method");
}

FitResult fit(std::shared_ptr<const LongitudinalDataset> data, const Link& link, const MethodSpec& spec,
              const SolverOptions& opt, const std::optional<Vec>& beta_init) {
  if (!data) throw InvalidArgument("no dataset");
  const auto p = static_cast<Eigen::Index>(data->p());
  Vec start;
  Vec indep_beta;
  bool have_indep = false;
  if (spec.method != Method::kIndep && (!beta_init || spec.method == Method::kPle)) {
    EstimatingContext indep(data, link, CorrelationModel::identity(data->m()));
    SolverOptions po = opt;
    po.multistart = 0;
    const FitResult f = newton_solve(indep, Vec::Zero(p), po);
    if (f.converged) {
      indep_beta = f.beta;
      have_indep = true;
    } else if (spec.method == Method::kPle) {
      throw ConvergenceError("independence pilot for PLE did not converge");
    }
  }
  if (beta_init) start = *beta_init;
  else if (have_indep) start = indep_beta;
  else start = Vec::Zero(p);
  const EstimatingContext ctx = make_context(data, link, spec, opt, have_indep ? &indep_beta : nullptr);
  FitResult r = newton_solve(ctx, start, opt);
  r.method = std::string(method_name(spec.method));
  return r;
}

}  // namespace aqsgee

#include "diagnostics.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "error.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "parallel.hpp"

namespace aqsgee {

namespace {

std::vector<Vec> ball_points(const Vec& center, double r, const BallSampling& sampling) {
  const Eigen::Index p = center.size();
  std::vector<Vec> pts;
  pts.push_back(center);
  for (Eigen::Index l = 0; l < p; ++l) {
    for (double sign : {1.0, -1.0}) {
      Vec b = center;
      b(l) += sign * r;
      pts.push_back(b);
    }
  }
  std::mt19937_64 rng(sampling.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t k = 0; k < sampling.random_points; ++k) {
    Vec dir(p);
    for (Eigen::Index l = 0; l < p; ++l) dir(l) = normal(rng);
    const double radius = r * std::pow(unif(rng), 1.0 / static_cast<double>(p));
    pts.push_back(center + radius * dir.normalized());
  }
  return pts;
}

struct LinkSuprema {
  double k2 = 0.0;
  double k3 = 0.0;
  double eta = 0.0;
};

LinkSuprema link_suprema(const LongitudinalDataset& data, const Link& link, const std::vector<Vec>& points) {
  const std::size_t cells = data.n() * data.m();
  std::vector<double> lo(cells, std::numeric_limits<double>::infinity());
  std::vector<double> hi(cells, 0.0);
  LinkSuprema s;
  for (const Vec& beta : points) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < data.n(); ++i) {
      const Vec eta = data.X(i) * beta;
      for (Eigen::Index j = 0; j < eta.size(); ++j, ++c) {
        const Link::Values v = link.values(eta(j));
        s.k2 = std::max(s.k2, std::abs(v.d2 / v.d1));
        s.k3 = std::max(s.k3, std::abs(v.d3 / v.d1));
        lo[c] = std::min(lo[c], v.d1);
        hi[c] = std::max(hi[c], v.d1);
      }
    }
  }
  for (std::size_t c = 0; c < cells; ++c) s.eta = std::max(s.eta, std::sqrt(hi[c] / lo[c]) - 1.0);
  return s;
}

struct IndepSummary {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double gamma = 0.0;
};

IndepSummary indep_summary(const LongitudinalDataset& data, const Vec& beta, const Link& link) {
  const Mat h = symmetrize(h_indep(data, beta, link));
  const SymmetricInverse inv = symmetric_inverse(h, 1e-300);
  IndepSummary s;
  s.lambda_min = inv.lambda_min;
  s.lambda_max = inv.lambda_max;
  for (std::size_t i = 0; i < data.n(); ++i) {
    const Mat& x = data.X(i);
    for (Eigen::Index j = 0; j < x.rows(); ++j) {
      const Vec xj = x.row(j).transpose();
      s.gamma = std::max(s.gamma, xj.dot(inv.inverse * xj));
    }
  }
  return s;
}

double generalized_lambda_max(const Mat& h, const Mat& m) {
  // Largest eigenvalue of M^-1 H for symmetric H and SPD M.
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(symmetrize(h), symmetrize(m));
  if (es.info() != Eigen::Success) return std::numeric_limits<double>::quiet_NaN();
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

}  // namespace

RegularityConstants regularity_constants(const EstimatingContext& ctx, const Vec& beta_center, double r, double delta,
                                         const BallSampling& sampling) {
  if (!(r > 0.0)) throw InvalidArgument("ball radius r must be positive");
  if (!(delta > 0.0)) throw InvalidArgument("delta must be positive");
  const LongitudinalDataset& data = ctx.data();
  check_beta(data, beta_center);
  const std::vector<Vec> points = ball_points(beta_center, r, sampling);

  RegularityConstants rc;
  rc.r = r;
  rc.delta = delta;
  rc.points = points.size();
  const IndepSummary is = indep_summary(data, beta_center, ctx.link());
  rc.lambda_min_h = is.lambda_min;
  rc.lambda_max_h = is.lambda_max;
  rc.gamma = is.gamma;
  rc.a_n = rc.lambda_max_h * rc.gamma;

  const LinkSuprema ls = link_suprema(data, ctx.link(), points);
  rc.k2 = ls.k2;
  rc.k3 = ls.k3;
  rc.eta = ls.eta;

  // Centre sequence: R*_{i-1}(beta_center)^{1/2} and lambda_max of its inverse.
  std::vector<Mat> center_sqrt;
  double max_rinv = 0.0;
  const bool dependent = ctx.model().beta_dependent();
  ctx.model().sweep(data, beta_center, ctx.link(), false, [&](const IndividualState&, const PrefixCorrelation& pc) {
    max_rinv = std::max(max_rinv, 1.0 / pc.lambda_min);
    if (dependent) center_sqrt.push_back(symmetric_sqrt(pc.r));
  });
  rc.tau_star = static_cast<double>(data.m()) * max_rinv;

  if (dependent) {
    rc.pi = 1.0;
    for (const Vec& beta : points) {
      ctx.model().sweep(data, beta, ctx.link(), true, [&](const IndividualState&, const PrefixCorrelation& pc) {
        const Mat& s = center_sqrt[pc.t];
        rc.pi = std::max(rc.pi, lambda_max(symmetrize(s * pc.rinv * s)));
        for (const Mat& d : pc.dr) rc.q = std::max(rc.q, spectral_radius(d));
      });
    }
    rc.rho = rc.pi - 1.0;
  }

  rc.delta_n = std::pow(rc.lambda_max_h, 0.5 - delta);
  const auto ev = ctx.evaluate(beta_center, false);
  rc.c_star = generalized_lambda_max(ev.h, ev.m);

  const double n = static_cast<double>(data.n());
  const double a_tilde = std::max(rc.a_n, rc.a_n * rc.a_n);
  rc.c1 = r * rc.delta_n * rc.pi * std::sqrt(rc.a_n);
  rc.c1_prime = rc.delta_n * rc.pi * rc.eta;
  rc.c2 = rc.delta_n * rc.rho;
  rc.c3 = r * rc.delta_n * rc.pi * rc.pi * rc.q;
  rc.c4 = n * rc.pi * rc.pi * a_tilde * rc.lambda_max_h;
  rc.c5 = n * std::pow(rc.pi, 4) * rc.q * rc.q * rc.lambda_max_h;
  return rc;
}

EtaSlope eta_slope(const EstimatingContext& ctx, const Vec& beta_center, const std::vector<double>& r_grid,
                   const BallSampling& sampling) {
  if (r_grid.empty()) throw InvalidArgument("r grid must not be empty");
  EtaSlope out;
  const IndepSummary is = indep_summary(ctx.data(), beta_center, ctx.link());
  out.a_n = is.lambda_max * is.gamma;
  double sxy = 0.0, sxx = 0.0;
  for (double r : r_grid) {
    if (!(r > 0.0)) throw InvalidArgument("r grid entries must be positive");
    const double eta = link_suprema(ctx.data(), ctx.link(), ball_points(beta_center, r, sampling)).eta;
    out.r.push_back(r);
    out.eta.push_back(eta);
    const double x = r * std::sqrt(out.a_n);
    sxy += x * eta;
    sxx += x * x;
  }
  out.slope = sxy / sxx;
  return out;
}

HypothesisReport hypothesis_check(const LongitudinalDataset& data, const std::vector<std::size_t>& n_grid,
                                  const Vec& beta, const Link& link, double delta, double c0, double bound_c) {
  check_beta(data, beta);
  if (n_grid.empty()) throw InvalidArgument("n grid must not be empty");
  for (std::size_t k = 0; k < n_grid.size(); ++k) {
    if (n_grid[k] == 0 || n_grid[k] > data.n()) throw InvalidArgument("n grid entries must lie in [1, n]");
    if (k > 0 && n_grid[k] <= n_grid[k - 1]) throw InvalidArgument("n grid must be strictly increasing");
  }
  if (!(bound_c > 0.0)) throw InvalidArgument("bound_c must be positive");
  const auto p = static_cast<Eigen::Index>(data.p());
  const double expo = 0.5 + delta;
  HypothesisReport rep;
  rep.delta = delta;
  rep.bound_c = bound_c;

  Mat h = Mat::Zero(p, p);
  Mat lower = Mat::Zero(p, p);
  double sum_min = 0.0, sum_max = 0.0, sum_scale = 0.0;
  std::size_t next = 0;
  for (std::size_t k = 0; k < n_grid.size(); ++k) {
    for (; next < n_grid[k]; ++next) {
      const Mat& x = data.X(next);
      const Vec eta = x * beta;
      for (Eigen::Index j = 0; j < x.rows(); ++j) {
        const Vec xj = x.row(j).transpose();
        const Mat outer = xj * xj.transpose();
        const double norm2 = xj.squaredNorm();
        h += link.d1(eta(j)) * outer;
        // lambda_min of a rank-one p x p matrix is zero unless p = 1.
        sum_min += p == 1 ? norm2 : 0.0;
        sum_max += norm2;
        const double cx = bound_c * std::sqrt(norm2);
        switch (link.kind()) {
          case LinkKind::kLinear:
            lower += outer;
            sum_scale += norm2;
            break;
          case LinkKind::kLogistic:
            lower += 0.5 * std::exp(-cx) / (1.0 + std::exp(cx)) * outer;
            sum_scale += norm2;
            break;
          case LinkKind::kLog:
            lower += std::exp(-cx) * outer;
            sum_scale += std::exp(cx) * norm2;
            break;
          case LinkKind::kProbit:
            break;
        }
      }
    }
    HypothesisRow row;
    row.n = n_grid[k];
    const Vec ev = eigenvalues(symmetrize(h));
    row.lambda_min = ev(0);
    row.lambda_max = ev(ev.size() - 1);
    row.ratio = row.lambda_min / std::pow(row.lambda_max, expo);
    row.rank_deficient = !(row.lambda_min > 1e-10 * row.lambda_max);
    row.sum_lambda_min = sum_min;
    row.sum_lambda_max = sum_max;
    if (link.kind() == LinkKind::kProbit) {
      row.weighted_lower = std::numeric_limits<double>::quiet_NaN();
      row.weighted_scale = std::numeric_limits<double>::quiet_NaN();
    } else {
      row.weighted_lower = lambda_min(symmetrize(lower));
      row.weighted_scale = std::pow(sum_scale, expo);
    }
    rep.rows.push_back(row);
  }
  rep.c0 = c0 > 0.0 ? c0 : std::max(rep.rows.front().ratio, 0.0);
  rep.lambda_min_increasing = true;
  for (std::size_t k = 0; k < rep.rows.size(); ++k) {
    auto& row = rep.rows[k];
    row.condition_ii = !row.rank_deficient &&
                       row.lambda_min >= rep.c0 * std::pow(row.lambda_max, expo) * (1.0 - 1e-12);
    if (k > 0 && !(row.lambda_min > rep.rows[k - 1].lambda_min)) rep.lambda_min_increasing = false;
  }
  if (rep.rows.size() < 2) rep.lambda_min_increasing = false;
  return rep;
}

OptimalityMatrices optimality_matrices_mc(const GeneratorConfig& config, const MethodSpec& method, std::size_t reps,
                                          unsigned workers) {
  if (reps < 2) throw InvalidArgument("optimality matrices need at least two replications");
  const Generator gen(config);
  const Link link(config.link);
  const auto p = static_cast<Eigen::Index>(config.p);
  const auto m = static_cast<Eigen::Index>(config.m);
  const Vec& beta0 = config.beta0;

  struct RepOut {
    Mat h, mm, e, eb;
  };
  std::vector<RepOut> out(reps);
  parallel_for(reps, workers, [&](std::size_t r) {
    const auto data = std::make_shared<const LongitudinalDataset>(gen.dataset(r));
    const auto ctx = context_at_truth(gen, data, method);
    RepOut& o = out[r];
    o.h = Mat::Zero(p, p);
    o.mm = Mat::Zero(p, p);
    o.e = Mat::Zero(m, m);
    o.eb = Mat::Zero(m, m);
    ctx.model().sweep(*data, beta0, link, false, [&](const IndividualState& s, const PrefixCorrelation& pc) {
      const Mat sx = s.sd.asDiagonal() * data->X(pc.t);
      const Mat sandwich = pc.rinv * gen.rbar() * pc.rinv;
      o.h += sx.transpose() * pc.rinv * sx;
      o.mm += sx.transpose() * sandwich * sx;
      o.e += pc.rinv;
      o.eb += sandwich;
    });
  });

  OptimalityMatrices om;
  om.reps = reps;
  om.reps_warning = reps < 100;
  om.hstar = Mat::Zero(p, p);
  om.mstar = Mat::Zero(p, p);
  om.e_star_mean = Mat::Zero(m, m);
  om.e_bar_star_mean = Mat::Zero(m, m);
  for (const auto& o : out) {
    om.hstar += o.h;
    om.mstar += o.mm;
    om.e_star_mean += o.e;
    om.e_bar_star_mean += o.eb;
  }
  const double R = static_cast<double>(reps);
  om.hstar /= R;
  om.mstar /= R;
  om.e_star_mean /= R * static_cast<double>(config.n);
  om.e_bar_star_mean /= R * static_cast<double>(config.n);

  om.mbar = Mat::Zero(p, p);
  om.h_indep = Mat::Zero(p, p);
  om.m_indep = Mat::Zero(p, p);
  for (const auto& x : gen.design()) {
    const Vec eta = x * beta0;
    Vec sd(eta.size());
    for (Eigen::Index j = 0; j < eta.size(); ++j) sd(j) = std::sqrt(link.d1(eta(j)));
    const Mat sx = sd.asDiagonal() * x;
    om.mbar += sx.transpose() * gen.rbar_inverse() * sx;
    om.h_indep += sx.transpose() * sx;
    om.m_indep += sx.transpose() * gen.rbar() * sx;
  }
  const double det_mbar = om.mbar.determinant();
  om.det_ratio_h = om.hstar.determinant() / det_mbar;
  om.det_ratio_m = om.mstar.determinant() / det_mbar;
  om.mbar_bound_lambda_min = lambda_min(symmetrize(om.mbar - om.h_indep / static_cast<double>(config.m)));

  // Delete-one jackknife.
  const Mat hsum = om.hstar * R;
  const Mat msum = om.mstar * R;
  std::vector<double> jh(reps), jm(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    jh[r] = Mat((hsum - out[r].h) / (R - 1.0)).determinant() / det_mbar;
    jm[r] = Mat((msum - out[r].mm) / (R - 1.0)).determinant() / det_mbar;
  }
  auto jack_se = [&](const std::vector<double>& v) {
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= R;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt((R - 1.0) / R * ss);
  };
  om.det_ratio_h_se = jack_se(jh);
  om.det_ratio_m_se = jack_se(jm);
  return om;
}

InformationMatrix information_matrix(const Mat& h, const Mat& m) {
  if (h.rows() != h.cols() || m.rows() != m.cols() || h.rows() != m.rows())
    throw InvalidArgument("information matrix needs square H and M of equal size");
  const SymmetricInverse minv = symmetric_inverse(symmetrize(m), 1e-14 * std::max(1.0, m.cwiseAbs().maxCoeff()));
  InformationMatrix im;
  im.info = symmetrize(h.transpose() * minv.inverse * h);
  im.inverse = symmetric_inverse(im.info, 1e-300).inverse;
  return im;
}

}  // namespace aqsgee

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "estimator.hpp"
#include "simulation.hpp"

namespace aqsgee {

struct BallSampling {
  std::size_t random_points = 32;
  std::uint64_t seed = 7;
};

/// Finite-n regularity constants at (beta_center, r). Suprema over the ball
/// |beta - beta_center| <= r are taken over the centre, the 2p axis points on
/// the boundary and `random_points` uniform draws, so they are lower bounds.
struct RegularityConstants {
  double r = 0.0;
  double delta = 0.1;
  std::size_t points = 0;  // size of the sampling plan
  double lambda_min_h = 0.0;
  double lambda_max_h = 0.0;
  double gamma = 0.0;  // max x' H_indep^-1 x
  double a_n = 0.0;    // lambda_max * gamma
  double k2 = 0.0;
  double k3 = 0.0;
  double eta = 0.0;
  double pi = 1.0;
  double rho = 0.0;
  double q = 0.0;  // spectral radius of d R* / d beta_l
  double delta_n = 0.0;
  double tau_star = 0.0;
  double c_star = 0.0;
  // Plug-in values of the terms in conditions (C1)-(C5); C4/C5 are heuristic.
  double c1 = 0.0;
  double c1_prime = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double c4 = 0.0;
  double c5 = 0.0;
};

RegularityConstants regularity_constants(const EstimatingContext& ctx, const Vec& beta_center, double r,
                                         double delta = 0.1, const BallSampling& sampling = {});

/// Least-squares slope C (through the origin) of eta_n(r) against r * a_n^{1/2}
/// over an r-grid.
struct EtaSlope {
  std::vector<double> r;
  std::vector<double> eta;
  double a_n = 0.0;
  double slope = 0.0;
};
EtaSlope eta_slope(const EstimatingContext& ctx, const Vec& beta_center, const std::vector<double>& r_grid,
                   const BallSampling& sampling = {});

struct HypothesisRow {
  std::size_t n = 0;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double ratio = 0.0;           // lambda_min / lambda_max^{1/2+delta}
  bool rank_deficient = false;  // lambda_min <= 1e-10 * lambda_max
  double sum_lambda_min = 0.0;  // sum over i, j of lambda_min(x x') (zero whenever p >= 2)
  double sum_lambda_max = 0.0;  // sum of |x|^2
  double weighted_lower = 0.0;  // lambda_min of the link-specific lower-bound matrix
  double weighted_scale = 0.0;  // matching right-hand scale: [sum of (weighted) lambda_max]^{1/2+delta}
  bool condition_ii = false;    // lambda_min >= c0 lambda_max^{1/2+delta}
};

struct HypothesisReport {
  double delta = 0.1;
  double c0 = 0.0;
  double bound_c = 1.0;
  std::vector<HypothesisRow> rows;
  bool lambda_min_increasing = false;
};

/// Design-growth evidence (lambda_min growth and the lambda_min versus
/// lambda_max^{1/2+delta} condition) over prefixes of `data`. A c0 <= 0 is
/// replaced by the ratio at the first grid point. `bound_c` bounds |beta| for
/// the logistic and log weights.
HypothesisReport hypothesis_check(const LongitudinalDataset& data, const std::vector<std::size_t>& n_grid,
                                  const Vec& beta, const Link& link, double delta = 0.1, double c0 = 0.0,
                                  double bound_c = 1.0);

struct OptimalityMatrices {
  std::size_t reps = 0;
  bool reps_warning = false;  // fewer than 100 replications
  Mat mbar, mstar, hstar, h_indep, m_indep;
  Mat e_star_mean;      // average over i of E[R*_{i-1}^-1]
  Mat e_bar_star_mean;  // average over i of E[R*^-1 Rbar R*^-1]
  double det_ratio_h = 0.0;  // det H* / det Mbar
  double det_ratio_m = 0.0;  // det M* / det Mbar
  double det_ratio_h_se = 0.0;
  double det_ratio_m_se = 0.0;  // jackknife
  double mbar_bound_lambda_min = 0.0;  // lambda_min(Mbar - H_indep / m)
};

OptimalityMatrices optimality_matrices_mc(const GeneratorConfig& config, const MethodSpec& method, std::size_t reps,
                                          unsigned workers);

struct InformationMatrix {
  Mat info;     // H' M^-1 H
  Mat inverse;  // its inverse
};
InformationMatrix information_matrix(const Mat& h, const Mat& m);

}  // namespace aqsgee

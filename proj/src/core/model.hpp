#pragma once

#include <cstddef>

#include "dataset.hpp"
#include "link.hpp"

namespace aqsgee {

// Individuals are indexed from 0. Every function throws InvalidArgument for an
// out-of-range index or a beta of the wrong length.

Vec linear_predictor(const LongitudinalDataset& data, std::size_t i, const Vec& beta);
Vec marginal_mean(const LongitudinalDataset& data, std::size_t i, const Vec& beta, const Link& link);
/// Diagonal A_i(beta) = diag(mu'(x_ij' beta)); off-diagonal entries are exactly 0.
Mat variance_matrix(const LongitudinalDataset& data, std::size_t i, const Vec& beta, const Link& link);
Vec standardized_residual(const LongitudinalDataset& data, std::size_t i, const Vec& beta, const Link& link);
/// D_i = A_i X_i.
Mat mean_jacobian(const LongitudinalDataset& data, std::size_t i, const Vec& beta, const Link& link);

/// Per-individual quantities shared by the estimating function, its Jacobian
/// and the correlation estimators, evaluated once at a given beta.
struct IndividualState {
  Vec mu;        // mu(x_ij' beta)
  Vec d1;        // mu'
  Vec d2;        // mu''
  Vec sd;        // sqrt(mu')
  Vec resid;     // y - mu
  Vec ehat;      // resid / sd
  Vec g1;        // mu'' / (2 sqrt(mu'))       = d sd / d eta
  Vec g2;        // -mu'' / (2 mu'^{3/2})      = d (1/sd) / d eta
  Vec dehat;     // d ehat_j / d eta_j = -sd + resid * g2
};

IndividualState evaluate_individual(const LongitudinalDataset& data, std::size_t i, const Vec& beta,
                                    const Link& link);

void check_beta(const LongitudinalDataset& data, const Vec& beta);

}  // namespace aqsgee

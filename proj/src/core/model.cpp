#include "model.hpp"

#include <cmath>

#include "error.hpp"

namespace aqsgee {

void check_beta(const LongitudinalDataset& data, const Vec& beta) {
  if (static_cast<std::size_t>(beta.size()) != data.p())
    throw InvalidArgument("beta has length " + std::to_string(beta.size()) + ", expected p = " +
                          std::to_string(data.p()));
  if (!beta.allFinite()) throw InvalidArgument("beta must be finite");
}

Vec linear_predictor(const LongitudinalDataset& data, std::size_t i, const Vec& beta) {
  data.check_index(i);
  check_beta(data, beta);
  return data.X(i) * beta;
}

Vec marginal_mean(const LongitudinalDataset& data, std::size_t i, const Vec& beta, const Link& link) {
  Vec eta = linear_predictor(data, i, beta);
  for (Eigen::Index j = 0; j < eta.size(); ++j) eta(j) = link.mean(eta(j));
  return eta;
}

Mat variance_matrix(const LongitudinalDataset& data, std::size_t i, const Vec& beta, const Link& link) {
  const Vec eta = linear_predictor(data, i, beta);
  Mat a = Mat::Zero(eta.size(), eta.size());
  for (Eigen::Index j = 0; j < eta.size(); ++j) a(j, j) = link.d1(eta(j));
  return a;
}

Vec standardized_residual(const LongitudinalDataset& data, std::size_t i, const Vec& beta, const Link& link) {
  const Vec eta = linear_predictor(data, i, beta);
  Vec e(eta.size());
  for (Eigen::Index j = 0; j < eta.size(); ++j)
    e(j) = (data.y(i)(j) - link.mean(eta(j))) / std::sqrt(link.d1(eta(j)));
  return e;
}

Mat mean_jacobian(const LongitudinalDataset& data, std::size_t i, const Vec& beta, const Link& link) {
  const Vec eta = linear_predictor(data, i, beta);
  Vec d1(eta.size());
  for (Eigen::Index j = 0; j < eta.size(); ++j) d1(j) = link.d1(eta(j));
  return d1.asDiagonal() * data.X(i);
}

IndividualState evaluate_individual(const LongitudinalDataset& data, std::size_t i, const Vec& beta,
                                    const Link& link) {
  const Vec eta = linear_predictor(data, i, beta);
  const Eigen::Index m = eta.size();
  IndividualState s;
  s.mu.resize(m);
  s.d1.resize(m);
  s.d2.resize(m);
  s.sd.resize(m);
  s.resid.resize(m);
  s.ehat.resize(m);
  s.g1.resize(m);
  s.g2.resize(m);
  s.dehat.resize(m);
  const Vec& y = data.y(i);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Link::Values v = link.values(eta(j));
    const double sd = std::sqrt(v.d1);
    s.mu(j) = v.mu;
    s.d1(j) = v.d1;
    s.d2(j) = v.d2;
    s.sd(j) = sd;
    s.resid(j) = y(j) - v.mu;
    s.ehat(j) = s.resid(j) / sd;
    s.g1(j) = v.d2 / (2.0 * sd);
    s.g2(j) = -v.d2 / (2.0 * v.d1 * sd);
    s.dehat(j) = -sd + s.resid(j) * s.g2(j);
  }
  return s;
}

}  // namespace aqsgee

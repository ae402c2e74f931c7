#include "linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <cmath>
#include <limits>

#include "error.hpp"

namespace aqsgee {

SymmetricInverse symmetric_inverse(const Mat& a, double tol, std::size_t index) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  if (es.info() != Eigen::Success) throw SingularityError("eigendecomposition failed", index, std::nan(""));
  const Vec& ev = es.eigenvalues();
  SymmetricInverse out;
  out.lambda_min = ev(0);
  out.lambda_max = ev(ev.size() - 1);
  if (!(out.lambda_min >= tol)) {
    std::string msg = "matrix is singular (lambda_min = " + format_double(out.lambda_min) + ")";
    if (index != SingularityError::npos) msg = "working correlation for individual " + std::to_string(index + 1) +
                                               " is singular (lambda_min = " + format_double(out.lambda_min) + ")";
    throw SingularityError(msg, index, out.lambda_min);
  }
  out.condition = out.lambda_max / out.lambda_min;
  out.log_condition = std::log(out.condition);
  const Mat& v = es.eigenvectors();
  out.inverse = v * ev.cwiseInverse().asDiagonal() * v.transpose();
  return out;
}

Vec eigenvalues(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

double lambda_min(const Mat& a) { return eigenvalues(a)(0); }

double lambda_max(const Mat& a) {
  const Vec ev = eigenvalues(a);
  return ev(ev.size() - 1);
}

double spectral_radius(const Mat& a) {
  const Vec ev = eigenvalues(a);
  return std::max(std::abs(ev(0)), std::abs(ev(ev.size() - 1)));
}

Mat symmetric_sqrt(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  const Vec root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

Mat symmetrize(const Mat& a) { return 0.5 * (a + a.transpose()); }

Mat solve_square(const Mat& a, const Mat& b) {
  Eigen::FullPivLU<Mat> lu(a);
  if (!lu.isInvertible() || lu.rcond() < 1e-14)
    throw SingularityError("linear system is singular", SingularityError::npos, 0.0);
  return lu.solve(b);
}

}  // namespace aqsgee

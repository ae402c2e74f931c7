#pragma once

#include <cstddef>

#include "dataset.hpp"

namespace aqsgee {

struct SymmetricInverse {
  Mat inverse;
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double condition = 0.0;      // lambda_max / lambda_min
  double log_condition = 0.0;  // natural log
};

/// Inverse of a symmetric matrix through its eigendecomposition. Throws
/// SingularityError (carrying `index`) when lambda_min < tol.
SymmetricInverse symmetric_inverse(const Mat& a, double tol = 1e-8, std::size_t index = static_cast<std::size_t>(-1));

double lambda_min(const Mat& a);
double lambda_max(const Mat& a);
Vec eigenvalues(const Mat& a);  // ascending, symmetric input

/// Symmetric positive semi-definite square root.
Mat symmetric_sqrt(const Mat& a);

/// Largest |eigenvalue| of a symmetric matrix.
double spectral_radius(const Mat& a);

Mat symmetrize(const Mat& a);

/// Solve a x = b for a general square a; throws SingularityError when a is
/// numerically singular.
Mat solve_square(const Mat& a, const Mat& b);

}  // namespace aqsgee

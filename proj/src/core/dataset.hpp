#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace aqsgee {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Balanced longitudinal data: n individuals observed at the same m times,
/// each with an m x p covariate matrix X_i and response y_i.
class LongitudinalDataset {
 public:
  LongitudinalDataset() = default;
  /// Throws InvalidArgument unless all X_i are m x p and all y_i have length m
  /// with n, m, p >= 1.
  LongitudinalDataset(std::vector<Mat> covariates, std::vector<Vec> responses);

  std::size_t n() const noexcept { return x_.size(); }
  std::size_t m() const noexcept { return m_; }
  std::size_t p() const noexcept { return p_; }

  const Mat& X(std::size_t i) const { return x_[i]; }
  const Vec& y(std::size_t i) const { return y_[i]; }
  const std::vector<Mat>& covariates() const noexcept { return x_; }
  const std::vector<Vec>& responses() const noexcept { return y_; }

  /// First `count` individuals.
  LongitudinalDataset prefix(std::size_t count) const;
  /// Copy with individual i's response replaced.
  LongitudinalDataset with_response(std::size_t i, const Vec& y) const;
  /// Copy with every covariate column scaled: X_i -> X_i * diag(scale).
  LongitudinalDataset with_scaled_columns(const Vec& scale) const;

  void check_index(std::size_t i) const;

 private:
  std::vector<Mat> x_;
  std::vector<Vec> y_;
  std::size_t m_ = 0;
  std::size_t p_ = 0;
};

/// Reads `subject,time,y,x1,...,xp`. Rows must be grouped by subject with
/// strictly increasing time and every subject must have the same number of
/// rows. Violations throw LoadError naming the offending line.
LongitudinalDataset read_dataset_csv(std::istream& in, const std::string& source = "<stream>");
LongitudinalDataset load_dataset_csv(const std::string& path);

/// Subjects are written as 1..n and times as 1..m. Numbers use the shortest
/// round-trip representation, so output is byte-stable.
void write_dataset_csv(const LongitudinalDataset& data, std::ostream& out);

/// m x m matrix from a headerless CSV (custom working correlation).
Mat load_matrix_csv(const std::string& path);

std::string format_double(double value);

}  // namespace aqsgee

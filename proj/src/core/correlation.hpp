#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "dataset.hpp"
#include "link.hpp"
#include "model.hpp"

namespace aqsgee {

enum class Structure { kExchangeable, kAr1, kCustom };
Structure parse_structure(std::string_view name);
std::string_view structure_name(Structure s);

/// exchangeable: alpha in (-1/(m-1), 1); ar1: |alpha| < 1. Throws InvalidArgument otherwise.
Mat structured_correlation(Structure structure, double alpha, std::size_t m);

/// Checks a user-supplied correlation: square m x m, symmetric, unit diagonal,
/// positive definite. Throws InvalidArgument naming the failed property.
void validate_correlation_matrix(const Mat& r, std::size_t m);

/// (1/k) sum_{i<k} e_i e_i' over the first k individuals; I for k < 2.
Mat aqs_correlation(const LongitudinalDataset& data, std::size_t k, const Vec& beta, const Link& link);

/// Element l of d/d beta of aqs_correlation. Zero for k < 2.
Mat aqs_correlation_derivative(const LongitudinalDataset& data, std::size_t k, const Vec& beta, const Link& link,
                               std::size_t l);

/// R~_0 .. R~_{n-1} at a fixed pilot estimate.
std::vector<Mat> ple_correlation_sequence(const LongitudinalDataset& data, const Vec& beta_tilde, const Link& link);

/// -Rinv * dR * Rinv.
Mat inverse_derivative(const Mat& rinv, const Mat& dr);

/// Stabilisation of the sample-based (PLE, AQS) matrices for prefixes k >= 2:
///   R_k = (S_k + shrinkage * I) / (k + shrinkage) + ridge * I,
/// where S_k is the sum of the first k residual outer products. shrinkage = 0
/// and ridge = 0 give the plain average. Negative values select the defaults:
/// shrinkage 2m, and ridge 1e-6 only when shrinkage resolves to 0.
struct Regularization {
  double shrinkage = -1.0;
  double ridge = -1.0;

  double resolved_shrinkage(std::size_t m) const;
  double resolved_ridge(std::size_t m) const;
};

enum class CorrelationKind { kIdentity, kFixed, kPle, kAqs };
std::string_view correlation_kind_name(CorrelationKind kind);

/// R*_t for the individual with 0-based index t, built only from individuals
/// 0..t-1, plus what the estimator needs from it.
struct PrefixCorrelation {
  std::size_t t = 0;
  Mat r;
  Mat rinv;
  std::vector<Mat> dr;      // d R / d beta_l, filled only when requested and beta-dependent
  double lambda_min = 0.0;  // of r
  double lambda_max = 0.0;
  double log_condition = 0.0;
  bool ridge_event = false;  // lambda_min before the ridge fell below the singularity tolerance
};

class CorrelationModel {
 public:
  static CorrelationModel identity(std::size_t m);
  static CorrelationModel fixed(const Mat& r, Structure structure = Structure::kCustom, double alpha = 0.0);
  /// Builds the regularised PLE sequence once from the pilot estimate.
  static CorrelationModel ple(std::shared_ptr<const LongitudinalDataset> data, const Vec& beta_tilde,
                              const Link& link, Regularization reg = {});
  static CorrelationModel aqs(std::shared_ptr<const LongitudinalDataset> data, const Link& link,
                              Regularization reg = {});

  CorrelationKind kind() const noexcept { return kind_; }
  std::size_t m() const noexcept { return m_; }
  bool beta_dependent() const noexcept { return kind_ == CorrelationKind::kAqs; }
  Structure structure() const noexcept { return structure_; }
  double alpha() const noexcept { return alpha_; }
  double shrinkage() const noexcept { return shrinkage_; }
  double ridge() const noexcept { return ridge_; }
  const Vec& pilot() const noexcept { return pilot_; }

  /// R*_{t} used by individual t (0-based).
  Mat working_correlation(std::size_t t, const Vec& beta) const;
  /// Inverse of working_correlation(t, beta); throws SingularityError naming
  /// individual t when lambda_min < 1e-8.
  PrefixCorrelation working_correlation_inverse(std::size_t t, const Vec& beta) const;
  /// d R*_t / d beta_l; identically zero for the beta-free variants.
  Mat working_correlation_derivative(std::size_t t, const Vec& beta, std::size_t l) const;

  using Visitor = std::function<void(const IndividualState&, const PrefixCorrelation&)>;
  /// Single pass over individuals 0..n-1 of `data`. For each t it evaluates the
  /// individual's state at beta, builds R*_t (and its derivatives when
  /// `derivatives` is set and the model depends on beta), and calls `visit`.
  /// Returns the number of ridge events.
  std::size_t sweep(const LongitudinalDataset& data, const Vec& beta, const Link& link, bool derivatives,
                    const Visitor& visit) const;

  static constexpr double kSingularTol = 1e-8;

 private:
  CorrelationModel() = default;
  void finish(Mat& r, std::size_t k, bool& ridge_event) const;

  CorrelationKind kind_ = CorrelationKind::kIdentity;
  std::size_t m_ = 0;
  Structure structure_ = Structure::kCustom;
  double alpha_ = 0.0;
  double shrinkage_ = 0.0;
  double ridge_ = 0.0;
  Mat fixed_;
  Mat fixed_inv_;
  Vec pilot_;
  std::vector<Mat> ple_;
  std::vector<Mat> ple_inv_;
  std::vector<double> ple_lmin_;
  std::vector<double> ple_lmax_;
  std::vector<char> ple_ridge_;
  std::shared_ptr<const LongitudinalDataset> data_;
  Link link_;
};

}  // namespace aqsgee

#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "correlation.hpp"
#include "dataset.hpp"
#include "link.hpp"

namespace aqsgee {

/// Which estimating equation to solve. `oracle` is GEE with the true
/// correlation and exists for simulation studies.
enum class Method { kIndep, kGee, kPle, kAqs, kOracle };
Method parse_method(std::string_view name);
std::string_view method_name(Method m);

struct MethodSpec {
  Method method = Method::kAqs;
  Structure structure = Structure::kExchangeable;  // gee / oracle
  double alpha = 0.0;
  Mat custom;  // used when structure == custom
  Regularization reg;
};

/// Estimating function context: data, link and working correlation. Immutable.
class EstimatingContext {
 public:
  EstimatingContext(std::shared_ptr<const LongitudinalDataset> data, Link link, CorrelationModel model);

  const LongitudinalDataset& data() const noexcept { return *data_; }
  std::shared_ptr<const LongitudinalDataset> data_ptr() const noexcept { return data_; }
  const Link& link() const noexcept { return link_; }
  const CorrelationModel& model() const noexcept { return model_; }

  struct Evaluation {
    Vec g;  // g*_n(beta)
    Mat h;  // H_n(beta) = sum X' A^1/2 R^-1 A^1/2 X
    Mat d;  // D*_n(beta) = -d g / d beta', filled when requested
    Mat m;  // sum g_i g_i'
    std::size_t ridge_events = 0;
    double min_rinv_eigen = 0.0;  // min over i of lambda_min(R*_{i-1}^-1)
    double max_rinv_eigen = 0.0;
  };
  Evaluation evaluate(const Vec& beta, bool jacobian) const;

  Vec estimating_function(const Vec& beta) const;
  /// Per-individual contributions g_i (p x n).
  Mat contributions(const Vec& beta) const;

  /// Decomposition D* = H - B - E. When beta0 is given the
  /// residual y - mu(beta) is split into mu(beta0) - mu(beta) (B terms) and
  /// y - mu(beta0) (E terms); without it every residual term is placed in E.
  struct JacobianDecomposition {
    Mat h, b1, b2, b3, e1, e2, e3, d;
    bool split = false;
    Mat b() const { return b1 + b2 + b3; }
    Mat e() const { return e1 + e2 + e3; }
  };
  JacobianDecomposition estimating_jacobian(const Vec& beta, const std::optional<Vec>& beta0 = std::nullopt) const;

 private:
  std::shared_ptr<const LongitudinalDataset> data_;
  Link link_;
  CorrelationModel model_;
};

struct SolverOptions {
  double tol_g = 1e-10;
  int max_iter = 100;
  int max_halvings = 30;
  bool scoring = false;   // iterate with H_n only
  int multistart = 0;     // extra perturbed starts; 0 disables
  double multistart_scale = 0.25;
  std::uint64_t multistart_seed = 0x5eed;
  double ci_level = 0.95;
  bool ci_sandwich = false;
};

struct IterationRecord {
  int iteration = 0;
  double g_norm_inf = 0.0;
  double g_norm_2 = 0.0;
  double step_norm = 0.0;
  int halvings = 0;
  bool fallback = false;
};

struct CovarianceEstimates {
  Mat h;
  Mat m;
  Mat cov_model;
  Mat cov_sandwich;
  Vec se_model;
  Vec se_sandwich;
  double ci_level = 0.95;
  bool ci_sandwich = false;
  Mat ci;  // p x 2
};

struct FitResult {
  std::string method;
  Vec beta;
  Vec beta_init;
  bool converged = false;
  int iterations = 0;
  double g_norm = 0.0;
  double g_init_norm = 0.0;
  int fallbacks = 0;
  std::size_t ridge_events = 0;
  int starts = 1;
  int roots_found = 0;
  std::vector<IterationRecord> trace;
  std::optional<CovarianceEstimates> cov;  // present for converged fits
  double shrinkage = 0.0;
  double ridge = 0.0;
};

/// Damped Newton on g*_n. Never throws for non-convergence; a rank-deficient
/// design throws SingularityError.
FitResult newton_solve(const EstimatingContext& ctx, const Vec& beta_init, const SolverOptions& opt = {});

/// Weighted least squares for the linear link with a beta-free working
/// correlation. AQS throws Unsupported.
FitResult closed_form_linear(const EstimatingContext& ctx, const SolverOptions& opt = {});

CovarianceEstimates covariance_estimates(const EstimatingContext& ctx, const Vec& beta, double ci_level = 0.95,
                                         bool ci_sandwich = false);

Mat h_indep(const LongitudinalDataset& data, const Vec& beta, const Link& link);

/// Standard normal quantile.
double normal_quantile(double p);

/// Builds the correlation model for `spec` (running the independence pilot for
/// PLE, which must converge) and returns the context.
EstimatingContext make_context(std::shared_ptr<const LongitudinalDataset> data, const Link& link,
                               const MethodSpec& spec, const SolverOptions& opt = {},
                               const Vec* pilot = nullptr);

/// Full fit: independence start, context construction, Newton.
FitResult fit(std::shared_ptr<const LongitudinalDataset> data, const Link& link, const MethodSpec& spec,
              const SolverOptions& opt = {}, const std::optional<Vec>& beta_init = std::nullopt);

}  // namespace aqsgee

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "correlation.hpp"
#include "dataset.hpp"
#include "estimator.hpp"
#include "link.hpp"

namespace aqsgee {

struct CorrelationSpec {
  Structure structure = Structure::kExchangeable;
  double alpha = 0.0;
  Mat custom;  // used when structure == custom
  Mat matrix(std::size_t m) const;
};

struct GeneratorConfig {
  std::size_t n = 100;
  std::size_t m = 3;
  std::size_t p = 2;
  LinkKind link = LinkKind::kLinear;
  Vec beta0;  // length p
  CorrelationSpec rbar;
  bool intercept = false;   // first covariate column fixed to 1
  std::vector<Mat> design;  // fixed design; overrides the uniform law when non-empty
  std::uint64_t seed = 1;
  /// Variance-inflation mode: individual i's residual is scaled by s_i with
  /// s_i^2 = (1 - phi) + phi * |z_{i-1}|^2 / m, a martingale-difference
  /// (not independent) sequence with E s_i^2 = 1. 0 disables.
  double inflation = 0.0;

  void validate() const;
  /// Non-Gaussian margins are only moment-matched (continuous surrogate).
  bool approximate_correlation() const { return link == LinkKind::kLogistic || link == LinkKind::kProbit; }
};

/// y_i = mu_i(beta0) + A_i(beta0)^{1/2} Rbar^{1/2} z_i with z_i standard
/// normal. Covariates come from a design stream fixed by the seed; responses
/// for replication r come from their own stream, so any replication can be
/// regenerated in isolation.
class Generator {
 public:
  explicit Generator(GeneratorConfig config);

  const GeneratorConfig& config() const noexcept { return cfg_; }
  const Mat& rbar() const noexcept { return rbar_; }
  const Mat& rbar_inverse() const noexcept { return rbar_inv_; }
  const std::vector<Mat>& design() const noexcept { return design_; }

  LongitudinalDataset dataset(std::uint64_t rep) const;

 private:
  GeneratorConfig cfg_;
  Mat rbar_;
  Mat rbar_sqrt_;
  Mat rbar_inv_;
  std::vector<Mat> design_;
};

LongitudinalDataset generate_dataset(const GeneratorConfig& config);

/// A method as used by the experiments, with a display label.
struct NamedMethod {
  std::string label;
  MethodSpec spec;
};
std::string default_label(const MethodSpec& spec);

/// Estimating-function context for `spec` at the true parameter: GEE/oracle
/// use their fixed matrices (oracle = Rbar), PLE uses beta0 as pilot.
EstimatingContext context_at_truth(const Generator& gen, std::shared_ptr<const LongitudinalDataset> data,
                                   const MethodSpec& spec);

// ---------------------------------------------------------------- experiments

struct IdentityEntry {
  std::string family;
  std::string check;  // "score_covariance" (E[q gbar'] vs -E[dq]), "cov_gbar", "info_gbar"
  int row = 0;
  int col = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double se = 0.0;  // standard error of lhs - rhs
  bool pass = false;
};

struct IdentityReport {
  std::size_t reps = 0;
  bool se_defined = false;
  double threshold = 4.0;
  Mat mbar;  // exact
  std::vector<IdentityEntry> entries;
  bool all_pass = false;
};

IdentityReport quasi_score_identity_check(const GeneratorConfig& config, const std::vector<NamedMethod>& families,
                                          std::size_t reps, unsigned workers, double threshold = 4.0);

struct ConsistencyRow {
  std::size_t n = 0;
  std::size_t converged = 0;
  std::size_t failed = 0;
  double median_error = 0.0;
  double p90_error = 0.0;
  double lambda_max_m = 0.0;  // of the MC estimate of Cov g_n(beta0)
  double slln_median = 0.0;   // median of |g_n(beta0)| / lambda_max(M_n)^{1/2+delta}
};

struct ConsistencyReport {
  std::string method;
  double delta = 0.1;
  std::size_t reps = 0;
  std::vector<ConsistencyRow> rows;
};

/// Each replication draws one dataset of size max(n_grid) and fits its
/// prefixes. More than 5% non-converged fits at any n throws ConvergenceError.
ConsistencyReport consistency_trace(const GeneratorConfig& config, const std::vector<std::size_t>& n_grid,
                                    const NamedMethod& method, std::size_t reps, unsigned workers,
                                    double delta = 0.1, bool closed_form = false, const SolverOptions& opt = {});

struct MethodSummary {
  std::string label;
  std::size_t converged = 0;
  double convergence_rate = 0.0;
  Vec mean_bias;
  Mat covariance;  // empirical covariance of beta-hat
  Vec variance;
  Vec variance_se;
  Vec coverage;  // CI coverage of beta0 per coordinate
  double median_error = 0.0;
};

struct VarianceComparison {
  std::string a;
  std::string b;
  int coord = 0;
  double var_a = 0.0;
  double var_b = 0.0;
  double diff = 0.0;     // var_a - var_b
  double diff_se = 0.0;  // paired
  double ratio = 0.0;    // var_a / var_b
  double ratio_se = 0.0;
};

struct EfficiencyReport {
  std::size_t n = 0;
  std::size_t reps = 0;
  std::size_t used_reps = 0;  // replications where every method converged
  std::vector<MethodSummary> methods;
  std::vector<VarianceComparison> comparisons;  // every ordered pair
  const VarianceComparison* find(const std::string& a, const std::string& b, int coord) const;
};

/// Fits every method on each replication. Linear-link beta-free methods use
/// the closed form. More than 5% replications with a failed fit throws.
EfficiencyReport efficiency_comparison(const GeneratorConfig& config, const std::vector<NamedMethod>& methods,
                                       std::size_t reps, unsigned workers, const SolverOptions& opt = {});

/// Sample mean and standard error of e_i' A_i^-1 e_i (e_i = y_i - mu_i(beta0))
/// over all individuals of `reps` datasets.
struct TraceCheck {
  double mean = 0.0;
  double se = 0.0;
  double expected = 0.0;  // m
  bool pass = false;
};
TraceCheck residual_trace_check(const GeneratorConfig& config, std::size_t reps, unsigned workers,
                                double threshold = 3.0);

}  // namespace aqsgee

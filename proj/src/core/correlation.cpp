#include "correlation.hpp"

#include <cmath>

#include "error.hpp"
#include "linalg.hpp"

namespace aqsgee {

Structure parse_structure(std::string_view name) {
  if (name == "exchangeable") return Structure::kExchangeable;
  if (name == "ar1") return Structure::kAr1;
  if (name == "custom") return Structure::kCustom;
  throw InvalidArgument("unknown correlation structure '" + std::string(name) +
                        "' (expected exchangeable, ar1 or custom)");
}

std::string_view structure_name(Structure s) {
  switch (s) {
    case Structure::kExchangeable: return "exchangeable";
    case Structure::kAr1: return "ar1";
    case Structure::kCustom: return "custom";
  }
  return "custom";
}

std::string_view correlation_kind_name(CorrelationKind kind) {
  switch (kind) {
    case CorrelationKind::kIdentity: return "identity";
    case CorrelationKind::kFixed: return "fixed";
    case CorrelationKind::kPle: return "ple";
    case CorrelationKind::kAqs: return "aqs";
  }
  return "identity";
}

Mat structured_correlation(Structure structure, double alpha, std::size_t m) {
  if (m == 0) throw InvalidArgument("correlation dimension must be at least 1");
  if (!std::isfinite(alpha)) throw InvalidArgument("correlation parameter must be finite");
  const auto mm = static_cast<Eigen::Index>(m);
  Mat r(mm, mm);
  switch (structure) {
    case Structure::kExchangeable: {
      const double lower = m > 1 ? -1.0 / static_cast<double>(m - 1) : -1.0;
      if (!(alpha > lower && alpha < 1.0))
        throw InvalidArgument("exchangeable alpha = " + format_double(alpha) + " outside (" + format_double(lower) +
                              ", 1) for m = " + std::to_string(m));
      r.setConstant(alpha);
      r.diagonal().setOnes();
      return r;
    }
    case Structure::kAr1: {
      if (!(std::abs(alpha) < 1.0)) throw InvalidArgument("ar1 alpha = " + format_double(alpha) + " needs |alpha| < 1");
      for (Eigen::Index j = 0; j < mm; ++j)
        for (Eigen::Index k = 0; k < mm; ++k) r(j, k) = std::pow(alpha, static_cast<double>(std::abs(j - k)));
      return r;
    }
    case Structure::kCustom:
      break;
  }
  throw InvalidArgument("custom structure needs an explicit matrix");
}

void validate_correlation_matrix(const Mat& r, std::size_t m) {
  if (static_cast<std::size_t>(r.rows()) != m || static_cast<std::size_t>(r.cols()) != m)
    throw InvalidArgument("correlation matrix must be " + std::to_string(m) + " x " + std::to_string(m));
  if (!r.allFinite()) throw InvalidArgument("correlation matrix has non-finite entries");
  if ((r - r.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw InvalidArgument("correlation matrix is not symmetric");
  if ((r.diagonal().array() - 1.0).abs().maxCoeff() > 1e-12)
    throw InvalidArgument("correlation matrix must have a unit diagonal");
  const double lmin = lambda_min(r);
  if (!(lmin > 1e-10)) throw InvalidArgument("correlation matrix is not positive definite (lambda_min = " +
                                             format_double(lmin) + ")");
}

namespace {

Mat sample_sum(const LongitudinalDataset& data, std::size_t k, const Vec& beta, const Link& link) {
  check_beta(data, beta);
  if (k > data.n()) throw InvalidArgument("prefix length exceeds n");
  const auto m = static_cast<Eigen::Index>(data.m());
  Mat s = Mat::Zero(m, m);
  for (std::size_t i = 0; i < k; ++i) {
    const Vec e = standardized_residual(data, i, beta, link);
    s.noalias() += e * e.transpose();
  }
  return s;
}

Mat sample_sum_derivative(const LongitudinalDataset& data, std::size_t k, const Vec& beta, const Link& link,
                          std::size_t l) {
  check_beta(data, beta);
  if (k > data.n()) throw InvalidArgument("prefix length exceeds n");
  if (l >= data.p()) throw InvalidArgument("coordinate index out of range");
  const auto m = static_cast<Eigen::Index>(data.m());
  Mat t = Mat::Zero(m, m);
  for (std::size_t i = 0; i < k; ++i) {
    const IndividualState s = evaluate_individual(data, i, beta, link);
    const Vec de = s.dehat.cwiseProduct(data.X(i).col(static_cast<Eigen::Index>(l)));
    const Mat u = de * s.ehat.transpose();
    t += u + u.transpose();
  }
  return t;
}

}  // namespace

Mat aqs_correlation(const LongitudinalDataset& data, std::size_t k, const Vec& beta, const Link& link) {
  const auto m = static_cast<Eigen::Index>(data.m());
  if (k < 2) {
    if (k > data.n()) throw InvalidArgument("prefix length exceeds n");
    return Mat::Identity(m, m);
  }
  return sample_sum(data, k, beta, link) / static_cast<double>(k);
}

Mat aqs_correlation_derivative(const LongitudinalDataset& data, std::size_t k, const Vec& beta, const Link& link,
                               std::size_t l) {
  const auto m = static_cast<Eigen::Index>(data.m());
  if (l >= data.p()) throw InvalidArgument("coordinate index out of range");
  if (k < 2) return Mat::Zero(m, m);
  return sample_sum_derivative(data, k, beta, link, l) / static_cast<double>(k);
}

std::vector<Mat> ple_correlation_sequence(const LongitudinalDataset& data, const Vec& beta_tilde, const Link& link) {
  check_beta(data, beta_tilde);
  const auto m = static_cast<Eigen::Index>(data.m());
  std::vector<Mat> seq;
  seq.reserve(data.n());
  Mat s = Mat::Zero(m, m);
  for (std::size_t k = 0; k < data.n(); ++k) {
    seq.push_back(k < 2 ? Mat(Mat::Identity(m, m)) : Mat(s / static_cast<double>(k)));
    const Vec e = standardized_residual(data, k, beta_tilde, link);
    s.noalias() += e * e.transpose();
  }
  return seq;
}

Mat inverse_derivative(const Mat& rinv, const Mat& dr) {
  if (rinv.rows() != rinv.cols() || dr.rows() != rinv.rows() || dr.cols() != rinv.cols())
    throw InvalidArgument("inverse_derivative needs square matrices of equal size");
  return -rinv * dr * rinv;
}

double Regularization::resolved_shrinkage(std::size_t m) const {
  return shrinkage < 0.0 ? 2.0 * static_cast<double>(m) : shrinkage;
}

double Regularization::resolved_ridge(std::size_t m) const {
  if (ridge >= 0.0) return ridge;
  return resolved_shrinkage(m) == 0.0 ? 1e-6 : 0.0;
}

CorrelationModel CorrelationModel::identity(std::size_t m) {
  if (m == 0) throw InvalidArgument("correlation dimension must be at least 1");
  CorrelationModel c;
  c.kind_ = CorrelationKind::kIdentity;
  c.m_ = m;
  return c;
}

CorrelationModel CorrelationModel::fixed(const Mat& r, Structure structure, double alpha) {
  validate_correlation_matrix(r, static_cast<std::size_t>(r.rows()));
  CorrelationModel c;
  c.kind_ = CorrelationKind::kFixed;
  c.m_ = static_cast<std::size_t>(r.rows());
  c.structure_ = structure;
  c.alpha_ = alpha;
  c.fixed_ = r;
  c.fixed_inv_ = symmetric_inverse(r).inverse;
  return c;
}

void CorrelationModel::finish(Mat& r, std::size_t k, bool& ridge_event) const {
  // r holds S_k on entry.
  const double kappa = shrinkage_;
  r.diagonal().array() += kappa;
  r /= static_cast<double>(k) + kappa;
  ridge_event = false;
  if (ridge_ > 0.0) r.diagonal().array() += ridge_;
}

CorrelationModel CorrelationModel::ple(std::shared_ptr<const LongitudinalDataset> data, const Vec& beta_tilde,
                                       const Link& link, Regularization reg) {
  if (!data) throw InvalidArgument("PLE needs a dataset");
  check_beta(*data, beta_tilde);
  CorrelationModel c;
  c.kind_ = CorrelationKind::kPle;
  c.m_ = data->m();
  c.shrinkage_ = reg.resolved_shrinkage(c.m_);
  c.ridge_ = reg.resolved_ridge(c.m_);
  c.pilot_ = beta_tilde;
  c.link_ = link;
  const auto m = static_cast<Eigen::Index>(c.m_);
  const std::size_t n = data->n();
  c.ple_.reserve(n);
  c.ple_inv_.reserve(n);
  Mat s = Mat::Zero(m, m);
  for (std::size_t k = 0; k < n; ++k) {
    Mat r;
    bool ridge_event = false;
    if (k < 2) {
      r = Mat::Identity(m, m);
    } else {
      r = s;
      c.finish(r, k, ridge_event);
    }
    const Vec ev = eigenvalues(r);
    const double lmin = ev(0);
    c.ple_lmin_.push_back(lmin);
    c.ple_lmax_.push_back(ev(ev.size() - 1));
    c.ple_ridge_.push_back(c.ridge_ > 0.0 && lmin - c.ridge_ < kSingularTol ? 1 : 0);
    c.ple_inv_.push_back(lmin >= kSingularTol ? symmetric_inverse(r, kSingularTol, k).inverse : Mat());
    c.ple_.push_back(std::move(r));
    const Vec e = standardized_residual(*data, k, beta_tilde, link);
    s.noalias() += e * e.transpose();
  }
  return c;
}

CorrelationModel CorrelationModel::aqs(std::shared_ptr<const LongitudinalDataset> data, const Link& link,
                                       Regularization reg) {
  if (!data) throw InvalidArgument("AQS needs a dataset");
  CorrelationModel c;
  c.kind_ = CorrelationKind::kAqs;
  c.m_ = data->m();
  c.shrinkage_ = reg.resolved_shrinkage(c.m_);
  c.ridge_ = reg.resolved_ridge(c.m_);
  c.data_ = std::move(data);
  c.link_ = link;
  return c;
}

Mat CorrelationModel::working_correlation(std::size_t t, const Vec& beta) const {
  const auto m = static_cast<Eigen::Index>(m_);
  switch (kind_) {
    case CorrelationKind::kIdentity:
      return Mat::Identity(m, m);
    case CorrelationKind::kFixed:
      return fixed_;
    case CorrelationKind::kPle:
      if (t >= ple_.size()) throw InvalidArgument("individual index beyond the PLE sequence");
      return ple_[t];
    case CorrelationKind::kAqs: {
      data_->check_index(t);
      if (t < 2) return Mat::Identity(m, m);
      Mat r = sample_sum(*data_, t, beta, link_);
      bool ridge_event = false;
      finish(r, t, ridge_event);
      return r;
    }
  }
  return Mat::Identity(m, m);
}

PrefixCorrelation CorrelationModel::working_correlation_inverse(std::size_t t, const Vec& beta) const {
  PrefixCorrelation pc;
  pc.t = t;
  pc.r = working_correlation(t, beta);
  const SymmetricInverse inv = symmetric_inverse(pc.r, kSingularTol, t);
  pc.rinv = inv.inverse;
  pc.lambda_min = inv.lambda_min;
  pc.lambda_max = inv.lambda_max;
  pc.log_condition = inv.log_condition;
  pc.ridge_event = (kind_ == CorrelationKind::kAqs || kind_ == CorrelationKind::kPle) && t >= 2 && ridge_ > 0.0 &&
                   inv.lambda_min - ridge_ < kSingularTol;
  return pc;
}

Mat CorrelationModel::working_correlation_derivative(std::size_t t, const Vec& beta, std::size_t l) const {
  const auto m = static_cast<Eigen::Index>(m_);
  if (kind_ != CorrelationKind::kAqs) return Mat::Zero(m, m);
  data_->check_index(t);
  if (l >= data_->p()) throw InvalidArgument("coordinate index out of range");
  if (t < 2) return Mat::Zero(m, m);
  return sample_sum_derivative(*data_, t, beta, link_, l) / (static_cast<double>(t) + shrinkage_);
}

std::size_t CorrelationModel::sweep(const LongitudinalDataset& data, const Vec& beta, const Link& link,
                                    bool derivatives, const Visitor& visit) const {
  if (data.m() != m_) throw InvalidArgument("dataset m does not match the correlation model");
  check_beta(data, beta);
  const auto m = static_cast<Eigen::Index>(m_);
  const std::size_t p = data.p();
  const bool want_dr = derivatives && kind_ == CorrelationKind::kAqs;
  std::size_t ridge_events = 0;

  Mat s = Mat::Zero(m, m);
  std::vector<Mat> tl(want_dr ? p : 0, Mat::Zero(m, m));
  PrefixCorrelation pc;
  if (derivatives) pc.dr.assign(p, Mat::Zero(m, m));

  const Mat eye = Mat::Identity(m, m);
  for (std::size_t t = 0; t < data.n(); ++t) {
    const IndividualState state = evaluate_individual(data, t, beta, link);
    pc.t = t;
    pc.ridge_event = false;
    switch (kind_) {
      case CorrelationKind::kIdentity:
        if (t == 0) {
          pc.r = eye;
          pc.rinv = eye;
          pc.lambda_min = pc.lambda_max = 1.0;
          pc.log_condition = 0.0;
        }
        break;
      case CorrelationKind::kFixed:
        if (t == 0) {
          const SymmetricInverse inv = symmetric_inverse(fixed_);
          pc.r = fixed_;
          pc.rinv = fixed_inv_;
          pc.lambda_min = inv.lambda_min;
          pc.lambda_max = inv.lambda_max;
          pc.log_condition = inv.log_condition;
        }
        break;
      case CorrelationKind::kPle: {
        if (t >= ple_.size()) throw InvalidArgument("dataset is longer than the PLE sequence");
        if (ple_inv_[t].size() == 0)
          throw SingularityError("working correlation for individual " + std::to_string(t + 1) +
                                     " is singular (lambda_min = " + format_double(ple_lmin_[t]) + ")",
                                 t, ple_lmin_[t]);
        pc.r = ple_[t];
        pc.rinv = ple_inv_[t];
        pc.lambda_min = ple_lmin_[t];
        pc.lambda_max = ple_lmax_[t];
        pc.log_condition = std::log(pc.lambda_max / pc.lambda_min);
        pc.ridge_event = ple_ridge_[t] != 0;
        break;
      }
      case CorrelationKind::kAqs: {
        if (t < 2) {
          pc.r = eye;
          pc.rinv = eye;
          pc.lambda_min = pc.lambda_max = 1.0;
          pc.log_condition = 0.0;
          if (want_dr)
            for (auto& d : pc.dr) d.setZero();
        } else {
          pc.r = s;
          bool unused = false;
          finish(pc.r, t, unused);
          const SymmetricInverse inv = symmetric_inverse(pc.r, kSingularTol, t);
          pc.rinv = inv.inverse;
          pc.lambda_min = inv.lambda_min;
          pc.lambda_max = inv.lambda_max;
          pc.log_condition = inv.log_condition;
          pc.ridge_event = ridge_ > 0.0 && inv.lambda_min - ridge_ < kSingularTol;
          if (want_dr) {
            const double denom = static_cast<double>(t) + shrinkage_;
            for (std::size_t l = 0; l < p; ++l) pc.dr[l] = tl[l] / denom;
          }
        }
        break;
      }
    }
    if (pc.ridge_event) ++ridge_events;
    visit(state, pc);
    if (kind_ == CorrelationKind::kAqs) {
      s.noalias() += state.ehat * state.ehat.transpose();
      if (want_dr) {
        const Mat& x = data.X(t);
        for (std::size_t l = 0; l < p; ++l) {
          const Vec de = state.dehat.cwiseProduct(x.col(static_cast<Eigen::Index>(l)));
          const Mat u = de * state.ehat.transpose();
          tl[l] += u + u.transpose();
        }
      }
    }
  }
  return ridge_events;
}

}  // namespace aqsgee

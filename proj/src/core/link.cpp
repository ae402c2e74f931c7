#include "link.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "error.hpp"

namespace aqsgee {

namespace {

constexpr double kExpLimit = 700.0;
constexpr double kProbitLimit = 37.0;

void check_range(LinkKind kind, double u) {
  if (!std::isfinite(u)) throw InvalidArgument("link argument is not finite");
  switch (kind) {
    case LinkKind::kLinear:
      return;
    case LinkKind::kLog:
    case LinkKind::kLogistic:
      if (std::abs(u) > kExpLimit)
        throw OverflowError(std::string(link_name(kind)) + " link argument " + std::to_string(u) +
                            " exceeds |u| <= 700");
      return;
    case LinkKind::kProbit:
      if (std::abs(u) > kProbitLimit)
        throw OverflowError("probit link argument " + std::to_string(u) + " exceeds |u| <= 37");
      return;
  }
}

double normal_density(double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

LinkKind parse_link(std::string_view name) {
  if (name == "linear" || name == "identity") return LinkKind::kLinear;
  if (name == "log") return LinkKind::kLog;
  if (name == "logistic" || name == "logit") return LinkKind::kLogistic;
  if (name == "probit") return LinkKind::kProbit;
  throw InvalidArgument("unknown link '" + std::string(name) + "'");
}

std::string_view link_name(LinkKind kind) {
  switch (kind) {
    case LinkKind::kLinear: return "linear";
    case LinkKind::kLog: return "log";
    case LinkKind::kLogistic: return "logistic";
    case LinkKind::kProbit: return "probit";
  }
  return "unknown";
}

Link::Values Link::values(double u) const {
  check_range(kind_, u);
  switch (kind_) {
    case LinkKind::kLinear:
      return {u, 1.0, 0.0, 0.0};
    case LinkKind::kLog: {
      const double e = std::exp(u);
      return {e, e, e, e};
    }
    case LinkKind::kLogistic: {
      // e = exp(-|u|) never overflows; mu' = e / (1 + e)^2 for either sign.
      const double e = std::exp(-std::abs(u));
      const double mu = u >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
      const double d1 = e / ((1.0 + e) * (1.0 + e));
      const double one_minus_2mu = -std::tanh(0.5 * u);
      return {mu, d1, d1 * one_minus_2mu, d1 * (1.0 - 6.0 * d1)};
    }
    case LinkKind::kProbit: {
      const double phi = normal_density(u);
      const double cdf = 0.5 * std::erfc(-u / std::numbers::sqrt2);
      return {cdf, phi, -u * phi, (u * u - 1.0) * phi};
    }
  }
  return {0, 0, 0, 0};
}

double Link::eval(int order, double u) const {
  if (order < 0 || order > 3) throw InvalidArgument("link derivative order must be 0..3");
  const Values v = values(u);
  switch (order) {
    case 0: return v.mu;
    case 1: return v.d1;
    case 2: return v.d2;
    default: return v.d3;
  }
}

double link_eval(LinkKind kind, int order, double u) { return Link(kind).eval(order, u); }

}  // namespace aqsgee

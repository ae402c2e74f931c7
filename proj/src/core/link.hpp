#pragma once

#include <string>
#include <string_view>

namespace aqsgee {

enum class LinkKind { kLinear, kLog, kLogistic, kProbit };

LinkKind parse_link(std::string_view name);
std::string_view link_name(LinkKind kind);

/// Mean function mu of the marginal model together with its first three
/// derivatives. mu' is the conditional variance (dispersion fixed to 1).
///
/// Arguments outside the representable range throw OverflowError instead of
/// returning inf or a zero variance: |u| > 700 for log/logistic, |u| > 37 for
/// probit (where the normal density underflows).
class Link {
 public:
  explicit Link(LinkKind kind = LinkKind::kLinear) : kind_(kind) {}

  LinkKind kind() const noexcept { return kind_; }
  std::string_view name() const noexcept { return link_name(kind_); }

  /// order 0..3 selects mu, mu', mu'', mu'''.
  double eval(int order, double u) const;

  double mean(double u) const { return eval(0, u); }
  double d1(double u) const { return eval(1, u); }
  double d2(double u) const { return eval(2, u); }
  double d3(double u) const { return eval(3, u); }

  /// All four at once; cheaper than four eval() calls for the sigmoid links.
  struct Values {
    double mu, d1, d2, d3;
  };
  Values values(double u) const;

 private:
  LinkKind kind_;
};

double link_eval(LinkKind kind, int order, double u);

}  // namespace aqsgee

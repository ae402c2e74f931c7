#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "error.hpp"
#include "model.hpp"
#include "testing.hpp"

using namespace aqsgee;
using testing::Rng;

TEST_CASE("link values at reference points") {
  CHECK(link_eval(LinkKind::kLogistic, 0, 0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(link_eval(LinkKind::kProbit, 1, 0.0) == doctest::Approx(0.3989422804014327).epsilon(1e-15));
  CHECK(link_eval(LinkKind::kProbit, 1, 0.0) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)));
  CHECK(link_eval(LinkKind::kLog, 3, 0.0) == 1.0);
  CHECK(link_eval(LinkKind::kLinear, 2, 7.3) == 0.0);
  CHECK(link_eval(LinkKind::kLinear, 0, 7.3) == 7.3);
  CHECK(link_eval(LinkKind::kLogistic, 1, 0.0) == doctest::Approx(0.25));
  CHECK(link_eval(LinkKind::kProbit, 0, 1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-14));
}

TEST_CASE("link names round trip and reject unknowns") {
  for (LinkKind k : testing::kAllLinks) CHECK(parse_link(link_name(k)) == k);
  CHECK_THROWS_AS(parse_link("cauchit"), InvalidArgument);
}

TEST_CASE("log link refuses to overflow") {
  CHECK_THROWS_AS(link_eval(LinkKind::kLog, 0, 701.0), OverflowError);
  CHECK_NOTHROW(link_eval(LinkKind::kLog, 0, 700.0));
  CHECK_THROWS_AS(link_eval(LinkKind::kLinear, 0, std::nan("")), InvalidArgument);
  CHECK_THROWS_AS(link_eval(LinkKind::kLogistic, 4, 0.0), InvalidArgument);
}

TEST_CASE("derivatives agree with central differences on |u| <= 10") {
  const double h = 1e-5;
  for (LinkKind k : testing::kAllLinks) {
    const Link link(k);
    for (double u = -10.0; u <= 10.0; u += 0.37) {
      for (int order = 1; order <= 3; ++order) {
        const double fd = (link.eval(order - 1, u + h) - link.eval(order - 1, u - h)) / (2.0 * h);
        const double exact = link.eval(order, u);
        CHECK(std::abs(fd - exact) <= 1e-6 * std::abs(exact) + 1e-9);
      }
      CHECK(link.d1(u) > 0.0);
    }
  }
}

TEST_CASE("variance stays positive far into the tails") {
  for (double u : {-36.0, -30.0, 30.0, 36.0}) CHECK(link_eval(LinkKind::kProbit, 1, u) > 0.0);
  for (double u : {-600.0, 600.0}) CHECK(link_eval(LinkKind::kLogistic, 1, u) > 0.0);
}

TEST_CASE("model quantities on hand-built individuals") {
  SUBCASE("identity design returns beta for the linear link") {
    const Vec beta = Vec::LinSpaced(3, -1.0, 2.0);
    LongitudinalDataset d({Mat::Identity(3, 3)}, {Vec::Zero(3)});
    CHECK((marginal_mean(d, 0, beta, Link(LinkKind::kLinear)) - beta).norm() == 0.0);
    CHECK((variance_matrix(d, 0, beta, Link(LinkKind::kLinear)) - Mat::Identity(3, 3)).norm() == 0.0);
    CHECK((mean_jacobian(d, 0, beta, Link(LinkKind::kLinear)) - Mat::Identity(3, 3)).norm() == 0.0);
  }
  SUBCASE("zero covariates under the logistic link") {
    LongitudinalDataset d({Mat::Zero(4, 2)}, {Vec::Ones(4)});
    const Vec beta = Vec::Constant(2, 3.0);
    const Link lg(LinkKind::kLogistic);
    CHECK((marginal_mean(d, 0, beta, lg).array() == 0.5).all());
    CHECK((variance_matrix(d, 0, beta, lg) - 0.25 * Mat::Identity(4, 4)).norm() == 0.0);
    CHECK((standardized_residual(d, 0, beta, lg).array() - 1.0).abs().maxCoeff() < 1e-15);
    CHECK(mean_jacobian(d, 0, beta, lg).norm() == 0.0);
  }
  SUBCASE("log link mean") {
    Mat x(2, 1);
    x << 0.0, 1.0;
    LongitudinalDataset d({x}, {Vec::Zero(2)});
    const Vec mu = marginal_mean(d, 0, Vec::Ones(1), Link(LinkKind::kLog));
    CHECK(mu(0) == 1.0);
    CHECK(mu(1) == doctest::Approx(std::exp(1.0)).epsilon(1e-15));
  }
  SUBCASE("log link variance at zero predictor") {
    LongitudinalDataset d({Mat::Zero(3, 2)}, {Vec::Zero(3)});
    CHECK((variance_matrix(d, 0, Vec::Zero(2), Link(LinkKind::kLog)) - Mat::Identity(3, 3)).norm() == 0.0);
  }
}

TEST_CASE("residual is zero at the mean and unchanged under the linear link") {
  Rng rng(11);
  for (LinkKind k : testing::kAllLinks) {
    const Link link(k);
    const Vec beta = rng.normal_vec(2) * 0.5;
    auto d = testing::random_dataset(rng, 3, 4, 2, k, beta);
    d = d.with_response(1, marginal_mean(d, 1, beta, link));
    CHECK(standardized_residual(d, 1, beta, link).cwiseAbs().maxCoeff() < 1e-15);
  }
  auto d = testing::random_dataset(rng, 2, 3, 2, LinkKind::kLinear, Vec::Ones(2));
  const Vec e = d.y(0) - d.X(0) * Vec::Ones(2);
  CHECK((standardized_residual(d, 0, Vec::Ones(2), Link(LinkKind::kLinear)) - e).norm() < 1e-15);
}

TEST_CASE("mean Jacobian matches finite differences of the mean on every link") {
  Rng rng(3);
  for (LinkKind k : testing::kAllLinks) {
    const Link link(k);
    for (int rep = 0; rep < 5; ++rep) {
      const Vec beta = rng.normal_vec(3) * 0.4;
      const auto d = testing::random_dataset(rng, 2, 4, 3, k, beta);
      const Mat fd = testing::fd_jacobian([&](const Vec& b) { return marginal_mean(d, 1, b, link); }, beta, 1e-5);
      const Mat exact = mean_jacobian(d, 1, beta, link);
      CHECK(testing::rel_err(exact, fd) < 1e-7);
      const Mat a = variance_matrix(d, 1, beta, link);
      CHECK(a.diagonal().minCoeff() > 0.0);
      CHECK((a - Mat(a.diagonal().asDiagonal())).norm() == 0.0);
    }
  }
}

TEST_CASE("individual state carries consistent derivatives") {
  Rng rng(5);
  for (LinkKind k : testing::kAllLinks) {
    const Link link(k);
    const Vec beta = rng.normal_vec(2) * 0.3;
    const auto d = testing::random_dataset(rng, 1, 3, 2, k, beta);
    const IndividualState s = evaluate_individual(d, 0, beta, link);
    const Mat fd = testing::fd_jacobian([&](const Vec& b) { return standardized_residual(d, 0, b, link); }, beta, 1e-6);
    const Mat exact = s.dehat.asDiagonal() * d.X(0);
    CHECK(testing::rel_err(exact, fd) < 1e-7);
  }
}

TEST_CASE("dataset shape checks") {
  CHECK_THROWS_AS(LongitudinalDataset({}, {}), InvalidArgument);
  CHECK_THROWS_AS(LongitudinalDataset({Mat::Zero(2, 1), Mat::Zero(3, 1)}, {Vec::Zero(2), Vec::Zero(3)}),
                  InvalidArgument);
  CHECK_THROWS_AS(LongitudinalDataset({Mat::Zero(2, 1)}, {Vec::Zero(3)}), InvalidArgument);
  LongitudinalDataset d({Mat::Zero(2, 1)}, {Vec::Zero(2)});
  CHECK_THROWS_AS(marginal_mean(d, 1, Vec::Zero(1), Link()), InvalidArgument);
  CHECK_THROWS_AS(marginal_mean(d, 0, Vec::Zero(2), Link()), InvalidArgument);
}

TEST_CASE("CSV round trip is exact") {
  Rng rng(9);
  const auto d = testing::random_dataset(rng, 4, 3, 2, LinkKind::kLogistic, Vec::Ones(2));
  std::ostringstream out;
  write_dataset_csv(d, out);
  std::istringstream in(out.str());
  const auto back = read_dataset_csv(in);
  REQUIRE(back.n() == 4);
  REQUIRE(back.m() == 3);
  REQUIRE(back.p() == 2);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK((back.X(i) - d.X(i)).norm() == 0.0);
    CHECK((back.y(i) - d.y(i)).norm() == 0.0);
  }
}

TEST_CASE("CSV loader reports the offending row") {
  auto load = [](const std::string& text) {
    std::istringstream in(text);
    return read_dataset_csv(in, "t.csv");
  };
  auto message = [&](const std::string& text) -> std::string {
    try {
      load(text);
    } catch (const LoadError& e) {
      return e.what();
    }
    return "";
  };
  CHECK(message("subject,time,y,x1\na,1,0,1\na,2,0,1\nb,1,0,1\n").find("t.csv:4") != std::string::npos);
  CHECK(message("subject,time,y,x1\na,1,0,1\na,2,zz,1\n").find("t.csv:3: y 'zz'") != std::string::npos);
  CHECK(message("subject,time,x1\n").find("header") != std::string::npos);
  CHECK(message("subject,time,y,x1\na,1,0,1\nb,1,0,1\na,1,0,1\n").find("reappears") != std::string::npos);
  CHECK(message("subject,time,y,x1\na,2,0,1\na,1,0,1\n").find("increasing") != std::string::npos);
  CHECK(message("subject,time,y,x1\na,1,0\n").find("expected 4 fields") != std::string::npos);
  CHECK(load("subject,time,y,x1\r\na,1,0,1\r\na,2,1,1\r\n").m() == 2);
}

#include <cmath>
#include <cstring>
#include <string>
#include <thread>

#include "aqsgee/aqsgee.h"
#include "doctest.h"
#include "json.hpp"

namespace {
const std::string kFixtures = AQSGEE_FIXTURES;
}

TEST_CASE("link evaluation") {
  double v = 0.0;
  REQUIRE(aqsgee_link_eval("logistic", 0, 0.0, &v) == AQSGEE_OK);
  CHECK(v == 0.5);
  REQUIRE(aqsgee_link_eval("logistic", 1, 0.0, &v) == AQSGEE_OK);
  CHECK(v == 0.25);
  REQUIRE(aqsgee_link_eval("log", 2, 1.0, &v) == AQSGEE_OK);
  CHECK(v == doctest::Approx(std::exp(1.0)));
  CHECK(aqsgee_link_eval("cauchit", 0, 0.0, &v) == AQSGEE_ERR_INVALID_ARGUMENT);
  CHECK(std::string(aqsgee_last_error()).find("cauchit") != std::string::npos);
  CHECK(aqsgee_link_eval("log", 0, 800.0, &v) == AQSGEE_ERR_OVERFLOW);
  CHECK(aqsgee_link_eval(nullptr, 0, 0.0, &v) == AQSGEE_ERR_INVALID_ARGUMENT);
  CHECK(aqsgee_link_eval("linear", 0, 0.0, nullptr) == AQSGEE_ERR_INVALID_ARGUMENT);
}

TEST_CASE("dataset and fit handles") {
  aqsgee_dataset* data = nullptr;
  REQUIRE(aqsgee_dataset_load((kFixtures + "/ols.csv").c_str(), &data) == AQSGEE_OK);
  size_t n = 0, m = 0, p = 0;
  REQUIRE(aqsgee_dataset_dims(data, &n, &m, &p) == AQSGEE_OK);
  CHECK(n == 15);
  CHECK(m == 3);
  CHECK(p == 3);

  aqsgee_fit* fit = nullptr;
  REQUIRE(aqsgee_fit_create(data, R"({"model": {"method": "indep"}})", &fit) == AQSGEE_OK);
  CHECK(aqsgee_fit_converged(fit) == 1);
  REQUIRE(aqsgee_fit_dim(fit) == 3);
  double beta[3] = {0, 0, 0}, se[3] = {0, 0, 0};
  REQUIRE(aqsgee_fit_beta(fit, beta, 3) == AQSGEE_OK);
  REQUIRE(aqsgee_fit_se(fit, se, 3) == AQSGEE_OK);
  const auto expected = nlohmann::json::parse(R"([0.44164388236788127, 1.1204954039439294, -0.8048770677456835])");
  for (int j = 0; j < 3; ++j) {
    CHECK(std::abs(beta[j] - expected[j].get<double>()) <= 1e-10);
    CHECK(se[j] > 0.0);
  }
  char* json = nullptr;
  REQUIRE(aqsgee_fit_to_json(fit, &json) == AQSGEE_OK);
  const auto doc = nlohmann::json::parse(json);
  aqsgee_string_free(json);
  CHECK(doc["method"] == "indep");
  CHECK(doc["link"] == "linear");
  aqsgee_fit_free(fit);

  fit = nullptr;
  CHECK(aqsgee_fit_create(data, R"({"model": {"method": "aqs"}, "solver": {"max_iter": 1}})", &fit) ==
        AQSGEE_ERR_NOT_CONVERGED);
  REQUIRE(fit != nullptr);
  CHECK(aqsgee_fit_converged(fit) == 0);
  CHECK(aqsgee_fit_se(fit, se, 3) == AQSGEE_ERR_NOT_CONVERGED);
  aqsgee_fit_free(fit);

  fit = nullptr;
  CHECK(aqsgee_fit_create(data, R"({"data": "x.csv"})", &fit) == AQSGEE_ERR_CONFIG);
  CHECK(fit == nullptr);
  CHECK(aqsgee_fit_create(data, "{oops", &fit) == AQSGEE_ERR_CONFIG);
  CHECK(aqsgee_fit_create(data, R"({"beta_init": [1]})", &fit) == AQSGEE_ERR_INVALID_ARGUMENT);
  aqsgee_dataset_free(data);
}

TEST_CASE("load errors and null handles") {
  aqsgee_dataset* data = reinterpret_cast<aqsgee_dataset*>(0x1);
  CHECK(aqsgee_dataset_load((kFixtures + "/corrupt_missing_row.csv").c_str(), &data) == AQSGEE_ERR_LOAD);
  CHECK(data == nullptr);
  CHECK(std::string(aqsgee_last_error()).find(":11:") != std::string::npos);
  CHECK(aqsgee_dataset_dims(nullptr, nullptr, nullptr, nullptr) == AQSGEE_ERR_INVALID_ARGUMENT);
  CHECK(aqsgee_fit_converged(nullptr) == 0);
  CHECK(aqsgee_fit_dim(nullptr) == 0);
  aqsgee_dataset_free(nullptr);
  aqsgee_fit_free(nullptr);
  aqsgee_string_free(nullptr);
}

TEST_CASE("last error is per thread") {
  double v = 0.0;
  CHECK(aqsgee_link_eval("nope", 0, 0.0, &v) != AQSGEE_OK);
  std::string other;
  std::thread([&] { other = aqsgee_last_error(); }).join();
  CHECK(other.empty());
  CHECK(std::strlen(aqsgee_last_error()) > 0);
  CHECK(aqsgee_link_eval("linear", 0, 1.0, &v) == AQSGEE_OK);
  CHECK(std::strlen(aqsgee_last_error()) == 0);
}

TEST_CASE("run_command through the C boundary") {
  char* summary = nullptr;
  const std::string out = std::string(AQSGEE_BINARY_DIR) + "/capi_run";
  REQUIRE(aqsgee_run_command("simulate", (kFixtures + "/simulate.json").c_str(), out.c_str(), 2, &summary) ==
          AQSGEE_OK);
  const auto doc = nlohmann::json::parse(summary);
  aqsgee_string_free(summary);
  CHECK(doc["outputs"] == nlohmann::json::array({"dataset.csv", "manifest.json"}));
  CHECK(aqsgee_run_command("fit", (kFixtures + "/fit_corrupt.json").c_str(), out.c_str(), 1, nullptr) ==
        AQSGEE_ERR_LOAD);
}

#include <filesystem>
#include <fstream>

#include "commands.hpp"
#include "config.hpp"
#include "doctest.h"
#include "error.hpp"

using namespace aqsgee;
namespace fs = std::filesystem;

namespace {

Json generator() {
  return Json::parse(R"({"n": 20, "m": 3, "p": 2, "beta0": [1, 0.5], "rbar": {"structure": "ar1", "alpha": 0.4}})");
}

Json compare_doc() {
  return Json{{"generator", generator()}, {"reps", 10}, {"methods", Json::array({Json{{"method", "aqs"}}})}};
}

}  // namespace

TEST_CASE("fit config defaults and overrides") {
  const FitConfig c = parse_fit_config(Json::parse(R"({"data": "d.csv"})"), "/base");
  CHECK(c.data == fs::path("/base/d.csv"));
  CHECK(c.link == LinkKind::kLinear);
  CHECK(c.model.method == Method::kAqs);
  CHECK(c.solver.tol_g == 1e-10);

  const FitConfig d = parse_fit_config(Json::parse(R"({
    "data": "/abs/d.csv", "link": "logit",
    "model": {"method": "gee", "structure": "ar1", "alpha": 0.3},
    "solver": {"tol": 1e-8, "max_iter": 7, "scoring": true, "ci_level": 0.9},
    "beta_init": [0.1, 0.2]})"),
                                       "/base");
  CHECK(d.data == fs::path("/abs/d.csv"));
  CHECK(d.link == LinkKind::kLogistic);
  CHECK(d.model.structure == Structure::kAr1);
  CHECK(d.model.alpha == 0.3);
  CHECK(d.solver.max_iter == 7);
  CHECK(d.solver.scoring);
  CHECK(d.solver.ci_level == 0.9);
  CHECK(d.beta_init->size() == 2);
}

TEST_CASE("config validation rejects bad documents") {
  const fs::path base = ".";
  auto bad_fit = [&](const char* text) { return parse_fit_config(Json::parse(text), base); };
  CHECK_THROWS_AS(bad_fit(R"({"data": "d.csv", "colour": 1})"), ConfigError);
  CHECK_THROWS_AS(bad_fit(R"({"data": "d.csv", "model": {"method": "aqs", "tol": 1}})"), ConfigError);
  CHECK_THROWS_AS(bad_fit(R"({"model": {"method": "aqs"}})"), ConfigError);
  CHECK_THROWS_AS(bad_fit(R"({"data": 3})"), ConfigError);
  CHECK_THROWS_AS(bad_fit(R"({"data": "d.csv", "link": "cauchit"})"), ConfigError);
  CHECK_THROWS_AS(bad_fit(R"({"data": "d.csv", "model": {"method": "oracle"}})"), ConfigError);
  CHECK_THROWS_AS(bad_fit(R"({"data": "d.csv", "model": {"method": "gee", "structure": "custom"}})"), ConfigError);
  CHECK_THROWS_AS(bad_fit(R"({"data": "d.csv", "solver": {"max_iter": -1}})"), ConfigError);
  CHECK_THROWS_AS(bad_fit(R"({"data": "d.csv", "solver": {"ci_level": 1.5}})"), ConfigError);
  CHECK_THROWS_AS(bad_fit(R"({"command": "simulate", "data": "d.csv"})"), ConfigError);
  CHECK_THROWS_AS(bad_fit(R"([1, 2])"), ConfigError);

  try {
    bad_fit(R"({"data": "d.csv", "model": {"alpah": 0.3}})");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("model.alpah") != std::string::npos);
  }
}

TEST_CASE("compare config") {
  const CompareConfig c = parse_compare_config(compare_doc(), ".");
  CHECK(c.reps == 10);
  CHECK(c.methods.size() == 1);
  CHECK(c.methods[0].label == "aqs");
  CHECK(c.generator.seed == 1);
  CHECK(c.experiment == Experiment::kEfficiency);

  Json d = compare_doc();
  d["reps"] = 9;
  CHECK_THROWS_AS(parse_compare_config(d, "."), ConfigError);

  d = compare_doc();
  d["methods"] = Json::array({Json{{"method", "oracle"}}, Json{{"method", "gee"}, {"alpha", 0.2}}});
  const CompareConfig o = parse_compare_config(d, ".");
  CHECK(o.methods[0].spec.method == Method::kOracle);
  CHECK(o.methods[1].label == "gee(exchangeable,0.2)");

  d["methods"] = Json::array({Json{{"method", "aqs"}}, Json{{"method", "aqs"}}});
  CHECK_THROWS_AS(parse_compare_config(d, "."), ConfigError);
  d["methods"][1]["label"] = "aqs2";
  CHECK(parse_compare_config(d, ".").methods[1].label == "aqs2");

  d = compare_doc();
  d["experiment"] = "consistency";
  CHECK_THROWS_AS(parse_compare_config(d, "."), ConfigError);
  d["n_grid"] = Json::array({10, 20});
  CHECK(parse_compare_config(d, ".").n_grid.size() == 2);

  d = compare_doc();
  d["generator"]["beta0"] = Json::array({1});
  CHECK_THROWS_AS(parse_compare_config(d, "."), ConfigError);
  d = compare_doc();
  d["generator"]["rbar"]["alpha"] = 1.5;
  CHECK_THROWS_AS(parse_compare_config(d, "."), ConfigError);
  d = compare_doc();
  d["generator"]["rbar"] = Json::parse(R"({"structure": "custom", "matrix": [[1, 0.2, 0], [0.2, 1, 0.1], [0, 0.1, 1]]})");
  CHECK(parse_compare_config(d, ".").generator.rbar.custom(0, 1) == 0.2);
}

TEST_CASE("config hash ignores key order and formatting") {
  const Json a = Json::parse(R"({"b": 1, "a": [1, 2]})");
  const Json b = Json::parse("{\n  \"a\": [1,2],\n  \"b\": 1\n}");
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  CHECK(config_hash(a) != config_hash(Json::parse(R"({"b": 2, "a": [1, 2]})")));
  // FNV-1a reference value for the empty object "{}".
  CHECK(config_hash(Json::object()) == "08f44b07b5901a25");
}

TEST_CASE("run_command error mapping") {
  const fs::path dir = fs::temp_directory_path() / "aqsgee_config_test";
  fs::create_directories(dir);
  CommandOptions opt;
  opt.out = dir / "out";

  opt.config = dir / "missing.json";
  CHECK(run_command("fit", opt).exit_code == static_cast<int>(ErrorCode::kConfig));

  opt.config = dir / "broken.json";
  std::ofstream(opt.config) << "{ not json";
  CHECK(run_command("fit", opt).exit_code == static_cast<int>(ErrorCode::kConfig));

  opt.config = dir / "nodata.json";
  std::ofstream(opt.config) << R"({"data": "nowhere.csv"})";
  const CommandResult r = run_command("fit", opt);
  CHECK(r.exit_code == static_cast<int>(ErrorCode::kLoad));
  CHECK(r.summary["status"] == "error");
  CHECK(r.summary["config_hash"].is_string());

  CHECK(run_command("plot", opt).exit_code == static_cast<int>(ErrorCode::kInvalidArgument));
  fs::remove_all(dir);
}

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "diagnostics.hpp"
#include "estimator.hpp"
#include "json.hpp"
#include "simulation.hpp"

namespace aqsgee {

using Json = nlohmann::json;

// Every run is described by one JSON document. Readers reject unknown keys and
// wrong types with ConfigError; relative paths resolve against the directory
// holding the config file.

struct FitConfig {
  std::filesystem::path data;
  LinkKind link = LinkKind::kLinear;
  MethodSpec model;
  SolverOptions solver;
  std::optional<Vec> beta_init;
};

struct DiagnoseConfig {
  std::filesystem::path data;
  LinkKind link = LinkKind::kLinear;
  MethodSpec model;
  SolverOptions solver;
  std::optional<Vec> beta;  // ball centre; the fitted estimate when absent
  double delta = 0.1;
  std::vector<double> r{0.05, 0.1, 0.2, 0.5};
  BallSampling sampling;
  std::vector<std::size_t> n_grid;  // empty: n/8, n/4, n/2, n
  double c0 = 0.0;
  double bound_c = 1.0;
};

struct SimulateConfig {
  GeneratorConfig generator;
  std::uint64_t replication = 0;
};

enum class Experiment { kEfficiency, kConsistency, kIdentity };

struct CompareConfig {
  GeneratorConfig generator;
  Experiment experiment = Experiment::kEfficiency;
  std::vector<NamedMethod> methods;
  std::size_t reps = 0;
  std::vector<std::size_t> n_grid;  // consistency only
  double delta = 0.1;
  bool closed_form = false;
  double threshold = 4.0;  // identity only
  SolverOptions solver;
};

inline constexpr std::size_t kMinCompareReps = 10;

/// Parses the file and returns the document. Unreadable files and malformed
/// JSON throw ConfigError.
Json read_config_file(const std::filesystem::path& path);

/// `with_data = false` parses fit options for an already loaded dataset.
FitConfig parse_fit_config(const Json& doc, const std::filesystem::path& base, bool with_data = true);
DiagnoseConfig parse_diagnose_config(const Json& doc, const std::filesystem::path& base);
SimulateConfig parse_simulate_config(const Json& doc, const std::filesystem::path& base);
CompareConfig parse_compare_config(const Json& doc, const std::filesystem::path& base);

/// FNV-1a (64 bit) of the canonical serialisation, as 16 hex digits. Object
/// keys are sorted, so the hash ignores key order and whitespace.
std::string config_hash(const Json& doc);

std::string_view experiment_name(Experiment e);

}  // namespace aqsgee

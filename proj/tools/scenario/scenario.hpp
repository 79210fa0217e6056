#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "cjl/exp_structure.hpp"
#include "cjl/metric.hpp"

namespace cjl::scenario {

using json = nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

// Schema violation. field is a dotted path into the config ("params.start"), or
// "line L, column C" for syntax errors.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string field, const std::string& message)
      : std::runtime_error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct Tolerances {
  double ode_rtol = 1e-10;
  double ode_atol = 1e-13;
  double radius_tol = 1e-10;
  double sigma_rel = 1e-6;
  double det_tol = 1e-6;
  double project_tol = 1e-12;
  double identity_tol = 1e-5;
  double tree_tol = 1e-5;
  double pair_tol = 1e-6;
  double lemma_tol = 1e-4;
  double roundtrip_tol = 1e-5;
  double normal_form_tol = 1e-8;
  json to_json() const;
};

struct Scenario {
  json config;  // as read
  std::string task;
  std::uint64_t seed = 1;
  // Exactly one of model / synthetic for tasks that need a field.
  ModelPtr model;
  Vec3 base_point = Vec3::Zero();
  double r_max = 10.0;
  std::optional<SyntheticSpec> synthetic;
  json field_echo;  // resolved field description
  json params;      // task parameters with defaults filled in
  Tolerances tol;
  std::string report_path = "report.json";
  std::string tables_dir;  // empty: no tables

  ExpPtr field() const;
};

const std::vector<std::string>& task_names();

Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

struct RunResult {
  int exit_code = kExitOk;
  json report;
  std::string message;
};

// Executes the task. Numerical failures give exit code 3 and a report holding the results
// gathered so far. The report does not depend on the thread count.
RunResult run_scenario(const Scenario& s, int threads = 1);

// CJL_THREADS, at least 1.
int thread_count_from_env();

// Writes to a sibling temporary file and renames it over path.
void write_atomic(const std::string& path, const std::string& content);
std::string dump_report(const json& report);

const std::vector<std::string>& plot_kinds();
// Writes <out_dir>/<kind>.csv; throws ValidationError when the report lacks the data.
std::string emit_plot_data(const json& report, const std::string& kind, const std::string& out_dir);

// Normal-form and oracle checks; one line per check. Returns 0 when all pass, 3 otherwise.
int run_selftest(std::ostream& out);

}  // namespace cjl::scenario

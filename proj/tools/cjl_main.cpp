#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "scenario/scenario.hpp"

namespace sc = cjl::scenario;

namespace {

int cmd_run(const std::string& config, const std::string& report_override) {
  sc::Scenario s;
  try {
    s = sc::load_scenario(config);
  } catch (const sc::ValidationError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return sc::kExitValidation;
  }
  if (!report_override.empty()) s.report_path = report_override;
  sc::RunResult r = sc::run_scenario(s, sc::thread_count_from_env());
  try {
    sc::write_atomic(s.report_path, sc::dump_report(r.report));
    if (!s.tables_dir.empty())
      for (const auto& kind : sc::plot_kinds()) {
        try {
          std::string path = sc::emit_plot_data(r.report, kind, s.tables_dir);
          std::cout << "table " << path << '\n';
        } catch (const sc::ValidationError&) {
        }
      }
  } catch (const std::exception& e) {
    std::cerr << "output error: " << e.what() << '\n';
    return sc::kExitNumerical;
  }
  std::cout << "task " << s.task << ": " << r.report["status"].get<std::string>() << ", report " << s.report_path << '\n';
  if (r.exit_code != sc::kExitOk) std::cerr << "error: " << r.message << '\n';
  for (const auto& w : r.report["warnings"]) std::cerr << "warning: " << w.get<std::string>() << '\n';
  return r.exit_code;
}

int cmd_plot(const std::string& report_path, const std::string& kind, const std::string& out_dir) {
  std::ifstream in(report_path);
  if (!in) {
    std::cerr << "cannot read " << report_path << '\n';
    return sc::kExitValidation;
  }
  sc::json report;
  try {
    report = sc::json::parse(in);
  } catch (const sc::json::exception& e) {
    std::cerr << "report is not valid JSON: " << e.what() << '\n';
    return sc::kExitValidation;
  }
  std::string dir = out_dir;
  if (dir.empty()) {
    auto parent = std::filesystem::path(report_path).parent_path();
    dir = parent.empty() ? "." : parent.string();
  }
  try {
    std::cout << sc::emit_plot_data(report, kind, dir) << '\n';
  } catch (const sc::ValidationError& e) {
    std::cerr << "plot error: " << e.what() << '\n';
    return sc::kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "output error: " << e.what() << '\n';
    return sc::kExitNumerical;
  }
  return sc::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conjugate locus scenarios: sweeps, classification, CDC traces, linking and pair checks."};
  app.require_subcommand(1);

  std::string config, report_override;
  auto* run = app.add_subcommand("run", "Run a scenario config and write its JSON report");
  run->add_option("config", config, "Scenario config (JSON)")->required();
  run->add_option("--report", report_override, "Override output.report");

  std::string report_path, kind, out_dir;
  auto* plot = app.add_subcommand("plot", "Emit CSV tables from a report");
  plot->add_option("report", report_path, "Report written by run")->required();
  plot->add_option("--kind", kind, "Table kind")->required()->check(CLI::IsMember(sc::plot_kinds()));
  plot->add_option("--out", out_dir, "Output directory (default: next to the report)");

  auto* selftest = app.add_subcommand("selftest", "Run the normal-form and oracle checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : sc::kExitValidation;
  }
  if (*run) return cmd_run(config, report_override);
  if (*plot) return cmd_plot(report_path, kind, out_dir);
  if (*selftest) return sc::run_selftest(std::cout);
  return sc::kExitValidation;
}

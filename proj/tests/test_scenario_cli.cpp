#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

#include "scenario/scenario.hpp"

namespace fs = std::filesystem;
using namespace cjl::scenario;

namespace {

fs::path scratch_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("cjl_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string config(const std::string& name) { return std::string(CJL_CONFIG_DIR) + "/" + name; }

int sh(const std::string& cmd) {
  int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

int cli(const std::string& args, const std::string& env = "") {
  return sh("cd " + scratch_dir().string() + " && " + env + " '" + CJL_CLI_PATH + "' " + args);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json run_report(const std::string& cfg, const std::string& out) {
  fs::path rp = scratch_dir() / out;
  REQUIRE(cli("run " + config(cfg) + " --report " + rp.string()) == kExitOk);
  return json::parse(slurp(rp));
}

fs::path write_config(const std::string& name, const std::string& text) {
  fs::path p = scratch_dir() / name;
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST_CASE("config: unknown keys and bad values are rejected with their path") {
  try {
    parse_scenario(R"({"task": "normal_form_selftest", "params": {"per_axis": 10, "colour": 1}})");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "params.colour");
  }
  try {
    parse_scenario(R"({"task": "normal_form_selftest", "tolerances": {"det_tol": -1}})");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "tolerances.det_tol");
  }
  CHECK_THROWS_WITH_AS(parse_scenario("{\"task\": \n 3,,}"), doctest::Contains("line 2"), ValidationError);
  CHECK_THROWS_AS(parse_scenario(R"({"task": "fly"})"), ValidationError);
  CHECK_THROWS_AS(parse_scenario(R"({"task": "verify_pair", "synthetic": {"class": "A3"}})"), ValidationError);
  CHECK_THROWS_AS(parse_scenario(R"({"task": "d4_analysis", "params": {"variant": "plus", "a": 0.5, "b": 0.5}})"),
                  ValidationError);
}

TEST_CASE("config: defaults are filled in") {
  auto s = parse_scenario(R"({"task": "normal_form_selftest"})");
  CHECK(s.seed == 1);
  CHECK(s.params.at("per_axis") == 10);
  CHECK(s.tol.det_tol == 1e-6);
}

TEST_CASE("in-process run: d4 boundary case") {
  auto s = load_scenario(config("d4_plus_boundary.json"));
  auto r = run_scenario(s, 1);
  CHECK(r.exit_code == kExitOk);
  const json& p = r.report.at("results").at("point");
  CHECK(p.at("sturm_count") == 1);
  CHECK(p.at("p3").get<double>() == 0.0);
  CHECK(p.at("p3_exact_zero") == true);
  CHECK(r.report.at("results").at("grid").at("sign_separates_counts") == true);
  CHECK(r.report.at("provenance").at("seed") == 1);
}

TEST_CASE("cli: sphere sweep finds pi in every direction") {
  json r = run_report("sphere_sweep.json", "sweep.json");
  const json& sum = r.at("results").at("summary");
  CHECK(sum.at("found") == 100);
  CHECK(std::abs(sum.at("lambda1_min").get<double>() - M_PI) < 1e-6);
  CHECK(std::abs(sum.at("lambda1_max").get<double>() - M_PI) < 1e-6);
}

TEST_CASE("cli: reports are byte-identical across runs and thread counts") {
  fs::path a = scratch_dir() / "det_a.json", b = scratch_dir() / "det_b.json", c = scratch_dir() / "det_c.json";
  REQUIRE(cli("run " + config("sphere_sweep.json") + " --report " + a.string(), "CJL_THREADS=1") == 0);
  REQUIRE(cli("run " + config("sphere_sweep.json") + " --report " + b.string(), "CJL_THREADS=1") == 0);
  REQUIRE(cli("run " + config("sphere_sweep.json") + " --report " + c.string(), "CJL_THREADS=4") == 0);
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(a) == slurp(c));
}

TEST_CASE("cli: malformed config exits 2 without output") {
  fs::path out = scratch_dir() / "bad.json";
  CHECK(cli("run " + config("bad_tolerance.json") + " --report " + out.string()) == kExitValidation);
  CHECK_FALSE(fs::exists(out));
  CHECK(cli("run " + (scratch_dir() / "missing.json").string()) == kExitValidation);
  CHECK(cli("frobnicate") == kExitValidation);
}

TEST_CASE("cli: plot needs the matching data") {
  fs::path rp = scratch_dir() / "d4.json";
  REQUIRE(cli("run " + config("d4_plus_boundary.json") + " --report " + rp.string()) == 0);
  CHECK(cli("plot " + rp.string() + " --kind fclc_trace --out " + scratch_dir().string()) == kExitValidation);
  CHECK(cli("plot " + rp.string() + " --kind contour --out " + scratch_dir().string()) == kExitValidation);
}

TEST_CASE("cli: trivial linking curve plots as one point") {
  fs::path cfg = write_config("trivial.json", R"({
    "task": "link",
    "synthetic": {"class": "A3"},
    "params": {"start": [0.3, -1.0, 0.2], "project": false}
  })");
  fs::path rp = scratch_dir() / "trivial_report.json";
  REQUIRE(cli("run " + cfg.string() + " --report " + rp.string()) == 0);
  json r = json::parse(slurp(rp));
  CHECK(r.at("results").at("success") == true);
  fs::path tables = scratch_dir() / "trivial_tables";
  REQUIRE(cli("plot " + rp.string() + " --kind fclc_trace --out " + tables.string()) == 0);
  std::ifstream in(tables / "fclc_trace.csv");
  std::string header, row, extra;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "segment,kind,replies_to,index,param,x1,x2,x3,y1,y2,y3");
  CHECK(row.rfind("0,POINT", 0) == 0);
  CHECK_FALSE(std::getline(in, extra));
}

TEST_CASE("cli: the D4 minus line field makes a half turn") {
  json r = run_report("d4_minus_field.json", "d4m.json");
  CHECK(std::abs(r.at("results").at("field").at("rotation_index").get<double>() + 0.5) < 1e-6);
  fs::path tables = scratch_dir() / "d4m_tables";
  fs::path rp = scratch_dir() / "d4m.json";
  REQUIRE(cli("plot " + rp.string() + " --kind cdc_field --out " + tables.string()) == 0);
  std::ifstream in(tables / "cdc_field.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "angle,x1,x2,x3,D1,D2,D3,slack,corank");
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == 72);
}

TEST_CASE("cli: selftest passes") { CHECK(cli("selftest") == 0); }

TEST_CASE("cli: every shipped config runs") {
  for (const auto& e : fs::directory_iterator(CJL_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    CAPTURE(e.path().filename().string());
    fs::path rp = scratch_dir() / ("shipped_" + e.path().filename().string());
    int expect = e.path().stem() == "bad_tolerance" ? kExitValidation : kExitOk;
    CHECK(cli("run " + e.path().string() + " --report " + rp.string()) == expect);
  }
}

TEST_CASE("cli: rotation pair round trip and transport residuals") {
  json r = run_report("sphere_rotation_pair.json", "rot.json");
  CHECK(r.at("results").at("lemma_ok") == true);
  CHECK(r.at("results").at("roundtrip").at("ok") == true);
  CHECK(r.at("results").at("roundtrip").at("max_speed_defect").get<double>() < 1e-6);
}

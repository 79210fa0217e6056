#include <cstdio>
#include <filesystem>
#include <sstream>

#include "internal.hpp"

namespace cjl::scenario {

namespace {

std::string num(const json& v) {
  if (v.is_null()) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
  return buf;
}

const json& require(const json& report, const std::string& key, const std::string& what) {
  if (!report.contains("results") || !report["results"].is_object() || !report["results"].contains(key))
    throw ValidationError("results." + key, "report has no " + what + " data");
  return report["results"][key];
}

std::string conjugate_sphere(const json& report) {
  const json& sweep = require(report, "sweep", "conjugate sweep");
  std::ostringstream out;
  out << "theta,phi,d1,d2,d3,lambda1\n";
  for (const auto& r : sweep) {
    out << num(r["theta"]) << ',' << num(r["phi"]);
    for (int i = 0; i < 3; ++i) out << ',' << num(r["direction"][i]);
    out << ',' << (r.contains("lambda") ? num(r["lambda"][0]) : "") << '\n';
  }
  return out.str();
}

std::string cdc_field(const json& report) {
  const json& f = require(report, "field", "CDC field");
  std::ostringstream out;
  out << "angle,x1,x2,x3,D1,D2,D3,slack,corank\n";
  for (const auto& r : f["samples"]) {
    if (!r.contains("x")) continue;
    out << num(r["angle"]);
    for (int i = 0; i < 3; ++i) out << ',' << num(r["x"][i]);
    for (int i = 0; i < 3; ++i) out << ',' << (r["D"].is_null() ? "" : num(r["D"][i]));
    out << ',' << num(r["slack"]) << ',' << r["corank"].get<int>() << '\n';
  }
  return out.str();
}

std::string fclc_trace(const json& report) {
  const json& segs = require(report, "segments", "FCLC");
  std::ostringstream out;
  out << "segment,kind,replies_to,index,param,x1,x2,x3,y1,y2,y3\n";
  if (segs.empty()) {
    const json& res = report["results"];
    if (!res.contains("start") || !res.contains("start_image"))
      throw ValidationError("results.start", "report has no FCLC start point");
    out << "0,POINT,-1,0,0";
    for (int i = 0; i < 3; ++i) out << ',' << num(res["start"][i]);
    for (int i = 0; i < 3; ++i) out << ',' << num(res["start_image"][i]);
    out << '\n';
    return out.str();
  }
  for (std::size_t k = 0; k < segs.size(); ++k) {
    const json& s = segs[k];
    const json& tan = s["tangent"];
    const json& img = s["image"];
    for (std::size_t i = 0; i < tan.size(); ++i) {
      out << k << ',' << s["kind"].get<std::string>() << ',' << s["replies_to"].get<int>() << ',' << i << ','
          << num(tan[i][0]);
      for (int c = 1; c <= 3; ++c) out << ',' << num(tan[i][c]);
      for (int c = 1; c <= 3; ++c) out << ',' << num(img[i][c]);
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace

const std::vector<std::string>& plot_kinds() {
  static const std::vector<std::string> kinds{"cdc_field", "conjugate_sphere", "fclc_trace"};
  return kinds;
}

std::string emit_plot_data(const json& report, const std::string& kind, const std::string& out_dir) {
  std::string table;
  if (kind == "cdc_field")
    table = cdc_field(report);
  else if (kind == "conjugate_sphere")
    table = conjugate_sphere(report);
  else if (kind == "fclc_trace")
    table = fclc_trace(report);
  else
    throw ValidationError("kind", "unknown plot kind '" + kind + "'");
  std::string path = (std::filesystem::path(out_dir.empty() ? "." : out_dir) / (kind + ".csv")).string();
  write_atomic(path, table);
  return path;
}

}  // namespace cjl::scenario

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "cjl/errors.hpp"
#include "internal.hpp"

namespace cjl::scenario {

namespace fs = std::filesystem;

json to_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

json to_json(const Mat3& m) {
  json out = json::array();
  for (int i = 0; i < 3; ++i) out.push_back(json::array({m(i, 0), m(i, 1), m(i, 2)}));
  return out;
}

Fields::Fields(const json& j, std::string path) : obj_(j), path_(std::move(path)) {
  if (!obj_.is_object()) throw ValidationError(path_.empty() ? "<root>" : path_, "expected an object");
}

const json& Fields::get(const std::string& key) {
  used_.insert(key);
  return obj_.at(key);
}

const json* Fields::raw(const std::string& key) {
  if (!has(key)) return nullptr;
  return &get(key);
}

double Fields::number(const std::string& key, std::optional<double> def) {
  double v;
  if (!has(key)) {
    if (!def) throw ValidationError(at(key), "required");
    v = *def;
  } else {
    const json& j = get(key);
    if (!j.is_number()) throw ValidationError(at(key), "expected a number");
    v = j.get<double>();
    if (!std::isfinite(v)) throw ValidationError(at(key), "must be finite");
  }
  out_[key] = v;
  return v;
}

double Fields::positive(const std::string& key, std::optional<double> def) {
  double v = number(key, def);
  if (!(v > 0)) throw ValidationError(at(key), "must be positive");
  return v;
}

int Fields::integer(const std::string& key, std::optional<int> def, int min, int max) {
  int v;
  if (!has(key)) {
    if (!def) throw ValidationError(at(key), "required");
    v = *def;
  } else {
    const json& j = get(key);
    if (!j.is_number_integer()) throw ValidationError(at(key), "expected an integer");
    long long w = j.get<long long>();
    if (w < min || w > max)
      throw ValidationError(at(key), "must lie in [" + std::to_string(min) + ", " + std::to_string(max) + "]");
    v = static_cast<int>(w);
  }
  if (v < min || v > max) throw ValidationError(at(key), "out of range");
  out_[key] = v;
  return v;
}

std::uint64_t Fields::seed(const std::string& key, std::uint64_t def) {
  std::uint64_t v = def;
  if (has(key)) {
    const json& j = get(key);
    if (j.is_number_unsigned())
      v = j.get<std::uint64_t>();
    else if (j.is_number_integer() && j.get<long long>() >= 0)
      v = static_cast<std::uint64_t>(j.get<long long>());
    else
      throw ValidationError(at(key), "expected a non-negative integer");
  }
  out_[key] = v;
  return v;
}

bool Fields::boolean(const std::string& key, bool def) {
  bool v = def;
  if (has(key)) {
    const json& j = get(key);
    if (!j.is_boolean()) throw ValidationError(at(key), "expected true or false");
    v = j.get<bool>();
  }
  out_[key] = v;
  return v;
}

std::string Fields::text(const std::string& key, std::optional<std::string> def) {
  std::string v;
  if (!has(key)) {
    if (!def) throw ValidationError(at(key), "required");
    v = *def;
  } else {
    const json& j = get(key);
    if (!j.is_string()) throw ValidationError(at(key), "expected a string");
    v = j.get<std::string>();
  }
  out_[key] = v;
  return v;
}

std::string Fields::choice(const std::string& key, std::optional<std::string> def,
                           const std::vector<std::string>& allowed) {
  std::string v = text(key, std::move(def));
  for (const auto& a : allowed)
    if (a == v) return v;
  std::string list;
  for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
  throw ValidationError(at(key), "'" + v + "' is not one of {" + list + "}");
}

namespace {

Vec3 parse_vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ValidationError(where, "expected an array of 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw ValidationError(where + "[" + std::to_string(i) + "]", "expected a number");
    v[i] = j[i].get<double>();
    if (!std::isfinite(v[i])) throw ValidationError(where + "[" + std::to_string(i) + "]", "must be finite");
  }
  return v;
}

}  // namespace

Vec3 Fields::vec3(const std::string& key, std::optional<Vec3> def) {
  Vec3 v;
  if (!has(key)) {
    if (!def) throw ValidationError(at(key), "required");
    v = *def;
  } else {
    v = parse_vec3(get(key), at(key));
  }
  out_[key] = to_json(v);
  return v;
}

Mat3 Fields::mat3(const std::string& key) {
  if (!has(key)) throw ValidationError(at(key), "required");
  const json& j = get(key);
  if (!j.is_array() || j.size() != 3) throw ValidationError(at(key), "expected a 3x3 array");
  Mat3 m;
  for (int i = 0; i < 3; ++i) m.row(i) = parse_vec3(j[i], at(key) + "[" + std::to_string(i) + "]").transpose();
  out_[key] = to_json(m);
  return m;
}

std::vector<Vec3> Fields::vec3_list(const std::string& key, bool required, bool nonempty) {
  std::vector<Vec3> out;
  if (!has(key)) {
    if (required) throw ValidationError(at(key), "required");
  } else {
    const json& j = get(key);
    if (!j.is_array()) throw ValidationError(at(key), "expected an array of 3-vectors");
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(parse_vec3(j[i], at(key) + "[" + std::to_string(i) + "]"));
  }
  if (nonempty && out.empty()) throw ValidationError(at(key), "must not be empty");
  json arr = json::array();
  for (const auto& v : out) arr.push_back(to_json(v));
  out_[key] = arr;
  return out;
}

std::pair<double, double> Fields::range(const std::string& key) {
  if (!has(key)) throw ValidationError(at(key), "required");
  const json& j = get(key);
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ValidationError(at(key), "expected [low, high]");
  double lo = j[0].get<double>(), hi = j[1].get<double>();
  if (!(lo <= hi)) throw ValidationError(at(key), "low must not exceed high");
  out_[key] = json::array({lo, hi});
  return {lo, hi};
}

Fields Fields::object(const std::string& key) {
  if (!has(key)) return Fields(json::object(), at(key));
  return Fields(get(key), at(key));
}

void Fields::finish() const {
  for (const auto& [k, v] : obj_.items())
    if (!used_.count(k)) throw ValidationError(at(k), "unknown key");
}

json Tolerances::to_json() const {
  return {{"ode_rtol", ode_rtol},         {"ode_atol", ode_atol},         {"radius_tol", radius_tol},
          {"sigma_rel", sigma_rel},       {"det_tol", det_tol},           {"project_tol", project_tol},
          {"identity_tol", identity_tol}, {"tree_tol", tree_tol},         {"pair_tol", pair_tol},
          {"lemma_tol", lemma_tol},       {"roundtrip_tol", roundtrip_tol}, {"normal_form_tol", normal_form_tol}};
}

const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names{"conjugate_sweep", "classify",     "cdc_trace",           "link",
                                              "verify_pair",     "d4_analysis", "normal_form_selftest"};
  return names;
}

FieldNeed field_need(const std::string& task) {
  if (task == "conjugate_sweep" || task == "verify_pair") return FieldNeed::Riemannian;
  if (task == "classify" || task == "cdc_trace" || task == "link") return FieldNeed::Any;
  return FieldNeed::None;
}

ExpPtr Scenario::field() const {
  if (model) return make_riemannian(model, base_point, r_max);
  if (synthetic) return make_synthetic(*synthetic);
  throw PreconditionError("scenario has no field");
}

namespace {

void parse_metric(Fields& m, Scenario& s) {
  std::string id = m.text("model", std::nullopt);
  ParamMap params;
  json echo = json::object();
  if (const json* p = m.raw("params")) {
    if (!p->is_object()) throw ValidationError(m.at("params"), "expected an object");
    for (const auto& [k, v] : p->items()) {
      if (!v.is_number()) throw ValidationError(m.at("params") + "." + k, "expected a number");
      params[k] = v.get<double>();
    }
  }
  try {
    s.model = make_model(id, params);
  } catch (const Error& e) {
    throw ValidationError(m.at("model"), e.what());
  }
  for (const auto& [k, v] : s.model->params()) echo[k] = v;
  m.set("params", echo);
  s.r_max = m.positive("r_max", 10.0);
}

void parse_synthetic(Fields& f, Scenario& s) {
  SyntheticSpec spec;
  std::string cls = f.choice("class", std::nullopt, {"A2", "A3", "A4", "D4_minus", "D4_plus"});
  spec.cls = normal_form_from_string(cls);
  bool d4 = spec.cls == NormalFormClass::D4_minus || spec.cls == NormalFormClass::D4_plus;
  spec.theta = f.number("theta", 0.0);
  spec.sigma = f.integer("sigma", 1, -1, 1);
  if (spec.sigma == 0) throw ValidationError(f.at("sigma"), "must be -1 or 1");
  spec.R0 = f.positive("R0", spec.R0);
  spec.kappa = f.number("kappa", 0.0);
  spec.x1_extent = f.positive("x1_extent", spec.x1_extent);
  spec.box = f.positive("box", spec.box);
  if (f.has("P")) spec.P = f.mat3("P");
  if (f.has("chamber")) {
    if (!d4) throw ValidationError(f.at("chamber"), "only D4 fields take a radial chamber");
    if (f.has("r0")) throw ValidationError(f.at("r0"), "give either chamber or r0");
    Fields c = f.object("chamber");
    double a = c.number("a"), b = c.number("b");
    c.finish();
    f.set("chamber", c.resolved());
    try {
      spec.r0 = d4_radial_from_chamber(spec.cls, a, b);
    } catch (const Error& e) {
      throw ValidationError(f.at("chamber"), e.what());
    }
    f.set("r0", to_json(spec.r0));
  } else {
    spec.r0 = f.vec3("r0", spec.r0);
  }
  try {
    make_synthetic(spec);
  } catch (const Error& e) {
    throw ValidationError(f.at("class"), e.what());
  }
  s.synthetic = spec;
}

std::string location(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(location(text, e.byte), "syntax error");
  }
  Scenario s;
  s.config = j;
  Fields top(j, "");
  s.task = top.choice("task", std::nullopt, task_names());
  s.seed = top.seed("seed", 1);

  FieldNeed need = field_need(s.task);
  bool has_metric = top.has("metric"), has_syn = top.has("synthetic");
  if (has_metric && has_syn) throw ValidationError("synthetic", "metric and synthetic are exclusive");
  if (need == FieldNeed::None && (has_metric || has_syn))
    throw ValidationError(has_metric ? "metric" : "synthetic", "task '" + s.task + "' takes no field");
  if (need == FieldNeed::Riemannian && has_syn)
    throw ValidationError("synthetic", "task '" + s.task + "' needs a metric model");
  if (need != FieldNeed::None && !has_metric && !has_syn)
    throw ValidationError(need == FieldNeed::Riemannian ? "metric" : "metric|synthetic", "required");
  if (has_metric) {
    Fields m = top.object("metric");
    parse_metric(m, s);
    m.finish();
    s.base_point = top.vec3("base_point", Vec3::Zero());
    if (!s.model->in_domain(s.base_point)) throw ValidationError("base_point", "outside the chart domain");
    s.field_echo = {{"metric", m.resolved()}, {"base_point", to_json(s.base_point)}};
  } else if (has_syn) {
    Fields f = top.object("synthetic");
    parse_synthetic(f, s);
    f.finish();
    s.field_echo = {{"synthetic", f.resolved()}};
  }
  if (!has_metric && top.has("base_point")) throw ValidationError("base_point", "only valid with a metric model");

  Fields t = top.object("tolerances");
  Tolerances& T = s.tol;
  T.ode_rtol = t.positive("ode_rtol", T.ode_rtol);
  T.ode_atol = t.positive("ode_atol", T.ode_atol);
  T.radius_tol = t.positive("radius_tol", T.radius_tol);
  T.sigma_rel = t.positive("sigma_rel", T.sigma_rel);
  T.det_tol = t.positive("det_tol", T.det_tol);
  T.project_tol = t.positive("project_tol", T.project_tol);
  T.identity_tol = t.positive("identity_tol", T.identity_tol);
  T.tree_tol = t.positive("tree_tol", T.tree_tol);
  T.pair_tol = t.positive("pair_tol", T.pair_tol);
  T.lemma_tol = t.positive("lemma_tol", T.lemma_tol);
  T.roundtrip_tol = t.positive("roundtrip_tol", T.roundtrip_tol);
  T.normal_form_tol = t.positive("normal_form_tol", T.normal_form_tol);
  t.finish();

  Fields o = top.object("output");
  s.report_path = o.text("report", s.report_path);
  s.tables_dir = o.text("tables", "");
  if (s.report_path.empty()) throw ValidationError("output.report", "must not be empty");
  o.finish();

  Fields p = top.object("params");
  resolve_params(s.task, p);
  p.finish();
  s.params = p.resolved();
  top.finish();
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(path, "cannot read config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

int thread_count_from_env() {
  const char* v = std::getenv("CJL_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) return 1;
  return static_cast<int>(std::min<long>(n, 256));
}

void write_atomic(const std::string& path, const std::string& content) {
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string dump_report(const json& report) { return report.dump(2) + "\n"; }

}  // namespace cjl::scenario

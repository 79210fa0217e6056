#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <thread>

#include "cjl/cdc.hpp"
#include "cjl/classify.hpp"
#include "cjl/development.hpp"
#include "cjl/errors.hpp"
#include "cjl/exp_map.hpp"
#include "cjl/linking.hpp"
#include "cjl/normal_forms.hpp"
#include "cjl/random.hpp"
#include "cjl/sturm.hpp"
#include "cjl/tree_check.hpp"
#include "internal.hpp"

#ifndef CJL_VERSION
#define CJL_VERSION "0.0.0"
#endif

namespace cjl::scenario {

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& f) {
  std::size_t workers = std::min<std::size_t>(std::max(1, threads), n);
  std::vector<std::exception_ptr> errors(n);
  auto work = [&](std::size_t w) {
    for (std::size_t i = w; i < n; i += workers) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace {

void resolve_gacdc(Fields& p) {
  if (!p.has("gacdc")) return;
  Fields g = p.object("gacdc");
  double c = g.positive("cone_amplitude", 0.1);
  if (c > 0.1) throw ValidationError(g.at("cone_amplitude"), "must not exceed 0.1");
  g.positive("delta_avoid", 1e-3);
  g.vec3_list("obstacles", false, false);
  g.finish();
  p.set("gacdc", g.resolved());
}

}  // namespace

void resolve_params(const std::string& task, Fields& p) {
  if (task == "conjugate_sweep") {
    p.choice("sampling", "fibonacci", {"fibonacci", "random", "grid"});
    p.integer("directions", 100, 1, 1000000);
    p.integer("n_theta", 12, 2, 10000);
    p.integer("n_phi", 24, 1, 10000);
    p.integer("k_max", 1, 1, 3);
    p.positive("r_max", 10.0);
  } else if (task == "classify") {
    p.vec3_list("points", true, true);
    p.boolean("project", true);
  } else if (task == "cdc_trace") {
    if (p.has("start")) p.vec3("start");
    p.boolean("project", true);
    p.positive("step", 1e-2);
    p.positive("max_length", 10.0);
    p.integer("max_steps", 20000, 1);
    p.positive("slack_floor", 1e-4);
    resolve_gacdc(p);
    if (p.has("field")) {
      Fields f = p.object("field");
      f.positive("rho", 0.2);
      f.integer("samples", 72, 8, 100000);
      int nappe = f.integer("nappe", 1, -1, 1);
      if (nappe == 0) throw ValidationError(f.at("nappe"), "must be -1 or 1");
      f.vec3("center", Vec3::Zero());
      f.finish();
      p.set("field", f.resolved());
    }
    if (!p.has("start") && !p.has("field")) throw ValidationError(p.at("start"), "give start, field or both");
    if (p.has("gacdc") && !p.has("start")) throw ValidationError(p.at("gacdc"), "needs a start point");
  } else if (task == "link") {
    p.vec3("start");
    p.boolean("project", true);
    p.integer("budget", 200, 1, 100000);
    p.positive("step", 1e-2);
    p.positive("max_length", 10.0);
    double c = p.positive("cone_amplitude", 0.1);
    if (c > 0.1) throw ValidationError(p.at("cone_amplitude"), "must not exceed 0.1");
    p.integer("descent_retries", 3, 0, 100);
    p.integer("census_starts", 16, 0, 10000);
    p.vec3_list("obstacles", false, false);
    p.integer("tree_forms", 50, 0, 100000);
    p.positive("retort_hmax", 5e-3);
  } else if (task == "verify_pair") {
    std::string pair = p.choice("pair", "identity", {"identity", "isometry"});
    if (pair == "isometry") {
      if (p.has("matrix") == p.has("rotation"))
        throw ValidationError(p.at("matrix"), "an isometry pair needs exactly one of matrix or rotation");
      if (p.has("matrix")) {
        p.mat3("matrix");
      } else {
        Fields r = p.object("rotation");
        Vec3 axis = r.vec3("axis");
        if (axis.norm() == 0) throw ValidationError(r.at("axis"), "must be non-zero");
        r.number("angle");
        r.finish();
        p.set("rotation", r.resolved());
      }
    } else if (p.has("matrix") || p.has("rotation")) {
      throw ValidationError(p.at("pair"), "matrix and rotation need pair = isometry");
    }
    p.integer("curves", 5, 0, 10000);
    p.integer("knots", 8, 2, 10000);
    p.positive("radius", 1.0);
    p.integer("roundtrip_paths", 20, 0, 10000);
    p.integer("roundtrip_knots", 20, 2, 10000);
    p.positive("roundtrip_amplitude", 0.6);
    p.integer("continuity_points", 3, 0, 10000);
    p.boolean("shrink", false);
    p.integer("curvature_samples", 20, 1, 10000);
    p.integer("refine", 8, 1, 1000);
  } else if (task == "d4_analysis") {
    std::string v = p.choice("variant", std::nullopt, {"plus", "minus"});
    if (p.has("a") != p.has("b")) throw ValidationError(p.at(p.has("a") ? "b" : "a"), "a and b go together");
    if (p.has("a")) {
      double a = p.number("a"), b = p.number("b");
      if (v == "plus" && !(a * b > 1.0)) throw ValidationError(p.at("a"), "plus chamber requires a*b > 1");
      if (v == "minus" && !(a * a + b * b < 1.0))
        throw ValidationError(p.at("a"), "minus chamber requires a^2 + b^2 < 1");
    }
    if (p.has("grid")) {
      Fields g = p.object("grid");
      g.range("a");
      g.range("b");
      g.integer("n", 20, 1, 5000);
      g.finish();
      p.set("grid", g.resolved());
    }
    if (!p.has("a") && !p.has("grid")) throw ValidationError(p.at("a"), "give (a, b), grid or both");
  } else if (task == "normal_form_selftest") {
    p.integer("per_axis", 10, 2, 1000);
    p.positive("half_width", 1.5);
    p.integer("join_t", 100, 1, 100000);
    p.integer("join_c", 10, 1, 100000);
  }
}

namespace {

ClassifyOptions classify_options(const Tolerances& t) {
  ClassifyOptions c;
  c.det_tol = t.det_tol;
  c.sigma_rel = t.sigma_rel;
  return c;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json class_json(const SingularityClass& c) {
  json ev = json::object();
  for (const auto& [k, v] : c.evidence.values) ev[k] = number_or_null(v);
  json out{{"tag", to_string(c.tag)}, {"corank", c.corank}, {"evidence", ev}, {"notes", c.evidence.notes}};
  if (c.corank == 1) out["kernel"] = to_json(c.kernel);
  return out;
}

Vec3 direction_from_angles(double theta, double phi) {
  return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
}

std::string task_conjugate_sweep(const Scenario& s, int threads, json& results, std::vector<std::string>& warnings) {
  const json& p = s.params;
  std::string sampling = p["sampling"];
  int k_max = p["k_max"];
  double r_max = p["r_max"];
  struct Dir {
    double theta, phi;
  };
  std::vector<Dir> dirs;
  if (sampling == "grid") {
    int nt = p["n_theta"], np = p["n_phi"];
    for (int i = 0; i < nt; ++i)
      for (int j = 0; j < np; ++j) dirs.push_back({M_PI * (i + 0.5) / nt, 2 * M_PI * j / np});
  } else if (sampling == "random") {
    Rng rng(s.seed);
    int n = p["directions"];
    for (int i = 0; i < n; ++i) {
      Vec3 u = rng.unit_vector();
      dirs.push_back({std::acos(std::clamp(u[2], -1.0, 1.0)), std::atan2(u[1], u[0])});
    }
  } else {
    int n = p["directions"];
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i)
      dirs.push_back({std::acos(1.0 - 2.0 * (i + 0.5) / n), std::fmod(golden * i, 2 * M_PI)});
  }
  ConjugateOptions copt;
  copt.radius_tol = s.tol.radius_tol;
  copt.sigma_rel = s.tol.sigma_rel;
  copt.rtol = s.tol.ode_rtol;

  std::vector<json> recs(dirs.size());
  parallel_for(dirs.size(), threads, [&](std::size_t i) {
    Vec3 d = direction_from_angles(dirs[i].theta, dirs[i].phi);
    json r{{"theta", dirs[i].theta}, {"phi", dirs[i].phi}, {"direction", to_json(d)}};
    try {
      ConjugateSearch cs = conjugate_radii(*s.model, s.base_point, d, k_max, r_max, copt);
      json lam = json::array();
      for (int k = 1; k <= k_max; ++k) lam.push_back(number_or_null(cs.lambda(k)));
      r["lambda"] = lam;
      r["multiplicity"] = cs.records.empty() ? 0 : cs.records.front().multiplicity;
      r["truncated"] = cs.truncated;
      r["searched_to"] = cs.searched_to;
    } catch (const Error& e) {
      r["error"] = e.what();
    }
    recs[i] = std::move(r);
  });
  json sweep = json::array();
  int found = 0, errors = 0, truncated = 0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (auto& r : recs) {
    if (r.contains("error")) {
      ++errors;
    } else {
      if (r["truncated"].get<bool>()) ++truncated;
      if (!r["lambda"][0].is_null()) {
        ++found;
        double l = r["lambda"][0];
        lo = std::min(lo, l);
        hi = std::max(hi, l);
      }
    }
    sweep.push_back(std::move(r));
  }
  results["sweep"] = sweep;
  results["summary"] = {{"directions", recs.size()},
                        {"found", found},
                        {"errors", errors},
                        {"truncated", truncated},
                        {"lambda1_min", number_or_null(lo)},
                        {"lambda1_max", number_or_null(hi)}};
  if (truncated) warnings.push_back(std::to_string(truncated) + " searches truncated by the chart");
  if (found < static_cast<int>(recs.size()) - errors)
    warnings.push_back(std::to_string(recs.size() - errors - found) + " directions without a conjugate point below r_max");
  if (errors) return std::to_string(errors) + " directions failed";
  return {};
}

std::string task_classify(const Scenario& s, int threads, json& results, std::vector<std::string>& warnings) {
  ExpPtr E = s.field();
  ClassifyOptions copt = classify_options(s.tol);
  std::vector<Vec3> pts;
  for (const auto& j : s.params["points"]) pts.emplace_back(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
  bool project = s.params["project"];
  std::vector<json> recs(pts.size());
  parallel_for(pts.size(), threads, [&](std::size_t i) {
    json r{{"input", to_json(pts[i])}};
    try {
      Vec3 x = project ? project_to_conjugate(*E, pts[i], s.tol.project_tol) : pts[i];
      r["point"] = to_json(x);
      r["det"] = E->det(x);
      r["class"] = class_json(point_class(*E, x, copt));
    } catch (const Error& e) {
      r["error"] = e.what();
    }
    recs[i] = std::move(r);
  });
  int unresolved = 0, errors = 0;
  std::map<std::string, int> counts;
  json arr = json::array();
  for (auto& r : recs) {
    if (r.contains("error")) {
      ++errors;
    } else {
      std::string tag = r["class"]["tag"];
      ++counts[tag];
      if (tag == "UNRESOLVED") ++unresolved;
    }
    arr.push_back(std::move(r));
  }
  results["points"] = arr;
  results["counts"] = counts;
  if (unresolved) warnings.push_back(std::to_string(unresolved) + " UNRESOLVED classifications");
  if (errors) return std::to_string(errors) + " points failed";
  return {};
}

json cdc_json(const ExpStructure& E, const CDCurve& c, const Tolerances& tol) {
  json samples = json::array();
  for (const auto& q : c.samples)
    samples.push_back({{"s", q.s},
                       {"t", q.t},
                       {"x", to_json(q.x)},
                       {"image", to_json(q.image)},
                       {"radius", number_or_null(q.radius)},
                       {"slack", q.slack},
                       {"tag", to_string(q.tag)}});
  json out{{"samples", samples},
           {"stop", to_string(c.stop)},
           {"stop_reason", c.stop_reason},
           {"start_class", class_json(c.start_class)},
           {"end_class", class_json(c.end_class)},
           {"image_length", c.image_length},
           {"canonical", c.canonical},
           {"perturbed", c.perturbed}};
  if (E.has_radius()) {
    double drop = c.radius_drop();
    double res = std::abs(drop - c.image_length);
    out["radius_drop"] = drop;
    out["identity_residual"] = res;
    out["identity_ok"] = res <= tol.identity_tol;
  }
  if (c.perturbed)
    out["gacdc"] = {{"cone_amplitude", c.gacdc.cone_amplitude}, {"delta_avoid", c.gacdc.delta_avoid},
                    {"schedule_cap", c.gacdc.schedule_cap},     {"seed", c.gacdc.seed},
                    {"obstacles", c.gacdc.obstacles},           {"max_deviation", c.gacdc.max_deviation},
                    {"min_obstacle_distance", number_or_null(c.gacdc.min_obstacle_distance)}};
  return out;
}

// Winding of the projection of an unoriented line field onto the (x1, x2) plane, in turns.
double line_winding(const std::vector<Vec3>& dirs) {
  double total = 0.0;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const Vec3& a = dirs[i];
    const Vec3& b = dirs[(i + 1) % dirs.size()];
    double d = std::atan2(b[1], b[0]) - std::atan2(a[1], a[0]);
    while (d > M_PI / 2) d -= M_PI;
    while (d <= -M_PI / 2) d += M_PI;
    total += d;
  }
  return total / (2 * M_PI);
}

json field_table(const ExpStructure& E, const json& f, const Tolerances& tol, std::vector<std::string>& warnings) {
  double rho = f["rho"];
  int n = f["samples"];
  int nappe = f["nappe"];
  Vec3 center(f["center"][0].get<double>(), f["center"][1].get<double>(), f["center"][2].get<double>());
  ClassifyOptions copt = classify_options(tol);
  json samples = json::array();
  std::vector<Vec3> dirs;
  bool complete = true;
  for (int i = 0; i < n; ++i) {
    double ang = 2 * M_PI * i / n;
    Vec3 q = center + rho * Vec3(std::cos(ang), std::sin(ang), nappe);
    json r{{"angle", ang}};
    try {
      Vec3 x = project_to_conjugate(E, q, tol.project_tol);
      FlowPoint fp = flow_point(E, x, tol.sigma_rel);
      r["x"] = to_json(x);
      r["slack"] = fp.slack;
      r["corank"] = fp.corank;
      if (fp.corank != 1) {
        r["D"] = nullptr;
        complete = false;
      } else {
        // At A3 points D is the kernel line; the unoriented field is used there.
        bool a3 = fp.slack < 1e-6;
        r["D"] = to_json(a3 ? fp.line : distribution_D(E, x, copt));
        r["at_A3"] = a3;
        dirs.push_back(fp.line);
      }
    } catch (const Error& e) {
      r["error"] = e.what();
      complete = false;
    }
    samples.push_back(std::move(r));
  }
  json out{{"rho", rho}, {"nappe", nappe}, {"center", f["center"]}, {"samples", samples}};
  if (complete) {
    out["rotation_index"] = line_winding(dirs);
  } else {
    out["rotation_index"] = nullptr;
    warnings.push_back("field table has samples off corank 1; rotation index omitted");
  }
  return out;
}

std::string task_cdc_trace(const Scenario& s, int, json& results, std::vector<std::string>& warnings) {
  ExpPtr E = s.field();
  const json& p = s.params;
  if (p.contains("field")) results["field"] = field_table(*E, p["field"], s.tol, warnings);
  if (!p.contains("start")) return {};
  CdcOptions opt;
  opt.step = p["step"];
  opt.max_length = p["max_length"];
  opt.max_steps = p["max_steps"];
  opt.slack_floor = p["slack_floor"];
  opt.project_tol = s.tol.project_tol;
  opt.classify = classify_options(s.tol);
  Vec3 x0(p["start"][0].get<double>(), p["start"][1].get<double>(), p["start"][2].get<double>());
  if (p["project"].get<bool>()) x0 = project_to_conjugate(*E, x0, s.tol.project_tol);
  results["start"] = to_json(x0);
  CDCurve c = integrate_cdc(*E, x0, opt);
  results["cdc"] = cdc_json(*E, c, s.tol);
  if (c.end_class.tag == SingularityTag::UNRESOLVED) warnings.push_back("CDC end point UNRESOLVED");
  if (results["cdc"].value("identity_ok", true) == false) warnings.push_back("CDC length identity above identity_tol");
  if (p.contains("gacdc")) {
    const json& g = p["gacdc"];
    GacdcOptions go;
    go.cone_amplitude = g["cone_amplitude"];
    go.delta_avoid = g["delta_avoid"];
    go.seed = s.seed;
    go.cdc = opt;
    std::vector<Vec3> obs;
    for (const auto& o : g["obstacles"]) obs.emplace_back(o[0].get<double>(), o[1].get<double>(), o[2].get<double>());
    results["gacdc"] = cdc_json(*E, perturb_to_gacdc(*E, c, obs, go), s.tol);
  }
  return {};
}

json polyline(const std::vector<double>& t, const std::vector<Vec3>& x) {
  json out = json::array();
  for (std::size_t i = 0; i < x.size(); ++i) out.push_back({t[i], x[i][0], x[i][1], x[i][2]});
  return out;
}

json segments_json(const ExpStructure& E, const AspirantCurve& a) {
  json segs = json::array();
  for (const auto& seg : a.segments) {
    std::vector<double> t;
    std::vector<Vec3> x, y;
    json j{{"kind", to_string(seg.kind)}, {"replies_to", seg.replies_to}};
    if (seg.kind == SegmentKind::ACDC) {
      for (const auto& q : seg.acdc.samples) {
        t.push_back(q.s);
        x.push_back(q.x);
        y.push_back(q.image);
      }
      j["stop"] = to_string(seg.acdc.stop);
      j["end_class"] = to_string(seg.acdc.end_class.tag);
      j["canonical"] = seg.acdc.canonical;
    } else {
      const auto& path = seg.retort.path;
      for (std::size_t i = 0; i < path.size(); ++i) {
        t.push_back(path.t[i]);
        x.push_back(path.x[i]);
        y.push_back(E.image(path.x[i]));
      }
      j["status"] = to_string(seg.retort.status);
      j["join"] = seg.retort.join;
      j["tip_class"] = to_string(seg.retort.tip_class.tag);
      j["max_residual"] = seg.retort.max_residual;
    }
    j["tangent"] = polyline(t, x);
    j["image"] = polyline(t, y);
    segs.push_back(std::move(j));
  }
  return segs;
}

std::string task_link(const Scenario& s, int, json& results, std::vector<std::string>& warnings) {
  ExpPtr E = s.field();
  const json& p = s.params;
  LinkingOptions lo;
  lo.budget = p["budget"];
  lo.cdc.step = p["step"];
  lo.cdc.max_length = p["max_length"];
  lo.cdc.project_tol = s.tol.project_tol;
  lo.cdc.classify = classify_options(s.tol);
  lo.retort.classify = lo.cdc.classify;
  lo.retort.hmax = p["retort_hmax"];
  lo.cone_amplitude = p["cone_amplitude"];
  lo.descent_retries = p["descent_retries"];
  lo.census_starts = p["census_starts"];
  for (const auto& o : p["obstacles"]) lo.obstacles.emplace_back(o[0].get<double>(), o[1].get<double>(), o[2].get<double>());

  Vec3 x0(p["start"][0].get<double>(), p["start"][1].get<double>(), p["start"][2].get<double>());
  if (p["project"].get<bool>()) x0 = project_to_conjugate(*E, x0, s.tol.project_tol);
  results["start"] = to_json(x0);
  results["start_image"] = to_json(E->image(x0));

  LinkingResult r = run_linking_algorithm(*E, x0, s.seed, lo);
  results["success"] = r.success;
  results["rules"] = r.rules;
  results["iterations"] = r.iterations;
  results["last_rule"] = r.last_rule;
  results["failure"] = r.failure;
  json census = json::array();
  for (const auto& c : r.census)
    census.push_back({{"start", to_json(c.start)}, {"preimages", c.preimages}, {"classes", c.classes}, {"in_v10", c.in_v10}});
  results["census"] = census;
  const AspirantCurve& curve = r.fclc ? r.fclc->curve : r.partial;
  results["segments"] = segments_json(*E, curve);
  json verts = json::array();
  for (const auto& v : curve.vertices)
    verts.push_back({{"position", to_json(v.position)}, {"kind", to_string(v.kind)}, {"segment", v.segment}});
  results["vertices"] = verts;
  if (!r.success || !r.fclc) return "linking failed: " + r.failure;

  const FCLC& f = *r.fclc;
  json audits = json::array();
  for (const auto& a : f.audits)
    audits.push_back({{"gain_alpha", a.gain_alpha}, {"gain_beta", a.gain_beta}, {"margin", a.margin},
                      {"image_length_alpha", a.image_length_alpha}, {"ok", a.ok}});
  json ts = json::array();
  for (const auto& t : standard_ts(f.curve)) ts.push_back({{"splitter", t.splitter}, {"hit", t.hit}, {"reprise", t.reprise}});
  results["fclc"] = {{"saturated", f.saturated},
                     {"tip", to_json(f.curve.tip())},
                     {"tip_class", to_string(f.tip_class)},
                     {"radius_gain", number_or_null(f.radius_gain)},
                     {"margin_sum", f.margin_sum},
                     {"audits", audits},
                     {"standard_ts", ts},
                     {"endpoint_image_gap", f.endpoint_image_gap},
                     {"endpoint_ok", f.endpoint_image_gap <= s.tol.pair_tol}};
  for (const auto& a : f.audits)
    if (!(a.margin > 0)) warnings.push_back("audit with non-positive margin");
  if (int n = p["tree_forms"]; n > 0) {
    TreeCheckResult t = tree_formed_check(*E, f.curve, n, s.seed);
    results["tree_check"] = {{"max_integral", t.max_integral},
                             {"forms", t.forms},
                             {"intervals", t.intervals},
                             {"max_pair_mismatch", t.max_pair_mismatch},
                             {"ok", t.max_integral < s.tol.tree_tol}};
  }
  if (s.model) {
    LRelatedPair pair = identity_pair(s.model, s.base_point);
    Mat3 a = local_isometry_I(pair, f.curve.start).matrix;
    Mat3 b = local_isometry_I(pair, f.curve.tip()).matrix;
    double d = (a - b).cwiseAbs().maxCoeff();
    results["endpoint_isometry"] = {{"pair", "identity"}, {"difference", d}, {"ok", d <= s.tol.identity_tol}};
  }
  return {};
}

CurvePath random_tangent_curve(Rng& rng, int knots, double radius) {
  CurvePath Y;
  Vec3 y = Vec3::Zero(), v = rng.normal3();
  for (int i = 0; i <= knots; ++i) {
    Y.push(static_cast<double>(i) / knots, y, v);
    Vec3 nv = v + 0.8 * rng.normal3();
    y += 0.5 * (v + nv) / knots;
    v = nv;
  }
  double m = 0.0;
  for (int i = 0; i < knots; ++i)
    for (int j = 0; j <= 8; ++j) m = std::max(m, Y.eval_on(i, Y.t[i] + (Y.t[i + 1] - Y.t[i]) * j / 8.0).norm());
  double f = m > 0 ? radius / m : 1.0;
  for (std::size_t i = 0; i < Y.size(); ++i) {
    Y.x[i] *= f;
    Y.v[i] *= f;
  }
  return Y;
}

std::string task_verify_pair(const Scenario& s, int threads, json& results, std::vector<std::string>& warnings) {
  const json& p = s.params;
  LRelatedPair pair = identity_pair(s.model, s.base_point);
  if (p["pair"] == "isometry") {
    Mat3 A;
    if (p.contains("matrix")) {
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) A(i, j) = p["matrix"][i][j];
    } else {
      const json& r = p["rotation"];
      Vec3 axis(r["axis"][0].get<double>(), r["axis"][1].get<double>(), r["axis"][2].get<double>());
      A = Eigen::AngleAxisd(r["angle"].get<double>(), axis.normalized()).toRotationMatrix();
    }
    pair = isometry_pair(s.model, s.base_point, A);
  }
  double radius = p["radius"];
  double orth = pair.orthogonality_residual();
  double curv = pair.curvature_residual(p["curvature_samples"], s.seed, radius);
  bool valid = orth <= 1e-10 && curv <= 1e-5;
  results["pair"] = {{"kind", p["pair"]},
                     {"p1", to_json(pair.p1)},
                     {"p2", to_json(pair.p2)},
                     {"L", to_json(pair.L)},
                     {"orthogonality_residual", orth},
                     {"curvature_residual", curv},
                     {"valid", valid}};
  if (!valid) return "the pair is not L-related within tolerance";

  TransportOptions topt;
  topt.r_max = s.r_max;
  topt.refine = p["refine"];
  topt.develop.rtol = std::min(s.tol.ode_rtol, 1e-9);
  topt.develop.atol = s.tol.ode_atol;
  bool shrink = p["shrink"];
  Rng rng(s.seed);
  std::vector<CurvePath> curves;
  for (int i = 0; i < p["curves"].get<int>(); ++i) curves.push_back(random_tangent_curve(rng, p["knots"], radius));
  std::vector<json> recs(curves.size());
  parallel_for(curves.size(), threads, [&](std::size_t i) {
    json r;
    try {
      if (shrink) {
        ShrinkResult sr = shrink_and_limit(pair, curves[i], {10, 100, 1000}, topt);
        json ks = json::array();
        for (const auto& k : sr.records)
          ks.push_back({{"k", k.k}, {"development", k.residual.development}, {"derivative", k.residual.derivative}});
        r = {{"shrink", ks}, {"development", sr.extrapolated_development}, {"derivative", sr.extrapolated_derivative}};
      } else {
        TransportResidual t = verify_L_related_transport(pair, curves[i], topt);
        r = {{"development", t.development},
             {"derivative", t.derivative},
             {"continuity_constant", t.continuity_constant},
             {"samples", t.samples}};
      }
      r["ok"] = r["development"].get<double>() < s.tol.lemma_tol && r["derivative"].get<double>() < s.tol.lemma_tol;
    } catch (const V1ExitError& e) {
      r = {{"error", e.what()}, {"v1_exit", e.exit_param()}};
    } catch (const Error& e) {
      r = {{"error", e.what()}};
    }
    recs[i] = std::move(r);
  });
  bool lemma_ok = true;
  int errors = 0;
  json arr = json::array();
  for (auto& r : recs) {
    if (r.contains("error"))
      ++errors;
    else
      lemma_ok = lemma_ok && r["ok"].get<bool>();
    arr.push_back(std::move(r));
  }
  results["curves"] = arr;
  results["lemma_ok"] = lemma_ok;

  Frame fp = orthonormal_frame(s.model->metric(s.base_point));
  double amp = p["roundtrip_amplitude"];
  int knots = p["roundtrip_knots"];
  std::vector<CurvePath> paths;
  for (int k = 0; k < p["roundtrip_paths"].get<int>(); ++k) {
    CurvePath u;
    Vec3 x = s.base_point, v = amp * (fp.E * rng.normal3());
    for (int i = 0; i <= knots; ++i) {
      u.push(static_cast<double>(i) / knots, x, v);
      Vec3 nv = amp * (fp.E * rng.normal3());
      x += 0.5 * (v + nv) / knots;
      v = nv;
    }
    paths.push_back(u);
  }
  std::vector<double> rt(paths.size()), sp(paths.size());
  parallel_for(paths.size(), threads, [&](std::size_t k) {
    CurvePath d = develop(*s.model, s.base_point, paths[k], topt.develop);
    CurvePath w = undevelop(*s.model, s.base_point, d, topt.develop);
    if (d.truncated || w.truncated) throw TruncationError("round trip left the chart", d.truncated ? d.exit_t : w.exit_t);
    rt[k] = sup_distance(paths[k], w);
    double worst = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      double a = d.v[i].norm();
      Vec3 xv = paths[k].velocity(d.t[i]);
      double b = std::sqrt(xv.dot(s.model->metric(paths[k].eval(d.t[i])) * xv));
      worst = std::max(worst, std::abs(a - b) / std::max(1.0, b));
    }
    sp[k] = worst;
  });
  double rt_max = 0.0, sp_max = 0.0;
  for (std::size_t k = 0; k < rt.size(); ++k) {
    rt_max = std::max(rt_max, rt[k]);
    sp_max = std::max(sp_max, sp[k]);
  }
  results["roundtrip"] = {{"paths", paths.size()},
                          {"max_error", rt_max},
                          {"max_speed_defect", sp_max},
                          {"ok", rt_max < s.tol.roundtrip_tol}};

  json cont = json::array();
  for (int i = 0; i < p["continuity_points"].get<int>(); ++i) {
    Vec3 x = rng.unit_vector() * radius * rng.uniform();
    cont.push_back({{"x", to_json(x)}, {"constant", isometry_continuity(pair, x, 1e-4, 8, s.seed + i)}});
  }
  results["continuity"] = cont;
  if (!lemma_ok) warnings.push_back("transport lemma residual above lemma_tol");
  if (errors) return std::to_string(errors) + " curves failed";
  return {};
}

json d4_json(const D4RootRecord& r) {
  json out{{"variant", r.variant == D4Variant::plus ? "plus" : "minus"},
           {"a", r.a},
           {"b", r.b},
           {"coefficients", r.coefficients},
           {"degree", r.degree},
           {"reduced_degree", r.reduced_degree},
           {"sturm_count", r.sturm_count},
           {"roots", r.roots},
           {"arithmetic", r.arithmetic}};
  if (r.variant == D4Variant::plus) {
    out["p3"] = r.p3;
    out["p3_exact_zero"] = r.p3_exact_zero;
    out["p3_sign"] = r.p3_sign;
  } else {
    out["interval_counts"] = r.interval_counts;
    out["interval_flags"] = r.interval_flags;
    out["p_at_minus_inv_sqrt3"] = r.p_at_minus_inv_sqrt3;
    out["p_at_minus_inv_sqrt3_sign"] = r.p_at_minus_inv_sqrt3_sign;
  }
  return out;
}

std::string task_d4_analysis(const Scenario& s, int threads, json& results, std::vector<std::string>& warnings) {
  const json& p = s.params;
  D4Variant v = p["variant"] == "plus" ? D4Variant::plus : D4Variant::minus;
  if (p.contains("a")) results["point"] = d4_json(d4_root_analysis(p["a"], p["b"], v));
  if (!p.contains("grid")) return {};
  const json& g = p["grid"];
  int n = g["n"];
  double a0 = g["a"][0], a1 = g["a"][1], b0 = g["b"][0], b1 = g["b"][1];
  auto node = [n](double lo, double hi, int i) { return n == 1 ? lo : lo + (hi - lo) * i / (n - 1); };
  std::vector<std::pair<double, double>> pts;
  int skipped = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double a = node(a0, a1, i), b = node(b0, b1, j);
      bool inside = v == D4Variant::plus ? a * b > 1.0 : a * a + b * b < 1.0;
      if (inside)
        pts.emplace_back(a, b);
      else
        ++skipped;
    }
  std::vector<D4RootRecord> recs(pts.size());
  parallel_for(pts.size(), threads, [&](std::size_t i) { recs[i] = d4_root_analysis(pts[i].first, pts[i].second, v); });
  std::map<std::string, int> counts;
  std::map<int, std::map<std::string, int>> sign_by_count;
  bool flags = true;
  double pmin = std::numeric_limits<double>::infinity();
  for (const auto& r : recs) {
    ++counts[std::to_string(r.sturm_count)];
    if (v == D4Variant::plus) {
      ++sign_by_count[r.sturm_count][std::to_string(r.p3_sign)];
    } else {
      flags = flags && r.interval_flags;
      pmin = std::min(pmin, r.p_at_minus_inv_sqrt3);
    }
  }
  json grid{{"evaluated", recs.size()}, {"skipped_outside_chamber", skipped}, {"sturm_counts", counts}};
  if (v == D4Variant::plus) {
    json sbc = json::object();
    bool separates = true;
    std::map<std::string, int> owner;
    for (const auto& [count, signs] : sign_by_count) {
      sbc[std::to_string(count)] = signs;
      for (const auto& [sg, k] : signs) {
        if (sg == "0") continue;
        if (owner.count(sg) && owner[sg] != count) separates = false;
        owner[sg] = count;
      }
    }
    grid["p3_sign_by_count"] = sbc;
    grid["sign_separates_counts"] = separates;
    if (!separates) warnings.push_back("sign(p3) does not separate the Sturm counts on the grid");
  } else {
    grid["all_interval_flags"] = flags;
    grid["min_p_at_minus_inv_sqrt3"] = number_or_null(pmin);
    if (!flags) warnings.push_back("some minus-variant records miss an interval root");
  }
  results["grid"] = grid;
  return {};
}

std::string task_normal_form_selftest(const Scenario& s, int threads, json& results, std::vector<std::string>& warnings) {
  const json& p = s.params;
  const std::vector<NormalFormClass> classes{NormalFormClass::A2, NormalFormClass::A3, NormalFormClass::A4,
                                             NormalFormClass::D4_minus, NormalFormClass::D4_plus};
  std::vector<PhaseGrid> grids(classes.size());
  parallel_for(classes.size(), threads,
               [&](std::size_t i) { grids[i] = phase_derive(classes[i], p["per_axis"], p["half_width"]); });
  json cls = json::object();
  bool all_ok = true;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    bool ok = grids[i].max_deviation <= s.tol.normal_form_tol && grids[i].flagged_count == 0;
    all_ok = all_ok && ok;
    cls[to_string(classes[i])] = {{"nodes", grids[i].nodes.size()},
                                  {"max_deviation", grids[i].max_deviation},
                                  {"flagged", grids[i].flagged_count},
                                  {"ok", ok}};
  }
  results["classes"] = cls;
  int nt = p["join_t"], nc = p["join_c"];
  double worst = 0.0;
  bool join_ok = true;
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < nc; ++j) {
      double t = nt == 1 ? 0.5 : -1.0 + 2.0 * i / (nt - 1);
      double c = nc == 1 ? 0.0 : -1.0 + 2.0 * j / (nc - 1);
      Vec3 a = canonical_map_eval(NormalFormClass::A3, {t, 3 * t * t, c});
      Vec3 b = canonical_map_eval(NormalFormClass::A3, {-2 * t, 3 * t * t, c});
      double d = (a - b).cwiseAbs().maxCoeff();
      worst = std::max(worst, d);
      join_ok = join_ok && d <= 8 * std::numeric_limits<double>::epsilon() * (1.0 + a.cwiseAbs().maxCoeff());
    }
  results["a3_join"] = {{"points", nt * nc}, {"max_error", worst}, {"ok", join_ok}};
  results["ok"] = all_ok && join_ok;
  if (!all_ok || !join_ok) warnings.push_back("normal-form self test failed");
  return {};
}

}  // namespace

void run_task(const Scenario& s, int threads, json& results, std::vector<std::string>& warnings, std::string& failure) {
  if (s.task == "conjugate_sweep") failure = task_conjugate_sweep(s, threads, results, warnings);
  else if (s.task == "classify") failure = task_classify(s, threads, results, warnings);
  else if (s.task == "cdc_trace") failure = task_cdc_trace(s, threads, results, warnings);
  else if (s.task == "link") failure = task_link(s, threads, results, warnings);
  else if (s.task == "verify_pair") failure = task_verify_pair(s, threads, results, warnings);
  else if (s.task == "d4_analysis") failure = task_d4_analysis(s, threads, results, warnings);
  else if (s.task == "normal_form_selftest") failure = task_normal_form_selftest(s, threads, results, warnings);
  else throw PreconditionError("unknown task " + s.task);
}

RunResult run_scenario(const Scenario& s, int threads) {
  RunResult out;
  json results = json::object();
  std::vector<std::string> warnings;
  std::string failure;
  try {
    run_task(s, threads, results, warnings, failure);
  } catch (const std::exception& e) {
    failure = e.what();
  }
  out.exit_code = failure.empty() ? kExitOk : kExitNumerical;
  out.message = failure;
  json& r = out.report;
  r["scenario"] = s.config;
  r["resolved"] = {{"task", s.task}, {"params", s.params}, {"field", s.field_echo}};
  r["provenance"] = {{"tool", "cjl"}, {"version", CJL_VERSION}, {"seed", s.seed}, {"tolerances", s.tol.to_json()}};
  r["status"] = failure.empty() ? "ok" : "numerical_failure";
  if (!failure.empty()) r["error"] = failure;
  r["results"] = std::move(results);
  r["warnings"] = warnings;
  return out;
}

}  // namespace cjl::scenario

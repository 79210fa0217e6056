// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any criterion fails.
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cjl/development.hpp"
#include "cjl/errors.hpp"
#include "cjl/exp_map.hpp"
#include "cjl/linking.hpp"
#include "cjl/normal_forms.hpp"
#include "cjl/random.hpp"
#include "cjl/sturm.hpp"
#include "cjl/tree_check.hpp"

using namespace cjl;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + std::string("FAILED ") + what;
    }
  }
  void note(const std::string& s) { detail += (detail.empty() ? "" : "; ") + s; }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Shared fields and linking runs.
struct Fixtures {
  SyntheticField a3{[] {
    SyntheticSpec s;
    s.cls = NormalFormClass::A3;
    return s;
  }()};
  SyntheticField a4{[] {
    SyntheticSpec s;
    s.cls = NormalFormClass::A4;
    s.theta = M_PI / 2;
    s.kappa = 0.5;
    return s;
  }()};
  ModelPtr ellipsoid = make_ellipsoid({1.0, 1.1, 1.25, 1.0});
  Vec3 ell_p{0.6, 0.3, -0.2};
  ExpPtr ell = make_riemannian(ellipsoid, ell_p);

  double t0 = -0.5, c = 0.2;
  Vec3 a3_start{t0, 3 * t0 * t0, c};
  Vec3 a4_start{-0.45, -0.24, 0.0931415625};
  Vec3 ell_start{0.8021155505863198, 2.807404427052119, -1.2031733258794797};

  std::optional<LinkingResult> a3_run, a4_run, ell_run;
  std::string ell_error;

  const LinkingResult& a3_link() {
    if (!a3_run) a3_run = run_linking_algorithm(a3, a3_start, 1);
    return *a3_run;
  }
  const LinkingResult& a4_link() {
    if (!a4_run) a4_run = run_linking_algorithm(a4, a4_start, 1);
    return *a4_run;
  }
  const LinkingResult& ell_link() {
    if (!ell_run) {
      LinkingOptions opt;
      opt.cdc.step = 5e-2;
      ell_run = run_linking_algorithm(*ell, ell_start, 7, opt);
    }
    return *ell_run;
  }
};

Fixtures& fx() {
  static Fixtures f;
  return f;
}

Outcome normal_forms() {
  Outcome o;
  auto t = std::chrono::steady_clock::now();
  double worst = 0.0;
  int flagged = 0;
  for (auto c : {NormalFormClass::A2, NormalFormClass::A3, NormalFormClass::A4, NormalFormClass::D4_minus,
                 NormalFormClass::D4_plus}) {
    auto g = phase_derive(c, 10, 1.5);
    o.require(g.nodes.size() == 1000, std::string("grid size for ") + to_string(c));
    worst = std::max(worst, g.max_deviation);
    flagged += g.flagged_count;
  }
  double dt = seconds_since(t);
  o.require(worst < 1e-8, "max deviation < 1e-8");
  o.require(flagged == 0, "no flagged nodes");
  o.require(dt < 10.0, "runtime < 10 s");
  o.note("max deviation " + num(worst) + ", flagged " + std::to_string(flagged) + ", " + num(dt) + " s");
  return o;
}

Outcome a3_join() {
  Outcome o;
  double worst_ulps = 0.0;
  for (int i = 0; i < 100; ++i)
    for (int j = 0; j < 10; ++j) {
      double t = -1.0 + 2.0 * i / 99, c = -1.0 + 2.0 * j / 9;
      Vec3 a = canonical_map_eval(NormalFormClass::A3, Vec3(t, 3 * t * t, c));
      Vec3 b = canonical_map_eval(NormalFormClass::A3, Vec3(-2 * t, 3 * t * t, c));
      double scale = std::numeric_limits<double>::epsilon() * std::max(1.0, a.cwiseAbs().maxCoeff());
      worst_ulps = std::max(worst_ulps, (a - b).cwiseAbs().maxCoeff() / scale);
    }
  o.require(worst_ulps <= 4.0, "images agree within 4 ulp");
  o.note("1000 pairs, max difference " + num(worst_ulps) + " ulp");
  return o;
}

Outcome d4_plus() {
  Outcome o;
  auto t = std::chrono::steady_clock::now();
  int bad_count = 0, bad_sign = 0, n1 = 0, n3 = 0, ties = 0;
  for (int i = 0; i < 200; ++i)
    for (int j = 0; j < 200; ++j) {
      double a = -6.0 + (6.0 - 1.01) * i / 199, b = -6.0 + (6.0 - 1.01) * j / 199;
      if (a * b <= 1.0) continue;
      auto r = d4_root_analysis(a, b, D4Variant::plus);
      if (r.sturm_count == 1) ++n1;
      else if (r.sturm_count == 3) ++n3;
      else ++bad_count;
      if (r.p3_sign == 0 || std::abs(r.p3) < 1e-8) {
        ++ties;
        continue;
      }
      int expect = r.sturm_count == 3 ? -1 : 1;
      if (r.p3_sign != expect) ++bad_sign;
    }
  auto b = d4_root_analysis(-3, -3, D4Variant::plus);
  double dt = seconds_since(t);
  o.require(bad_count == 0, "sturm count in {1,3}");
  o.require(bad_sign == 0, "sign(p3) separates the counts");
  o.require(n1 > 0 && n3 > 0, "both counts occur");
  o.require(b.sturm_count == 1 && b.roots.size() == 1 && std::abs(b.roots[0] - 1.0) < 1e-9, "triple root at 1");
  o.require(b.p3_exact_zero && b.p3 == 0.0, "p3(-3,-3) = 0 exactly");
  o.require(dt < 60.0, "runtime < 60 s");
  o.note("count 1: " + std::to_string(n1) + ", count 3: " + std::to_string(n3) + ", ties " + std::to_string(ties) +
         ", boundary " + b.arithmetic + " p3 = " + num(b.p3) + ", " + num(dt) + " s");
  return o;
}

Outcome d4_minus() {
  Outcome o;
  Rng rng(2024);
  int bad = 0;
  double min_inside = std::numeric_limits<double>::infinity();
  for (int n = 0; n < 500; ++n) {
    double r = std::sqrt(0.99 * rng.uniform()), phi = rng.uniform(0, 2 * M_PI);
    auto rec = d4_root_analysis(r * std::cos(phi), r * std::sin(phi), D4Variant::minus);
    if (!rec.interval_flags || rec.interval_counts != std::vector<int>{1, 1, 1} || rec.sturm_count != 3) ++bad;
    if (rec.p_at_minus_inv_sqrt3 < 0) ++bad;
    min_inside = std::min(min_inside, rec.p_at_minus_inv_sqrt3);
  }
  double min_edge = std::numeric_limits<double>::infinity();
  for (int n = 0; n < 500; ++n) {
    double r = std::sqrt(rng.uniform(0.999, 0.9999)), phi = rng.uniform(0, 2 * M_PI);
    auto rec = d4_root_analysis(r * std::cos(phi), r * std::sin(phi), D4Variant::minus);
    if (rec.p_at_minus_inv_sqrt3 < 0) ++bad;
    min_edge = std::min(min_edge, rec.p_at_minus_inv_sqrt3);
  }
  o.require(bad == 0, "one root per interval and p(-1/sqrt3) >= 0");
  o.require(min_edge < 1e-2, "min p(-1/sqrt3) near the boundary < 1e-2");
  o.note("violations " + std::to_string(bad) + ", min inside " + num(min_inside) + ", min near boundary " + num(min_edge));
  return o;
}

Outcome sphere_oracle() {
  Outcome o;
  auto t = std::chrono::steady_clock::now();
  auto sphere = make_sphere(1.0);
  Vec3 p(0.5, 0, 0);
  Rng rng(5);
  double worst = 0.0;
  for (int n = 0; n < 50; ++n) {
    auto cs = conjugate_radii(*sphere, p, rng.unit_vector(), 1, 5.0);
    worst = std::max(worst, cs.records.empty() ? 1.0 : std::abs(cs.records[0].radius - M_PI));
  }
  double sv = 0.0;
  for (double r : {1.0, 2.0, 3.0}) {
    auto e = exp_jet(*sphere, p, r * rng.unit_vector());
    Vec3 expect(1.0, std::sin(r) / r, std::sin(r) / r);
    sv = std::max(sv, (e.singular_values - expect).cwiseAbs().maxCoeff());
  }
  double dt = seconds_since(t);
  o.require(worst < 1e-6, "lambda1 = pi within 1e-6");
  o.require(sv < 1e-6, "singular values within 1e-6");
  o.require(dt < 30.0, "runtime < 30 s");
  o.note("max |lambda1 - pi| " + num(worst) + ", max singular value error " + num(sv) + ", " + num(dt) + " s");
  return o;
}

Outcome gauss_and_domination() {
  Outcome o;
  auto& f = fx();
  Rng rng(6);
  double gauss = 0.0;
  for (int n = 0; n < 20; ++n) {
    Vec3 u = rng.unit_vector();
    for (double r : {0.5, 1.0, 1.5, 2.0, 2.5})
      gauss = std::max(gauss, std::abs((exp_jet(*f.ellipsoid, f.ell_p, r * u).differential * u).norm() - 1.0));
  }
  double worst_excess = -std::numeric_limits<double>::infinity();
  for (int n = 0; n < 100; ++n) {
    CurvePath c;
    for (int i = 0; i <= 4; ++i) {
      Vec3 x = rng.normal3();
      if (x.norm() > 1.0) x.normalize();
      c.push(i / 4.0, 2.0 * x, 2.0 * rng.normal3());
    }
    double tv = 0.0, prev = c.eval(0.0).norm();
    for (int i = 1; i <= 400; ++i) {
      double r = c.eval(i / 400.0).norm();
      tv += std::abs(r - prev);
      prev = r;
    }
    worst_excess = std::max(worst_excess, tv - image_length(*f.ellipsoid, f.ell_p, c));
  }
  o.require(gauss < 1e-7, "radial derivative norm = 1 within 1e-7");
  o.require(worst_excess <= 1e-5, "TV(|x|) <= length(exp o x) + 1e-5");
  o.note("ellipsoid, 20 rays: max | |d exp(r)| - 1 | " + num(gauss) + "; 100 paths: max TV - length " + num(worst_excess));
  return o;
}

Outcome cdc_identities() {
  Outcome o;
  auto& f = fx();
  double worst = 0.0, min_margin = std::numeric_limits<double>::infinity();
  int curves = 0, audits = 0;
  auto check_curve = [&](const CDCurve& c) {
    if (c.samples.size() < 2) return;
    worst = std::max(worst, std::abs(c.radius_drop() - c.image_length));
    ++curves;
  };
  auto check_fclc = [&](const LinkingResult& r, const char* name) {
    if (!r.fclc) {
      o.require(false, std::string(name) + " linking succeeded");
      return;
    }
    for (const Segment& s : r.fclc->curve.segments)
      if (s.kind == SegmentKind::ACDC) check_curve(s.acdc);
    for (const AuditRecord& a : r.fclc->audits) {
      min_margin = std::min(min_margin, a.margin);
      ++audits;
    }
  };
  check_fclc(f.ell_link(), "ellipsoid");
  check_fclc(f.a3_link(), "A3");
  check_fclc(f.a4_link(), "A4");
  for (double theta : {0.3, -0.4}) {
    SyntheticSpec s;
    s.cls = NormalFormClass::A3;
    s.theta = theta;
    check_curve(integrate_cdc(SyntheticField(s), Vec3(-0.4, 0.48, -0.1)));
  }
  o.require(worst < 1e-5, "|a(0)| - |a(T)| = length(exp o a) within 1e-5");
  o.require(audits > 0 && min_margin > 0.0, "every audited margin > 0");
  o.note(std::to_string(curves) + " curves, max identity defect " + num(worst) + "; " + std::to_string(audits) +
         " audits, min margin " + num(min_margin));
  return o;
}

Outcome tree_formedness() {
  Outcome o;
  auto& f = fx();
  double worst = 0.0;
  int checked = 0;
  auto check = [&](const ExpStructure& E, const LinkingResult& r, const char* name) {
    if (!r.fclc) {
      o.require(false, std::string(name) + " FCLC available");
      return;
    }
    auto res = tree_formed_check(E, r.fclc->curve, 50, 13);
    o.require(res.forms >= 50, "50 forms");
    worst = std::max(worst, res.max_integral);
    ++checked;
  };
  check(f.a3, f.a3_link(), "A3");
  check(f.a4, f.a4_link(), "A4");
  check(*f.ell, f.ell_link(), "ellipsoid");
  bool rejected = false;
  if (f.a4_link().fclc) {
    auto tree = identification_tree(f.a4_link().fclc->curve);
    if (tree.pairing.size() >= 2) {
      tree.pairing[1].offset = 1e-2;
      try {
        tree_formed_check(f.a4, tree, 50, 13);
      } catch (const StructuralError&) {
        rejected = true;
      }
    }
  }
  o.require(worst < 1e-5, "max integral < 1e-5");
  o.require(rejected, "corrupted pairing rejected");
  o.note(std::to_string(checked) + " FCLCs, max integral " + num(worst) + ", corrupted pairing " +
         (rejected ? "rejected" : "accepted"));
  return o;
}

Outcome end_to_end() {
  Outcome o;
  auto& f = fx();
  const auto& r3 = f.a3_link();
  if (r3.fclc) {
    const auto& c = r3.fclc->curve;
    Vec3 expect(-2 * f.t0, 3 * f.t0 * f.t0, f.c);
    o.require(c.segments.size() == 2, "A3: two segments");
    o.require((c.tip() - expect).norm() < 1e-6, "A3: tip at (-2t, 3t^2, c)");
    o.require(r3.fclc->radius_gain > 0, "A3: gain > 0");
    o.require(r3.fclc->endpoint_image_gap < 1e-6, "A3: exp(start) = exp(tip)");
    o.note("A3: " + std::to_string(c.segments.size()) + " segments, tip error " + num((c.tip() - expect).norm()) +
           ", gain " + num(r3.fclc->radius_gain) + ", gap " + num(r3.fclc->endpoint_image_gap));
  } else {
    o.require(false, "A3 linking: " + r3.failure);
  }
  const auto& r4 = f.a4_link();
  if (r4.fclc) {
    auto ts = standard_ts(r4.fclc->curve);
    o.require(r4.fclc->saturated, "A4: saturated");
    o.require(!ts.empty(), "A4: contains a standard T");
    o.require(r4.fclc->radius_gain > 0, "A4: gain > 0");
    o.require(r4.fclc->endpoint_image_gap < 1e-6, "A4: exp(start) = exp(tip)");
    o.note("A4: " + std::to_string(r4.fclc->curve.segments.size()) + " segments, " + std::to_string(ts.size()) +
           " standard T, gain " + num(r4.fclc->radius_gain) + ", gap " + num(r4.fclc->endpoint_image_gap));
  } else {
    o.require(false, "A4 linking: " + r4.failure);
  }
  return o;
}

Outcome development_suite() {
  Outcome o;
  auto& f = fx();
  Rng rng(10);
  double trip = 0.0;
  for (int k = 0; k < 20; ++k) {
    CurvePath u;
    Vec3 x = f.ell_p, v = 0.6 * rng.normal3();
    for (int i = 0; i <= 12; ++i) {
      u.push(i / 12.0, x, v);
      Vec3 nv = 0.6 * rng.normal3();
      x += 0.5 * (v + nv) / 12;
      v = nv;
    }
    trip = std::max(trip, sup_distance(u, undevelop(*f.ellipsoid, f.ell_p, develop(*f.ellipsoid, f.ell_p, u))));
  }
  o.require(trip < 1e-5, "round trip < 1e-5");

  auto sphere = make_sphere(1.0);
  Vec3 p(0.3, 0, 0);
  Mat3 R;
  R << 1, 0, 0, 0, std::cos(0.7), -std::sin(0.7), 0, std::sin(0.7), std::cos(0.7);
  double lemma = 0.0;
  for (const auto& pair : {identity_pair(sphere, p), isometry_pair(sphere, p, R)})
    for (int k = 0; k < 3; ++k) {
      CurvePath Y;
      Vec3 y = Vec3::Zero(), v = 1.2 * rng.unit_vector();
      for (int i = 0; i <= 12; ++i) {
        Y.push(i / 12.0, y, v);
        Vec3 nv = v + 0.5 * rng.normal3();
        y += 0.5 * (v + nv) / 12;
        v = nv;
      }
      double top = 0.0;
      for (const auto& q : Y.x) top = std::max(top, q.norm());
      if (top > 2.5)
        for (std::size_t i = 0; i < Y.size(); ++i) {
          Y.x[i] *= 2.5 / top;
          Y.v[i] *= 2.5 / top;
        }
      try {
        auto res = verify_L_related_transport(pair, Y);
        lemma = std::max({lemma, res.development, res.derivative});
      } catch (const Error& e) {
        o.require(false, std::string("transport: ") + e.what());
      }
    }
  o.require(lemma < 1e-4, "identity and rotation residuals < 1e-4");

  double endpoint = 0.0;
  const auto& r = f.ell_link();
  if (r.fclc && !r.fclc->curve.segments.empty()) {
    Vec3 xs = r.fclc->curve.start, xt = r.fclc->curve.tip();
    Mat3 S = Mat3::Identity();
    S(1, 1) = -1;
    for (const auto& pair : {identity_pair(f.ellipsoid, f.ell_p), isometry_pair(f.ellipsoid, f.ell_p, S)}) {
      auto a = local_isometry_I(pair, xs), b = local_isometry_I(pair, xt);
      endpoint = std::max(endpoint, (a.matrix - b.matrix).cwiseAbs().maxCoeff());
      endpoint = std::max(endpoint, (a.to_point - b.to_point).norm());
    }
  } else {
    o.require(false, "ellipsoid FCLC with segments");
  }
  o.require(endpoint < 1e-5, "I_start = I_tip within 1e-5");
  o.note("round trip " + num(trip) + ", transport residual " + num(lemma) + ", endpoint isometry gap " + num(endpoint) +
         " (identity and reflection pairs)");
  return o;
}

int run_cli(const std::string& args, const std::string& env = "") {
  std::string cmd = env + " '" + CJL_CLI_PATH + "' " + args + " >/dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  Outcome o;
  fs::path dir = fs::temp_directory_path() / ("cjl_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  int identical = 0, total = 0;
  for (const char* cfg : {"a3_link.json", "sphere_sweep.json", "d4_minus_field.json", "ellipsoid_conjugate_sphere.json"}) {
    std::string path = std::string(CJL_CONFIG_DIR) + "/" + cfg;
    fs::path a = dir / (std::string(cfg) + ".1"), b = dir / (std::string(cfg) + ".2");
    int ra = run_cli("run " + path + " --report " + a.string(), "CJL_THREADS=1");
    int rb = run_cli("run " + path + " --report " + b.string(), "CJL_THREADS=3");
    ++total;
    if (ra == 0 && rb == 0 && !slurp(a).empty() && slurp(a) == slurp(b)) ++identical;
    else o.require(false, std::string(cfg) + " identical");
  }
  fs::remove_all(dir);
  o.note(std::to_string(identical) + "/" + std::to_string(total) + " scenarios byte-identical (1 vs 3 threads)");
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"normal-form consistency", normal_forms},
      {"A3-join identity", a3_join},
      {"D4+ roots and discriminant", d4_plus},
      {"D4- intervals", d4_minus},
      {"sphere oracle", sphere_oracle},
      {"Gauss lemma and norm domination", gauss_and_domination},
      {"CDC identities", cdc_identities},
      {"tree-formedness", tree_formedness},
      {"algorithm end-to-end", end_to_end},
      {"development and L-related transport", development_suite},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.note(std::string("exception: ") + e.what());
    }
    if (!o.pass) ++failed;
    std::printf("[%s] %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

#include <cmath>
#include <cstdio>
#include <functional>

#include "cjl/development.hpp"
#include "cjl/exp_map.hpp"
#include "cjl/normal_forms.hpp"
#include "cjl/random.hpp"
#include "cjl/sturm.hpp"
#include "internal.hpp"

namespace cjl::scenario {

namespace {

struct Check {
  std::string name;
  std::function<std::pair<bool, double>()> run;
};

}  // namespace

int run_selftest(std::ostream& out) {
  std::vector<Check> checks;
  for (auto c : {NormalFormClass::A2, NormalFormClass::A3, NormalFormClass::A4, NormalFormClass::D4_minus,
                 NormalFormClass::D4_plus})
    checks.push_back({std::string("normal_form_") + to_string(c), [c] {
                        PhaseGrid g = phase_derive(c, 10, 1.5);
                        return std::make_pair(g.max_deviation <= 1e-8 && g.flagged_count == 0, g.max_deviation);
                      }});
  checks.push_back({"a3_join_identity", [] {
                      double worst = 0.0;
                      for (int i = 0; i < 100; ++i)
                        for (int j = 0; j < 10; ++j) {
                          double t = -1.0 + 2.0 * i / 99, c = -1.0 + 2.0 * j / 9;
                          Vec3 a = canonical_map_eval(NormalFormClass::A3, {t, 3 * t * t, c});
                          Vec3 b = canonical_map_eval(NormalFormClass::A3, {-2 * t, 3 * t * t, c});
                          worst = std::max(worst, (a - b).cwiseAbs().maxCoeff());
                        }
                      return std::make_pair(worst <= 1e-14, worst);
                    }});
  checks.push_back({"d4_plus_triple_root", [] {
                      D4RootRecord r = d4_root_analysis(-3, -3, D4Variant::plus);
                      bool ok = r.sturm_count == 1 && r.p3_exact_zero && r.roots.size() == 1 &&
                                std::abs(r.roots[0] - 1.0) < 1e-9;
                      return std::make_pair(ok, r.p3);
                    }});
  checks.push_back({"d4_minus_intervals", [] {
                      Rng rng(7);
                      bool ok = true;
                      double pmin = 1e300;
                      for (int i = 0; i < 50; ++i) {
                        double rad = std::sqrt(0.99 * rng.uniform()), ang = 2 * M_PI * rng.uniform();
                        D4RootRecord r = d4_root_analysis(rad * std::cos(ang), rad * std::sin(ang), D4Variant::minus);
                        ok = ok && r.interval_flags && r.p_at_minus_inv_sqrt3 >= 0;
                        pmin = std::min(pmin, r.p_at_minus_inv_sqrt3);
                      }
                      return std::make_pair(ok, pmin);
                    }});
  auto sphere = make_sphere(1.0);
  checks.push_back({"sphere_lambda1", [sphere] {
                      double worst = 0.0;
                      const double golden = M_PI * (3.0 - std::sqrt(5.0));
                      for (int i = 0; i < 5; ++i) {
                        double th = std::acos(1.0 - 2.0 * (i + 0.5) / 5), ph = golden * i;
                        Vec3 d(std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th));
                        double l = conjugate_radii(*sphere, Vec3(0.5, 0, 0), d, 1, 5.0).lambda(1);
                        worst = std::max(worst, std::abs(l - M_PI));
                      }
                      return std::make_pair(worst < 1e-6, worst);
                    }});
  checks.push_back({"sphere_singular_values", [sphere] {
                      double worst = 0.0;
                      Vec3 d = Vec3(0.3, -0.5, 0.8).normalized();
                      for (double t : {1.0, 2.0, 3.0}) {
                        ExpJet j = exp_jet(*sphere, Vec3::Zero(), t * d);
                        double s = std::sin(t) / t;
                        worst = std::max({worst, std::abs(j.singular_values[0] - 1.0), std::abs(j.singular_values[1] - s),
                                          std::abs(j.singular_values[2] - s)});
                      }
                      return std::make_pair(worst < 1e-6, worst);
                    }});
  checks.push_back({"identity_pair_transport", [sphere] {
                      LRelatedPair pair = identity_pair(sphere, Vec3::Zero());
                      CurvePath Y;
                      for (int i = 0; i <= 6; ++i) {
                        double t = i / 6.0;
                        Y.push(t, Vec3(t, 0.5 * std::sin(3 * t), 0.3 * t * t), Vec3(1, 1.5 * std::cos(3 * t), 0.6 * t));
                      }
                      TransportResidual r = verify_L_related_transport(pair, Y);
                      double w = std::max(r.development, r.derivative);
                      return std::make_pair(w < 1e-4, w);
                    }});
  int failed = 0;
  for (const auto& c : checks) {
    bool ok = false;
    double value = 0.0;
    std::string err;
    try {
      std::tie(ok, value) = c.run();
    } catch (const std::exception& e) {
      err = e.what();
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3e", value);
    out << (ok ? "PASS " : "FAIL ") << c.name << ' ' << (err.empty() ? buf : err) << '\n';
    if (!ok) ++failed;
  }
  out << (failed ? "selftest: " + std::to_string(failed) + " failed" : std::string("selftest: all passed")) << '\n';
  return failed ? kExitNumerical : kExitOk;
}

}  // namespace cjl::scenario

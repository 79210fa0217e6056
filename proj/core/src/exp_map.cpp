#include "cjl/exp_map.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "cjl/errors.hpp"
#include "cjl/quadrature.hpp"

namespace cjl {

namespace {

Vec3 xs(const JacobiState& y) { return {y[0], y[1], y[2]}; }
Vec3 vs(const JacobiState& y) { return {y[3], y[4], y[5]}; }
Mat3 Js(const JacobiState& y) {
  Mat3 J;
  for (int c = 0; c < 3; ++c)
    for (int k = 0; k < 3; ++k) J(k, c) = y[6 + 3 * c + k];
  return J;
}

OdeResult<24> run_jacobi(const MetricModel& model, const JacobiState& y0, double t0, double t1, double rtol,
                         double atol, double hmax = std::numeric_limits<double>::infinity()) {
  auto sys = [&](const JacobiState& y, JacobiState& dy, double) { jacobi_rhs(model, y, dy); };
  auto inside = [&](double, const JacobiState& y) { return model.in_domain(xs(y)); };
  OdeOptions o;
  o.rtol = rtol;
  o.atol = atol;
  o.hmax = hmax;
  return integrate_ode<24>(sys, y0, t0, t1, o, inside);
}

// Frame differential of exp at s*u from the Jacobi state at s (unit-speed geodesic).
Mat3 frame_differential(const MetricModel& model, const JacobiState& y, double s) {
  Frame fy = orthonormal_frame(model.metric(xs(y)));
  return fy.Einv * Js(y) / s;
}

}  // namespace

JacobiState jacobi_initial(const MetricModel& model, const Vec3& p, const Vec3& v_chart) {
  Frame f = orthonormal_frame(model.metric(p));
  JacobiState y{};
  for (int i = 0; i < 3; ++i) {
    y[i] = p[i];
    y[3 + i] = v_chart[i];
  }
  for (int c = 0; c < 3; ++c)
    for (int k = 0; k < 3; ++k) y[15 + 3 * c + k] = f.E(k, c);
  return y;
}

void jacobi_rhs(const MetricModel& model, const JacobiState& y, JacobiState& dy) {
  Vec3 x = xs(y), v = vs(y);
  ChristoffelJet cj = christoffel_jet(model, x);
  Vec3 a = -cj.gamma.contract(v, v);
  Mat3 dGvv;  // column m: d_m Gamma(v, v)
  for (int m = 0; m < 3; ++m) dGvv.col(m) = cj.d[m].contract(v, v);
  for (int i = 0; i < 3; ++i) {
    dy[i] = v[i];
    dy[3 + i] = a[i];
  }
  for (int c = 0; c < 3; ++c) {
    Vec3 J(y[6 + 3 * c], y[7 + 3 * c], y[8 + 3 * c]);
    Vec3 Jd(y[15 + 3 * c], y[16 + 3 * c], y[17 + 3 * c]);
    Vec3 Jdd = -dGvv * J - 2.0 * cj.gamma.contract(v, Jd);
    for (int k = 0; k < 3; ++k) {
      dy[6 + 3 * c + k] = Jd[k];
      dy[15 + 3 * c + k] = Jdd[k];
    }
  }
}

namespace {

std::optional<JacobiState> fixed_jacobi(const MetricModel& model, const JacobiState& y0, int steps) {
  namespace odeint = boost::numeric::odeint;
  odeint::runge_kutta_fehlberg78<JacobiState> stepper;
  auto sys = [&](const JacobiState& y, JacobiState& dy, double) { jacobi_rhs(model, y, dy); };
  JacobiState y = y0, err;
  double h = 1.0 / steps;
  try {
    for (int i = 0; i < steps; ++i) {
      stepper.do_step(sys, y, i * h, h, err);
      if (!model.in_domain(xs(y))) return std::nullopt;
      for (int k = 0; k < 24; ++k)
        if (!(std::abs(err[k]) <= 1e-8 * (1.0 + std::abs(y[k])))) return std::nullopt;
    }
  } catch (const DomainError&) {
    return std::nullopt;
  }
  for (double v : y)
    if (!std::isfinite(v)) return std::nullopt;
  return y;
}

}  // namespace

ExpJet exp_jet(const MetricModel& model, const Vec3& p, const Vec3& x, const ExpOptions& opt) {
  model.require_domain(p);
  Frame f = orthonormal_frame(model.metric(p));
  JacobiState y0 = jacobi_initial(model, p, f.E * x);
  std::optional<JacobiState> fixed;
  if (opt.steps_per_length > 0)
    fixed = fixed_jacobi(model, y0, 8 + static_cast<int>(std::ceil(opt.steps_per_length * x.norm())));
  JacobiState y;
  if (fixed) {
    y = *fixed;
  } else {
    auto r = run_jacobi(model, y0, 0.0, 1.0, opt.rtol, opt.atol);
    if (r.status == OdeStatus::Truncated) throw TruncationError("exp_jet: geodesic left the chart", r.end_t);
    y = r.back().y;
  }
  ExpJet e;
  e.base = p;
  e.arg = x;
  e.value = xs(y);
  e.end_velocity = vs(y);
  e.chart_differential = Js(y);
  e.differential = orthonormal_frame(model.metric(e.value)).Einv * e.chart_differential;
  e.det = e.differential.determinant();
  e.singular_values = svd3(e.differential).sigma;
  return e;
}

Vec3 exp_point(const MetricModel& model, const Vec3& p, const Vec3& x, double tol) {
  Frame f = orthonormal_frame(model.metric(p));
  return geodesic_end(model, p, f.E * x, 1.0, tol).x;
}

double ConjugateSearch::lambda(int k) const {
  for (const auto& r : records)
    if (k >= r.k && k < r.k + r.multiplicity) return r.radius;
  return std::numeric_limits<double>::infinity();
}

ConjugateSearch conjugate_radii(const MetricModel& model, const Vec3& p, const Vec3& direction, int k_max,
                                double r_max, const ConjugateOptions& opt) {
  if (!(r_max > 0)) throw PreconditionError("conjugate_radii: r_max must be positive");
  model.require_domain(p);
  Vec3 u = direction.normalized();
  Frame f = orthonormal_frame(model.metric(p));
  JacobiState y0 = jacobi_initial(model, p, f.E * u);
  const double grid = opt.grid_fraction * r_max;
  auto sweep = run_jacobi(model, y0, 0.0, r_max, opt.rtol, opt.rtol * 1e-3, grid);

  ConjugateSearch out;
  out.truncated = sweep.status == OdeStatus::Truncated;
  out.searched_to = sweep.end_t;
  const auto& S = sweep.samples;
  const std::size_t n = S.size();

  auto state_at = [&](double s) -> JacobiState {
    std::size_t i = sweep.locate(s);
    if (S[i].t == s) return S[i].y;
    auto r = run_jacobi(model, S[i].y, S[i].t, s, std::min(opt.rtol, 1e-11), 1e-14);
    return r.back().y;
  };
  auto dexp = [&](double s) { return frame_differential(model, state_at(s), s); };

  std::vector<double> dets(n, 1.0);
  for (std::size_t i = 1; i < n; ++i) dets[i] = frame_differential(model, S[i].y, S[i].t).determinant();

  auto golden_sigma_min = [&](double a, double b) {
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    auto smin = [&](double s) { return svd3(dexp(s)).sigma[2]; };
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = smin(c), fd = smin(d);
    while (b - a > opt.radius_tol) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - phi * (b - a);
        fc = smin(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + phi * (b - a);
        fd = smin(d);
      }
    }
    return 0.5 * (a + b);
  };

  struct Cand {
    double s;
    bool sign_change;
  };
  std::vector<Cand> cands;
  std::vector<bool> near_change(n, false);
  for (std::size_t i = 1; i + 1 < n; ++i)
    if ((dets[i] > 0) != (dets[i + 1] > 0)) {
      near_change[i] = near_change[i + 1] = true;
      double lo = S[i].t, hi = S[i + 1].t;
      bool lo_pos = dets[i] > 0;
      while (hi - lo > opt.radius_tol) {
        double mid = 0.5 * (lo + hi);
        bool pos = dexp(mid).determinant() > 0;
        if (pos == lo_pos)
          lo = mid;
        else
          hi = mid;
      }
      cands.push_back({0.5 * (lo + hi), true});
    }
  for (std::size_t i = 2; i + 1 < n; ++i) {
    if (near_change[i] || near_change[i - 1]) continue;
    double a = std::abs(dets[i]);
    if (a <= std::abs(dets[i - 1]) && a <= std::abs(dets[i + 1])) {
      double s = golden_sigma_min(S[i - 1].t, S[i + 1].t);
      if (std::abs(dexp(s).determinant()) < opt.even_contact_det) cands.push_back({s, false});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.s < b.s; });

  int k = 1;
  for (auto& c : cands) {
    if (k > k_max) break;
    Svd3 sv = svd3(dexp(c.s));
    int mult = count_small_singular(sv.sigma, opt.sigma_rel);
    if (mult >= 2 && c.sign_change) {
      // Noise can fake a sign change at an even-order zero; polish on the kink of sigma_min.
      double w = 1e-4;
      c.s = golden_sigma_min(std::max(1e-12, c.s - w), c.s + w);
      sv = svd3(dexp(c.s));
      mult = std::max(2, count_small_singular(sv.sigma, opt.sigma_rel));
    }
    if (mult == 0) mult = 1;
    ConjugateRadius rec;
    rec.direction = u;
    rec.k = k;
    rec.radius = c.s;
    rec.multiplicity = mult;
    rec.kernel = sv.V.col(2);
    rec.even_contact = !c.sign_change && mult % 2 == 1;
    rec.singular_values = sv.sigma;
    out.records.push_back(rec);
    k += mult;
  }
  return out;
}

V1Result in_V1(const MetricModel& model, const Vec3& p, const Vec3& x, double r_max) {
  V1Result res;
  double r = x.norm();
  if (r == 0.0) {
    res.verdict = V1Verdict::Inside;
    res.inside = true;
    res.margin = r_max;
    return res;
  }
  if (r > r_max) return res;
  ConjugateSearch cs = conjugate_radii(model, p, x / r, 1, r_max);
  if (!cs.records.empty()) {
    res.lambda1 = cs.records.front().radius;
    res.margin = res.lambda1 - r;
    res.inside = res.margin >= 0.0;
    res.verdict = res.inside ? V1Verdict::Inside : V1Verdict::Outside;
    return res;
  }
  if (cs.truncated && r > cs.searched_to) return res;
  res.verdict = V1Verdict::Inside;
  res.inside = true;
  res.margin = cs.searched_to - r;
  return res;
}

double image_length(const MetricModel& model, const Vec3& p, const CurvePath& c) {
  c.validate();
  double L = 0.0;
  for (std::size_t i = 0; i + 1 < c.size(); ++i)
    L += gauss_legendre(c.t[i], c.t[i + 1], [&](double s) {
      ExpJet e = exp_jet(model, p, c.eval_on(i, s));
      return (e.differential * c.velocity_on(i, s)).norm();
    });
  return L;
}

}  // namespace cjl

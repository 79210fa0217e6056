#include "cjl/retort.hpp"

#include <cmath>
#include <limits>

#include "cjl/errors.hpp"

namespace cjl {

const char* to_string(RetortStatus s) {
  switch (s) {
    case RetortStatus::Complete: return "complete";
    case RetortStatus::Hit: return "hit";
    case RetortStatus::Boundary: return "boundary";
  }
  return "?";
}

CurvePath restrict_path(const CurvePath& p, double a, double b) {
  if (!(a < b)) throw PreconditionError("restrict_path: empty interval");
  CurvePath out;
  bool hv = p.interp() == Interp::Hermite;
  auto add = [&](double s) {
    if (hv)
      out.push(s, p.eval(s), p.velocity(s));
    else
      out.push(s, p.eval(s));
  };
  add(a);
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p.t[i] > a + 1e-14 && p.t[i] < b - 1e-14) {
      if (hv)
        out.push(p.t[i], p.x[i], p.v[i]);
      else
        out.push(p.t[i], p.x[i]);
    }
  add(b);
  return out;
}

namespace {

struct Newton {
  bool ok = false;
  int iters = 0;
  ExpEval ev;
};

Newton solve_image(const ExpStructure& E, Vec3& x, const Vec3& y, const RetortOptions& opt) {
  Newton n;
  double last = std::numeric_limits<double>::infinity();
  try {
    for (n.iters = 0; n.iters <= opt.newton_max; ++n.iters) {
      if (!E.in_domain(x)) return n;
      n.ev = E.eval(x);
      double res = (n.ev.value - y).norm();
      if (res < opt.newton_tol) {
        n.ok = true;
        return n;
      }
      // Stagnation at the evaluation noise floor.
      if (res >= 0.5 * last) {
        n.ok = res < 1e-9;
        return n;
      }
      last = res;
      Vec3 dx = n.ev.Dc.fullPivLu().solve(n.ev.value - y);
      if (!dx.allFinite()) return n;
      x -= dx;
    }
  } catch (const Error&) {
    return n;
  }
  return n;
}

int sgn(double v) { return (v > 0) - (v < 0); }

}  // namespace

RetortCurve retort_continuation(const ExpStructure& E, const CurvePath& alpha, const Vec3& start,
                                const RetortOptions& opt) {
  alpha.validate();
  RetortCurve out;
  out.start = start;
  out.alpha_t0 = alpha.t0();
  out.alpha_t1 = alpha.t1();
  const double t1 = alpha.t1(), span = alpha.t1() - alpha.t0();
  auto target = [&](double s) { return E.image(alpha.eval(t1 - s)); };
  auto target_velocity = [&](double s) {
    double tt = t1 - s;
    return Vec3(-(E.eval(alpha.eval(tt)).Dc * alpha.velocity(tt)));
  };
  Vec3 a_end = alpha.x.back();
  ExpEval e0 = E.eval(start);
  if ((e0.value - E.image(a_end)).norm() > 1e-6)
    throw PreconditionError("retort_continuation: start does not share the image of the curve end");
  out.join = (start - a_end).norm() < 1e-9;
  if (out.join && std::abs(e0.det) > opt.classify.det_tol)
    throw PreconditionError("trivial retort: start coincides with a non-conjugate curve end");

  Vec3 beta = start;
  double s = 0.0;
  int sign0 = sgn(e0.det);
  auto velocity_at = [&](const ExpEval& ev, double ss) -> Vec3 { return ev.Dc.fullPivLu().solve(target_velocity(ss)); };

  double h = opt.h0;
  if (out.join) {
    // Second preimage branch near the A3 point: reflect the kernel component of alpha.
    double s1 = std::min(opt.h0_join, span);
    Vec3 k = e0.svd.V.col(2);
    Vec3 d = alpha.eval(t1 - s1) - a_end;
    Vec3 guess = a_end - 2 * d.dot(k) * k + (d - d.dot(k) * k);
    Vec3 x = guess;
    Newton n = solve_image(E, x, target(s1), opt);
    if (!n.ok) throw IntegrationError("retort_continuation: no second preimage branch at the A3 join");
    if ((x - alpha.eval(t1 - s1)).norm() < 0.1 * d.norm()) throw PreconditionError("trivial retort: continuation retraces the curve");
    sign0 = sgn(n.ev.det);
    out.path.push(0.0, start, (x - start) / s1);
    out.path.push(s1, x, velocity_at(n.ev, s1));
    beta = x;
    s = s1;
    h = s1;
  } else {
    if ((start - a_end).norm() < 1e-9) throw PreconditionError("trivial retort");
    out.path.push(0.0, start, velocity_at(e0, 0.0));
  }
  if (sign0 == 0) throw PreconditionError("retort_continuation: start is conjugate");

  int halvings = 0;
  out.status = RetortStatus::Complete;
  while (s < span - 1e-14) {
    double hh = std::min(h, span - s);
    ExpEval eb = E.eval(beta);
    Vec3 vb = velocity_at(eb, s);
    Vec3 x = beta + hh * vb;
    Newton n = solve_image(E, x, target(s + hh), opt);
    Vec3 pred = beta + hh * vb;
    bool accept = n.ok && sgn(n.ev.det) == sign0 && (x - beta).norm() <= 4 * hh * vb.norm() + 1e-9 &&
                  (x - pred).norm() <= opt.corrector_max;
    if (accept && !E.in_domain(x)) {
      out.status = RetortStatus::Boundary;
      out.stop_reason = "left the domain";
      break;
    }
    if (accept) {
      s += hh;
      beta = x;
      Vec3 v = velocity_at(n.ev, s);
      out.path.push(s, beta, v.allFinite() ? v : Vec3((beta - out.path.x.back()) / hh));
      halvings = 0;
      if (n.iters <= 3) h = std::min(1.5 * h, opt.hmax);
      continue;
    }
    h = hh / 2;
    ++halvings;
    const Vec3& sig = eb.svd.sigma;
    bool near_fold = sig[2] < opt.hit_sigma_ratio * sig[0];
    if (near_fold && h < opt.hit_h_min) {
      out.status = RetortStatus::Hit;
      out.stop_reason = "conjugate point reached";
      break;
    }
    if (halvings > opt.max_halvings) throw IntegrationError("retort_continuation: Newton stalled after 40 step halvings");
  }

  if (out.status == RetortStatus::Hit) {
    // Move along the kernel: the image is stationary to first order in that direction.
    Vec3 hit = beta;
    for (int it = 0; it < 30; ++it) {
      double d = E.det(hit);
      if (std::abs(d) < 1e-13) break;
      Vec3 k = kernel_direction(E, hit);
      double slope = E.det_gradient(hit).dot(k);
      if (slope == 0.0) break;
      hit -= d / slope * k;
    }
    double res = (E.image(hit) - target(s)).norm();
    if (res > 1e-6) {
      out.tip_class.evidence.notes.push_back("hit projection residual " + std::to_string(res));
    } else {
      out.path.x.back() = hit;
      std::size_t n = out.path.size();
      if (n >= 2) out.path.v.back() = (hit - out.path.x[n - 2]) / (out.path.t[n - 1] - out.path.t[n - 2]);
    }
    ExpEval eh = E.eval(out.path.x.back());
    Svd3 sv = svd3(eh.Dc);
    Vec3 yv = target_velocity(s);
    out.hit_angle = std::asin(std::min(1.0, std::abs(sv.U.col(2).dot(yv)) / yv.norm()));
  }

  for (std::size_t i = 0; i < out.path.size(); ++i)
    out.max_residual = std::max(out.max_residual, (E.image(out.path.x[i]) - target(out.path.t[i])).norm());

  try {
    out.tip_class = out.status == RetortStatus::Hit ? classify(E, out.tip(), opt.classify)
                                                    : point_class(E, out.tip(), opt.classify);
    if (out.status == RetortStatus::Hit && out.hit_angle < opt.transversality) {
      out.tip_class.tag = SingularityTag::UNRESOLVED;
      out.tip_class.evidence.notes.push_back("tangential hit");
    }
  } catch (const Error& e) {
    out.tip_class.tag = SingularityTag::UNRESOLVED;
    out.tip_class.evidence.notes.push_back(e.what());
  }
  return out;
}

RetortCurve retort_continuation(const ExpStructure& E, const CDCurve& alpha, const Vec3& start,
                                const RetortOptions& opt) {
  return retort_continuation(E, alpha.path(), start, opt);
}

AuditRecord unbeatability_audit(const ExpStructure& E, const CurvePath& alpha, const RetortCurve& beta) {
  if (!E.has_radius()) throw PreconditionError("unbeatability_audit: field has no radius");
  if (std::abs(beta.alpha_t1 - alpha.t1()) > 1e-12 || beta.span() > alpha.t1() - alpha.t0() + 1e-12)
    throw PreconditionError("unbeatability_audit: retort does not reply to this curve");
  for (int i = 0; i <= 4; ++i) {
    double s = beta.span() * i / 4;
    double r = (E.image(beta.path.eval(s)) - E.image(alpha.eval(alpha.t1() - s))).norm();
    if (r > 1e-6) throw PreconditionError("unbeatability_audit: non-replying pair (image mismatch " + std::to_string(r) + ")");
  }
  AuditRecord a;
  double ta = alpha.t1() - beta.span();
  a.gain_alpha = E.radius(alpha.eval(ta)) - E.radius(alpha.x.back());
  a.gain_beta = E.radius(beta.tip()) - E.radius(beta.start);
  a.margin = a.gain_alpha - a.gain_beta;
  a.image_length_alpha = ta > alpha.t0() + 1e-14 ? image_length(E, restrict_path(alpha, ta, alpha.t1())) : image_length(E, alpha);
  a.ok = a.margin > 0;
  return a;
}

AuditRecord unbeatability_audit(const ExpStructure& E, const CDCurve& alpha, const RetortCurve& beta) {
  return unbeatability_audit(E, alpha.path(), beta);
}

}  // namespace cjl

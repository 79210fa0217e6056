#include "cjl/classify.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "cjl/errors.hpp"

namespace cjl {

const char* to_string(SingularityTag t) {
  switch (t) {
    case SingularityTag::NC: return "NC";
    case SingularityTag::A2: return "A2";
    case SingularityTag::A3_I: return "A3_I";
    case SingularityTag::A3_II: return "A3_II";
    case SingularityTag::A4: return "A4";
    case SingularityTag::D4_minus: return "D4_minus";
    case SingularityTag::D4_plus_I: return "D4_plus_I";
    case SingularityTag::D4_plus_II: return "D4_plus_II";
    case SingularityTag::UNRESOLVED: return "UNRESOLVED";
  }
  return "?";
}

bool in_unequivocal_class(SingularityTag t) { return t == SingularityTag::NC || t == SingularityTag::A3_I; }

int corank_at(const ExpStructure& E, const Vec3& x, double sigma_rel) {
  return count_small_singular(E.eval(x).svd.sigma, sigma_rel);
}

Vec3 kernel_direction(const ExpStructure& E, const Vec3& x) { return E.eval(x).svd.V.col(2); }

Vec3 conjugate_normal(const ExpStructure& E, const Vec3& x) {
  Vec3 g = E.det_gradient(x);
  double n = g.norm();
  if (n == 0.0) throw PreconditionError("conjugate_normal: det gradient vanishes");
  return g / n;
}

Vec3 project_to_conjugate(const ExpStructure& E, const Vec3& x, double tol, int max_iter) {
  Vec3 y = x;
  for (int it = 0; it < max_iter; ++it) {
    double d = E.det(y);
    if (std::abs(d) <= tol) return y;
    Vec3 g = E.det_gradient(y);
    double g2 = g.squaredNorm();
    if (g2 == 0.0) break;
    y -= d / g2 * g;
  }
  if (std::abs(E.det(y)) <= 100 * tol) return y;
  throw IntegrationError("project_to_conjugate: Newton projection failed");
}

Vec3 conjugate_line_field(const ExpStructure& E, const Vec3& x) {
  Vec3 n = conjugate_normal(E, x);
  Vec3 k = kernel_direction(E, x);
  Vec3 r = E.radial(x);
  Vec3 d = n.cross(k.cross(r));
  double m = d.norm();
  if (m == 0.0) throw PreconditionError("conjugate_line_field: degenerate (radial parallel to kernel)");
  return d / m;
}

double radial_component(const ExpStructure& E, const Vec3& x, const Vec3& v) {
  Vec3 k = kernel_direction(E, x), r = E.radial(x);
  Eigen::Matrix<double, 3, 2> B;
  B.col(0) = k;
  B.col(1) = r;
  Eigen::Vector2d ab = B.colPivHouseholderQr().solve(v);
  return ab[1];
}

SlackValue slack(const ExpStructure& E, const Vec3& x, const ClassifyOptions& opt) {
  int c = corank_at(E, x, opt.sigma_rel);
  if (c != 1) throw PreconditionError("slack: corank " + std::to_string(c) + " point (corank 1 required)");
  Vec3 d = conjugate_line_field(E, x);
  return {x, line_sine(d, kernel_direction(E, x))};
}

Vec3 distribution_D(const ExpStructure& E, const Vec3& x, const ClassifyOptions& opt) {
  int c = corank_at(E, x, opt.sigma_rel);
  if (c != 1) throw PreconditionError("distribution_D: corank " + std::to_string(c) + " point (corank 1 required)");
  Vec3 d = conjugate_line_field(E, x);
  if (line_sine(d, kernel_direction(E, x)) < 1e-6) throw PreconditionError("distribution_D: A3-degenerate");
  return radial_component(E, x, d) > 0 ? Vec3(-d) : d;
}

namespace {

// Integral curve of the kernel line field from x for parameter s (RK4, sign-continuous).
Vec3 kernel_curve(const ExpStructure& E, const Vec3& x, double s, int substeps = 4) {
  Vec3 y = x;
  Vec3 ref = kernel_direction(E, x);
  if (s < 0) ref = -ref;
  double h = std::abs(s) / substeps;
  auto field = [&](const Vec3& p) {
    Vec3 k = kernel_direction(E, p);
    return k.dot(ref) < 0 ? Vec3(-k) : k;
  };
  for (int i = 0; i < substeps; ++i) {
    Vec3 k1 = field(y), k2 = field(y + 0.5 * h * k1), k3 = field(y + 0.5 * h * k2), k4 = field(y + h * k3);
    y += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    ref = field(y);
  }
  return y;
}

// Integral curve of the conjugate line field inside C, started along +/- its direction at x.
Vec3 line_field_curve(const ExpStructure& E, const Vec3& x, double s, int substeps = 8) {
  Vec3 y = x;
  Vec3 ref = conjugate_line_field(E, x);
  if (s < 0) ref = -ref;
  double h = std::abs(s) / substeps;
  auto field = [&](const Vec3& p) {
    Vec3 d = conjugate_line_field(E, p);
    return d.dot(ref) < 0 ? Vec3(-d) : d;
  };
  for (int i = 0; i < substeps; ++i) {
    Vec3 k1 = field(y), k2 = field(y + 0.5 * h * k1), k3 = field(y + 0.5 * h * k2), k4 = field(y + h * k3);
    y = project_to_conjugate(E, y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4), 1e-13);
    ref = field(y);
  }
  return y;
}

struct Contact {
  double c1, c2, c3;
};

Contact contact_orders(const ExpStructure& E, const Vec3& x, double h, double gnorm) {
  double d0 = E.det(x);
  double dp = E.det(kernel_curve(E, x, h)), dm = E.det(kernel_curve(E, x, -h));
  double dp2 = E.det(kernel_curve(E, x, 2 * h)), dm2 = E.det(kernel_curve(E, x, -2 * h));
  Contact c;
  c.c1 = std::abs(dp - dm) / (2 * h) / gnorm;
  c.c2 = std::abs(dp - 2 * d0 + dm) / (h * h) / gnorm;
  c.c3 = std::abs(dp2 - 2 * dp + 2 * dm - dm2) / (2 * h * h * h) / gnorm;
  return c;
}

void classify_corank1(const ExpStructure& E, const Vec3& x, const ClassifyOptions& opt, SingularityClass& out) {
  auto& ev = out.evidence;
  out.kernel = kernel_direction(E, x);
  Vec3 grad = E.det_gradient(x);
  double gnorm = grad.norm();
  ev.values["grad_det_norm"] = gnorm;
  if (gnorm == 0.0) {
    ev.notes.push_back("det gradient vanishes at a corank-1 point");
    return;
  }
  Contact a = contact_orders(E, x, opt.h1, gnorm);
  Contact b = contact_orders(E, x, opt.h2, gnorm);
  ev.values["c1_h1"] = a.c1;
  ev.values["c1_h2"] = b.c1;
  ev.values["c2_h1"] = a.c2;
  ev.values["c2_h2"] = b.c2;
  ev.values["c3_h1"] = a.c3;
  ev.values["tau1"] = opt.tau1;
  ev.values["tau2"] = opt.tau2;
  ev.values["tau3"] = opt.tau3;
  ev.values["h1"] = opt.h1;
  ev.values["h2"] = opt.h2;
  auto consistent = [&](double u, double v, double tau) {
    return std::abs(u - v) <= opt.richardson_rel * std::max({u, v, tau * opt.gray});
  };
  double c1 = b.c1;
  if (c1 > opt.tau1) {
    if (!consistent(a.c1, b.c1, opt.tau1)) {
      ev.notes.push_back("first-order contact not Richardson-consistent");
      return;
    }
    ev.values["contact_order"] = 1;
    out.tag = SingularityTag::A2;
    return;
  }
  if (c1 >= opt.tau1 * opt.gray) {
    ev.notes.push_back("first-order contact in gray zone");
    return;
  }
  double c2 = a.c2;
  if (c2 > opt.tau2) {
    if (!consistent(a.c2, b.c2, opt.tau2)) {
      ev.notes.push_back("second-order contact not Richardson-consistent");
      return;
    }
    ev.values["contact_order"] = 2;
    if (!E.has_radius()) {
      ev.notes.push_back("A3 subtype needs a radius function");
      return;
    }
    double s = opt.subtype_step;
    double r0 = E.radius(x);
    double rp = E.radius(line_field_curve(E, x, s)) - r0;
    double rm = E.radius(line_field_curve(E, x, -s)) - r0;
    ev.values["radius_delta_plus"] = rp;
    ev.values["radius_delta_minus"] = rm;
    if (rp > 0 && rm > 0)
      out.tag = SingularityTag::A3_I;
    else if (rp < 0 && rm < 0)
      out.tag = SingularityTag::A3_II;
    else
      ev.notes.push_back("radius along D-integral curve is neither a local min nor max");
    return;
  }
  if (c2 >= opt.tau2 * opt.gray) {
    ev.notes.push_back("second-order contact in gray zone");
    return;
  }
  double c3 = a.c3;
  if (c3 > opt.tau3) {
    ev.values["contact_order"] = 3;
    out.tag = SingularityTag::A4;
    return;
  }
  ev.notes.push_back(c3 >= opt.tau3 * opt.gray ? "third-order contact in gray zone"
                                               : "contact order above 3 (codimension >= 4)");
}

void classify_corank2(const ExpStructure& E, const Vec3& x, const ClassifyOptions& opt, const Svd3& sv,
                      SingularityClass& out) {
  auto& ev = out.evidence;
  Mat3 Q = E.det_hessian(x);
  Q = 0.5 * (Q + Q.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Mat3> es(Q);
  Vec3 lam = es.eigenvalues();
  double lmax = lam.cwiseAbs().maxCoeff();
  for (int i = 0; i < 3; ++i) ev.values["hessian_eig_" + std::to_string(i)] = lam[i];
  ev.values["quad_rank_rel"] = opt.quad_rank_rel;
  int zero = 0;
  for (int i = 0; i < 3; ++i)
    if (std::abs(lam[i]) <= opt.quad_rank_rel * lmax) ++zero;
  if (lmax == 0.0 || zero > 0) {
    ev.notes.push_back("rotationally degenerate");
    return;
  }
  Eigen::Matrix<double, 3, 2> K;
  K.col(0) = sv.V.col(1);
  K.col(1) = sv.V.col(2);
  Eigen::Matrix2d QK = K.transpose() * Q * K;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> ek(QK);
  double m0 = ek.eigenvalues()[0], m1 = ek.eigenvalues()[1];
  ev.values["kernel_quad_eig_0"] = m0;
  ev.values["kernel_quad_eig_1"] = m1;
  if (std::min(std::abs(m0), std::abs(m1)) <= opt.quad_rank_rel * lmax) {
    ev.notes.push_back("quadratic part degenerate on the kernel plane");
    return;
  }
  if ((m0 > 0) == (m1 > 0)) {
    out.tag = SingularityTag::D4_minus;
    return;
  }
  // Hyperbolic: locate the A3 generatrix on the first-conjugate nappe of the tangent cone.
  int odd = 0;
  {
    int pos = 0;
    for (int i = 0; i < 3; ++i) pos += lam[i] > 0;
    for (int i = 0; i < 3; ++i)
      if ((lam[i] > 0) == (pos == 1)) odd = i;
  }
  int ia = (odd + 1) % 3, ib = (odd + 2) % 3;
  Vec3 ua = es.eigenvectors().col(ia) / std::sqrt(std::abs(lam[ia]));
  Vec3 ub = es.eigenvectors().col(ib) / std::sqrt(std::abs(lam[ib]));
  Vec3 um = es.eigenvectors().col(odd) / std::sqrt(std::abs(lam[odd]));
  Vec3 r = E.radial(x);
  double nappe = (ua + um).dot(Q * r) < 0 ? 1.0 : -1.0;
  const int n = 180;
  double best = std::numeric_limits<double>::infinity();
  Vec3 g = Vec3::Zero();
  for (int i = 0; i < n; ++i) {
    double phi = 2 * M_PI * i / n;
    Vec3 w = (std::cos(phi) * ua + std::sin(phi) * ub + nappe * um).normalized();
    try {
      Vec3 y = project_to_conjugate(E, x + opt.subtype_step * w, 1e-13);
      Vec3 gy = E.det_gradient(y);
      double c1 = std::abs(gy.dot(kernel_direction(E, y))) / gy.norm();
      if (c1 < best) {
        best = c1;
        g = (y - x).normalized();
      }
    } catch (const Error&) {
    }
  }
  if (!std::isfinite(best)) {
    ev.notes.push_back("A3 generatrix search failed");
    return;
  }
  Vec3 nK = sv.V.col(0);
  double sr = nK.dot(r), sg = nK.dot(g);
  ev.values["generatrix_alignment"] = best;
  ev.values["radial_side"] = sr;
  ev.values["generatrix_side"] = sg;
  out.tag = (sr > 0) != (sg > 0) ? SingularityTag::D4_plus_I : SingularityTag::D4_plus_II;
}

}  // namespace

SingularityClass classify(const ExpStructure& E, const Vec3& x, const ClassifyOptions& opt) {
  ExpEval e = E.eval(x);
  if (std::abs(e.det) > opt.det_tol)
    throw PreconditionError("classify: point is not conjugate (|det| = " + std::to_string(std::abs(e.det)) + ")");
  SingularityClass out;
  out.corank = count_small_singular(e.svd.sigma, opt.sigma_rel);
  out.evidence.values["det"] = e.det;
  out.evidence.values["sigma_min"] = e.svd.sigma[2];
  out.evidence.values["sigma_rel"] = opt.sigma_rel;
  if (out.corank == 0) {
    out.evidence.notes.push_back("near-conjugate but no singular value below threshold");
    return out;
  }
  if (out.corank == 1) {
    classify_corank1(E, x, opt, out);
    return out;
  }
  if (out.corank == 2) {
    classify_corank2(E, x, opt, e.svd, out);
    return out;
  }
  out.evidence.notes.push_back("corank 3");
  return out;
}

SingularityClass point_class(const ExpStructure& E, const Vec3& x, const ClassifyOptions& opt) {
  ExpEval e = E.eval(x);
  if (std::abs(e.det) > opt.det_tol) {
    SingularityClass out;
    out.tag = SingularityTag::NC;
    out.corank = 0;
    out.evidence.values["det"] = e.det;
    return out;
  }
  return classify(E, x, opt);
}

}  // namespace cjl

#include "cjl/exp_structure.hpp"

#include <cmath>
#include <limits>

#include "cjl/errors.hpp"
#include "cjl/ode.hpp"
#include "cjl/sturm.hpp"

namespace cjl {

namespace {

// order-th derivative of an ascending-coefficient polynomial
double poly_d(const std::vector<double>& c, double x, int order) {
  double acc = 0.0;
  for (std::size_t i = c.size(); i-- > static_cast<std::size_t>(order);) {
    double coef = c[i];
    for (int k = 0; k < order; ++k) coef *= static_cast<double>(i - k);
    acc = acc * x + coef;
  }
  return acc;
}

}  // namespace

struct SyntheticField::Table {
  OdeResult<4> fwd, bwd;
};

Vec3 d4_radial_from_chamber(NormalFormClass cls, double a, double b) {
  if (cls == NormalFormClass::D4_plus) {
    if (!(a * b > 1.0)) throw PreconditionError("D4_plus radial chamber requires a*b > 1");
    double s = a > 0 ? 1.0 : -1.0;
    return s * Vec3(a, b, 1.0);
  }
  if (cls == NormalFormClass::D4_minus) {
    if (!(a * a + b * b < 1.0)) throw PreconditionError("D4_minus radial chamber requires a^2 + b^2 < 1");
    return Vec3(a, b, 1.0);
  }
  throw PreconditionError("d4_radial_from_chamber: class must be D4");
}

SyntheticField::SyntheticField(const SyntheticSpec& spec) : spec_(spec), has_radius_(false) {
  switch (spec.cls) {
    case NormalFormClass::A2: P_ = {0, 0, 1}; break;
    case NormalFormClass::A3:
      P_ = {0, 0, 0, 1};
      Q2_ = {0, -1};
      has_radius_ = true;
      break;
    case NormalFormClass::A4:
      P_ = {0, 0, 0, 0, 1, 0, -spec.kappa};
      Q2_ = {0, 0, 1};
      Q3_ = {0, 1};
      has_radius_ = true;
      break;
    default: break;
  }
  if (spec.cls == NormalFormClass::D4_minus) {
    Vec3 r = spec.r0;
    if (!(r[2] != 0 && r[2] * r[2] - r[0] * r[0] - r[1] * r[1] > 0))
      throw PreconditionError("D4_minus radial vector must lie in the solid cone r3^2 > r1^2 + r2^2");
  }
  if (spec.cls == NormalFormClass::D4_plus) {
    Vec3 r = spec.r0;
    if (!(r[2] != 0 && r[0] * r[1] - r[2] * r[2] > 0))
      throw PreconditionError("D4_plus radial vector must lie in the solid cone r1 r2 > r3^2");
  }
  if (spec.sigma != 1 && spec.sigma != -1) throw PreconditionError("synthetic sigma must be +1 or -1");
  if (has_radius_) {
    auto rhs = [this](const State<4>& y, State<4>& dy, double x1) {
      Vec3 l(y[0], y[1], y[2]);
      Vec3 n(1.0, -poly_d(Q2_, x1, 0), -poly_d(Q3_, x1, 0));
      Vec3 dn(0.0, -poly_d(Q2_, x1, 1), -poly_d(Q3_, x1, 1));
      double l1p = -l.dot(dn) / n.squaredNorm();
      for (int i = 0; i < 3; ++i) dy[i] = l1p * n[i];
      dy[3] = -l1p * poly_d(P_, x1, 0);
    };
    State<4> y0{0.0, spec.sigma * std::cos(spec.theta), spec.sigma * std::sin(spec.theta), 0.0};
    OdeOptions o;
    o.rtol = 1e-13;
    o.atol = 1e-15;
    o.hmax = 0.005;
    auto t = std::make_shared<Table>();
    t->fwd = integrate_ode<4>(rhs, y0, 0.0, spec.x1_extent, o);
    t->bwd = integrate_ode<4>(rhs, y0, 0.0, -spec.x1_extent, o);
    table_ = t;
  }
  if (spec.cls != NormalFormClass::D4_minus && spec.cls != NormalFormClass::D4_plus) {
    double gdr = det_gradient(Vec3::Zero()).dot(radial(Vec3::Zero()));
    if (std::abs(gdr) < 1e-12) throw PreconditionError("synthetic field: radial field tangent to the conjugate set");
    v1_sign_ = gdr > 0 ? -1 : 1;
  }
}

std::string SyntheticField::id() const { return std::string("synthetic_") + to_string(spec_.cls); }

bool SyntheticField::in_domain(const Vec3& x) const {
  if (!x.allFinite()) return false;
  double w0 = has_radius_ ? spec_.x1_extent : spec_.box;
  return std::abs(x[0]) < w0 && std::abs(x[1]) < spec_.box && std::abs(x[2]) < spec_.box;
}

Vec3 SyntheticField::ell(double x1) const {
  const auto& r = x1 >= 0 ? table_->fwd : table_->bwd;
  auto y = r.at(x1);
  return {y[0], y[1], y[2]};
}

double SyntheticField::offset(double x1) const {
  const auto& r = x1 >= 0 ? table_->fwd : table_->bwd;
  return r.at(x1)[3];
}

ExpEval SyntheticField::eval(const Vec3& x) const {
  if (!in_domain(x)) throw DomainError(id() + ": point outside the field domain");
  ExpEval e;
  if (spec_.cls == NormalFormClass::D4_minus || spec_.cls == NormalFormClass::D4_plus) {
    e.value = canonical_map_eval(spec_.cls, x);
    e.Dc = canonical_map_jacobian(spec_.cls, x);
  } else {
    double x1 = x[0];
    double f = poly_d(P_, x1, 0) + poly_d(Q2_, x1, 0) * x[1] + poly_d(Q3_, x1, 0) * x[2];
    double f1 = poly_d(P_, x1, 1) + poly_d(Q2_, x1, 1) * x[1] + poly_d(Q3_, x1, 1) * x[2];
    e.value = Vec3(f, x[1], x[2]);
    e.Dc = Mat3::Identity();
    e.Dc(0, 0) = f1;
    e.Dc(0, 1) = poly_d(Q2_, x1, 0);
    e.Dc(0, 2) = poly_d(Q3_, x1, 0);
  }
  e.D = e.Dc;
  e.det = e.D.determinant();
  e.svd = svd3(e.D);
  return e;
}

double SyntheticField::det(const Vec3& x) const {
  if (!in_domain(x)) throw DomainError(id() + ": point outside the field domain");
  switch (spec_.cls) {
    case NormalFormClass::D4_minus: return x[2] * x[2] - x[0] * x[0] - x[1] * x[1];
    case NormalFormClass::D4_plus: return x[0] * x[1] - x[2] * x[2];
    default:
      return poly_d(P_, x[0], 1) + poly_d(Q2_, x[0], 1) * x[1] + poly_d(Q3_, x[0], 1) * x[2];
  }
}

Vec3 SyntheticField::det_gradient(const Vec3& x) const {
  switch (spec_.cls) {
    case NormalFormClass::D4_minus: return {-2 * x[0], -2 * x[1], 2 * x[2]};
    case NormalFormClass::D4_plus: return {x[1], x[0], -2 * x[2]};
    default:
      return {poly_d(P_, x[0], 2) + poly_d(Q2_, x[0], 2) * x[1] + poly_d(Q3_, x[0], 2) * x[2],
              poly_d(Q2_, x[0], 1), poly_d(Q3_, x[0], 1)};
  }
}

Mat3 SyntheticField::det_hessian(const Vec3& x) const {
  Mat3 H = Mat3::Zero();
  switch (spec_.cls) {
    case NormalFormClass::D4_minus: H.diagonal() << -2, -2, 2; break;
    case NormalFormClass::D4_plus: H << 0, 1, 0, 1, 0, 0, 0, 0, -2; break;
    default: {
      double q2 = poly_d(Q2_, x[0], 2), q3 = poly_d(Q3_, x[0], 2);
      H(0, 0) = poly_d(P_, x[0], 3) + poly_d(Q2_, x[0], 3) * x[1] + poly_d(Q3_, x[0], 3) * x[2];
      H(0, 1) = H(1, 0) = q2;
      H(0, 2) = H(2, 0) = q3;
    }
  }
  return H;
}

double SyntheticField::radius(const Vec3& x) const {
  if (!has_radius_) return ExpStructure::radius(x);
  if (!in_domain(x)) throw DomainError(id() + ": point outside the field domain");
  return spec_.R0 + ell(x[0]).dot(image(x)) + offset(x[0]);
}

Vec3 SyntheticField::radius_gradient(const Vec3& x) const {
  if (!has_radius_) return ExpStructure::radius_gradient(x);
  return eval(x).Dc.transpose() * ell(x[0]);
}

Vec3 SyntheticField::radial(const Vec3& x) const {
  if (has_radius_) {
    Vec3 l = ell(x[0]);
    return {0.0, l[1], l[2]};
  }
  return spec_.r0 + spec_.P * x;
}

V1Result SyntheticField::in_v1(const Vec3& x) const {
  V1Result res;
  if (!in_domain(x)) return res;
  const double cap = 2.0 * spec_.box;
  if (spec_.cls == NormalFormClass::D4_minus || spec_.cls == NormalFormClass::D4_plus) {
    // det is exactly quadratic along the frozen radial line x + t r.
    Vec3 r = radial(x);
    double c0 = det(x), c1 = det_gradient(x).dot(r), c2 = 0.5 * r.dot(det_hessian(x) * r);
    double first = std::numeric_limits<double>::infinity();
    if (std::abs(c2) < 1e-300) {
      if (c1 != 0) first = -c0 / c1;
    } else {
      double disc = c1 * c1 - 4 * c2 * c0;
      if (disc >= 0) {
        double sq = std::sqrt(disc);
        double t1 = (-c1 - sq) / (2 * c2), t2 = (-c1 + sq) / (2 * c2);
        first = std::min(t1, t2);
      }
    }
    res.margin = std::isfinite(first) ? first : cap;
    res.inside = res.margin >= 0.0;
    res.verdict = res.inside ? V1Verdict::Inside : V1Verdict::Outside;
    return res;
  }
  double gdr = det_gradient(x).dot(radial(x));
  if (gdr == 0.0 || (gdr > 0 ? -1 : 1) != v1_sign_) return res;  // radial tangent or reversed: unknown
  res.margin = -det(x) / gdr;
  res.inside = res.margin >= 0.0;
  res.verdict = res.inside ? V1Verdict::Inside : V1Verdict::Outside;
  if (has_radius_) res.lambda1 = radius(x) + res.margin;
  return res;
}

std::vector<Vec3> SyntheticField::preimages(const Vec3& target, double radius_bound, std::uint64_t seed,
                                            int starts) const {
  if (spec_.cls == NormalFormClass::D4_minus || spec_.cls == NormalFormClass::D4_plus)
    return ExpStructure::preimages(target, radius_bound, seed, starts);
  std::size_t n = std::max({P_.size(), Q2_.size(), Q3_.size()});
  std::vector<double> c(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (i < P_.size()) c[i] += P_[i];
    if (i < Q2_.size()) c[i] += Q2_[i] * target[1];
    if (i < Q3_.size()) c[i] += Q3_[i] * target[2];
  }
  c[0] -= target[0];
  std::vector<Vec3> out;
  for (double x1 : real_roots(c, 1e-13)) {
    for (int it = 0; it < 3; ++it) {
      double d = poly_d(c, x1, 1);
      if (d == 0.0) break;
      x1 -= poly_d(c, x1, 0) / d;
    }
    Vec3 x(x1, target[1], target[2]);
    if (!in_domain(x)) continue;
    if (has_radius() ? radius(x) >= radius_bound : x.cwiseAbs().maxCoeff() >= radius_bound) continue;
    out.push_back(x);
  }
  return out;
}

ExpPtr make_synthetic(const SyntheticSpec& spec) { return std::make_shared<SyntheticField>(spec); }

}  // namespace cjl

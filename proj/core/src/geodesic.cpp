#include "cjl/geodesic.hpp"

#include <algorithm>
#include <cmath>

#include "cjl/errors.hpp"
#include "cjl/ode.hpp"
#include "cjl/quadrature.hpp"

namespace cjl {

std::size_t CurvePath::segment(double s) const {
  if (t.size() < 2) return 0;
  auto it = std::upper_bound(t.begin(), t.end(), s);
  std::size_t i = it == t.begin() ? 0 : static_cast<std::size_t>(it - t.begin()) - 1;
  return std::min(i, t.size() - 2);
}

Vec3 CurvePath::eval_on(std::size_t i, double s) const {
  if (x.size() == 1) return x[0];
  double h = t[i + 1] - t[i];
  double u = (s - t[i]) / h;
  if (interp() == Interp::Linear) return (1 - u) * x[i] + u * x[i + 1];
  double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
  double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
  return h00 * x[i] + h10 * h * v[i] + h01 * x[i + 1] + h11 * h * v[i + 1];
}

Vec3 CurvePath::velocity_on(std::size_t i, double s) const {
  if (x.size() == 1) return Vec3::Zero();
  double h = t[i + 1] - t[i];
  if (interp() == Interp::Linear) return (x[i + 1] - x[i]) / h;
  double u = (s - t[i]) / h;
  double d00 = 6 * u * u - 6 * u, d10 = 3 * u * u - 4 * u + 1;
  double d01 = -6 * u * u + 6 * u, d11 = 3 * u * u - 2 * u;
  return (d00 * x[i] + d01 * x[i + 1]) / h + d10 * v[i] + d11 * v[i + 1];
}

Vec3 CurvePath::eval(double s) const { return eval_on(segment(s), s); }
Vec3 CurvePath::velocity(double s) const { return velocity_on(segment(s), s); }

void CurvePath::validate() const {
  if (x.empty() || t.size() != x.size()) throw PreconditionError("CurvePath: sample count mismatch");
  if (!v.empty() && v.size() != x.size()) throw PreconditionError("CurvePath: velocity count mismatch");
  for (std::size_t i = 1; i < t.size(); ++i)
    if (!(t[i] > t[i - 1])) throw PreconditionError("CurvePath: parameters must increase strictly");
}

Vec3 geodesic_acceleration(const MetricModel& model, const Vec3& x, const Vec3& v) {
  return -christoffel(model, x).contract(v, v);
}

namespace {

OdeResult<6> run_geodesic(const MetricModel& model, const Vec3& x0, const Vec3& v0, double t_max, double tol,
                          double hmax) {
  model.require_domain(x0);
  auto sys = [&](const State<6>& y, State<6>& dy, double) {
    Vec3 x(y[0], y[1], y[2]), v(y[3], y[4], y[5]);
    Vec3 a = geodesic_acceleration(model, x, v);
    for (int i = 0; i < 3; ++i) {
      dy[i] = v[i];
      dy[3 + i] = a[i];
    }
  };
  auto inside = [&](double, const State<6>& y) { return model.in_domain(Vec3(y[0], y[1], y[2])); };
  OdeOptions opt;
  opt.rtol = tol;
  opt.atol = std::min(1e-12, tol * 1e-3);
  opt.hmax = hmax;
  State<6> y0{x0[0], x0[1], x0[2], v0[0], v0[1], v0[2]};
  return integrate_ode<6>(sys, y0, 0.0, t_max, opt, inside);
}

}  // namespace

CurvePath integrate_geodesic(const MetricModel& model, const Vec3& x0, const Vec3& v0, double t_max, double tol) {
  if (!(t_max > 0)) throw PreconditionError("integrate_geodesic: t_max must be positive");
  // Cap the step so the stored Hermite interpolant stays accurate for transport along it.
  double speed = std::sqrt(std::max(1e-300, v0.dot(model.metric(x0) * v0)));
  auto r = run_geodesic(model, x0, v0, t_max, tol, 0.02 / speed);
  CurvePath p;
  for (const auto& s : r.samples) p.push(s.t, Vec3(s.y[0], s.y[1], s.y[2]), Vec3(s.y[3], s.y[4], s.y[5]));
  p.truncated = r.status == OdeStatus::Truncated;
  p.exit_t = r.end_t;
  return p;
}

GeodesicEnd geodesic_end(const MetricModel& model, const Vec3& x0, const Vec3& v0, double t, double tol) {
  auto r = run_geodesic(model, x0, v0, t, tol, std::numeric_limits<double>::infinity());
  if (r.status == OdeStatus::Truncated) throw TruncationError("geodesic left the chart", r.end_t);
  const auto& y = r.back().y;
  return {Vec3(y[0], y[1], y[2]), Vec3(y[3], y[4], y[5])};
}

Mat3 parallel_transport(const MetricModel& model, const CurvePath& path, const Mat3& W, double tol) {
  path.validate();
  Mat3 cur = W;
  if (path.size() == 1) return cur;
  OdeOptions opt;
  opt.rtol = tol;
  opt.atol = tol * 1e-2;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    auto sys = [&](const State<9>& y, State<9>& dy, double s) {
      Vec3 x = path.eval_on(i, s);
      model.require_domain(x);
      Vec3 xd = path.velocity_on(i, s);
      Christoffel G = christoffel(model, x);
      for (int c = 0; c < 3; ++c) {
        Vec3 w(y[3 * c], y[3 * c + 1], y[3 * c + 2]);
        Vec3 d = -G.contract(xd, w);
        for (int k = 0; k < 3; ++k) dy[3 * c + k] = d[k];
      }
    };
    State<9> y0;
    for (int c = 0; c < 3; ++c)
      for (int k = 0; k < 3; ++k) y0[3 * c + k] = cur(k, c);
    auto r = integrate_ode<9>(sys, y0, path.t[i], path.t[i + 1], opt);
    if (r.status == OdeStatus::Truncated) throw DomainError("parallel_transport: path leaves the chart");
    for (int c = 0; c < 3; ++c)
      for (int k = 0; k < 3; ++k) cur(k, c) = r.back().y[3 * c + k];
  }
  return cur;
}

Vec3 parallel_transport(const MetricModel& model, const CurvePath& path, const Vec3& w, double tol) {
  Mat3 W = Mat3::Zero();
  W.col(0) = w;
  return parallel_transport(model, path, W, tol).col(0);
}

double path_length(const MetricModel& model, const CurvePath& path) {
  path.validate();
  double L = 0.0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i)
    L += gauss_legendre(path.t[i], path.t[i + 1], [&](double s) {
      Vec3 x = path.eval_on(i, s);
      return g_norm(model.metric(x), path.velocity_on(i, s));
    });
  return L;
}

}  // namespace cjl

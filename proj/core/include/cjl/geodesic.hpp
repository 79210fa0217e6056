#pragma once

#include <vector>

#include "cjl/metric.hpp"

namespace cjl {

enum class Interp { Linear, Hermite };

// Sampled curve in a chart (or in a tangent space). With velocities present the curve is
// the cubic Hermite interpolant, otherwise piecewise linear.
struct CurvePath {
  std::vector<double> t;
  std::vector<Vec3> x;
  std::vector<Vec3> v;  // empty or same size as x
  bool truncated = false;
  double exit_t = 0.0;

  Interp interp() const { return v.size() == x.size() && !x.empty() ? Interp::Hermite : Interp::Linear; }
  std::size_t size() const { return x.size(); }
  double t0() const { return t.front(); }
  double t1() const { return t.back(); }
  Vec3 eval(double s) const;
  Vec3 velocity(double s) const;
  // Segment-local evaluation on [t[i], t[i+1]].
  Vec3 eval_on(std::size_t i, double s) const;
  Vec3 velocity_on(std::size_t i, double s) const;
  std::size_t segment(double s) const;
  void validate() const;  // strictly increasing t, matching sizes
  void push(double tt, const Vec3& xx) { t.push_back(tt); x.push_back(xx); }
  void push(double tt, const Vec3& xx, const Vec3& vv) {
    t.push_back(tt);
    x.push_back(xx);
    v.push_back(vv);
  }
};

// Geodesic with chart velocity v0 from x0 on [0, t_max]. Truncation (chart exit) is
// reported through CurvePath::truncated/exit_t. Velocities are stored.
CurvePath integrate_geodesic(const MetricModel& model, const Vec3& x0, const Vec3& v0, double t_max,
                             double tol = 1e-9);

// Endpoint and velocity of the geodesic at t; throws TruncationError on chart exit.
struct GeodesicEnd {
  Vec3 x, v;
};
GeodesicEnd geodesic_end(const MetricModel& model, const Vec3& x0, const Vec3& v0, double t, double tol = 1e-10);

Vec3 geodesic_acceleration(const MetricModel& model, const Vec3& x, const Vec3& v);

// Transports w (chart components at path start) to the path end. Throws DomainError if
// the path leaves the chart.
Vec3 parallel_transport(const MetricModel& model, const CurvePath& path, const Vec3& w, double tol = 1e-11);
// Transports the columns of W.
Mat3 parallel_transport(const MetricModel& model, const CurvePath& path, const Mat3& W, double tol = 1e-11);

// Integral of the g-norm of the velocity (Gauss-Legendre per interval).
double path_length(const MetricModel& model, const CurvePath& path);

}  // namespace cjl

#pragma once

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <string>

#include "cjl/linalg.hpp"

namespace cjl {

using ParamMap = std::map<std::string, double>;

// g and its first and second partial derivatives at a chart point.
// dg[i] = d_i g, d2g[i][j] = d_i d_j g.
struct MetricJet {
  Mat3 g;
  std::array<Mat3, 3> dg;
  std::array<std::array<Mat3, 3>, 3> d2g;
};

class MetricModel {
 public:
  virtual ~MetricModel() = default;
  virtual std::string id() const = 0;
  virtual ParamMap params() const = 0;
  virtual bool in_domain(const Vec3& x) const = 0;
  virtual MetricJet jet(const Vec3& x) const = 0;
  virtual Mat3 metric(const Vec3& x) const { return jet(x).g; }
  // False when dg/d2g come from finite differences.
  virtual bool analytic_derivatives() const { return true; }
  // Throws DomainError when x is outside the chart.
  void require_domain(const Vec3& x) const;
};

using ModelPtr = std::shared_ptr<const MetricModel>;

ModelPtr make_euclidean(double box = 1e3);
// Round 3-sphere of curvature K in stereographic coordinates, g = 4/(1+K|x|^2)^2 delta.
ModelPtr make_sphere(double K = 1.0, double chart_radius = 1e4);
// Metric induced on S^3 scaled by axes (a1..a4) in R^4, via inverse stereographic projection.
ModelPtr make_ellipsoid(const std::array<double, 4>& axes, double chart_radius = 1e3);
// Sphere with conformal bump (1 + A exp(-|x-c|^2/w^2)).
ModelPtr make_bump_sphere(double K, double amplitude, double width, const Vec3& center, double chart_radius = 1e4);
// User-supplied g; derivatives by centered differences (dg step 1e-5).
ModelPtr make_finite_difference(std::string id, std::function<Mat3(const Vec3&)> g,
                                std::function<bool(const Vec3&)> domain, ParamMap params = {});

// Builds a model by id ("euclidean", "sphere", "ellipsoid", "bump_sphere") and parameter map.
// Unknown ids or parameters throw PreconditionError.
ModelPtr make_model(const std::string& id, const ParamMap& params);

// Gamma[k](i,j) = Gamma^k_ij.
struct Christoffel {
  std::array<Mat3, 3> G;
  Vec3 contract(const Vec3& a, const Vec3& b) const {
    return {a.dot(G[0] * b), a.dot(G[1] * b), a.dot(G[2] * b)};
  }
};

// Christoffel symbols together with their first partials dG[m].G[k](i,j) = d_m Gamma^k_ij.
struct ChristoffelJet {
  Christoffel gamma;
  std::array<Christoffel, 3> d;
};

Christoffel christoffel(const MetricModel& model, const Vec3& x);
Christoffel christoffel_from(const MetricJet& mj);
ChristoffelJet christoffel_jet(const MetricModel& model, const Vec3& x);

// R^l_{ijk} = d_i Gamma^l_jk - d_j Gamma^l_ik + Gamma^l_im Gamma^m_jk - Gamma^l_jm Gamma^m_ik,
// so that R(X,Y)Z = R^l_{ijk} X^i Y^j Z^k e_l.
struct Curvature {
  std::array<double, 81> r{};
  double& operator()(int l, int i, int j, int k) { return r[((l * 3 + i) * 3 + j) * 3 + k]; }
  double operator()(int l, int i, int j, int k) const { return r[((l * 3 + i) * 3 + j) * 3 + k]; }
  Vec3 apply(const Vec3& X, const Vec3& Y, const Vec3& Z) const;
};

Curvature curvature_tensor(const MetricModel& model, const Vec3& x);
Curvature curvature_from(const ChristoffelJet& cj);
double sectional_curvature(const MetricModel& model, const Vec3& x, const Vec3& X, const Vec3& Y);
// max |R^l_{ijk} + R^l_{jki} + R^l_{kij}|
double bianchi_residual(const Curvature& R);

}  // namespace cjl

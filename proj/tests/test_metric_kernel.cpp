#include <algorithm>
#include <cmath>

#include "doctest.h"

#include "cjl/errors.hpp"
#include "cjl/geodesic.hpp"
#include "cjl/metric.hpp"
#include "cjl/random.hpp"

using namespace cjl;

namespace {

ModelPtr test_ellipsoid() { return make_ellipsoid({1.0, 1.1, 1.25, 1.0}); }

// Gamma^k_ij from centered differences of g alone (Koszul formula).
Christoffel koszul_fd(const MetricModel& m, const Vec3& x, double h = 1e-5) {
  std::array<Mat3, 3> dg;
  for (int i = 0; i < 3; ++i) {
    Vec3 e = Vec3::Zero();
    e[i] = h;
    dg[i] = (m.metric(x + e) - m.metric(x - e)) / (2 * h);
  }
  Mat3 ginv = m.metric(x).inverse();
  Christoffel c;
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        double s = 0.0;
        for (int l = 0; l < 3; ++l) s += ginv(k, l) * (dg[i](j, l) + dg[j](i, l) - dg[l](i, j));
        c.G[k](i, j) = 0.5 * s;
      }
  return c;
}

double max_diff(const Christoffel& a, const Christoffel& b) {
  double d = 0.0;
  for (int k = 0; k < 3; ++k) d = std::max(d, (a.G[k] - b.G[k]).cwiseAbs().maxCoeff());
  return d;
}

double max_abs(const Christoffel& a) {
  double d = 0.0;
  for (int k = 0; k < 3; ++k) d = std::max(d, a.G[k].cwiseAbs().maxCoeff());
  return d;
}

}  // namespace

TEST_CASE("christoffel: flat and symmetric cases vanish") {
  auto flat = make_euclidean();
  CHECK(max_abs(christoffel(*flat, Vec3(0.3, -2.0, 5.0))) == 0.0);
  auto sphere = make_sphere();
  CHECK(max_abs(christoffel(*sphere, Vec3::Zero())) < 1e-15);
}

TEST_CASE("christoffel: Koszul finite-difference oracle") {
  auto sphere = make_sphere();
  CHECK(max_diff(christoffel(*sphere, Vec3(0.5, 0, 0)), koszul_fd(*sphere, Vec3(0.5, 0, 0))) < 1e-6);
  auto ell = test_ellipsoid();
  for (Vec3 x : {Vec3(0.6, 0.3, -0.2), Vec3(-1.0, 2.0, 0.5)})
    CHECK(max_diff(christoffel(*ell, x), koszul_fd(*ell, x)) < 1e-6);
  auto bump = make_bump_sphere(1.0, 0.3, 0.7, Vec3(0.2, 0.1, 0.0));
  CHECK(max_diff(christoffel(*bump, Vec3(0.4, -0.3, 0.2)), koszul_fd(*bump, Vec3(0.4, -0.3, 0.2))) < 1e-6);
}

TEST_CASE("christoffel: symmetric in the lower indices") {
  auto ell = test_ellipsoid();
  Rng rng(4);
  for (int n = 0; n < 10; ++n) {
    auto c = christoffel(*ell, rng.normal3());
    for (int k = 0; k < 3; ++k) CHECK((c.G[k] - c.G[k].transpose()).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("geodesic: straight segment in flat space") {
  auto flat = make_euclidean();
  auto e = geodesic_end(*flat, Vec3::Zero(), Vec3(1, 0, 0), 2.0);
  CHECK((e.x - Vec3(2, 0, 0)).norm() < 1e-12);
}

TEST_CASE("geodesic: sphere antipode and constant speed") {
  auto sphere = make_sphere();
  Vec3 p(0.5, 0, 0);
  double scale = 1.0 / std::sqrt(sphere->metric(p)(0, 0));
  for (Vec3 u : {Vec3(-1, 0, 0), Vec3(0, 1, 0), Vec3(0.3, -0.4, 0.866).normalized()}) {
    auto e = geodesic_end(*sphere, p, scale * u, M_PI);
    CHECK((e.x - Vec3(-2, 0, 0)).norm() < 1e-6);
    CHECK(std::abs(g_norm(sphere->metric(e.x), e.v) - 1.0) < 1e-8);
  }
}

TEST_CASE("geodesic: chart exit is reported as truncation") {
  auto ell = make_ellipsoid({1.0, 1.1, 1.25, 1.0}, 5.0);
  auto path = integrate_geodesic(*ell, Vec3::Zero(), Vec3(1, 0, 0), 10.0);
  CHECK(path.truncated);
  CHECK(path.exit_t > 0.0);
  CHECK_THROWS_AS(geodesic_end(*ell, Vec3::Zero(), Vec3(1, 0, 0), 10.0), TruncationError);
}

TEST_CASE("parallel transport: flat space leaves vectors unchanged") {
  auto flat = make_euclidean();
  auto path = integrate_geodesic(*flat, Vec3(1, 2, 3), Vec3(0.5, -1, 2), 1.0);
  CHECK((parallel_transport(*flat, path, Vec3(3, -1, 0.5)) - Vec3(3, -1, 0.5)).norm() < 1e-14);
}

TEST_CASE("parallel transport: geodesics are auto-parallel") {
  auto ell = test_ellipsoid();
  Vec3 x0(0.6, 0.3, -0.2), v0(0.4, 0.7, -0.3);
  auto path = integrate_geodesic(*ell, x0, v0, 2.0);
  REQUIRE_FALSE(path.truncated);
  CHECK((parallel_transport(*ell, path, v0) - path.v.back()).norm() < 1e-6);
}

TEST_CASE("parallel transport: preserves inner products") {
  auto ell = test_ellipsoid();
  auto path = integrate_geodesic(*ell, Vec3(0.1, 0.2, 0.3), Vec3(-0.5, 0.8, 0.1), 1.5);
  Mat3 W;
  W << 1, 0.2, -0.3, 0, 1, 0.4, 0.5, 0, 1;
  Mat3 T = parallel_transport(*ell, path, W);
  Mat3 G0 = W.transpose() * ell->metric(path.x.front()) * W;
  Mat3 G1 = T.transpose() * ell->metric(path.x.back()) * T;
  CHECK((G0 - G1).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("parallel transport: holonomy of the octant triangle") {
  // Pole at the chart origin, two equator points: a geodesic triangle of area pi/2 on the
  // totally geodesic sphere x3 = 0.
  auto sphere = make_sphere();
  auto leg1 = integrate_geodesic(*sphere, Vec3::Zero(), Vec3(0.5, 0, 0), M_PI / 2);
  auto leg2 = integrate_geodesic(*sphere, leg1.x.back(), Vec3(0, 1, 0), M_PI / 2);
  auto leg3 = integrate_geodesic(*sphere, leg2.x.back(), -leg2.x.back(), M_PI / 2);
  CHECK((leg1.x.back() - Vec3(1, 0, 0)).norm() < 1e-8);
  CHECK((leg2.x.back() - Vec3(0, 1, 0)).norm() < 1e-8);
  CHECK(leg3.x.back().norm() < 1e-8);
  Vec3 w0(1, 0, 0);
  Vec3 w = parallel_transport(*sphere, leg3, parallel_transport(*sphere, leg2, parallel_transport(*sphere, leg1, w0)));
  double angle = std::acos(std::clamp(w.normalized().dot(w0), -1.0, 1.0));
  CHECK(std::abs(angle - M_PI / 2) < 1e-4);
  CHECK(std::abs(w[2]) < 1e-10);
  Vec3 n = parallel_transport(*sphere, leg3, parallel_transport(*sphere, leg2, parallel_transport(*sphere, leg1, Vec3(0, 0, 1))));
  CHECK((n - Vec3(0, 0, 1)).norm() < 1e-8);
}

TEST_CASE("curvature: flat, constant and Bianchi") {
  auto flat = make_euclidean();
  auto R0 = curvature_tensor(*flat, Vec3(1, 2, 3));
  CHECK(*std::max_element(R0.r.begin(), R0.r.end(), [](double a, double b) { return std::abs(a) < std::abs(b); }) == 0.0);

  auto sphere = make_sphere();
  CHECK(std::abs(sectional_curvature(*sphere, Vec3(0.5, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)) - 1.0) < 1e-6);
  auto sphere4 = make_sphere(4.0);
  CHECK(std::abs(sectional_curvature(*sphere4, Vec3(0.1, 0.2, 0), Vec3(1, 1, 0), Vec3(0, 1, 2)) - 4.0) < 1e-6);

  Rng rng(9);
  auto ell = test_ellipsoid();
  auto bump = make_bump_sphere(1.0, 0.3, 0.7, Vec3(0.2, 0.1, 0.0));
  auto fd = make_finite_difference(
      "warped", [](const Vec3& x) { return Mat3(Vec3(1 + x[1] * x[1], 1.0, std::exp(x[0])).asDiagonal()); },
      [](const Vec3& x) { return x.norm() < 5; });
  for (const ModelPtr& m : {ell, bump, fd})
    for (int n = 0; n < 20; ++n) CHECK(bianchi_residual(curvature_tensor(*m, 0.8 * rng.normal3())) < 1e-6);
}

TEST_CASE("curvature: ellipsoid sectional curvature is positive") {
  auto ell = test_ellipsoid();
  Rng rng(2);
  for (int n = 0; n < 10; ++n) {
    Vec3 x = rng.normal3();
    CHECK(sectional_curvature(*ell, x, rng.normal3(), rng.normal3()) > 0.0);
  }
}

TEST_CASE("models: factory and domain errors") {
  CHECK(make_model("sphere", {{"K", 2.0}})->id() == "sphere");
  CHECK_THROWS_AS(make_model("torus", {}), PreconditionError);
  CHECK_THROWS_AS(make_model("sphere", {{"curvature", 1.0}}), PreconditionError);
  auto ell = make_ellipsoid({1.0, 1.1, 1.25, 1.0}, 5.0);
  CHECK_THROWS_AS(ell->require_domain(Vec3(10, 0, 0)), DomainError);
  CHECK_NOTHROW(ell->require_domain(Vec3(1, 0, 0)));
}

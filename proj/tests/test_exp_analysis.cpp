#include <algorithm>
#include <cmath>

#include "doctest.h"

#include "cjl/errors.hpp"
#include "cjl/exp_map.hpp"
#include "cjl/random.hpp"

using namespace cjl;

namespace {

const Vec3 kSpherePoint(0.5, 0, 0);  // the chart origin's antipode sits at infinity
const Vec3 kEllPoint(0.6, 0.3, -0.2);

ModelPtr test_ellipsoid() { return make_ellipsoid({1.0, 1.1, 1.25, 1.0}); }

CurvePath random_path(Rng& rng, int knots, double radius) {
  CurvePath c;
  for (int i = 0; i <= knots; ++i) {
    Vec3 x = rng.normal3();
    if (x.norm() > 1.0) x.normalize();
    c.push(static_cast<double>(i) / knots, radius * x, radius * rng.normal3());
  }
  return c;
}

}  // namespace

TEST_CASE("exp_jet: flat space is the identity") {
  auto flat = make_euclidean();
  auto e = exp_jet(*flat, Vec3(1, 2, 3), Vec3(0.3, -0.2, 4.0));
  CHECK((e.value - Vec3(1.3, 1.8, 7.0)).norm() < 1e-12);
  CHECK((e.differential - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(e.det - 1.0) < 1e-12);
}

TEST_CASE("exp_jet: sphere singular values follow sin t / t") {
  auto sphere = make_sphere();
  Rng rng(3);
  for (double t : {1.0, 2.0, 3.0}) {
    Vec3 u = rng.unit_vector();
    auto e = exp_jet(*sphere, kSpherePoint, t * u);
    double s = std::sin(t) / t;
    CHECK(std::abs(e.singular_values[0] - 1.0) < 1e-6);
    CHECK(std::abs(e.singular_values[1] - s) < 1e-6);
    CHECK(std::abs(e.singular_values[2] - s) < 1e-6);
  }
}

TEST_CASE("exp_jet: chart differential matches centered differences") {
  auto ell = test_ellipsoid();
  Rng rng(5);
  for (int n = 0; n < 4; ++n) {
    Vec3 x = 1.5 * rng.unit_vector();
    auto e = exp_jet(*ell, kEllPoint, x);
    const double h = 1e-4;
    for (int j = 0; j < 3; ++j) {
      Vec3 d = Vec3::Zero();
      d[j] = h;
      Vec3 fd = (exp_point(*ell, kEllPoint, x + d) - exp_point(*ell, kEllPoint, x - d)) / (2 * h);
      CHECK((fd - e.chart_differential.col(j)).norm() < 1e-5);
    }
  }
}

TEST_CASE("exp_jet: Gauss lemma on the ellipsoid") {
  auto ell = test_ellipsoid();
  Rng rng(11);
  for (int n = 0; n < 20; ++n) {
    Vec3 u = rng.unit_vector();
    Vec3 w = u.cross(rng.unit_vector()).normalized();
    for (double t : {0.5, 1.5, 2.5}) {
      auto e = exp_jet(*ell, kEllPoint, t * u);
      Vec3 du = e.differential * u;
      CHECK(std::abs(du.norm() - 1.0) < 1e-7);
      CHECK(std::abs(du.dot(e.differential * w)) < 1e-7);
    }
  }
}

TEST_CASE("image_length: the radius is dominated by the image length") {
  auto ell = test_ellipsoid();
  Rng rng(17);
  for (int n = 0; n < 10; ++n) {
    CurvePath c = random_path(rng, 4, 2.0);
    double tv = 0.0, prev = c.eval(0.0).norm();
    for (int i = 1; i <= 400; ++i) {
      double r = c.eval(i / 400.0).norm();
      tv += std::abs(r - prev);
      prev = r;
    }
    CHECK(tv <= image_length(*ell, kEllPoint, c) + 1e-5);
  }
}

TEST_CASE("image_length: rays have image length equal to their length") {
  auto ell = test_ellipsoid();
  CurvePath c;
  Vec3 u = Vec3(1, -2, 0.5).normalized();
  for (int i = 0; i <= 4; ++i) c.push(i * 0.5, i * 0.5 * u, u);
  CHECK(std::abs(image_length(*ell, kEllPoint, c) - 2.0) < 1e-7);
}

TEST_CASE("conjugate_radii: flat space has none") {
  auto flat = make_euclidean();
  auto cs = conjugate_radii(*flat, Vec3::Zero(), Vec3(0, 0, 1), 1, 10.0);
  CHECK(cs.records.empty());
  CHECK(std::isinf(cs.lambda(1)));
}

TEST_CASE("conjugate_radii: sphere has lambda1 = pi with multiplicity 2") {
  auto sphere = make_sphere();
  Rng rng(23);
  for (int n = 0; n < 5; ++n) {
    auto cs = conjugate_radii(*sphere, kSpherePoint, rng.unit_vector(), 1, 5.0);
    REQUIRE_FALSE(cs.records.empty());
    CHECK(std::abs(cs.records[0].radius - M_PI) < 1e-6);
    CHECK(cs.records[0].multiplicity == 2);
    CHECK(std::abs(cs.lambda(1) - M_PI) < 1e-6);
    CHECK(std::abs(cs.lambda(2) - M_PI) < 1e-6);
  }
}

TEST_CASE("conjugate_radii: ellipsoid lambda1 is Lipschitz in the direction") {
  auto ell = test_ellipsoid();
  Vec3 a = Vec3(0.2, 0.7, -0.3).normalized();
  Vec3 b = a.cross(Vec3(0, 0, 1)).normalized();
  auto lambda = [&](double phi) {
    auto cs = conjugate_radii(*ell, kEllPoint, std::cos(phi) * a + std::sin(phi) * b, 1, 6.0);
    REQUIRE_FALSE(cs.records.empty());
    return cs.records[0].radius;
  };
  const double coarse = 0.1, fine = 0.01;
  double lip = 0.0;
  for (int i = 0; i < 4; ++i) lip = std::max(lip, std::abs(lambda((i + 1) * coarse) - lambda(i * coarse)) / coarse);
  double prev = lambda(0.0);
  for (int i = 1; i <= 20; ++i) {
    double cur = lambda(i * fine);
    CHECK(std::abs(cur - prev) < 5 * fine * std::max(lip, 0.1));
    prev = cur;
  }
}

TEST_CASE("conjugate_radii: kernel is annihilated by the differential") {
  auto ell = test_ellipsoid();
  auto cs = conjugate_radii(*ell, kEllPoint, Vec3(0.2, 0.7, -0.3).normalized(), 1, 6.0);
  REQUIRE_FALSE(cs.records.empty());
  const auto& r = cs.records[0];
  auto e = exp_jet(*ell, kEllPoint, r.radius * r.direction);
  CHECK((e.differential * r.kernel).norm() < 1e-6);
  CHECK(e.singular_values[2] < 1e-6 * e.singular_values[0]);
}

TEST_CASE("in_V1: sphere verdicts") {
  auto sphere = make_sphere();
  Vec3 u = Vec3(0.3, 0.4, -0.2).normalized();
  auto in = in_V1(*sphere, kSpherePoint, M_PI / 2 * u);
  CHECK(in.inside);
  CHECK(in.verdict == V1Verdict::Inside);
  CHECK(std::abs(in.margin - M_PI / 2) < 1e-6);
  auto out = in_V1(*sphere, kSpherePoint, 3.5 * u);
  CHECK_FALSE(out.inside);
  CHECK(out.verdict == V1Verdict::Outside);
  CHECK(out.margin < 0.0);
}

TEST_CASE("in_V1: flat space margin is capped at r_max") {
  auto flat = make_euclidean();
  auto r = in_V1(*flat, Vec3::Zero(), Vec3(1, 0, 0), 10.0);
  CHECK(r.inside);
  CHECK(r.margin == doctest::Approx(9.0));
}

TEST_CASE("exp_jet: chart exit raises TruncationError") {
  auto ell = make_ellipsoid({1.0, 1.1, 1.25, 1.0}, 5.0);
  CHECK_THROWS_AS(exp_jet(*ell, Vec3::Zero(), Vec3(0, 0, 4.5)), TruncationError);
}

#include <cmath>

#include "doctest.h"

#include "cjl/cdc.hpp"
#include "cjl/errors.hpp"

using namespace cjl;

namespace {

SyntheticField a3_field(double theta = 0.0) {
  SyntheticSpec s;
  s.cls = NormalFormClass::A3;
  s.theta = theta;
  return SyntheticField(s);
}

SyntheticField a4_field() {
  SyntheticSpec s;
  s.cls = NormalFormClass::A4;
  s.theta = M_PI / 2;
  s.kappa = 0.5;
  return SyntheticField(s);
}

// Fold point of the A4 model f = x1^4 - kappa x1^6 + x1^2 x2 + x1 x3 over (x1, x2).
Vec3 a4_fold(double x1, double x2) { return {x1, x2, -(4 * x1 * x1 * x1 - 3 * std::pow(x1, 5) + 2 * x1 * x2)}; }

void check_descending(const CDCurve& c) {
  for (std::size_t i = 1; i < c.samples.size(); ++i) CHECK(c.samples[i].radius < c.samples[i - 1].radius);
}

}  // namespace

TEST_CASE("cdc: A3 fold curve runs into the cusp") {
  auto E = a3_field();
  const double t0 = -0.5, c = 0.2;
  auto cdc = integrate_cdc(E, Vec3(t0, 3 * t0 * t0, c));
  CHECK(cdc.stop == CdcStop::A3);
  CHECK(cdc.end_class.tag == SingularityTag::A3_I);
  CHECK((cdc.end() - Vec3(0, 0, c)).norm() < 1e-6);
  CHECK(std::abs(cdc.radius_drop() - cdc.image_length) < 1e-5);
  CHECK(std::abs(cdc.t_end() - cdc.image_length) < 1e-5);
  check_descending(cdc);
  for (const auto& s : cdc.samples) CHECK(std::abs(E.det(s.x)) < 1e-8);
}

TEST_CASE("cdc: slack decreases toward the cusp") {
  auto E = a3_field();
  auto cdc = integrate_cdc(E, Vec3(-0.5, 0.75, 0.0));
  std::size_t n = cdc.samples.size();
  REQUIRE(n > 10);
  for (std::size_t i = n / 2; i + 2 < n; ++i) CHECK(cdc.samples[i + 1].slack <= cdc.samples[i].slack + 1e-12);
  CHECK(cdc.samples.back().slack < 1e-8);
}

TEST_CASE("cdc: identity holds for tilted radial models") {
  for (double theta : {0.3, -0.4}) {
    auto E = a3_field(theta);
    auto cdc = integrate_cdc(E, Vec3(-0.4, 0.48, -0.1));
    CAPTURE(theta);
    CHECK(cdc.samples.size() > 2);
    CHECK(std::abs(cdc.radius_drop() - cdc.image_length) < 1e-5);
    check_descending(cdc);
  }
}

TEST_CASE("cdc: A4 fold curve") {
  auto E = a4_field();
  auto cdc = integrate_cdc(E, a4_fold(-0.45, -0.24));
  CHECK(cdc.samples.size() > 2);
  CHECK(std::abs(cdc.radius_drop() - cdc.image_length) < 1e-5);
  check_descending(cdc);
}

TEST_CASE("cdc: split keeps both halves") {
  auto E = a3_field();
  auto cdc = integrate_cdc(E, Vec3(-0.5, 0.75, 0.2));
  double s = 0.5 * cdc.s_end();
  auto [a, b] = split_cdc(E, cdc, s);
  CHECK((a.end() - b.start()).norm() < 1e-12);
  CHECK((a.start() - cdc.start()).norm() < 1e-12);
  CHECK((b.end() - cdc.end()).norm() < 1e-12);
  CHECK(std::abs(a.image_length + b.image_length - cdc.image_length) < 1e-6);
}

TEST_CASE("flow_point: line field is tangent and spans kernel and radial") {
  auto E = a3_field();
  auto fp = flow_point(E, Vec3(-0.3, 0.27, 0.1));
  CHECK(fp.corank == 1);
  CHECK(std::abs(fp.line.dot(fp.normal)) < 1e-12);
  CHECK(std::abs(fp.line.dot(fp.kernel.cross(fp.radial).normalized())) < 1e-12);
  CHECK(fp.slack > 0.0);
}

TEST_CASE("gacdc: no obstacles returns the input") {
  auto E = a3_field();
  auto cdc = integrate_cdc(E, Vec3(-0.5, 0.75, 0.2));
  auto g = perturb_to_gacdc(E, cdc, {});
  REQUIRE(g.samples.size() == cdc.samples.size());
  for (std::size_t i = 0; i < g.samples.size(); ++i) CHECK((g.samples[i].x - cdc.samples[i].x).norm() < 1e-13);
  CHECK(g.perturbed);
}

TEST_CASE("gacdc: detours around an obstacle on the curve") {
  auto E = a3_field();
  auto cdc = integrate_cdc(E, Vec3(-0.5, 0.75, 0.2));
  Vec3 obstacle = cdc.samples[cdc.samples.size() / 3].x;
  GacdcOptions opt;
  opt.delta_avoid = 1e-2;
  opt.cone_amplitude = 0.1;
  auto g = perturb_to_gacdc(E, cdc, {obstacle}, opt);
  CHECK(g.gacdc.min_obstacle_distance >= opt.delta_avoid);
  CHECK(g.gacdc.max_deviation <= 5 * opt.delta_avoid);
  CHECK(g.gacdc.max_deviation > 0.0);
  CHECK_FALSE(g.canonical);
  check_descending(g);
}

TEST_CASE("gacdc: an empty cone cannot detour") {
  auto E = a3_field();
  auto cdc = integrate_cdc(E, Vec3(-0.5, 0.75, 0.2));
  GacdcOptions opt;
  opt.cone_amplitude = 0.0;
  opt.delta_avoid = 1e-2;
  CHECK_THROWS_WITH_AS(perturb_to_gacdc(E, cdc, {cdc.samples[cdc.samples.size() / 3].x}, opt),
                       doctest::Contains("no GACDC found"), Error);
  opt.cone_amplitude = 0.5;
  CHECK_THROWS_AS(perturb_to_gacdc(E, cdc, {}, opt), PreconditionError);
}

TEST_CASE("cdc: ellipsoid curve ends at a cusp with the length identity") {
  auto model = make_ellipsoid({1.0, 1.1, 1.25, 1.0});
  auto E = make_riemannian(model, Vec3(0.6, 0.3, -0.2));
  CdcOptions opt;
  opt.step = 5e-2;
  auto cdc = integrate_cdc(*E, Vec3(0.8021155505863198, 2.807404427052119, -1.2031733258794797), opt);
  CHECK((cdc.stop == CdcStop::A3 || cdc.stop == CdcStop::Boundary));
  CHECK(cdc.end_class.tag == SingularityTag::A3_I);
  CHECK(std::abs(cdc.radius_drop() - cdc.image_length) < 1e-5);
  check_descending(cdc);
  std::size_t n = cdc.samples.size();
  REQUIRE(n > 4);
  CHECK(cdc.samples[n - 2].slack < cdc.samples[n / 2].slack);
}

#include <algorithm>
#include <cmath>

#include "doctest.h"

#include "cjl/errors.hpp"
#include "cjl/linking.hpp"
#include "cjl/retort.hpp"
#include "cjl/tree_check.hpp"

using namespace cjl;

namespace {

const SyntheticField& a3_field() {
  static const SyntheticField f = [] {
    SyntheticSpec s;
    s.cls = NormalFormClass::A3;
    return SyntheticField(s);
  }();
  return f;
}

const SyntheticField& a4_field() {
  static const SyntheticField f = [] {
    SyntheticSpec s;
    s.cls = NormalFormClass::A4;
    s.theta = M_PI / 2;
    s.kappa = 0.5;
    return SyntheticField(s);
  }();
  return f;
}

const Vec3 kA3Start(-0.5, 0.75, 0.2);
const Vec3 kA4Start(-0.45, -0.24, 0.0931415625);

const LinkingResult& a3_link() {
  static const LinkingResult r = run_linking_algorithm(a3_field(), kA3Start, 1);
  return r;
}

const LinkingResult& a4_link() {
  static const LinkingResult r = run_linking_algorithm(a4_field(), kA4Start, 1);
  return r;
}

Tag acdc(int i) { return {false, i, -1}; }
Tag ret(int i, int j) { return {true, i, j}; }

bool has_vertex(const AspirantCurve& a, VertexKind k) {
  return std::any_of(a.vertices.begin(), a.vertices.end(), [&](const Vertex& v) { return v.kind == k; });
}

}  // namespace

TEST_CASE("retort: A2 reply along the second preimage") {
  SyntheticSpec s;
  s.cls = NormalFormClass::A2;
  SyntheticField E(s);
  CurvePath alpha;
  for (int i = 0; i <= 10; ++i) alpha.push(i / 10.0, Vec3(i / 10.0 + 1, 0, 0), Vec3(1, 0, 0));
  auto beta = retort_continuation(E, alpha, Vec3(-2, 0, 0));
  CHECK(beta.status == RetortStatus::Complete);
  CHECK(std::abs(beta.span() - 1.0) < 1e-9);
  for (double t : {0.0, 0.25, 0.5, 0.75, 1.0}) CHECK((beta.path.eval(t) - Vec3(-(2 - t), 0, 0)).norm() < 1e-8);
  CHECK(beta.max_residual < 1e-6);
  CHECK_THROWS_WITH_AS(retort_continuation(E, alpha, Vec3(2, 0, 0)), doctest::Contains("trivial retort"),
                       PreconditionError);
  CHECK_THROWS_AS(retort_continuation(E, alpha, Vec3(-1.5, 0, 0)), PreconditionError);
}

TEST_CASE("retort: A3 join traces the explicit second branch") {
  const auto& E = a3_field();
  auto cdc = integrate_cdc(E, kA3Start);
  auto beta = retort_continuation(E, cdc, cdc.end());
  CHECK(beta.join);
  CHECK(beta.status == RetortStatus::Complete);
  for (std::size_t i = 0; i < beta.path.size(); ++i) {
    const Vec3& b = beta.path.x[i];
    CHECK(std::abs(b[1] - 0.75 * b[0] * b[0]) < 1e-6);
    CHECK(std::abs(b[2] - 0.2) < 1e-6);
  }
  CHECK((beta.tip() - Vec3(1.0, 0.75, 0.2)).norm() < 1e-6);

  auto audit = unbeatability_audit(E, cdc, beta);
  CHECK(audit.ok);
  CHECK(audit.margin > 0.0);
  CHECK(std::abs(audit.gain_alpha - cdc.image_length) < 1e-5);
  CHECK(std::abs(audit.margin - (audit.gain_alpha - audit.gain_beta)) < 1e-15);
}

TEST_CASE("restrict_path: interpolated endpoints") {
  CurvePath p;
  for (int i = 0; i <= 4; ++i) p.push(i, Vec3(i, i * i, 0), Vec3(1, 2 * i, 0));
  auto r = restrict_path(p, 0.5, 2.5);
  CHECK(r.t0() == 0.5);
  CHECK(r.t1() == 2.5);
  CHECK((r.eval(0.5) - p.eval(0.5)).norm() < 1e-14);
  CHECK((r.eval(1.7) - p.eval(1.7)).norm() < 1e-12);
  CHECK_THROWS_AS(restrict_path(p, 2.0, 2.0), PreconditionError);
}

TEST_CASE("cancellation_reduce: adjacent pairs cancel") {
  CHECK(cancellation_reduce({acdc(0), ret(1, 0)}).empty());
  CHECK(cancellation_reduce({acdc(0), acdc(1), ret(2, 1), ret(3, 0)}).empty());
  auto crossing = cancellation_reduce({acdc(0), acdc(1), ret(2, 0)});
  CHECK(crossing.size() == 3);
  auto loose = cancellation_reduce({acdc(0), acdc(1), ret(2, 1)});
  REQUIRE(loose.size() == 1);
  CHECK(loose[0] == acdc(0));
  CHECK(cancellation_reduce({}).empty());
}

TEST_CASE("linking: non-conjugate start is an immediate success") {
  auto r = run_linking_algorithm(a3_field(), Vec3(0.3, -1, 0.2), 1);
  REQUIRE(r.success);
  REQUIRE(r.fclc);
  CHECK(r.fclc->curve.segments.empty());
  CHECK(r.fclc->radius_gain == 0.0);
  CHECK(radius_gain(a3_field(), r.fclc->curve) == 0.0);
}

TEST_CASE("linking: A3 fold start gives the two-segment curve") {
  const auto& r = a3_link();
  REQUIRE(r.success);
  REQUIRE(r.fclc);
  const auto& f = *r.fclc;
  REQUIRE(f.curve.segments.size() == 2);
  CHECK(f.curve.segments[0].kind == SegmentKind::ACDC);
  CHECK(f.curve.segments[1].kind == SegmentKind::RETORT);
  CHECK(f.curve.segments[1].replies_to == 0);
  CHECK((f.curve.segments[0].last() - Vec3(0, 0, 0.2)).norm() < 1e-6);
  CHECK((f.curve.tip() - Vec3(1.0, 0.75, 0.2)).norm() < 1e-6);
  CHECK(f.endpoint_image_gap < 1e-6);
  CHECK(f.radius_gain > 0.0);
  CHECK(std::abs(f.radius_gain - f.margin_sum) < 1e-6);
  CHECK(has_vertex(f.curve, VertexKind::A3_JOIN));
  CHECK(std::find(r.rules.begin(), r.rules.end(), "A3 join") != r.rules.end());
  CHECK(f.curve.saturated());
  CHECK(f.curve.residue().empty());
  CHECK_NOTHROW(f.curve.validate());
}

TEST_CASE("linking: A4 start builds a standard T") {
  const auto& r = a4_link();
  REQUIRE(r.success);
  REQUIRE(r.fclc);
  const auto& f = *r.fclc;
  auto ts = standard_ts(f.curve);
  REQUIRE_FALSE(ts.empty());
  CHECK(f.curve.vertices[ts[0].splitter].kind == VertexKind::SPLITTER);
  CHECK(f.curve.vertices[ts[0].hit].kind == VertexKind::HIT);
  CHECK(f.curve.vertices[ts[0].reprise].kind == VertexKind::REPRISE);
  CHECK(f.saturated);
  CHECK(f.endpoint_image_gap < 1e-6);
  CHECK(f.radius_gain > 0.0);
  double sum = 0.0;
  for (const auto& a : f.audits) {
    CHECK(a.margin > 0.0);
    sum += a.margin;
  }
  CHECK(std::abs(f.radius_gain - sum) < 1e-6);
  CHECK(in_unequivocal_class(f.tip_class));
}

TEST_CASE("linking: same seed, same curve") {
  auto r = run_linking_algorithm(a3_field(), kA3Start, 1);
  REQUIRE(r.fclc);
  CHECK((r.fclc->curve.tip() - a3_link().fclc->curve.tip()).norm() == 0.0);
  CHECK(r.rules == a3_link().rules);
}

TEST_CASE("linking: budget exhaustion returns the partial curve") {
  LinkingOptions opt;
  opt.budget = 1;
  auto r = run_linking_algorithm(a3_field(), kA3Start, 1, opt);
  CHECK_FALSE(r.success);
  CHECK_FALSE(r.fclc);
  CHECK_FALSE(r.last_rule.empty());
  CHECK(r.partial.segments.size() == 1);
}

TEST_CASE("tree check: A3 join pair back-tracks exactly") {
  auto res = tree_formed_check(a3_field(), a3_link().fclc->curve, 50, 3);
  CHECK(res.forms == 50);
  CHECK(res.max_integral < 1e-8);
}

TEST_CASE("tree check: standard T on the A4 model") {
  auto res = tree_formed_check(a4_field(), a4_link().fclc->curve, 50, 3);
  CHECK(res.max_integral < 1e-5);
  CHECK(res.intervals >= 3);
}

TEST_CASE("tree check: corrupted pairing is rejected") {
  auto tree = identification_tree(a4_link().fclc->curve);
  REQUIRE(tree.pairing.size() >= 2);
  tree.pairing[1].offset = 1e-2;
  CHECK_THROWS_AS(tree_formed_check(a4_field(), tree, 50, 3), StructuralError);

  IdentificationTree crossing;
  crossing.pieces.resize(4);
  crossing.pairing = {{0, 2, 0.0, 1.0, 0.0}, {1, 3, 0.0, 1.0, 0.0}};
  CHECK_THROWS_AS(tree_formed_check(a4_field(), crossing, 5, 3), StructuralError);
}

TEST_CASE("tree check: a closed loop that is not tree-formed") {
  SyntheticSpec s;
  s.cls = NormalFormClass::A2;
  SyntheticField E(s);
  CurvePath loop;
  for (int i = 0; i <= 32; ++i) {
    double a = 2 * M_PI * i / 32;
    loop.push(a, Vec3(1.0, std::cos(a), std::sin(a)), Vec3(0, -std::sin(a), std::cos(a)));
  }
  IdentificationTree tree;
  tree.pieces = {loop};
  auto res = tree_formed_check(E, tree, 50, 3);
  CHECK(res.intervals == 1);
  CHECK(res.max_integral > 1e-3);
}

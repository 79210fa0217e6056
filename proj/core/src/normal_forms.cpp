#include "cjl/normal_forms.hpp"

#include <Eigen/Dense>

#include "cjl/errors.hpp"
#include "cjl/jet.hpp"

namespace cjl {

const char* to_string(NormalFormClass c) {
  switch (c) {
    case NormalFormClass::A2: return "A2";
    case NormalFormClass::A3: return "A3";
    case NormalFormClass::A4: return "A4";
    case NormalFormClass::D4_minus: return "D4_minus";
    case NormalFormClass::D4_plus: return "D4_plus";
  }
  return "?";
}

NormalFormClass normal_form_from_string(const std::string& s) {
  for (auto c : {NormalFormClass::A2, NormalFormClass::A3, NormalFormClass::A4, NormalFormClass::D4_minus,
                 NormalFormClass::D4_plus})
    if (s == to_string(c)) return c;
  throw PreconditionError("unknown normal form class '" + s + "'");
}

NormalForm normal_form(NormalFormClass c) {
  switch (c) {
    case NormalFormClass::A2:
      return {c, 1, "", "x1^3/3 - xt1 x1", "(x1^2, x2, x3)"};
    case NormalFormClass::A3:
      return {c, 1, "-", "x1^4/4 - x2 x1^2/2 - xt1 x1", "(x1^3 - x1 x2, x2, x3)"};
    case NormalFormClass::A4:
      return {c, 1, "", "x1^5/5 + x2 x1^3/3 + x3 x1^2/2 - xt1 x1", "(x1^4 + x1^2 x2 + x1 x3, x2, x3)"};
    case NormalFormClass::D4_minus:
      return {c, 2, "", "x1^3/6 - x1 x2^2/2 + x3 (x1^2 + x2^2)/2 - xt1 x1 - xt2 x2",
              "(x1^2/2 - x2^2/2 + x1 x3, -x1 x2 + x2 x3, x3)"};
    case NormalFormClass::D4_plus:
      return {c, 2, "", "x1^3/6 + x2^3/6 + x1 x2 x3 - xt1 x1 - xt2 x2", "(x1^2/2 + x2 x3, x2^2/2 + x1 x3, x3)"};
  }
  throw PreconditionError("normal_form: bad class");
}

Vec3 canonical_map_eval(NormalFormClass c, const Vec3& x) {
  const double x1 = x[0], x2 = x[1], x3 = x[2];
  switch (c) {
    case NormalFormClass::A2: return {x1 * x1, x2, x3};
    case NormalFormClass::A3: return {x1 * x1 * x1 - x1 * x2, x2, x3};
    case NormalFormClass::A4: return {x1 * x1 * x1 * x1 + x1 * x1 * x2 + x1 * x3, x2, x3};
    case NormalFormClass::D4_minus: return {0.5 * x1 * x1 - 0.5 * x2 * x2 + x1 * x3, -x1 * x2 + x2 * x3, x3};
    case NormalFormClass::D4_plus: return {0.5 * x1 * x1 + x2 * x3, 0.5 * x2 * x2 + x1 * x3, x3};
  }
  return x;
}

Mat3 canonical_map_jacobian(NormalFormClass c, const Vec3& x) {
  const double x1 = x[0], x2 = x[1], x3 = x[2];
  Mat3 J = Mat3::Identity();
  switch (c) {
    case NormalFormClass::A2: J(0, 0) = 2 * x1; break;
    case NormalFormClass::A3:
      J(0, 0) = 3 * x1 * x1 - x2;
      J(0, 1) = -x1;
      break;
    case NormalFormClass::A4:
      J(0, 0) = 4 * x1 * x1 * x1 + 2 * x1 * x2 + x3;
      J(0, 1) = x1 * x1;
      J(0, 2) = x1;
      break;
    case NormalFormClass::D4_minus:
      J << x1 + x3, -x2, x1, -x2, -x1 + x3, x2, 0, 0, 1;
      break;
    case NormalFormClass::D4_plus:
      J << x1, x3, x2, x3, x2, x1, 0, 0, 1;
      break;
  }
  return J;
}

namespace {

// z = (x1, x2, x3, xt1, xt2); the q variables are x1 (A classes) or x1, x2 (D4).
template <class T>
T phase(NormalFormClass c, const std::array<T, 5>& z) {
  const T &x1 = z[0], &x2 = z[1], &x3 = z[2], &t1 = z[3], &t2 = z[4];
  switch (c) {
    case NormalFormClass::A2: return x1 * x1 * x1 / 3.0 - t1 * x1;
    case NormalFormClass::A3: return x1 * x1 * x1 * x1 / 4.0 - 0.5 * x2 * x1 * x1 - t1 * x1;
    case NormalFormClass::A4:
      return x1 * x1 * x1 * x1 * x1 / 5.0 + x2 * x1 * x1 * x1 / 3.0 + 0.5 * x3 * x1 * x1 - t1 * x1;
    case NormalFormClass::D4_minus:
      return x1 * x1 * x1 / 6.0 - 0.5 * x1 * x2 * x2 + x3 * (0.5 * x1 * x1 + 0.5 * x2 * x2) - t1 * x1 - t2 * x2;
    case NormalFormClass::D4_plus: return x1 * x1 * x1 / 6.0 + x2 * x2 * x2 / 6.0 + x1 * x2 * x3 - t1 * x1 - t2 * x2;
  }
  return T(0.0);
}

}  // namespace

PhasePoint phase_derive_point(NormalFormClass c, const Vec3& x) {
  const int k = normal_form(c).corank;
  Eigen::Vector2d xt = Eigen::Vector2d::Zero();
  PhasePoint out;
  for (int it = 0; it < 30; ++it) {
    std::array<Jet2<5>, 5> z{Jet2<5>::variable(x[0], 0), Jet2<5>::variable(x[1], 1), Jet2<5>::variable(x[2], 2),
                             Jet2<5>::variable(xt[0], 3), Jet2<5>::variable(xt[1], 4)};
    Jet2<5> F = phase(c, z);
    Eigen::Vector2d G = Eigen::Vector2d::Zero();
    Eigen::Matrix2d H = Eigen::Matrix2d::Identity();
    for (int a = 0; a < k; ++a) {
      G[a] = F.d[a];
      for (int b = 0; b < k; ++b) H(a, b) = F.h[a][3 + b];
    }
    out.iterations = it + 1;
    double gn = G.head(k).norm();
    if (gn < 1e-14 * (1.0 + x.squaredNorm())) {
      out.converged = true;
      break;
    }
    Eigen::Vector2d step = Eigen::Vector2d::Zero();
    step.head(k) = H.topLeftCorner(k, k).partialPivLu().solve(G.head(k));
    if (!step.allFinite()) break;
    xt -= step;
  }
  if (k == 1)
    out.value = Vec3(xt[0], x[1], x[2]);
  else
    out.value = Vec3(xt[0], xt[1], x[2]);
  return out;
}

PhaseGrid phase_derive(NormalFormClass c, int per_axis, double half_width) {
  PhaseGrid g;
  for (int i = 0; i < per_axis; ++i)
    for (int j = 0; j < per_axis; ++j)
      for (int l = 0; l < per_axis; ++l) {
        auto coord = [&](int n) { return per_axis == 1 ? 0.0 : -half_width + 2.0 * half_width * n / (per_axis - 1); };
        Vec3 x(coord(i), coord(j), coord(l));
        PhasePoint p = phase_derive_point(c, x);
        g.nodes.push_back(x);
        g.derived.push_back(p.value);
        g.flagged.push_back(!p.converged);
        if (!p.converged) {
          ++g.flagged_count;
          continue;
        }
        g.max_deviation = std::max(g.max_deviation, (p.value - canonical_map_eval(c, x)).cwiseAbs().maxCoeff());
      }
  return g;
}

double weinstein_locus(int k, const std::vector<double>& x) {
  if (k < 1) throw PreconditionError("weinstein_locus: k must be positive");
  if (static_cast<int>(x.size()) != k * (k + 1) / 2)
    throw PreconditionError("weinstein_locus: expected k(k+1)/2 coordinates");
  Eigen::MatrixXd M(k, k);
  int n = 0;
  for (int r = 0; r < k; ++r)
    for (int c = r; c < k; ++c) {
      M(r, c) = x[n];
      M(c, r) = x[n];
      ++n;
    }
  if (k == 1) return M(0, 0);
  if (k == 2) return M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0);
  return M.determinant();
}

}  // namespace cjl

#include "cjl/development.hpp"

#include <algorithm>
#include <cmath>

#include "cjl/errors.hpp"
#include "cjl/ode.hpp"
#include "cjl/random.hpp"

namespace cjl {

namespace {

struct RadialFrame {
  Vec3 point;
  Mat3 F;  // transported columns, chart components at point
};

// Parallel frame along t -> exp_p(t x), starting from the columns of F0.
RadialFrame radial_frame(const MetricModel& model, const Vec3& p, const Vec3& x, const Mat3& F0, double tol) {
  Frame fp = orthonormal_frame(model.metric(p));
  if (x.norm() == 0.0) return {p, F0};
  CurvePath g = integrate_geodesic(model, p, fp.E * x, 1.0, tol);
  if (g.truncated) throw TruncationError("local isometry: geodesic leaves the chart", g.exit_t);
  return {g.x.back(), parallel_transport(model, g, F0, tol)};
}

using Tensor4 = std::array<double, 81>;

// Fully covariant curvature in the frame F at x.
Tensor4 frame_curvature(const MetricModel& model, const Vec3& x, const Mat3& F) {
  Curvature R = curvature_tensor(model, x);
  Mat3 g = model.metric(x);
  Tensor4 out{};
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c) {
        Vec3 w = R.apply(F.col(a), F.col(b), F.col(c));
        for (int d = 0; d < 3; ++d) out[((a * 3 + b) * 3 + c) * 3 + d] = w.dot(g * F.col(d));
      }
  return out;
}

void require_start(const CurvePath& c, const Vec3& p, const char* what) {
  c.validate();
  if (c.size() < 2) throw PreconditionError(std::string(what) + ": path needs at least two samples");
  if ((c.x.front() - p).norm() > 1e-9 * (1.0 + p.norm()))
    throw PreconditionError(std::string(what) + ": path does not start at the base point");
}

OdeOptions ode_options(const DevelopOptions& o) {
  OdeOptions opt;
  opt.rtol = o.rtol;
  opt.atol = o.atol;
  return opt;
}

void unpack(const State<12>& y, Vec3& a, Mat3& F) {
  a = Vec3(y[0], y[1], y[2]);
  for (int c = 0; c < 3; ++c)
    for (int k = 0; k < 3; ++k) F(k, c) = y[3 + 3 * c + k];
}

State<12> pack(const Vec3& a, const Mat3& F) {
  State<12> y;
  for (int k = 0; k < 3; ++k) y[k] = a[k];
  for (int c = 0; c < 3; ++c)
    for (int k = 0; k < 3; ++k) y[3 + 3 * c + k] = F(k, c);
  return y;
}

CurvePath resample(const CurvePath& c, int m) {
  CurvePath out;
  for (std::size_t i = 0; i + 1 < c.size(); ++i)
    for (int j = 0; j < m; ++j) {
      double s = c.t[i] + (c.t[i + 1] - c.t[i]) * j / m;
      out.push(s, c.eval_on(i, s), c.velocity_on(i, s));
    }
  out.push(c.t1(), c.x.back(), c.v.back());
  return out;
}

}  // namespace

double LRelatedPair::curvature_residual(int n, std::uint64_t seed, double radius) const {
  Frame f1 = orthonormal_frame(m1->metric(p1));
  Frame f2 = orthonormal_frame(m2->metric(p2));
  Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    Vec3 x = rng.unit_vector() * radius * std::cbrt(rng.uniform());
    RadialFrame a = radial_frame(*m1, p1, x, f1.E, 1e-11);
    RadialFrame b = radial_frame(*m2, p2, L * x, f2.E * L, 1e-11);
    Tensor4 r1 = frame_curvature(*m1, a.point, a.F);
    Tensor4 r2 = frame_curvature(*m2, b.point, b.F);
    for (std::size_t k = 0; k < r1.size(); ++k) worst = std::max(worst, std::abs(r1[k] - r2[k]));
  }
  return worst;
}

void LRelatedPair::validate(int n, std::uint64_t seed, double radius) const {
  if (!m1 || !m2) throw PreconditionError("L-related pair: missing model");
  if (double r = orthogonality_residual(); r > 1e-10)
    throw PreconditionError("L-related pair: L is not orthogonal (residual " + std::to_string(r) + ")");
  if (double r = curvature_residual(n, seed, radius); r > 1e-5)
    throw PreconditionError("L-related pair: curvature mismatch " + std::to_string(r));
}

LRelatedPair identity_pair(ModelPtr model, const Vec3& p) { return {model, p, model, p, Mat3::Identity()}; }

LRelatedPair isometry_pair(ModelPtr model, const Vec3& p, const Mat3& A) {
  Vec3 q = A * p;
  Frame f1 = orthonormal_frame(model->metric(p));
  Frame f2 = orthonormal_frame(model->metric(q));
  return {model, p, model, q, f2.Einv * A * f1.E};
}

LinearIsometry local_isometry_I(const LRelatedPair& pair, const Vec3& x, double tol) {
  Frame f1 = orthonormal_frame(pair.m1->metric(pair.p1));
  Frame f2 = orthonormal_frame(pair.m2->metric(pair.p2));
  RadialFrame a = radial_frame(*pair.m1, pair.p1, x, f1.E, tol);
  RadialFrame b = radial_frame(*pair.m2, pair.p2, pair.L * x, f2.E, tol);
  Frame q1 = orthonormal_frame(pair.m1->metric(a.point));
  Frame q2 = orthonormal_frame(pair.m2->metric(b.point));
  LinearIsometry I;
  I.matrix = q2.Einv * b.F * pair.L * a.F.inverse() * q1.E;
  I.from_point = a.point;
  I.to_point = b.point;
  I.from_frame = q1.E;
  I.to_frame = q2.E;
  return I;
}

CurvePath develop(const MetricModel& model, const Vec3& p, const CurvePath& u, const DevelopOptions& o) {
  require_start(u, p, "develop");
  Frame fp = orthonormal_frame(model.metric(p));
  OdeOptions opt = ode_options(o);
  CurvePath out;
  Vec3 D = Vec3::Zero();
  Mat3 F = fp.E;
  out.push(u.t[0], D, F.inverse() * u.velocity_on(0, u.t[0]));
  for (std::size_t i = 0; i + 1 < u.size(); ++i) {
    auto sys = [&](const State<12>& y, State<12>& dy, double s) {
      Vec3 a;
      Mat3 Fs;
      unpack(y, a, Fs);
      Vec3 x = u.eval_on(i, s);
      model.require_domain(x);
      Vec3 xd = u.velocity_on(i, s);
      Christoffel G = christoffel(model, x);
      Mat3 dF;
      for (int c = 0; c < 3; ++c) dF.col(c) = -G.contract(xd, Fs.col(c));
      dy = pack(Fs.partialPivLu().solve(xd), dF);
    };
    const int m = std::max(1, o.substeps);
    for (int k = 1; k <= m; ++k) {
      double a = u.t[i] + (u.t[i + 1] - u.t[i]) * (k - 1) / m;
      double b = k == m ? u.t[i + 1] : u.t[i] + (u.t[i + 1] - u.t[i]) * k / m;
      auto r = integrate_ode<12>(sys, pack(D, F), a, b, opt);
      if (r.status == OdeStatus::Truncated) {
        out.truncated = true;
        out.exit_t = r.end_t;
        return out;
      }
      unpack(r.back().y, D, F);
      out.push(b, D, F.partialPivLu().solve(u.velocity_on(i, b)));
    }
  }
  out.exit_t = u.t1();
  return out;
}

CurvePath undevelop(const MetricModel& model, const Vec3& p, const CurvePath& v, const DevelopOptions& o) {
  v.validate();
  if (v.size() < 2) throw PreconditionError("undevelop: path needs at least two samples");
  if (v.x.front().norm() > 1e-12) throw PreconditionError("undevelop: path must start at 0");
  Frame fp = orthonormal_frame(model.metric(p));
  OdeOptions opt = ode_options(o);
  CurvePath out;
  Vec3 x = p;
  Mat3 F = fp.E;
  out.push(v.t[0], x, F * v.velocity_on(0, v.t[0]));
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    auto sys = [&](const State<12>& y, State<12>& dy, double s) {
      Vec3 xs;
      Mat3 Fs;
      unpack(y, xs, Fs);
      model.require_domain(xs);
      Vec3 xd = Fs * v.velocity_on(i, s);
      Christoffel G = christoffel(model, xs);
      Mat3 dF;
      for (int c = 0; c < 3; ++c) dF.col(c) = -G.contract(xd, Fs.col(c));
      dy = pack(xd, dF);
    };
    auto r = integrate_ode<12>(sys, pack(x, F), v.t[i], v.t[i + 1], opt, [&](double, const State<12>& y) {
      return model.in_domain(Vec3(y[0], y[1], y[2]));
    });
    if (r.status == OdeStatus::Truncated) {
      out.truncated = true;
      out.exit_t = r.end_t;
      return out;
    }
    unpack(r.back().y, x, F);
    out.push(v.t[i + 1], x, F * v.velocity_on(i, v.t[i + 1]));
  }
  out.exit_t = v.t1();
  return out;
}

double sup_distance(const CurvePath& a, const CurvePath& b) {
  double lo = std::max(a.t0(), b.t0()), hi = std::min(a.t1(), b.t1());
  std::vector<double> ts;
  for (const auto* c : {&a, &b})
    for (std::size_t i = 0; i < c->size(); ++i) {
      if (c->t[i] >= lo && c->t[i] <= hi) ts.push_back(c->t[i]);
      if (i + 1 < c->size()) {
        double m = 0.5 * (c->t[i] + c->t[i + 1]);
        if (m >= lo && m <= hi) ts.push_back(m);
      }
    }
  double worst = 0.0;
  for (double t : ts) worst = std::max(worst, (a.eval(t) - b.eval(t)).norm());
  return worst;
}

CurvePath exp_image(const MetricModel& model, const Vec3& p, const CurvePath& Y) {
  Y.validate();
  if (Y.interp() != Interp::Hermite) throw PreconditionError("exp_image: path needs velocities");
  CurvePath out;
  for (std::size_t i = 0; i < Y.size(); ++i) {
    ExpJet j = exp_jet(model, p, Y.x[i]);
    out.push(Y.t[i], j.value, j.chart_differential * Y.v[i]);
  }
  return out;
}

TransportResidual verify_L_related_transport(const LRelatedPair& pair, const CurvePath& Y, const TransportOptions& opt) {
  Y.validate();
  if (Y.interp() != Interp::Hermite) throw PreconditionError("verify_L_related_transport: Y needs velocities");
  if (Y.x.front().norm() > 1e-12) throw PreconditionError("verify_L_related_transport: Y(0) must be 0");
  if (opt.check_v1)
    for (std::size_t i = 1; i < Y.size(); ++i) {
      V1Result r = in_V1(*pair.m1, pair.p1, Y.x[i], opt.r_max);
      if (r.verdict == V1Verdict::Outside)
        throw V1ExitError("verify_L_related_transport: Y leaves V1 at t = " + std::to_string(Y.t[i]), Y.t[i]);
    }
  CurvePath Yf = resample(Y, std::max(1, opt.refine));
  CurvePath LY;
  for (std::size_t i = 0; i < Yf.size(); ++i) LY.push(Yf.t[i], pair.L * Yf.x[i], pair.L * Yf.v[i]);
  CurvePath u = exp_image(*pair.m1, pair.p1, Yf);
  CurvePath v = exp_image(*pair.m2, pair.p2, LY);

  CurvePath d1 = develop(*pair.m1, pair.p1, u, opt.develop);
  if (d1.truncated) throw TruncationError("verify_L_related_transport: development truncated", d1.exit_t);
  for (std::size_t i = 0; i < d1.size(); ++i) {
    d1.x[i] = pair.L * d1.x[i];
    d1.v[i] = pair.L * d1.v[i];
  }
  CurvePath w = undevelop(*pair.m2, pair.p2, d1, opt.develop);
  if (w.truncated) throw TruncationError("verify_L_related_transport: inverse development truncated", w.exit_t);

  TransportResidual res;
  res.samples = Yf.size();
  res.development = sup_distance(v, w);
  Mat3 prev;
  for (std::size_t i = 0; i < Yf.size(); ++i) {
    LinearIsometry I = local_isometry_I(pair, Yf.x[i]);
    Vec3 a = I.from_frame.inverse() * u.v[i];
    Vec3 b = I.to_frame.inverse() * v.v[i];
    res.derivative = std::max(res.derivative, (I.matrix * a - b).norm());
    if (i > 0) {
      double h = (Yf.x[i] - Yf.x[i - 1]).norm();
      if (h > 0) res.continuity_constant = std::max(res.continuity_constant, (I.matrix - prev).norm() / h);
    }
    prev = I.matrix;
  }
  return res;
}

ShrinkResult shrink_and_limit(const LRelatedPair& pair, const CurvePath& Y, const std::vector<int>& ks,
                              const TransportOptions& opt) {
  if (ks.empty()) throw PreconditionError("shrink_and_limit: no k values");
  ShrinkResult out;
  for (int k : ks) {
    if (k < 2) throw PreconditionError("shrink_and_limit: k must be at least 2");
    double f = 1.0 - 1.0 / k;
    CurvePath Yk = Y;
    for (std::size_t i = 0; i < Yk.size(); ++i) {
      Yk.x[i] *= f;
      if (!Yk.v.empty()) Yk.v[i] *= f;
    }
    out.records.push_back({k, verify_L_related_transport(pair, Yk, opt)});
  }
  const auto& last = out.records.back();
  out.extrapolated_development = last.residual.development;
  out.extrapolated_derivative = last.residual.derivative;
  if (out.records.size() >= 2) {
    const auto& prev = out.records[out.records.size() - 2];
    double e1 = 1.0 / prev.k, e2 = 1.0 / last.k;
    auto extrap = [&](double r1, double r2) { return std::max(0.0, r2 - (r1 - r2) * e2 / (e1 - e2)); };
    out.extrapolated_development = extrap(prev.residual.development, last.residual.development);
    out.extrapolated_derivative = extrap(prev.residual.derivative, last.residual.derivative);
  }
  return out;
}

double isometry_continuity(const LRelatedPair& pair, const Vec3& x, double h, int n, std::uint64_t seed) {
  Mat3 I0 = local_isometry_I(pair, x).matrix;
  Rng rng(seed);
  double C = 0.0;
  for (int i = 0; i < n; ++i) {
    Vec3 w = rng.unit_vector();
    C = std::max(C, (local_isometry_I(pair, x + h * w).matrix - I0).norm() / h);
  }
  return C;
}

}  // namespace cjl

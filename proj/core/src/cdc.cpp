#include "cjl/cdc.hpp"

#include <cmath>
#include <functional>
#include <limits>

#include <boost/math/tools/toms748_solve.hpp>

#include "cjl/errors.hpp"
#include "cjl/quadrature.hpp"
#include "cjl/random.hpp"

namespace cjl {

const char* to_string(CdcStop s) {
  switch (s) {
    case CdcStop::A3: return "A3";
    case CdcStop::Boundary: return "boundary";
    case CdcStop::Obstacle: return "obstacle";
    case CdcStop::Corank: return "corank";
    case CdcStop::Unresolved: return "unresolved";
    case CdcStop::MaxLength: return "max_length";
    case CdcStop::MaxSteps: return "max_steps";
    case CdcStop::Split: return "split";
  }
  return "?";
}

FlowPoint flow_point(const ExpStructure& E, const Vec3& x, double sigma_rel) {
  FlowPoint f;
  f.x = x;
  f.e = E.eval(x);
  f.grad = E.det_gradient(x);
  double gn = f.grad.norm();
  if (gn == 0.0) throw PreconditionError("flow_point: det gradient vanishes");
  f.normal = f.grad / gn;
  f.kernel = f.e.svd.V.col(2);
  f.radial = E.radial(x);
  f.corank = count_small_singular(f.e.svd.sigma, sigma_rel);
  Vec3 d = f.normal.cross(f.kernel.cross(f.radial));
  double dn = d.norm();
  if (dn == 0.0) throw PreconditionError("flow_point: radial parallel to kernel");
  f.line = d / dn;
  Eigen::Matrix<double, 3, 2> B;
  B.col(0) = f.kernel;
  B.col(1) = f.radial;
  f.b = B.colPivHouseholderQr().solve(f.line)[1];
  f.slack = line_sine(f.line, f.kernel);
  f.c1 = std::abs(f.grad.dot(f.kernel)) / gn;
  return f;
}

CurvePath CDCurve::path() const {
  CurvePath p;
  for (const auto& s : samples) p.push(s.s, s.x, s.dx);
  return p;
}

double CDCurve::radius_drop() const { return samples.front().radius - samples.back().radius; }

double image_length(const ExpStructure& E, const CurvePath& path) {
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < path.size(); ++i) {
    total += gauss_legendre(path.t[i], path.t[i + 1], [&](double s) {
      return (E.eval(path.eval_on(i, s)).D * path.velocity_on(i, s)).norm();
    });
  }
  return total;
}

namespace {

// Direction of motion given the oriented descending line at a point.
using DirectionFn = std::function<Vec3(const FlowPoint&, const Vec3& line)>;

struct StepResult {
  Vec3 x;
  double t;
  FlowPoint fp;
  Vec3 line;  // oriented line at x
};

class Flow {
 public:
  Flow(const ExpStructure& E, const CdcOptions& opt, DirectionFn dir) : E_(E), opt_(opt), dir_(std::move(dir)) {}

  Vec3 oriented(const FlowPoint& fp, const Vec3& ref) const { return fp.line.dot(ref) < 0 ? Vec3(-fp.line) : fp.line; }

  // One RK4 step in source arclength followed by projection onto the conjugate surface,
  // split into substeps no longer than opt.step.
  StepResult advance(const StepResult& from, double h) const {
    int n = std::max(1, static_cast<int>(std::ceil(h / opt_.step - 1e-12)));
    double hs = h / n;
    StepResult cur = from;
    for (int i = 0; i < n; ++i) {
      const Vec3 ref = cur.line;
      auto F = [&](const FlowPoint& fp, Vec3& u, double& speed) {
        u = dir_(fp, oriented(fp, ref));
        speed = (fp.e.D * u).norm();
      };
      auto at = [&](const Vec3& y) {
        if (!E_.in_domain(y)) throw DomainError("flow left the domain");
        return flow_point(E_, y, opt_.classify.sigma_rel);
      };
      Vec3 u1, u2, u3, u4;
      double s1, s2, s3, s4;
      F(cur.fp, u1, s1);
      F(at(cur.x + 0.5 * hs * u1), u2, s2);
      F(at(cur.x + 0.5 * hs * u2), u3, s3);
      FlowPoint f4 = at(cur.x + hs * u3);
      F(f4, u4, s4);
      Vec3 x = cur.x + hs / 6 * (u1 + 2 * u2 + 2 * u3 + u4);
      // Newton onto det = 0 with the last stage gradient.
      for (int it = 0; it < 20; ++it) {
        if (!E_.in_domain(x)) throw DomainError("flow left the domain");
        double d = E_.det(x);
        if (std::abs(d) <= opt_.project_tol) break;
        if (it == 19) throw IntegrationError("flow: projection onto the conjugate surface failed");
        x -= d / f4.grad.squaredNorm() * f4.grad;
      }
      cur.x = x;
      cur.t += hs / 6 * (s1 + 2 * s2 + 2 * s3 + s4);
      cur.fp = at(x);
      cur.line = oriented(cur.fp, ref);
    }
    return cur;
  }

  double descent_coefficient(const StepResult& r) const { return r.line.dot(r.fp.line) > 0 ? r.fp.b : -r.fp.b; }

  CdcSample sample(double s, const StepResult& r) const {
    CdcSample c;
    c.s = s;
    c.t = r.t;
    c.x = r.x;
    c.dx = dir_(r.fp, r.line);
    c.image = r.fp.e.value;
    c.radius = E_.has_radius() ? E_.radius(r.x) : std::numeric_limits<double>::quiet_NaN();
    c.slack = r.fp.slack;
    c.tag = SingularityTag::A2;
    return c;
  }

  CDCurve run(const Vec3& x0_in, const std::function<void(const Vec3&, const Vec3&)>& after_step = {}) const {
    CDCurve out;
    Vec3 x0 = project_to_conjugate(E_, x0_in, opt_.project_tol);
    out.start_class = classify(E_, x0, opt_.classify);
    if (out.start_class.tag != SingularityTag::A2)
      throw PreconditionError(std::string("integrate_cdc: start point classifies ") + to_string(out.start_class.tag));
    FlowPoint fp0 = flow_point(E_, x0, opt_.classify.sigma_rel);
    if (fp0.slack < 1e-6) throw PreconditionError("integrate_cdc: A3-degenerate start");
    Vec3 line0 = fp0.b < 0 ? fp0.line : Vec3(-fp0.line);
    StepResult cur{x0, 0.0, fp0, line0};
    double s = 0.0;
    out.samples.push_back(sample(s, cur));
    const double h = opt_.step;
    for (int step = 0;; ++step) {
      if (step >= opt_.max_steps) {
        out.stop = CdcStop::MaxSteps;
        out.stop_reason = "step budget exhausted";
        break;
      }
      StepResult nxt;
      try {
        nxt = advance(cur, h);
      } catch (const Error& e) {
        out.stop = CdcStop::Boundary;
        out.stop_reason = e.what();
        break;
      }
      if (after_step) after_step(cur.x, nxt.x);
      double bn = descent_coefficient(nxt);
      if (bn >= 0 || nxt.fp.slack < opt_.slack_floor || nxt.fp.c1 < opt_.classify.tau1) {
        snap(cur, s, out);
        break;
      }
      if (nxt.fp.corank != 1) {
        out.stop = CdcStop::Corank;
        out.stop_reason = "corank " + std::to_string(nxt.fp.corank) + " point";
        break;
      }
      s += h;
      cur = nxt;
      out.samples.push_back(sample(s, cur));
      if (cur.t >= opt_.max_length) {
        out.stop = CdcStop::MaxLength;
        out.stop_reason = "canonical length budget reached";
        break;
      }
    }
    const Vec3& xe = out.samples.back().x;
    try {
      out.end_class = out.stop == CdcStop::A3 ? classify(E_, xe, opt_.classify) : point_class(E_, xe, opt_.classify);
    } catch (const Error& e) {
      out.end_class.evidence.notes.push_back(e.what());
    }
    if (out.stop == CdcStop::A3) out.samples.back().tag = out.end_class.tag;
    out.image_length = image_length(E_, out.path());
    return out;
  }

  // Root of the descent coefficient beyond the last accepted point.
  void snap(const StepResult& cur, double s, CDCurve& out) const {
    auto g = [&](double hh) { return descent_coefficient(advance(cur, hh)); };
    double lo = 0.0, glo = descent_coefficient(cur);
    double hi = opt_.step, ghi = 0.0;
    bool bracket = false;
    for (int i = 0; i < 6; ++i, hi *= 2) {
      try {
        ghi = g(hi);
      } catch (const Error&) {
        break;
      }
      if (ghi >= 0) {
        bracket = true;
        break;
      }
      lo = hi;
      glo = ghi;
    }
    if (!bracket) {
      out.stop = CdcStop::Unresolved;
      out.stop_reason = "A3 approach could not be bracketed";
      return;
    }
    std::uintmax_t iters = 80;
    auto root = boost::math::tools::toms748_solve(g, lo, hi, glo, ghi,
                                                  boost::math::tools::eps_tolerance<double>(40), iters);
    double hh = 0.5 * (root.first + root.second);
    StepResult end = advance(cur, hh);
    CdcSample c = sample(s + hh, end);
    // At the A3 point the line field is the kernel; keep the incoming tangent for interpolation.
    c.dx = end.line;
    out.samples.push_back(c);
    out.stop = CdcStop::A3;
    out.stop_reason = "slack floor reached; snapped onto A3 point";
  }

 private:
  const ExpStructure& E_;
  CdcOptions opt_;
  DirectionFn dir_;
};

double segment_distance(const Vec3& a, const Vec3& b, const Vec3& q) {
  Vec3 ab = b - a;
  double L2 = ab.squaredNorm();
  double u = L2 > 0 ? std::clamp((q - a).dot(ab) / L2, 0.0, 1.0) : 0.0;
  return (a + u * ab - q).norm();
}

double polyline_distance(const std::vector<CdcSample>& s, const Vec3& q) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < s.size(); ++i) best = std::min(best, segment_distance(s[i].x, s[i + 1].x, q));
  if (s.size() == 1) best = (s[0].x - q).norm();
  return best;
}

}  // namespace

CDCurve integrate_cdc(const ExpStructure& E, const Vec3& x0, const CdcOptions& opt) {
  Flow flow(E, opt, [](const FlowPoint&, const Vec3& line) { return line; });
  return flow.run(x0);
}

std::pair<CDCurve, CDCurve> split_cdc(const ExpStructure& E, const CDCurve& c, double s, const ClassifyOptions& copt) {
  if (!(s > c.samples.front().s && s < c.s_end())) throw PreconditionError("split_cdc: split point outside the curve");
  CurvePath p = c.path();
  std::size_t i = p.segment(s);
  double w = (s - p.t[i]) / (p.t[i + 1] - p.t[i]);
  CdcSample m;
  m.s = s;
  m.t = (1 - w) * c.samples[i].t + w * c.samples[i + 1].t;
  m.x = p.eval(s);
  m.dx = p.velocity(s).normalized();
  m.image = E.image(m.x);
  m.radius = E.has_radius() ? E.radius(m.x) : std::numeric_limits<double>::quiet_NaN();
  m.slack = flow_point(E, m.x, copt.sigma_rel).slack;
  m.tag = SingularityTag::A2;
  CDCurve a = c, b = c;
  a.samples.assign(c.samples.begin(), c.samples.begin() + static_cast<long>(i) + 1);
  if (a.samples.back().s > s - 1e-14) a.samples.pop_back();
  a.samples.push_back(m);
  b.samples.clear();
  b.samples.push_back(m);
  for (std::size_t k = i + 1; k < c.samples.size(); ++k)
    if (c.samples[k].s > s + 1e-14) b.samples.push_back(c.samples[k]);
  a.stop = CdcStop::Split;
  a.stop_reason = "split at a splitter vertex";
  a.end_class = point_class(E, m.x, copt);
  b.start_class = a.end_class;
  a.image_length = image_length(E, a.path());
  b.image_length = image_length(E, b.path());
  return {a, b};
}

CDCurve perturb_to_gacdc(const ExpStructure& E, const CDCurve& cdc, const std::vector<Vec3>& obstacles,
                         const GacdcOptions& opt) {
  GacdcMeta meta;
  meta.cone_amplitude = opt.cone_amplitude;
  meta.delta_avoid = opt.delta_avoid;
  meta.seed = opt.seed;
  meta.obstacles = obstacles.size();
  if (opt.cone_amplitude < 0 || opt.cone_amplitude > meta.schedule_cap)
    throw PreconditionError("perturb_to_gacdc: cone amplitude outside [0, " + std::to_string(meta.schedule_cap) + "]");
  if (cdc.samples.empty()) throw PreconditionError("perturb_to_gacdc: empty curve");
  if (obstacles.empty()) {
    CDCurve out = cdc;
    out.perturbed = true;
    out.canonical = cdc.canonical;
    meta.min_obstacle_distance = std::numeric_limits<double>::infinity();
    out.gacdc = meta;
    return out;
  }
  Rng rng(opt.seed);
  std::vector<int> side(obstacles.size(), 0);
  const double delta = opt.delta_avoid;
  auto direction = [&](const FlowPoint& fp, const Vec3& line) -> Vec3 {
    double amp = std::min(opt.cone_amplitude, std::min(meta.schedule_cap, fp.slack / 4));
    if (amp <= 0) return line;
    Vec3 w = fp.normal.cross(line).normalized();
    double steer = 0.0;
    for (std::size_t i = 0; i < obstacles.size(); ++i) {
      Vec3 y = fp.x - obstacles[i];
      double along = y.dot(line), cross = y.dot(w), off = y.dot(fp.normal);
      if (along < 0 && -along < 2 * delta / amp + 2 * delta && std::abs(cross) < 2 * delta && std::abs(off) < 2 * delta) {
        if (side[i] == 0) side[i] = std::abs(cross) > 1e-9 ? (cross > 0 ? 1 : -1) : (rng.uniform() < 0.5 ? 1 : -1);
        steer = side[i];
      }
    }
    return (line + steer * amp * w).normalized();
  };
  CdcOptions copt = opt.cdc;
  copt.max_length = std::min(copt.max_length, 2 * cdc.t_end() + 1.0);
  Flow flow(E, copt, direction);
  double min_dist = std::numeric_limits<double>::infinity();
  CDCurve out = flow.run(cdc.start(), [&](const Vec3& a, const Vec3& b) {
    for (const Vec3& q : obstacles) {
      double d = segment_distance(a, b, q);
      min_dist = std::min(min_dist, d);
      if (d < delta) throw Error("no GACDC found: obstacle tube blocks every cone direction");
    }
  });
  out.perturbed = true;
  out.canonical = false;
  double dev = 0.0;
  for (const auto& s : out.samples) dev = std::max(dev, polyline_distance(cdc.samples, s.x));
  meta.max_deviation = dev;
  meta.min_obstacle_distance = min_dist;
  out.gacdc = meta;
  return out;
}

}  // namespace cjl

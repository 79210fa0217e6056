#include "cjl/metric.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "cjl/errors.hpp"
#include "cjl/jet.hpp"

namespace cjl {

void MetricModel::require_domain(const Vec3& x) const {
  if (!in_domain(x)) {
    std::ostringstream os;
    os << id() << ": point (" << x[0] << ", " << x[1] << ", " << x[2] << ") outside chart domain";
    throw DomainError(os.str());
  }
}

namespace {

using J3 = Jet2<3>;
using J3Vec = std::array<J3, 3>;

// f returns the upper triangle (00, 01, 02, 11, 12, 22) of g.
template <class F>
MetricJet jet_from(F&& f, const Vec3& x) {
  J3Vec X{J3::variable(x[0], 0), J3::variable(x[1], 1), J3::variable(x[2], 2)};
  std::array<J3, 6> c = f(X);
  static constexpr int idx[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
  MetricJet mj;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      const J3& e = c[idx[a][b]];
      mj.g(a, b) = e.v;
      for (int i = 0; i < 3; ++i) {
        mj.dg[i](a, b) = e.d[i];
        for (int j = 0; j < 3; ++j) mj.d2g[i][j](a, b) = e.h[i][j];
      }
    }
  return mj;
}

template <class T>
T norm2(const std::array<T, 3>& x) {
  return x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
}

template <class T>
std::array<T, 6> conformal(const T& phi) {
  return {phi, T(0.0), T(0.0), phi, T(0.0), phi};
}

class Euclidean final : public MetricModel {
 public:
  explicit Euclidean(double box) : box_(box) {}
  std::string id() const override { return "euclidean"; }
  ParamMap params() const override { return {{"box", box_}}; }
  bool in_domain(const Vec3& x) const override { return x.allFinite() && x.cwiseAbs().maxCoeff() < box_; }
  MetricJet jet(const Vec3& x) const override {
    require_domain(x);
    MetricJet mj;
    mj.g.setIdentity();
    for (auto& m : mj.dg) m.setZero();
    for (auto& row : mj.d2g)
      for (auto& m : row) m.setZero();
    return mj;
  }

 private:
  double box_;
};

class Sphere final : public MetricModel {
 public:
  Sphere(double K, double R) : K_(K), R_(R) {}
  std::string id() const override { return "sphere"; }
  ParamMap params() const override { return {{"K", K_}, {"chart_radius", R_}}; }
  bool in_domain(const Vec3& x) const override { return x.allFinite() && x.norm() < R_; }
  MetricJet jet(const Vec3& x) const override {
    require_domain(x);
    return jet_from(
        [&](const J3Vec& X) {
          J3 s = 1.0 + K_ * norm2(X);
          return conformal<J3>(4.0 / (s * s));
        },
        x);
  }

 private:
  double K_, R_;
};

class BumpSphere final : public MetricModel {
 public:
  BumpSphere(double K, double A, double w, const Vec3& c, double R) : K_(K), A_(A), w_(w), c_(c), R_(R) {}
  std::string id() const override { return "bump_sphere"; }
  ParamMap params() const override {
    return {{"K", K_}, {"amplitude", A_}, {"width", w_}, {"c1", c_[0]}, {"c2", c_[1]}, {"c3", c_[2]}, {"chart_radius", R_}};
  }
  bool in_domain(const Vec3& x) const override { return x.allFinite() && x.norm() < R_; }
  MetricJet jet(const Vec3& x) const override {
    require_domain(x);
    return jet_from(
        [&](const J3Vec& X) {
          J3 s = 1.0 + K_ * norm2(X);
          J3Vec d{X[0] - c_[0], X[1] - c_[1], X[2] - c_[2]};
          J3 bump = 1.0 + A_ * exp(-norm2(d) / (w_ * w_));
          return conformal<J3>(4.0 * bump / (s * s));
        },
        x);
  }

 private:
  double K_, A_, w_;
  Vec3 c_;
  double R_;
};

class Ellipsoid final : public MetricModel {
 public:
  Ellipsoid(const std::array<double, 4>& a, double R) : a_(a), R_(R) {}
  std::string id() const override { return "ellipsoid"; }
  ParamMap params() const override {
    return {{"a1", a_[0]}, {"a2", a_[1]}, {"a3", a_[2]}, {"a4", a_[3]}, {"chart_radius", R_}};
  }
  bool in_domain(const Vec3& x) const override { return x.allFinite() && x.norm() < R_; }
  MetricJet jet(const Vec3& x) const override {
    require_domain(x);
    return jet_from(
        [&](const J3Vec& X) {
          J3 s = 1.0 + norm2(X);
          J3 s2 = s * s;
          // D[i][m] = d_i sigma_m for the inverse stereographic map sigma: R^3 -> S^3.
          std::array<std::array<J3, 4>, 3> D;
          for (int i = 0; i < 3; ++i) {
            for (int m = 0; m < 3; ++m) {
              D[i][m] = -4.0 * X[m] * X[i] / s2;
              if (i == m) D[i][m] += 2.0 / s;
            }
            D[i][3] = -4.0 * X[i] / s2;
          }
          auto gij = [&](int i, int j) {
            J3 acc(0.0);
            for (int m = 0; m < 4; ++m) acc += (a_[m] * a_[m]) * (D[i][m] * D[j][m]);
            return acc;
          };
          return std::array<J3, 6>{gij(0, 0), gij(0, 1), gij(0, 2), gij(1, 1), gij(1, 2), gij(2, 2)};
        },
        x);
  }

 private:
  std::array<double, 4> a_;
  double R_;
};

class FiniteDifferenceMetric final : public MetricModel {
 public:
  FiniteDifferenceMetric(std::string id, std::function<Mat3(const Vec3&)> g, std::function<bool(const Vec3&)> dom,
                         ParamMap p)
      : id_(std::move(id)), g_(std::move(g)), dom_(std::move(dom)), p_(std::move(p)) {}
  std::string id() const override { return id_; }
  ParamMap params() const override { return p_; }
  bool in_domain(const Vec3& x) const override { return x.allFinite() && dom_(x); }
  bool analytic_derivatives() const override { return false; }
  Mat3 metric(const Vec3& x) const override {
    require_domain(x);
    return g_(x);
  }
  MetricJet jet(const Vec3& x) const override {
    require_domain(x);
    MetricJet mj;
    mj.g = g_(x);
    const double h1 = 1e-5, h2 = 1e-4;
    for (int i = 0; i < 3; ++i) {
      Vec3 e = Vec3::Unit(i);
      mj.dg[i] = (g_(x + h1 * e) - g_(x - h1 * e)) / (2 * h1);
      mj.d2g[i][i] = (g_(x + h2 * e) - 2.0 * mj.g + g_(x - h2 * e)) / (h2 * h2);
    }
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j) {
        Vec3 ei = h2 * Vec3::Unit(i), ej = h2 * Vec3::Unit(j);
        mj.d2g[i][j] = (g_(x + ei + ej) - g_(x + ei - ej) - g_(x - ei + ej) + g_(x - ei - ej)) / (4 * h2 * h2);
        mj.d2g[j][i] = mj.d2g[i][j];
      }
    return mj;
  }

 private:
  std::string id_;
  std::function<Mat3(const Vec3&)> g_;
  std::function<bool(const Vec3&)> dom_;
  ParamMap p_;
};

double take(const ParamMap& p, const char* key, double dflt, std::set<std::string>& used) {
  used.insert(key);
  auto it = p.find(key);
  return it == p.end() ? dflt : it->second;
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw PreconditionError(std::string("parameter ") + what + " must be positive");
}

}  // namespace

ModelPtr make_euclidean(double box) { return std::make_shared<Euclidean>(box); }
ModelPtr make_sphere(double K, double chart_radius) {
  require_positive(K, "K");
  return std::make_shared<Sphere>(K, chart_radius);
}
ModelPtr make_ellipsoid(const std::array<double, 4>& axes, double chart_radius) {
  for (double a : axes) require_positive(a, "axis");
  return std::make_shared<Ellipsoid>(axes, chart_radius);
}
ModelPtr make_bump_sphere(double K, double amplitude, double width, const Vec3& center, double chart_radius) {
  require_positive(K, "K");
  require_positive(width, "width");
  if (amplitude <= -1.0) throw PreconditionError("bump amplitude must exceed -1");
  return std::make_shared<BumpSphere>(K, amplitude, width, center, chart_radius);
}
ModelPtr make_finite_difference(std::string id, std::function<Mat3(const Vec3&)> g,
                                std::function<bool(const Vec3&)> domain, ParamMap params) {
  return std::make_shared<FiniteDifferenceMetric>(std::move(id), std::move(g), std::move(domain), std::move(params));
}

ModelPtr make_model(const std::string& id, const ParamMap& p) {
  std::set<std::string> used;
  ModelPtr m;
  if (id == "euclidean") {
    m = make_euclidean(take(p, "box", 1e3, used));
  } else if (id == "sphere") {
    m = make_sphere(take(p, "K", 1.0, used), take(p, "chart_radius", 1e4, used));
  } else if (id == "ellipsoid") {
    std::array<double, 4> a{take(p, "a1", 1.0, used), take(p, "a2", 1.1, used), take(p, "a3", 1.25, used),
                            take(p, "a4", 1.0, used)};
    m = make_ellipsoid(a, take(p, "chart_radius", 1e3, used));
  } else if (id == "bump_sphere") {
    Vec3 c(take(p, "c1", 0.0, used), take(p, "c2", 0.0, used), take(p, "c3", 0.0, used));
    m = make_bump_sphere(take(p, "K", 1.0, used), take(p, "amplitude", 0.3, used), take(p, "width", 0.5, used), c,
                         take(p, "chart_radius", 1e4, used));
  } else {
    throw PreconditionError("unknown metric model id '" + id + "'");
  }
  for (const auto& [k, v] : p)
    if (!used.count(k)) throw PreconditionError("unknown parameter '" + k + "' for model '" + id + "'");
  return m;
}

Christoffel christoffel_from(const MetricJet& mj) {
  Mat3 ginv = mj.g.inverse();
  // Gamma_{l,ij} (first kind) = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
  std::array<Mat3, 3> first;
  for (int l = 0; l < 3; ++l)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) first[l](i, j) = 0.5 * (mj.dg[i](j, l) + mj.dg[j](i, l) - mj.dg[l](i, j));
  Christoffel c;
  for (int k = 0; k < 3; ++k) {
    c.G[k].setZero();
    for (int l = 0; l < 3; ++l) c.G[k] += ginv(k, l) * first[l];
  }
  return c;
}

Christoffel christoffel(const MetricModel& model, const Vec3& x) { return christoffel_from(model.jet(x)); }

ChristoffelJet christoffel_jet(const MetricModel& model, const Vec3& x) {
  MetricJet mj = model.jet(x);
  Mat3 ginv = mj.g.inverse();
  ChristoffelJet cj;
  std::array<Mat3, 3> first;
  for (int l = 0; l < 3; ++l)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) first[l](i, j) = 0.5 * (mj.dg[i](j, l) + mj.dg[j](i, l) - mj.dg[l](i, j));
  for (int k = 0; k < 3; ++k) {
    cj.gamma.G[k].setZero();
    for (int l = 0; l < 3; ++l) cj.gamma.G[k] += ginv(k, l) * first[l];
  }
  for (int m = 0; m < 3; ++m) {
    Mat3 dginv = -ginv * mj.dg[m] * ginv;
    std::array<Mat3, 3> dfirst;
    for (int l = 0; l < 3; ++l)
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
          dfirst[l](i, j) = 0.5 * (mj.d2g[m][i](j, l) + mj.d2g[m][j](i, l) - mj.d2g[m][l](i, j));
    for (int k = 0; k < 3; ++k) {
      Mat3 acc = Mat3::Zero();
      for (int l = 0; l < 3; ++l) acc += dginv(k, l) * first[l] + ginv(k, l) * dfirst[l];
      cj.d[m].G[k] = acc;
    }
  }
  return cj;
}

Vec3 Curvature::apply(const Vec3& X, const Vec3& Y, const Vec3& Z) const {
  Vec3 out = Vec3::Zero();
  for (int l = 0; l < 3; ++l)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) out[l] += (*this)(l, i, j, k) * X[i] * Y[j] * Z[k];
  return out;
}

Curvature curvature_from(const ChristoffelJet& cj) {
  const auto& G = cj.gamma.G;
  Curvature R;
  for (int l = 0; l < 3; ++l)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) {
          double v = cj.d[i].G[l](j, k) - cj.d[j].G[l](i, k);
          for (int m = 0; m < 3; ++m) v += G[l](i, m) * G[m](j, k) - G[l](j, m) * G[m](i, k);
          R(l, i, j, k) = v;
        }
  return R;
}

Curvature curvature_tensor(const MetricModel& model, const Vec3& x) { return curvature_from(christoffel_jet(model, x)); }

double sectional_curvature(const MetricModel& model, const Vec3& x, const Vec3& X, const Vec3& Y) {
  Mat3 g = model.metric(x);
  Curvature R = curvature_tensor(model, x);
  // <R(X,Y)Y, X>
  double num = R.apply(X, Y, Y).dot(g * X);
  double den = X.dot(g * X) * Y.dot(g * Y) - std::pow(X.dot(g * Y), 2);
  if (den <= 0.0) throw PreconditionError("sectional_curvature: degenerate plane");
  return num / den;
}

double bianchi_residual(const Curvature& R) {
  double worst = 0.0;
  for (int l = 0; l < 3; ++l)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k)
          worst = std::max(worst, std::abs(R(l, i, j, k) + R(l, j, k, i) + R(l, k, i, j)));
  return worst;
}

}  // namespace cjl

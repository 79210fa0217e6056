#include "cjl/exp_structure.hpp"

#include <algorithm>
#include <cmath>

#include "cjl/errors.hpp"
#include "cjl/random.hpp"

namespace cjl {

Vec3 ExpStructure::det_gradient(const Vec3& x) const {
  Vec3 g;
  for (int i = 0; i < 3; ++i) {
    Vec3 e = fd_step * Vec3::Unit(i);
    g[i] = (det(x + e) - det(x - e)) / (2 * fd_step);
  }
  return g;
}

Mat3 ExpStructure::det_hessian(const Vec3& x) const {
  const double h = 10 * fd_step;
  Mat3 H;
  double d0 = det(x);
  for (int i = 0; i < 3; ++i) {
    Vec3 ei = h * Vec3::Unit(i);
    H(i, i) = (det(x + ei) - 2 * d0 + det(x - ei)) / (h * h);
    for (int j = i + 1; j < 3; ++j) {
      Vec3 ej = h * Vec3::Unit(j);
      H(i, j) = (det(x + ei + ej) - det(x + ei - ej) - det(x - ei + ej) + det(x - ei - ej)) / (4 * h * h);
      H(j, i) = H(i, j);
    }
  }
  return H;
}

double ExpStructure::radius(const Vec3&) const { throw PreconditionError(id() + ": field has no radius function"); }
Vec3 ExpStructure::radius_gradient(const Vec3&) const {
  throw PreconditionError(id() + ": field has no radius function");
}

std::vector<Vec3> ExpStructure::preimages(const Vec3& target, double radius_bound, std::uint64_t seed,
                                          int starts) const {
  Rng rng(seed);
  std::vector<Vec3> found;
  std::vector<double> residual;
  auto size_of = [&](const Vec3& x) { return has_radius() ? radius(x) : x.cwiseAbs().maxCoeff(); };
  for (int s = 0; s < starts; ++s) {
    // stratified shells
    double rho = radius_bound * std::cbrt((s + rng.uniform()) / starts);
    Vec3 x = rho * rng.unit_vector();
    try {
      if (!in_domain(x)) continue;
      ExpEval e = eval(x);
      double res = (e.value - target).norm();
      bool ok = false;
      for (int it = 0; it < 50 && !ok; ++it) {
        Eigen::FullPivLU<Mat3> lu(e.Dc);
        if (!lu.isInvertible()) break;
        Vec3 step = lu.solve(e.value - target);
        double lam = 1.0;
        bool accepted = false;
        for (int k = 0; k < 12; ++k, lam *= 0.5) {
          Vec3 xn = x - lam * step;
          if (!in_domain(xn)) continue;
          ExpEval en = eval(xn);
          double rn = (en.value - target).norm();
          if (rn < res) {
            x = xn;
            e = en;
            res = rn;
            accepted = true;
            break;
          }
        }
        ok = res < newton_tol * (1.0 + target.norm());
        if (!accepted) break;
      }
      if (!ok || size_of(x) >= radius_bound) continue;
      // Newton stalls in a cloud around fold preimages; keep the best point per cluster.
      bool dup = false;
      for (std::size_t i = 0; i < found.size(); ++i)
        if ((found[i] - x).norm() < 1e-4 * (1.0 + x.norm())) {
          dup = true;
          if (res < residual[i]) {
            found[i] = x;
            residual[i] = res;
          }
        }
      if (!dup) {
        found.push_back(x);
        residual.push_back(res);
      }
    } catch (const Error&) {
      continue;
    }
  }
  std::sort(found.begin(), found.end(), [&](const Vec3& a, const Vec3& b) {
    if (a[0] != b[0]) return a[0] < b[0];
    if (a[1] != b[1]) return a[1] < b[1];
    return a[2] < b[2];
  });
  return found;
}

RiemannianExp::RiemannianExp(ModelPtr model, const Vec3& p, double r_max)
    : model_(std::move(model)), p_(p), r_max_(r_max) {
  model_->require_domain(p_);
}

bool RiemannianExp::in_domain(const Vec3& x) const { return x.allFinite() && x.norm() < r_max_; }

ExpEval RiemannianExp::eval(const Vec3& x) const {
  ExpJet j = exp_jet(*model_, p_, x);
  ExpEval e;
  e.value = j.value;
  e.D = j.differential;
  e.Dc = j.chart_differential;
  e.det = j.det;
  e.svd = svd3(j.differential);
  return e;
}

ExpPtr make_riemannian(ModelPtr model, const Vec3& p, double r_max) {
  return std::make_shared<RiemannianExp>(std::move(model), p, r_max);
}

}  // namespace cjl

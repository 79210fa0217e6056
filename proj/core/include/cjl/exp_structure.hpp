#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cjl/exp_map.hpp"
#include "cjl/metric.hpp"
#include "cjl/normal_forms.hpp"

namespace cjl {

struct ExpEval {
  Vec3 value;
  Mat3 D;   // differential into an orthonormal frame at the image (lengths = |D v|)
  Mat3 Dc;  // differential into image chart coordinates
  double det = 0.0;
  Svd3 svd;  // of D
};

// A map from a 3-dimensional tangent space with the data the singularity machinery needs:
// the exponential map of a chart model at p, or a synthetic normal-form field.
class ExpStructure {
 public:
  virtual ~ExpStructure() = default;
  virtual std::string id() const = 0;
  virtual bool synthetic() const = 0;
  virtual bool in_domain(const Vec3& x) const = 0;
  virtual ExpEval eval(const Vec3& x) const = 0;
  Vec3 image(const Vec3& x) const { return eval(x).value; }
  virtual double det(const Vec3& x) const { return eval(x).det; }
  // Centered differences with fd_step unless overridden by an exact formula.
  virtual Vec3 det_gradient(const Vec3& x) const;
  virtual Mat3 det_hessian(const Vec3& x) const;
  virtual bool has_radius() const = 0;
  virtual double radius(const Vec3& x) const;
  virtual Vec3 radius_gradient(const Vec3& x) const;
  // Radial vector field r (dR(r) = 1 where a radius exists).
  virtual Vec3 radial(const Vec3& x) const = 0;
  virtual V1Result in_v1(const Vec3& x) const = 0;
  // Distinct preimages of an image point with radius (or sup-norm for radius-less fields)
  // below radius_bound. Default: seeded multi-start Newton.
  virtual std::vector<Vec3> preimages(const Vec3& target, double radius_bound, std::uint64_t seed,
                                      int starts = 48) const;
  // Image-side distance for matching points (chart coordinates).
  double image_distance(const Vec3& a, const Vec3& b) const { return (image(a) - image(b)).norm(); }
  // Image length of the straight chord a->b; used for audits.
  double fd_step = 1e-4;
  double newton_tol = 1e-10;
};

using ExpPtr = std::shared_ptr<const ExpStructure>;

class RiemannianExp final : public ExpStructure {
 public:
  RiemannianExp(ModelPtr model, const Vec3& p, double r_max = 10.0);
  std::string id() const override { return model_->id(); }
  bool synthetic() const override { return false; }
  bool in_domain(const Vec3& x) const override;
  ExpEval eval(const Vec3& x) const override;
  bool has_radius() const override { return true; }
  double radius(const Vec3& x) const override { return x.norm(); }
  Vec3 radius_gradient(const Vec3& x) const override { return x.normalized(); }
  Vec3 radial(const Vec3& x) const override { return x.normalized(); }
  V1Result in_v1(const Vec3& x) const override { return in_V1(*model_, p_, x, r_max_); }
  const MetricModel& model() const { return *model_; }
  ModelPtr model_ptr() const { return model_; }
  const Vec3& base() const { return p_; }
  double r_max() const { return r_max_; }

 private:
  ModelPtr model_;
  Vec3 p_;
  double r_max_;
};

struct SyntheticSpec {
  NormalFormClass cls = NormalFormClass::A3;
  // A classes: Gauss-compatible radius R = R0 + l(x1).e(x) + h(x1) with l(0) = sigma (0, cos theta, sin theta).
  double theta = 0.0;
  int sigma = 1;
  double R0 = 2.0;
  double kappa = 0.0;  // A4 only: sextic return coefficient, f = x1^4 - kappa x1^6 + x1^2 x2 + x1 x3
  double x1_extent = 3.0;
  // A2 and D4: declared radial field r0 + P x (no radius function).
  Vec3 r0 = Vec3(0.6, 0.8, 0.0);
  Mat3 P = Mat3::Zero();
  double box = 10.0;  // domain half-width for x2, x3 (and x1 for D4)
};

// Validates chamber membership for D4 (ab > 1 with r0 = sign(a)(a, b, 1) for plus,
// a^2 + b^2 < 1 with r0 = (a, b, 1) for minus); throws PreconditionError otherwise.
Vec3 d4_radial_from_chamber(NormalFormClass cls, double a, double b);

class SyntheticField final : public ExpStructure {
 public:
  explicit SyntheticField(const SyntheticSpec& spec);
  std::string id() const override;
  bool synthetic() const override { return true; }
  bool in_domain(const Vec3& x) const override;
  ExpEval eval(const Vec3& x) const override;
  double det(const Vec3& x) const override;
  Vec3 det_gradient(const Vec3& x) const override;
  Mat3 det_hessian(const Vec3& x) const override;
  bool has_radius() const override { return has_radius_; }
  double radius(const Vec3& x) const override;
  Vec3 radius_gradient(const Vec3& x) const override;
  Vec3 radial(const Vec3& x) const override;
  V1Result in_v1(const Vec3& x) const override;
  std::vector<Vec3> preimages(const Vec3& target, double radius_bound, std::uint64_t seed,
                              int starts = 48) const override;
  const SyntheticSpec& spec() const { return spec_; }
  // Transported unit covector l(x1) and offset h(x1).
  Vec3 ell(double x1) const;
  double offset(double x1) const;

 private:
  struct Table;
  SyntheticSpec spec_;
  bool has_radius_;
  std::vector<double> P_, Q2_, Q3_;  // ascending coefficients in x1
  std::shared_ptr<const Table> table_;
  int v1_sign_ = 1;  // V1 = {v1_sign * det >= 0} for A classes
};

ExpPtr make_riemannian(ModelPtr model, const Vec3& p, double r_max = 10.0);
ExpPtr make_synthetic(const SyntheticSpec& spec);

}  // namespace cjl

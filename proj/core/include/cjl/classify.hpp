#pragma once

#include <map>
#include <string>
#include <vector>

#include "cjl/exp_structure.hpp"

namespace cjl {

enum class SingularityTag { NC, A2, A3_I, A3_II, A4, D4_minus, D4_plus_I, D4_plus_II, UNRESOLVED };
const char* to_string(SingularityTag t);
bool in_unequivocal_class(SingularityTag t);  // NC or A3_I

struct Evidence {
  std::map<std::string, double> values;  // contact orders, thresholds, signs
  std::vector<std::string> notes;
};

struct SingularityClass {
  SingularityTag tag = SingularityTag::UNRESOLVED;
  int corank = 0;
  Vec3 kernel = Vec3::Zero();  // unit, corank 1 only
  Evidence evidence;
};

struct ClassifyOptions {
  double det_tol = 1e-6;    // |det| below this counts as conjugate
  double sigma_rel = 1e-6;  // singular value counted as zero
  double h1 = 1e-3, h2 = 1e-4;
  double tau1 = 1e-3;  // first-order contact of det along the kernel curve (A2)
  double tau2 = 1e-2;  // second order (A3)
  double tau3 = 1e-2;  // third order (A4)
  double gray = 1e-2;  // gray zone [tau * gray, tau] -> UNRESOLVED
  double richardson_rel = 0.1;
  double subtype_step = 1e-2;
  double quad_rank_rel = 1e-3;  // Hessian eigenvalue counted as zero (rotational degeneracy)
};

// Precondition: |det| <= det_tol, else PreconditionError.
SingularityClass classify(const ExpStructure& E, const Vec3& x, const ClassifyOptions& opt = {});
// NC when |det| > det_tol, otherwise classify.
SingularityClass point_class(const ExpStructure& E, const Vec3& x, const ClassifyOptions& opt = {});

int corank_at(const ExpStructure& E, const Vec3& x, double sigma_rel = 1e-6);
// Smallest right singular vector of the differential.
Vec3 kernel_direction(const ExpStructure& E, const Vec3& x);
// Unit normal of the conjugate set {det = 0} (gradient direction).
Vec3 conjugate_normal(const ExpStructure& E, const Vec3& x);
// Newton projection onto {det = 0} along the gradient; throws IntegrationError on failure.
Vec3 project_to_conjugate(const ExpStructure& E, const Vec3& x, double tol = 1e-12, int max_iter = 30);

// Unsigned smooth line field n x (k x r): tangent to C, inside span(k, r), aligned with k at A3.
Vec3 conjugate_line_field(const ExpStructure& E, const Vec3& x);

struct SlackValue {
  Vec3 point;
  double value = 0.0;
};
// |sin| of the angle between D and the kernel. Corank must be 1.
SlackValue slack(const ExpStructure& E, const Vec3& x, const ClassifyOptions& opt = {});

// Coefficient b in v = a k + b r (the radial component, equal to dR(v) for Gauss-compatible fields).
double radial_component(const ExpStructure& E, const Vec3& x, const Vec3& v);

// Descending unit vector of D at a corank-1 point; errors: corank != 1 -> PreconditionError,
// slack < 1e-6 -> PreconditionError("A3-degenerate").
Vec3 distribution_D(const ExpStructure& E, const Vec3& x, const ClassifyOptions& opt = {});

}  // namespace cjl

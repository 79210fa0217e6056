#pragma once

#include <limits>
#include <optional>
#include <vector>

#include "cjl/geodesic.hpp"
#include "cjl/metric.hpp"
#include "cjl/ode.hpp"

namespace cjl {

// Tangent vectors at p are expressed in the Gram-Schmidt frame of g(p) throughout.
struct ExpJet {
  Vec3 base;
  Vec3 arg;
  Vec3 value;
  Mat3 differential;        // frame at p -> frame at value
  Mat3 chart_differential;  // frame at p -> chart components at value
  double det = 0.0;
  Vec3 singular_values;
  Vec3 end_velocity;  // chart velocity of t -> exp(t arg) at t = 1
};

struct ExpOptions {
  double rtol = 1e-10;
  double atol = 1e-13;
  // Fixed-step Fehlberg 7(8) with steps = 8 + ceil(steps_per_length * |x|); 0 selects the
  // adaptive integrator. Fixed steps keep exp smooth in x, which finite differences rely on.
  double steps_per_length = 10.0;
};

// Throws TruncationError carrying the exit parameter in [0,1] when the geodesic leaves the chart.
ExpJet exp_jet(const MetricModel& model, const Vec3& p, const Vec3& x, const ExpOptions& opt = {});
Vec3 exp_point(const MetricModel& model, const Vec3& p, const Vec3& x, double tol = 1e-11);

// Geodesic plus Jacobi fields J(0)=0, J'(0)=frame vectors; state layout (x, v, J cols, J' cols).
using JacobiState = State<24>;
JacobiState jacobi_initial(const MetricModel& model, const Vec3& p, const Vec3& v_chart);
void jacobi_rhs(const MetricModel& model, const JacobiState& y, JacobiState& dy);

struct ConjugateRadius {
  Vec3 direction;
  int k = 0;  // cumulative index of the first conjugate order contributed by this record
  double radius = 0.0;
  int multiplicity = 0;
  Vec3 kernel;  // frame at p; smallest right singular vector
  bool even_contact = false;
  Vec3 singular_values;
};

struct ConjugateSearch {
  std::vector<ConjugateRadius> records;
  bool truncated = false;
  double searched_to = 0.0;
  double lambda(int k) const;  // +inf when not found
};

struct ConjugateOptions {
  double radius_tol = 1e-10;
  double sigma_rel = 1e-6;
  double even_contact_det = 1e-10;
  double grid_fraction = 0.01;
  double rtol = 1e-10;
};

ConjugateSearch conjugate_radii(const MetricModel& model, const Vec3& p, const Vec3& direction, int k_max,
                                double r_max, const ConjugateOptions& opt = {});

enum class V1Verdict { Inside, Outside, Unknown };
struct V1Result {
  V1Verdict verdict = V1Verdict::Unknown;
  bool inside = false;
  double margin = 0.0;
  double lambda1 = std::numeric_limits<double>::infinity();
};
V1Result in_V1(const MetricModel& model, const Vec3& p, const Vec3& x, double r_max = 10.0);

// Length of exp o c for a tangent-space path c (frame coordinates).
double image_length(const MetricModel& model, const Vec3& p, const CurvePath& c);

}  // namespace cjl

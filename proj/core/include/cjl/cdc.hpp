#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cjl/classify.hpp"
#include "cjl/geodesic.hpp"

namespace cjl {

// Line-field data at a conjugate point, computed from one evaluation and one gradient.
struct FlowPoint {
  Vec3 x;
  ExpEval e;
  Vec3 grad;    // gradient of det
  Vec3 normal;  // unit conjugate-surface normal
  Vec3 kernel;
  Vec3 radial;
  Vec3 line;    // unit n x (k x r), unoriented
  double b = 0.0;      // radial coefficient of `line` in span(kernel, radial)
  double slack = 0.0;  // sine between line and kernel
  double c1 = 0.0;     // |grad . kernel| / |grad|
  int corank = 0;
};
FlowPoint flow_point(const ExpStructure& E, const Vec3& x, double sigma_rel = 1e-6);

enum class CdcStop { A3, Boundary, Obstacle, Corank, Unresolved, MaxLength, MaxSteps, Split };
const char* to_string(CdcStop s);

struct CdcSample {
  double s = 0.0;  // source arclength
  double t = 0.0;  // canonical parameter (image length)
  Vec3 x;
  Vec3 dx;  // unit tangent d x / d s
  Vec3 image;
  double radius = 0.0;  // NaN when the field has no radius
  double slack = 0.0;
  SingularityTag tag = SingularityTag::A2;
};

struct CdcOptions {
  double step = 1e-2;  // source arclength
  double slack_floor = 1e-4;
  double max_length = 10.0;  // canonical parameter
  int max_steps = 20000;
  double project_tol = 1e-13;
  ClassifyOptions classify;
};

struct GacdcMeta {
  double cone_amplitude = 0.0;
  double delta_avoid = 0.0;
  double schedule_cap = 0.1;  // c(R, a) = min(cap, a / 4) with a the local slack
  std::uint64_t seed = 0;
  std::size_t obstacles = 0;
  double max_deviation = 0.0;
  double min_obstacle_distance = 0.0;
};

struct CDCurve {
  std::vector<CdcSample> samples;
  bool canonical = true;
  bool perturbed = false;
  SingularityClass start_class, end_class;
  double image_length = 0.0;  // Gauss-Legendre integral of |d exp(x')| over the samples
  CdcStop stop = CdcStop::MaxSteps;
  std::string stop_reason;
  GacdcMeta gacdc;

  const Vec3& start() const { return samples.front().x; }
  const Vec3& end() const { return samples.back().x; }
  double s_end() const { return samples.back().s; }
  double t_end() const { return samples.back().t; }
  // Hermite path in source arclength.
  CurvePath path() const;
  // Radius drop |x(0)| - |x(T)|; NaN without a radius.
  double radius_drop() const;
};

// Integral curve of the descending distribution from an A2 point, with stops at A3 approach
// (slack floor, then snapped onto the A3 point), boundary, corank change or budget.
CDCurve integrate_cdc(const ExpStructure& E, const Vec3& x0, const CdcOptions& opt = {});

// Splits a curve at source arclength s into [start, s] and [s, end].
std::pair<CDCurve, CDCurve> split_cdc(const ExpStructure& E, const CDCurve& c, double s,
                                      const ClassifyOptions& copt = {});

// Image length of a source path under E (8-point Gauss-Legendre on each interval).
double image_length(const ExpStructure& E, const CurvePath& path);

struct GacdcOptions {
  double cone_amplitude = 0.1;
  double delta_avoid = 1e-3;
  std::uint64_t seed = 0;
  CdcOptions cdc;
};

// Re-integrates a CDC inside the cone of the given amplitude around D, steering away from
// point obstacles. Throws Error("no GACDC found") when an obstacle tube cannot be avoided.
CDCurve perturb_to_gacdc(const ExpStructure& E, const CDCurve& cdc, const std::vector<Vec3>& obstacles,
                         const GacdcOptions& opt = {});

}  // namespace cjl

#pragma once

#include <cstdint>
#include <vector>

#include "cjl/exp_map.hpp"
#include "cjl/geodesic.hpp"
#include "cjl/metric.hpp"

namespace cjl {

// Two pointed models and a linear isometry between their tangent spaces, both expressed in
// the Gram-Schmidt frames at the base points.
struct LRelatedPair {
  ModelPtr m1;
  Vec3 p1;
  ModelPtr m2;
  Vec3 p2;
  Mat3 L = Mat3::Identity();

  double orthogonality_residual() const { return (L.transpose() * L - Mat3::Identity()).cwiseAbs().maxCoeff(); }
  // Max over n random x (|x| <= radius) of the difference between the frame components of
  // R1 at exp1(x) and R2 at exp2(Lx), both frames parallel along the radial geodesics.
  double curvature_residual(int n = 20, std::uint64_t seed = 1, double radius = 1.0) const;
  // Throws PreconditionError when either check fails (1e-10 and 1e-5).
  void validate(int n = 20, std::uint64_t seed = 1, double radius = 1.0) const;
};

LRelatedPair identity_pair(ModelPtr model, const Vec3& p);
// Pair (M, p, M, A p, dA) for a linear chart map A that is an isometry of the model.
LRelatedPair isometry_pair(ModelPtr model, const Vec3& p, const Mat3& A);

struct LinearIsometry {
  Mat3 matrix;      // frame at from_point -> frame at to_point
  Vec3 from_point;  // chart of m1
  Vec3 to_point;    // chart of m2
  Mat3 from_frame;  // Gram-Schmidt frame vectors (chart components)
  Mat3 to_frame;
  double orthogonality_residual() const {
    return (matrix.transpose() * matrix - Mat3::Identity()).cwiseAbs().maxCoeff();
  }
};

// Transport back along t -> exp1(t x), apply L, transport forward along t -> exp2(t Lx).
// Throws TruncationError when a geodesic leaves its chart.
LinearIsometry local_isometry_I(const LRelatedPair& pair, const Vec3& x, double tol = 1e-11);

struct DevelopOptions {
  double rtol = 1e-11;
  double atol = 1e-13;
  int substeps = 4;  // develop emits this many samples per interval of u
};

// Development of a chart path u with u(0) = p into T_pM (frame coordinates). The result has
// substeps samples per interval of u, with velocities. Chart exit truncates (truncated/exit_t set).
CurvePath develop(const MetricModel& model, const Vec3& p, const CurvePath& u, const DevelopOptions& opt = {});
// Inverse: the chart path whose development is v (frame coordinates, v(0) = 0).
CurvePath undevelop(const MetricModel& model, const Vec3& p, const CurvePath& v, const DevelopOptions& opt = {});

// Sup over samples and interval midpoints of |a - b|.
double sup_distance(const CurvePath& a, const CurvePath& b);

struct TransportResidual {
  double development = 0.0;  // |v - Dev2^{-1}(L Dev1(u))|_sup
  double derivative = 0.0;   // max_t |I_{Y(t)} u'(t) - v'(t)|, frame norms
  double continuity_constant = 0.0;  // max |I_{Y(t_i+1)} - I_{Y(t_i)}| / |Y(t_i+1) - Y(t_i)|
  std::size_t samples = 0;
};

struct TransportOptions {
  bool check_v1 = true;
  double r_max = 10.0;
  int refine = 8;  // Y is resampled with this many subintervals per input interval
  DevelopOptions develop;
};

// Y: curve in T_{p1} (frame coordinates) with Y(0) = 0. Throws V1ExitError carrying the
// parameter of the first sample outside V1 when check_v1 is set.
TransportResidual verify_L_related_transport(const LRelatedPair& pair, const CurvePath& Y,
                                             const TransportOptions& opt = {});

struct ShrinkRecord {
  int k = 0;
  TransportResidual residual;
};
struct ShrinkResult {
  std::vector<ShrinkRecord> records;
  double extrapolated_development = 0.0;
  double extrapolated_derivative = 0.0;
};
// Residuals for Y_k = (1 - 1/k) Y, k in ks, extrapolated linearly in 1/k to k = infinity
// from the last two.
ShrinkResult shrink_and_limit(const LRelatedPair& pair, const CurvePath& Y, const std::vector<int>& ks = {10, 100, 1000},
                              const TransportOptions& opt = {});

// |I_{x+h w} - I_x| / h maximized over n random unit w.
double isometry_continuity(const LRelatedPair& pair, const Vec3& x, double h = 1e-4, int n = 8,
                           std::uint64_t seed = 1);

// Image of a frame-coordinate path under exp (chart path with chart velocities).
CurvePath exp_image(const MetricModel& model, const Vec3& p, const CurvePath& Y);

}  // namespace cjl

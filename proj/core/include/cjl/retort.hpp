#pragma once

#include <string>

#include "cjl/cdc.hpp"

namespace cjl {

enum class RetortStatus { Complete, Hit, Boundary };
const char* to_string(RetortStatus s);

struct RetortOptions {
  double h0 = 1e-2;
  double h0_join = 1e-4;
  double hmax = 5e-3;
  double corrector_max = 1e-4;  // largest accepted predictor-corrector gap
  double newton_tol = 1e-11;
  int newton_max = 12;
  int max_halvings = 40;
  double hit_h_min = 1e-12;   // step size at which a stalled continuation is examined as a hit
  double hit_sigma_ratio = 1e-2;
  double transversality = 1e-3;  // rad, minimal angle between image velocity and caustic
  ClassifyOptions classify;
};

// beta(s) replies to alpha(alpha_t1 - s) for s in [0, path.t1()].
struct RetortCurve {
  CurvePath path;
  double alpha_t0 = 0.0, alpha_t1 = 0.0;
  int replies_to = -1;
  Vec3 start;
  bool join = false;
  RetortStatus status = RetortStatus::Complete;
  std::string stop_reason;
  double max_residual = 0.0;
  double hit_angle = 0.0;  // only for hits
  SingularityClass tip_class;

  const Vec3& tip() const { return path.x.back(); }
  double span() const { return path.t1(); }
};

// Continuation of exp(beta(s)) = exp(alpha(t1 - s)) from start. A start equal to the end of
// alpha is an A3 join: the continuation leaves on the second preimage branch.
RetortCurve retort_continuation(const ExpStructure& E, const CurvePath& alpha, const Vec3& start,
                                const RetortOptions& opt = {});
RetortCurve retort_continuation(const ExpStructure& E, const CDCurve& alpha, const Vec3& start,
                                const RetortOptions& opt = {});

struct AuditRecord {
  double gain_alpha = 0.0;
  double gain_beta = 0.0;
  double margin = 0.0;
  double image_length_alpha = 0.0;  // of the replied part
  bool ok = false;                  // gain_beta < gain_alpha
};

AuditRecord unbeatability_audit(const ExpStructure& E, const CurvePath& alpha, const RetortCurve& beta);
AuditRecord unbeatability_audit(const ExpStructure& E, const CDCurve& alpha, const RetortCurve& beta);

// Restriction of a sampled path to [a, b] (endpoints interpolated).
CurvePath restrict_path(const CurvePath& p, double a, double b);

}  // namespace cjl

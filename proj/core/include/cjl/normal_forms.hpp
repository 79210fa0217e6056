#pragma once

#include <string>
#include <vector>

#include "cjl/linalg.hpp"

namespace cjl {

enum class NormalFormClass { A2, A3, A4, D4_minus, D4_plus };

const char* to_string(NormalFormClass c);
NormalFormClass normal_form_from_string(const std::string& s);

struct NormalForm {
  NormalFormClass cls;
  int corank;          // number of q variables in the phase function
  std::string branch;  // "-" for A3, empty otherwise
  std::string phase;   // F(q, x~, x) in plain text
  std::string map;     // closed-form e(x)
  int dim = 3;
};

NormalForm normal_form(NormalFormClass c);

// Printed polynomial maps on 3-space (A3 on the "-" branch x1^3 - x1 x2).
Vec3 canonical_map_eval(NormalFormClass c, const Vec3& x);
Mat3 canonical_map_jacobian(NormalFormClass c, const Vec3& x);

struct PhasePoint {
  Vec3 value;
  bool converged = false;
  int iterations = 0;
};
// Solves D_q F(x, q) = 0 for the base coordinates by Newton, with derivatives of F
// taken by forward-mode differentiation (independent of the closed-form map).
PhasePoint phase_derive_point(NormalFormClass c, const Vec3& x);

struct PhaseGrid {
  std::vector<Vec3> nodes;
  std::vector<Vec3> derived;
  std::vector<bool> flagged;  // Newton failed at node
  double max_deviation = 0.0;  // vs canonical_map_eval over unflagged nodes
  int flagged_count = 0;
};
PhaseGrid phase_derive(NormalFormClass c, int per_axis = 10, double half_width = 1.5);

// Determinant of the symmetric k x k matrix filled row-major on its upper triangle from x.
double weinstein_locus(int k, const std::vector<double>& x);

}  // namespace cjl

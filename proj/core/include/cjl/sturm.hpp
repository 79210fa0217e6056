#pragma once

#include <string>
#include <vector>

namespace cjl {

enum class D4Variant { plus, minus };

struct D4RootRecord {
  D4Variant variant;
  double a = 0.0, b = 0.0;
  std::vector<double> coefficients;  // ascending powers of the cubic variable
  int degree = 3;
  bool reduced_degree = false;  // leading coefficient vanished (minus variant, a = 1)
  int sturm_count = 0;          // distinct real roots
  std::vector<double> roots;    // distinct, ascending, refined to 1e-10
  std::string arithmetic;       // "interval" or "exact"
  // plus variant
  double p3 = 0.0;
  bool p3_exact_zero = false;
  int p3_sign = 0;
  // minus variant: one root per interval (-inf,-1/sqrt3), (-1/sqrt3,1/sqrt3), (1/sqrt3,inf)
  std::vector<int> interval_counts;
  bool interval_flags = false;
  double p_at_minus_inv_sqrt3 = 0.0;
  int p_at_minus_inv_sqrt3_sign = 0;
};

// Plus: p(x3) = -x3^3 - b x3^2 + a x3 + 1 and p3 = -9a^2b^2 - 36a^3 - 36b^3 - 162ab + 243.
// Minus: p(x2) = -(a-1)/2 x2^3 + b/2 x2^2 - (a+3)/2 x2 + b/2.
// Inputs are converted exactly to rationals; counts never depend on rounding.
D4RootRecord d4_root_analysis(double a, double b, D4Variant variant);

// Number of distinct real roots of a real polynomial (ascending coefficients) by a Sturm
// sequence; interval arithmetic first, exact rational fallback. Sets *path when non-null.
int sturm_count(const std::vector<double>& coeffs, std::string* path = nullptr);
// Distinct real roots, ascending, each refined to width tol.
std::vector<double> real_roots(const std::vector<double>& coeffs, double tol = 1e-10);

}  // namespace cjl

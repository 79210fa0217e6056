#include "cjl/sturm.hpp"

#include <cmath>
#include <algorithm>
#include <optional>

#include <boost/multiprecision/cpp_int.hpp>
#include <boost/numeric/interval.hpp>

#include "cjl/errors.hpp"

namespace cjl {

namespace {

using Rat = boost::multiprecision::cpp_rational;
using Ival = boost::numeric::interval<
    double, boost::numeric::interval_lib::policies<boost::numeric::interval_lib::save_state<
                                                       boost::numeric::interval_lib::rounded_transc_std<double>>,
                                                   boost::numeric::interval_lib::checking_base<double>>>;

template <class T>
using Poly = std::vector<T>;  // ascending

template <class T>
void trim(Poly<T>& p) {
  while (!p.empty() && p.back() == T(0)) p.pop_back();
}

template <class T>
Poly<T> derivative(const Poly<T>& p) {
  Poly<T> d;
  for (std::size_t i = 1; i < p.size(); ++i) d.push_back(p[i] * T(static_cast<int>(i)));
  trim(d);
  return d;
}

template <class T>
T eval(const Poly<T>& p, const T& x) {
  T acc(0);
  for (std::size_t i = p.size(); i-- > 0;) acc = acc * x + p[i];
  return acc;
}

Poly<Rat> remainder(Poly<Rat> a, const Poly<Rat>& b) {
  while (a.size() >= b.size() && !a.empty()) {
    Rat f = a.back() / b.back();
    std::size_t shift = a.size() - b.size();
    for (std::size_t i = 0; i < b.size(); ++i) a[shift + i] -= f * b[i];
    a.pop_back();
    trim(a);
  }
  return a;
}

std::vector<Poly<Rat>> sturm_exact(const Poly<Rat>& p) {
  std::vector<Poly<Rat>> s{p, derivative(p)};
  while (!s.back().empty()) {
    Poly<Rat> r = remainder(s[s.size() - 2], s.back());
    for (auto& c : r) c = -c;
    if (r.empty()) break;
    s.push_back(r);
  }
  if (s.back().empty()) s.pop_back();
  return s;
}

int sgn(const Rat& r) { return r > 0 ? 1 : (r < 0 ? -1 : 0); }

int changes(const std::vector<int>& signs) {
  int c = 0, last = 0;
  for (int s : signs) {
    if (s == 0) continue;
    if (last != 0 && s != last) ++c;
    last = s;
  }
  return c;
}

int sign_at_infinity(const Poly<Rat>& p, int dir) {
  int s = sgn(p.back());
  if (dir < 0 && (p.size() - 1) % 2 == 1) s = -s;
  return s;
}

int count_exact(const std::vector<Poly<Rat>>& s) {
  std::vector<int> lo, hi;
  for (const auto& q : s) {
    lo.push_back(sign_at_infinity(q, -1));
    hi.push_back(sign_at_infinity(q, +1));
  }
  return changes(lo) - changes(hi);
}

// Sign of q at x = sgn_c / sqrt(3), exactly: reduce with c^2 = 1/3 to A + B c.
int sign_at_inv_sqrt3(const Poly<Rat>& q, int sgn_c) {
  Rat A = 0, B = 0, cpow_even = 1;  // c^(2m) = (1/3)^m
  for (std::size_t i = 0; i < q.size(); ++i) {
    Rat term = q[i] * cpow_even;
    if (i % 2 == 0)
      A += term;
    else {
      B += term * sgn_c;
      cpow_even /= 3;
    }
  }
  int sa = sgn(A), sb = sgn(B);
  if (sb == 0) return sa;
  if (sa == 0 || sa == sb) return sb;
  // A + B/sqrt(3): compare A^2 with B^2/3
  Rat lhs = A * A, rhs = B * B / 3;
  if (lhs == rhs) return 0;
  return lhs > rhs ? sa : sb;
}

// Number of sign changes of the Sturm sequence at x = sgn_c/sqrt(3).
int changes_at_inv_sqrt3(const std::vector<Poly<Rat>>& s, int sgn_c) {
  std::vector<int> v;
  for (const auto& q : s) v.push_back(sign_at_inv_sqrt3(q, sgn_c));
  return changes(v);
}

int changes_at(const std::vector<Poly<Rat>>& s, const Rat& x) {
  std::vector<int> v;
  for (const auto& q : s) v.push_back(sgn(eval(q, x)));
  return changes(v);
}

// Interval fast path; nullopt when any required sign is undetermined.
std::optional<int> count_interval(const Poly<double>& pd) {
  Poly<Ival> p;
  for (double c : pd) p.push_back(Ival(c));
  while (!p.empty() && p.back().lower() == 0.0 && p.back().upper() == 0.0) p.pop_back();
  if (p.empty()) return std::nullopt;
  auto deriv = [](const Poly<Ival>& q) {
    Poly<Ival> d;
    for (std::size_t i = 1; i < q.size(); ++i) d.push_back(q[i] * Ival(static_cast<double>(i)));
    return d;
  };
  auto isign = [](const Ival& v) -> int {
    if (v.lower() > 0) return 1;
    if (v.upper() < 0) return -1;
    return 0;
  };
  std::vector<Poly<Ival>> s{p, deriv(p)};
  while (s.back().size() > 1) {
    Poly<Ival> a = s[s.size() - 2];
    const Poly<Ival>& b = s.back();
    if (isign(b.back()) == 0) return std::nullopt;
    while (a.size() >= b.size()) {
      Ival f = a.back() / b.back();
      std::size_t shift = a.size() - b.size();
      for (std::size_t i = 0; i < b.size(); ++i) a[shift + i] -= f * b[i];
      a.pop_back();
    }
    // A remainder whose leading coefficient straddles zero is ambiguous (possible gcd).
    if (a.empty() || isign(a.back()) == 0) return std::nullopt;
    for (auto& c : a) c = -c;
    s.push_back(a);
  }
  std::vector<int> lo, hi;
  for (const auto& q : s) {
    int sl = isign(q.back());
    if (sl == 0) return std::nullopt;
    hi.push_back(sl);
    lo.push_back((q.size() - 1) % 2 == 1 ? -sl : sl);
  }
  return changes(lo) - changes(hi);
}

Poly<Rat> to_rat(const std::vector<double>& c) {
  Poly<Rat> p;
  for (double v : c) p.push_back(Rat(v));
  trim(p);
  return p;
}

std::vector<double> roots_exact(const Poly<Rat>& p, double tol) {
  std::vector<double> out;
  if (p.size() < 2) return out;
  auto s = sturm_exact(p);
  // Cauchy bound
  Rat bound = 0;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    Rat q = abs(Rat(p[i] / p.back()));
    if (q > bound) bound = q;
  }
  bound += 1;
  // Isolate by bisection on Sturm counts over (lo, hi].
  struct Iv {
    Rat lo, hi;
    int vlo, vhi;
  };
  std::vector<Iv> work{{-bound, bound, changes_at(s, -bound), changes_at(s, bound)}};
  std::vector<Iv> isolated;
  while (!work.empty()) {
    Iv iv = work.back();
    work.pop_back();
    int n = iv.vlo - iv.vhi;
    if (n == 0) continue;
    if (n == 1) {
      isolated.push_back(iv);
      continue;
    }
    Rat mid = (iv.lo + iv.hi) / 2;
    int vm = changes_at(s, mid);
    work.push_back({iv.lo, mid, iv.vlo, vm});
    work.push_back({mid, iv.hi, vm, iv.vhi});
  }
  // Refine each isolated root on the squarefree part, whose sign changes across it.
  Poly<Rat> g = s.back();
  Poly<Rat> sqf = p;
  if (g.size() > 1) {
    // exact division p / g
    Poly<Rat> q(p.size() - g.size() + 1, Rat(0)), r = p;
    for (std::size_t i = q.size(); i-- > 0;) {
      q[i] = r[i + g.size() - 1] / g.back();
      for (std::size_t j = 0; j < g.size(); ++j) r[i + j] -= q[i] * g[j];
    }
    sqf = q;
  }
  Poly<double> sqd;
  for (const auto& c : sqf) sqd.push_back(static_cast<double>(c));
  for (auto& iv : isolated) {
    double lo = static_cast<double>(iv.lo), hi = static_cast<double>(iv.hi);
    // (lo, hi] contains exactly one root; hi may itself be the root.
    if (sgn(eval(sqf, iv.hi)) == 0) {
      out.push_back(hi);
      continue;
    }
    int shi = sgn(eval(sqf, Rat(hi)));
    while (hi - lo > tol) {
      double mid = 0.5 * (lo + hi);
      Ival vm = Ival(0.0);
      for (std::size_t i = sqd.size(); i-- > 0;) vm = vm * Ival(mid) + Ival(sqd[i]);
      int sm;
      if (vm.lower() > 0)
        sm = 1;
      else if (vm.upper() < 0)
        sm = -1;
      else
        sm = sgn(eval(sqf, Rat(mid)));
      if (sm == 0) {
        lo = hi = mid;
        break;
      }
      if (sm == shi)
        hi = mid;
      else
        lo = mid;
    }
    out.push_back(0.5 * (lo + hi));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

int sturm_count(const std::vector<double>& coeffs, std::string* path) {
  if (auto c = count_interval(coeffs)) {
    if (path) *path = "interval";
    return *c;
  }
  if (path) *path = "exact";
  Poly<Rat> p = to_rat(coeffs);
  if (p.size() < 2) return 0;
  return count_exact(sturm_exact(p));
}

std::vector<double> real_roots(const std::vector<double>& coeffs, double tol) { return roots_exact(to_rat(coeffs), tol); }

D4RootRecord d4_root_analysis(double a, double b, D4Variant variant) {
  if (!std::isfinite(a) || !std::isfinite(b)) throw PreconditionError("d4_root_analysis: non-finite input");
  D4RootRecord rec;
  rec.variant = variant;
  rec.a = a;
  rec.b = b;
  Rat A(a), B(b);
  Poly<Rat> p;
  if (variant == D4Variant::plus) {
    p = {Rat(1), A, -B, Rat(-1)};
    Rat p3 = -9 * A * A * B * B - 36 * A * A * A - 36 * B * B * B - 162 * A * B + 243;
    rec.p3 = static_cast<double>(p3);
    rec.p3_sign = sgn(p3);
    rec.p3_exact_zero = rec.p3_sign == 0;
  } else {
    p = {B / 2, -(A + 3) / 2, B / 2, -(A - 1) / 2};
  }
  for (const auto& c : p) rec.coefficients.push_back(static_cast<double>(c));
  trim(p);
  rec.degree = static_cast<int>(p.size()) - 1;
  rec.reduced_degree = rec.degree < 3;
  rec.sturm_count = sturm_count(rec.coefficients, &rec.arithmetic);
  rec.roots = roots_exact(p, 1e-10);
  if (variant == D4Variant::minus) {
    auto s = sturm_exact(p);
    int vlo = 0, vhi = 0;
    {
      std::vector<int> lo, hi;
      for (const auto& q : s) {
        lo.push_back(sign_at_infinity(q, -1));
        hi.push_back(sign_at_infinity(q, +1));
      }
      vlo = changes(lo);
      vhi = changes(hi);
    }
    int vm = changes_at_inv_sqrt3(s, -1), vp = changes_at_inv_sqrt3(s, +1);
    rec.interval_counts = {vlo - vm, vm - vp, vp - vhi};
    int sm = sign_at_inv_sqrt3(p, -1), sp = sign_at_inv_sqrt3(p, +1);
    // Sturm counts on (l, r] would miss the open-interval requirement when a root sits at +-1/sqrt(3).
    rec.interval_flags = rec.interval_counts == std::vector<int>{1, 1, 1} && sm != 0 && sp != 0;
    rec.p_at_minus_inv_sqrt3_sign = sm;
    double c = -1.0 / std::sqrt(3.0), acc = 0.0;
    for (std::size_t i = rec.coefficients.size(); i-- > 0;) acc = acc * c + rec.coefficients[i];
    rec.p_at_minus_inv_sqrt3 = acc;
  }
  return rec;
}

}  // namespace cjl

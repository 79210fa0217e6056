#include "cjl/tree_check.hpp"

#include <array>
#include <algorithm>
#include <cmath>
#include <limits>

#include "cjl/errors.hpp"
#include "cjl/random.hpp"

namespace cjl {

IdentificationTree identification_tree(const AspirantCurve& a) {
  a.validate();
  IdentificationTree t;
  for (const Segment& s : a.segments) t.pieces.push_back(s.path());
  for (std::size_t j = 0; j < a.segments.size(); ++j) {
    const Segment& s = a.segments[j];
    if (s.kind != SegmentKind::RETORT) continue;
    const CurvePath& p = t.pieces[s.replies_to];
    t.pairing.push_back({s.replies_to, static_cast<int>(j), p.t0(), p.t1(), 0.0});
  }
  t.triples = standard_ts(a);
  return t;
}

namespace {

struct Node {
  int piece;
  double q;  // quotient parameter (ACDC parameter) or NaN outside pairs
  int pair;
  Vec3 u, du;
  double w;
};

constexpr std::array<double, 8> kGx{-0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
                                    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGw{0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
                                    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

struct Form {
  // Ambient part: sum of Fourier modes per covector component.
  std::array<std::array<Vec3, 3>, 3> k;
  std::array<std::array<double, 3>, 3> phase, amp;
  // Pair parts: eta_p * sum_n c_pn sin(n pi (q - a0) / (a1 - a0)).
  std::vector<Vec3> eta;
  std::vector<std::array<double, 3>> c;

  Vec3 eval(const Node& n, const std::vector<TreePair>& pairs) const {
    Vec3 w;
    for (int i = 0; i < 3; ++i) {
      double v = 0.0;
      for (int m = 0; m < 3; ++m) v += amp[i][m] * std::sin(k[i][m].dot(n.u) + phase[i][m]);
      w[i] = v;
    }
    if (n.pair >= 0) {
      const TreePair& p = pairs[n.pair];
      double z = (n.q - p.a0) / (p.a1 - p.a0);
      double b = 0.0;
      for (int m = 0; m < 3; ++m) b += c[n.pair][m] * std::sin((m + 1) * M_PI * z);
      w += b * eta[n.pair];
    }
    return w;
  }
};

}  // namespace

TreeCheckResult tree_formed_check(const ExpStructure& E, const IdentificationTree& tree, int n_forms, std::uint64_t seed,
                                  double pair_tol) {
  const int np = static_cast<int>(tree.pieces.size());
  TreeCheckResult res;
  for (std::size_t x = 0; x < tree.pairing.size(); ++x)
    for (std::size_t y = 0; y < tree.pairing.size(); ++y) {
      const TreePair &p = tree.pairing[x], &r = tree.pairing[y];
      if (p.acdc < r.acdc && r.acdc < p.retort && p.retort < r.retort)
        throw StructuralError("tree_formed_check: crossing pairing");
    }
  // Image agreement on every claimed pair.
  for (const TreePair& p : tree.pairing) {
    const CurvePath& A = tree.pieces[p.acdc];
    const CurvePath& B = tree.pieces[p.retort];
    for (std::size_t i = 0; i < B.size(); ++i) {
      double q = p.a1 - B.t[i] - p.offset;
      double m = q < A.t0() - 1e-12 || q > A.t1() + 1e-12
                     ? std::numeric_limits<double>::infinity()
                     : (E.image(B.x[i]) - E.image(A.eval(std::clamp(q, A.t0(), A.t1())))).norm();
      res.max_pair_mismatch = std::max(res.max_pair_mismatch, m);
      if (m > pair_tol)
        throw StructuralError("tree_formed_check: image mismatch " + std::to_string(m) + " on pair (" +
                              std::to_string(p.acdc) + ", " + std::to_string(p.retort) + ")");
    }
  }
  std::vector<int> pair_of(np, -1);
  std::vector<bool> is_retort(np, false);
  for (std::size_t k = 0; k < tree.pairing.size(); ++k) {
    pair_of[tree.pairing[k].acdc] = static_cast<int>(k);
    pair_of[tree.pairing[k].retort] = static_cast<int>(k);
    is_retort[tree.pairing[k].retort] = true;
  }
  std::vector<std::vector<Node>> nodes(np);
  for (int i = 0; i < np; ++i) {
    const CurvePath& P = tree.pieces[i];
    for (std::size_t k = 0; k + 1 < P.size(); ++k) {
      double a = P.t[k], b = P.t[k + 1], hm = 0.5 * (b - a), c = 0.5 * (a + b);
      for (int g = 0; g < 8; ++g) {
        double s = c + hm * kGx[g];
        Vec3 x = P.eval_on(k, s);
        ExpEval e = E.eval(x);
        Node n;
        n.piece = i;
        n.pair = pair_of[i];
        n.q = n.pair < 0 ? 0.0 : (is_retort[i] ? tree.pairing[n.pair].a1 - s - tree.pairing[n.pair].offset : s);
        n.u = e.value;
        n.du = e.Dc * P.velocity_on(k, s);
        n.w = hm * kGw[g];
        nodes[i].push_back(n);
      }
    }
  }
  // Identified intervals, as ranges of whole pieces [first, last].
  std::vector<std::pair<int, int>> ranges;
  if (np > 0 && (E.image(tree.pieces.front().x.front()) - E.image(tree.pieces.back().x.back())).norm() < pair_tol)
    ranges.push_back({0, np - 1});
  for (const TreePair& p : tree.pairing) {
    ranges.push_back({p.acdc, p.retort});
    if (p.retort - p.acdc > 1) ranges.push_back({p.acdc + 1, p.retort - 1});
  }
  res.intervals = static_cast<int>(ranges.size());
  Rng rng(seed);
  for (int f = 0; f < n_forms; ++f) {
    Form form;
    for (int i = 0; i < 3; ++i)
      for (int m = 0; m < 3; ++m) {
        form.k[i][m] = 2.0 * rng.normal3();
        form.phase[i][m] = rng.uniform(0, 2 * M_PI);
        form.amp[i][m] = rng.normal();
      }
    form.eta.resize(tree.pairing.size());
    form.c.resize(tree.pairing.size());
    for (std::size_t p = 0; p < tree.pairing.size(); ++p) {
      form.eta[p] = rng.normal3();
      for (int m = 0; m < 3; ++m) form.c[p][m] = rng.normal();
    }
    std::vector<double> piece_integral(np, 0.0);
    for (int i = 0; i < np; ++i)
      for (const Node& n : nodes[i]) piece_integral[i] += n.w * form.eval(n, tree.pairing).dot(n.du);
    for (auto [lo, hi] : ranges) {
      double s = 0.0;
      for (int i = lo; i <= hi; ++i) s += piece_integral[i];
      res.max_integral = std::max(res.max_integral, std::abs(s));
    }
    ++res.forms;
  }
  return res;
}

TreeCheckResult tree_formed_check(const ExpStructure& E, const AspirantCurve& a, int n_forms, std::uint64_t seed) {
  return tree_formed_check(E, identification_tree(a), n_forms, seed);
}

}  // namespace cjl

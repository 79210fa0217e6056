#pragma once

#include <cstdint>
#include <vector>

#include "cjl/linking.hpp"

namespace cjl {

// Piece `retort` at parameter s is identified with piece `acdc` at a1 - s - offset.
struct TreePair {
  int acdc = -1, retort = -1;
  double a0 = 0.0, a1 = 0.0;
  double offset = 0.0;
};

struct IdentificationTree {
  std::vector<CurvePath> pieces;  // consecutive source pieces of the curve
  std::vector<TreePair> pairing;
  std::vector<StandardT> triples;
};

IdentificationTree identification_tree(const AspirantCurve& a);

struct TreeCheckResult {
  double max_integral = 0.0;
  int forms = 0;
  int intervals = 0;  // identified parameter intervals integrated per form
  double max_pair_mismatch = 0.0;
};

// Integrates random 1-forms that factor through the identification against the image
// velocity over every identified interval; returns the largest absolute value.
// Throws StructuralError if a claimed pair does not share its image within pair_tol, or if the
// pairing is crossing.
TreeCheckResult tree_formed_check(const ExpStructure& E, const IdentificationTree& tree, int n_forms,
                                  std::uint64_t seed, double pair_tol = 1e-6);
TreeCheckResult tree_formed_check(const ExpStructure& E, const AspirantCurve& a, int n_forms, std::uint64_t seed);

}  // namespace cjl

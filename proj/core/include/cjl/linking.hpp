#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cjl/retort.hpp"

namespace cjl {

enum class SegmentKind { ACDC, RETORT };
enum class VertexKind { START, END, A3_JOIN, SPLITTER, HIT, REPRISE };
const char* to_string(SegmentKind k);
const char* to_string(VertexKind k);

struct Segment {
  SegmentKind kind = SegmentKind::ACDC;
  int replies_to = -1;  // RETORT only: index of the ACDC segment it replies to
  CDCurve acdc;         // ACDC only
  RetortCurve retort;   // RETORT only

  Vec3 first() const;
  Vec3 last() const;
  // Source path in the segment's own parameter.
  CurvePath path() const;
};

struct Vertex {
  Vec3 position;
  VertexKind kind = VertexKind::START;
  int segment = 0;  // index of the segment starting at this vertex (END: segment count)
};

struct Tag {
  bool retort = false;
  int index = 0;       // segment index
  int replies_to = -1;
  bool operator==(const Tag&) const = default;
};

// Deletes adjacent (ACDC_j, RETORT(j)) pairs until none is left; returns the residue.
std::vector<Tag> cancellation_reduce(const std::vector<Tag>& tags);

struct AspirantCurve {
  Vec3 start;
  std::vector<Segment> segments;
  std::vector<Vertex> vertices;

  Vec3 tip() const { return segments.empty() ? start : segments.back().last(); }
  std::vector<Tag> tags() const;
  std::vector<Tag> residue() const { return cancellation_reduce(tags()); }
  bool saturated() const;
  // Indices of ACDC segments without a reply, in order.
  std::vector<int> loose() const;
  // Rebuilds the vertex list from the segment sequence.
  void assign_vertices();
  // Throws StructuralError on reply indices, crossing pairings or vertex taxonomy violations.
  void validate() const;
};

struct StandardT {
  int splitter = -1, hit = -1, reprise = -1;  // vertex indices
};
std::vector<StandardT> standard_ts(const AspirantCurve& a);

// |start| - |tip| for saturated aspirants (0 for the single point).
double radius_gain(const ExpStructure& E, const AspirantCurve& a);

struct CensusEntry {
  Vec3 start;
  int preimages = 0;  // below the start radius, excluding the start itself
  std::vector<std::string> classes;
  bool in_v10 = true;
};

struct FCLC {
  AspirantCurve curve;
  bool saturated = true;
  SingularityTag tip_class = SingularityTag::NC;
  double radius_gain = 0.0;
  std::vector<AuditRecord> audits;  // one per (ACDC, RETORT) pair, in retort order
  double margin_sum = 0.0;
  double endpoint_image_gap = 0.0;
};

struct LinkingOptions {
  int budget = 200;
  CdcOptions cdc;
  RetortOptions retort;
  std::vector<Vec3> obstacles;  // descent uses GACDCs avoiding these
  double cone_amplitude = 0.1;
  int descent_retries = 3;
  int census_starts = 16;
};

struct LinkingResult {
  bool success = false;
  std::optional<FCLC> fclc;
  AspirantCurve partial;
  std::string last_rule;
  std::string failure;
  int iterations = 0;
  std::vector<std::string> rules;
  std::vector<CensusEntry> census;
  std::uint64_t seed = 0;
};

LinkingResult run_linking_algorithm(const ExpStructure& E, const Vec3& x0, std::uint64_t seed,
                                    const LinkingOptions& opt = {});

// Validated FCLC record for a saturated aspirant (audits, gain, endpoint gap).
FCLC make_fclc(const ExpStructure& E, const AspirantCurve& a, const ClassifyOptions& copt = {});

}  // namespace cjl

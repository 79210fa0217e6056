#include "cjl/linking.hpp"

#include <cmath>

#include "cjl/errors.hpp"

namespace cjl {

const char* to_string(SegmentKind k) { return k == SegmentKind::ACDC ? "ACDC" : "RETORT"; }

const char* to_string(VertexKind k) {
  switch (k) {
    case VertexKind::START: return "START";
    case VertexKind::END: return "END";
    case VertexKind::A3_JOIN: return "A3_JOIN";
    case VertexKind::SPLITTER: return "SPLITTER";
    case VertexKind::HIT: return "HIT";
    case VertexKind::REPRISE: return "REPRISE";
  }
  return "?";
}

Vec3 Segment::first() const { return kind == SegmentKind::ACDC ? acdc.start() : retort.start; }
Vec3 Segment::last() const { return kind == SegmentKind::ACDC ? acdc.end() : retort.tip(); }
CurvePath Segment::path() const { return kind == SegmentKind::ACDC ? acdc.path() : retort.path; }

std::vector<Tag> cancellation_reduce(const std::vector<Tag>& tags) {
  std::vector<Tag> st;
  for (const Tag& t : tags) {
    if (t.retort && !st.empty() && !st.back().retort && st.back().index == t.replies_to) {
      st.pop_back();
      continue;
    }
    st.push_back(t);
  }
  return st;
}

std::vector<Tag> AspirantCurve::tags() const {
  std::vector<Tag> t;
  for (std::size_t i = 0; i < segments.size(); ++i)
    t.push_back({segments[i].kind == SegmentKind::RETORT, static_cast<int>(i), segments[i].replies_to});
  return t;
}

bool AspirantCurve::saturated() const { return residue().empty(); }

std::vector<int> AspirantCurve::loose() const {
  std::vector<int> out;
  for (const Tag& t : residue())
    if (!t.retort) out.push_back(t.index);
  return out;
}

void AspirantCurve::assign_vertices() {
  vertices.clear();
  vertices.push_back({start, VertexKind::START, 0});
  for (std::size_t i = 1; i < segments.size(); ++i) {
    const Segment& a = segments[i - 1];
    const Segment& b = segments[i];
    VertexKind k;
    if (a.kind == SegmentKind::ACDC)
      k = b.kind == SegmentKind::ACDC ? VertexKind::SPLITTER : VertexKind::A3_JOIN;
    else
      k = b.kind == SegmentKind::ACDC ? VertexKind::HIT : VertexKind::REPRISE;
    vertices.push_back({b.first(), k, static_cast<int>(i)});
  }
  if (!segments.empty()) vertices.push_back({tip(), VertexKind::END, static_cast<int>(segments.size())});
}

void AspirantCurve::validate() const {
  std::vector<int> replied(segments.size(), 0);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const Segment& s = segments[i];
    Vec3 prev = i == 0 ? start : segments[i - 1].last();
    if ((s.first() - prev).norm() > 1e-9) throw StructuralError("aspirant: segment " + std::to_string(i) + " is not attached");
    if (s.kind == SegmentKind::RETORT) {
      int j = s.replies_to;
      if (j < 0 || j >= static_cast<int>(i) || segments[j].kind != SegmentKind::ACDC)
        throw StructuralError("aspirant: retort " + std::to_string(i) + " does not reply to an earlier ACDC");
      if (++replied[j] > 1) throw StructuralError("aspirant: ACDC " + std::to_string(j) + " replied twice");
    }
  }
  for (const Tag& t : residue())
    if (t.retort) throw StructuralError("aspirant: crossing pairing (irreducible retort " + std::to_string(t.index) + ")");
  for (std::size_t v = 1; v + 1 < vertices.size(); ++v) {
    const Vertex& vx = vertices[v];
    const Segment& a = segments[vx.segment - 1];
    const Segment& b = segments[vx.segment];
    bool ok = false;
    switch (vx.kind) {
      case VertexKind::A3_JOIN:
        ok = a.kind == SegmentKind::ACDC && b.kind == SegmentKind::RETORT && b.retort.join &&
             b.replies_to == vx.segment - 1 && a.acdc.stop == CdcStop::A3;
        break;
      case VertexKind::SPLITTER: ok = a.kind == SegmentKind::ACDC && b.kind == SegmentKind::ACDC; break;
      case VertexKind::HIT: ok = a.kind == SegmentKind::RETORT && b.kind == SegmentKind::ACDC; break;
      case VertexKind::REPRISE:
        ok = a.kind == SegmentKind::RETORT && b.kind == SegmentKind::RETORT && a.retort.status == RetortStatus::Complete &&
             a.replies_to != b.replies_to;
        break;
      default: ok = false;
    }
    if (!ok) throw StructuralError(std::string("aspirant: vertex ") + std::to_string(v) + " is not a valid " + to_string(vx.kind));
  }
}

std::vector<StandardT> standard_ts(const AspirantCurve& a) {
  std::vector<StandardT> out;
  auto reply_of = [&](int i) {
    for (std::size_t j = 0; j < a.segments.size(); ++j)
      if (a.segments[j].kind == SegmentKind::RETORT && a.segments[j].replies_to == i) return static_cast<int>(j);
    return -1;
  };
  auto vertex_at = [&](int seg) {
    for (std::size_t v = 0; v < a.vertices.size(); ++v)
      if (a.vertices[v].segment == seg) return static_cast<int>(v);
    return -1;
  };
  for (std::size_t v = 0; v < a.vertices.size(); ++v) {
    if (a.vertices[v].kind != VertexKind::SPLITTER) continue;
    int second = a.vertices[v].segment, first = second - 1;
    int r2 = reply_of(second), r1 = reply_of(first);
    if (r2 < 0 || r1 < 0) continue;
    StandardT t;
    t.splitter = static_cast<int>(v);
    t.hit = vertex_at(r2 + 1);
    t.reprise = vertex_at(r1);
    if (t.hit >= 0 && t.reprise >= 0 && a.vertices[t.hit].kind == VertexKind::HIT &&
        a.vertices[t.reprise].kind == VertexKind::REPRISE)
      out.push_back(t);
  }
  return out;
}

double radius_gain(const ExpStructure& E, const AspirantCurve& a) {
  if (!a.saturated()) throw PreconditionError("radius_gain: aspirant is not saturated");
  if (a.segments.empty()) return 0.0;
  if (!E.has_radius()) throw PreconditionError("radius_gain: field has no radius");
  return E.radius(a.start) - E.radius(a.tip());
}

FCLC make_fclc(const ExpStructure& E, const AspirantCurve& a, const ClassifyOptions& copt) {
  FCLC f;
  f.curve = a;
  f.curve.assign_vertices();
  f.curve.validate();
  f.saturated = a.saturated();
  f.tip_class = point_class(E, a.tip(), copt).tag;
  f.radius_gain = radius_gain(E, a);
  for (const Segment& s : a.segments)
    if (s.kind == SegmentKind::RETORT) {
      f.audits.push_back(unbeatability_audit(E, a.segments[s.replies_to].acdc, s.retort));
      f.margin_sum += f.audits.back().margin;
    }
  f.endpoint_image_gap = (E.image(a.start) - E.image(a.tip())).norm();
  return f;
}

namespace {

struct Run {
  const ExpStructure& E;
  const LinkingOptions& opt;
  std::uint64_t seed;
  LinkingResult& res;
  AspirantCurve& a;

  void fail(const std::string& why) { res.failure = why; }

  // Appends a retort of ACDC j; splits j when the retort stops at a conjugate hit.
  bool add_retort(RetortCurve r, int j) {
    if (r.status == RetortStatus::Boundary) {
      fail("retort left the domain: " + r.stop_reason);
      return false;
    }
    if (r.status == RetortStatus::Hit) {
      if (r.tip_class.tag != SingularityTag::A2) {
        fail(std::string("retort hit a non-A2 point (") + to_string(r.tip_class.tag) + ")");
        return false;
      }
      const CDCurve& c = a.segments[j].acdc;
      double s_split = c.s_end() - r.span();
      if (s_split > c.samples.front().s + 1e-9) {
        auto [first, second] = split_cdc(E, c, s_split, opt.cdc.classify);
        for (auto& s : a.segments)
          if (s.kind == SegmentKind::RETORT && s.replies_to > j) ++s.replies_to;
        a.segments[j].acdc = first;
        Segment sec;
        sec.kind = SegmentKind::ACDC;
        sec.acdc = second;
        a.segments.insert(a.segments.begin() + j + 1, sec);
        ++j;
        r.alpha_t0 = s_split;
      }
    }
    r.replies_to = j;
    Segment s;
    s.kind = SegmentKind::RETORT;
    s.replies_to = j;
    s.retort = std::move(r);
    a.segments.push_back(std::move(s));
    return true;
  }

  bool descent(int iter) {
    Vec3 x = a.tip();
    if (opt.census_starts > 0) {
      CensusEntry ce;
      ce.start = x;
      double bound = E.has_radius() ? E.radius(x) : x.cwiseAbs().maxCoeff();
      for (const Vec3& q : E.preimages(E.image(x), bound, seed + 7919 * static_cast<std::uint64_t>(iter), opt.census_starts)) {
        if ((q - x).norm() < 1e-6) continue;
        ++ce.preimages;
        SingularityTag t = SingularityTag::UNRESOLVED;
        try {
          t = point_class(E, q, opt.cdc.classify).tag;
        } catch (const Error&) {
        }
        ce.classes.push_back(to_string(t));
        if (t != SingularityTag::NC && t != SingularityTag::A2) ce.in_v10 = false;
      }
      res.census.push_back(ce);
    }
    CDCurve c;
    try {
      c = integrate_cdc(E, x, opt.cdc);
    } catch (const Error& e) {
      fail(std::string("descent blocked: ") + e.what());
      return false;
    }
    if (!opt.obstacles.empty()) {
      bool ok = false;
      for (int k = 0; k < opt.descent_retries && !ok; ++k) {
        try {
          GacdcOptions g;
          g.cone_amplitude = opt.cone_amplitude;
          g.seed = seed + 104729 * static_cast<std::uint64_t>(iter) + k;
          g.cdc = opt.cdc;
          c = perturb_to_gacdc(E, c, opt.obstacles, g);
          ok = true;
        } catch (const Error&) {
        }
      }
      if (!ok) {
        fail("descent blocked: no GACDC found");
        return false;
      }
    }
    if (c.stop != CdcStop::A3) {
      fail(std::string("descent blocked: curve stopped (") + to_string(c.stop) + ": " + c.stop_reason + ")");
      return false;
    }
    Segment s;
    s.kind = SegmentKind::ACDC;
    s.acdc = std::move(c);
    a.segments.push_back(std::move(s));
    return true;
  }
};

}  // namespace

LinkingResult run_linking_algorithm(const ExpStructure& E, const Vec3& x0, std::uint64_t seed, const LinkingOptions& opt) {
  V1Result v1 = E.in_v1(x0);
  if (v1.verdict == V1Verdict::Outside && v1.margin < -1e-6) throw PreconditionError("run_linking_algorithm: start is outside V1");
  LinkingResult res;
  res.seed = seed;
  AspirantCurve& a = res.partial;
  a.start = x0;
  Run run{E, opt, seed, res, a};
  const ClassifyOptions& copt = opt.cdc.classify;
  for (res.iterations = 0; res.iterations < opt.budget; ++res.iterations) {
    bool ok = true;
    if (!a.segments.empty() && a.segments.back().kind == SegmentKind::ACDC) {
      res.last_rule = "A3 join";
      const CDCurve& c = a.segments.back().acdc;
      try {
        ok = run.add_retort(retort_continuation(E, c, c.end(), opt.retort), static_cast<int>(a.segments.size()) - 1);
      } catch (const Error& e) {
        run.fail(std::string("A3 join failed: ") + e.what());
        ok = false;
      }
    } else {
      SingularityClass cls;
      try {
        cls = point_class(E, a.tip(), copt);
      } catch (const Error& e) {
        run.fail(std::string("tip classification failed: ") + e.what());
        break;
      }
      bool sat = a.saturated();
      if (in_unequivocal_class(cls.tag) && sat) {
        res.last_rule = "Success";
        res.rules.push_back(res.last_rule);
        res.success = true;
        break;
      }
      if (cls.tag == SingularityTag::NC) {
        res.last_rule = "Reprise";
        int j = a.loose().back();
        try {
          ok = run.add_retort(retort_continuation(E, a.segments[j].acdc, a.tip(), opt.retort), j);
        } catch (const Error& e) {
          run.fail(std::string("reprise failed: ") + e.what());
          ok = false;
        }
      } else if (cls.tag == SingularityTag::A2) {
        res.last_rule = "Descent";
        ok = run.descent(res.iterations);
      } else {
        std::string why = std::string("tip classifies ") + to_string(cls.tag);
        for (const auto& n : cls.evidence.notes) why += "; " + n;
        run.fail(why);
        break;
      }
    }
    res.rules.push_back(res.last_rule);
    if (!ok) break;
  }
  a.assign_vertices();
  if (res.success) {
    res.fclc = make_fclc(E, a, copt);
  } else if (res.failure.empty()) {
    res.failure = "budget exhausted";
  }
  return res;
}

}  // namespace cjl

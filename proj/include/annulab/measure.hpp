#pragma once

// Construction of the Cantor-like measures as exact-rational sparse trees.
//
// The key structural fact the builder exploits: at every generation the
// charged cubes form a disjoint union of "digit-product" families. Each family
// (a Segment below) is described by one digit constraint per generation --
// all children (scheme A spread), the smallest-vertex child (scheme A
// concentrate / isolation), the smallest-face children (border of a B/C step),
// the single maximal-corner child (C3), or the center child (start of the
// central cube path). Every cube of a family carries the same mass, so the
// whole tree is a small tree of segments with one rational mass per
// generation, regardless of how many cubes (possibly 2^100+) a level holds.

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "annulab/cube.hpp"
#include "annulab/errors.hpp"
#include "annulab/rational.hpp"

namespace annulab {

enum class BuildMode { THEOREM2, THEOREM3 };

struct ConstructionParams {
  int d = 2;
  Rat d_lower;
  Rat d_upper;
  Rat delta;
  Rat eta_star;
  Rat c_d;
  long depth_budget = 64;
  BuildMode mode = BuildMode::THEOREM2;

  Rat eta() const { return eta_star * eta_star; }

  static Rat default_c_d(int d) { return Rat(pow2(10 * d + 1)); }

  void validate() const {
    if (d < 1) throw SchemaError("params: d must be >= 1");
    if (depth_budget < 1) throw SchemaError("params: depth budget must be >= 1");
    if (sgn(d_lower) <= 0 || d_lower > d_upper || d_upper > d)
      throw SchemaError("params: need 0 < d_lower <= d_upper <= d");
    if (delta <= 1) throw SchemaError("params: delta must be > 1");
    if (sgn(eta_star) <= 0 || eta_star >= 1) throw SchemaError("params: eta_star must be in (0,1)");
    if (c_d < pow2(10 * d + 1)) throw SchemaError("params: c_d below 2^(10d+1)");
    if (eta_star * c_d <= 1) throw SchemaError("params: eta_star <= 1/c_d");
    if ((1 - eta_star) * c_d < 1) throw SchemaError("params: 1 - eta_star < 1/c_d");
    // eta* 2^{d+1+delta} <= c_d, decided exactly: eta*/c_d <= 2^{-(d+1+delta)}
    if (!rat_le_pow2(Rat(eta_star / c_d), Rat(-(d + 1 + delta))))
      throw SchemaError("params: eta_star 2^{d+1+delta} > c_d");
    if (mode == BuildMode::THEOREM2) {
      if (d_lower <= d - 1) throw SchemaError("params: THEOREM2 requires d_lower > d-1");
      if (d_upper >= d) throw SchemaError("params: THEOREM2 requires d_upper < d");
      Rat want = (d_upper - (d - 1)) / (d_lower - (d - 1));
      if (delta != want)
        throw SchemaError("params: THEOREM2 requires delta = (d_upper-(d-1))/(d_lower-(d-1)) = " +
                          format_rational(want));
    } else {
      if (d < 2) throw SchemaError("params: THEOREM3 requires d >= 2");
      if (d_lower > d - 1) throw SchemaError("params: THEOREM3 requires d_lower <= d-1");
    }
  }
};

// The smallest integer psi(m) with 2^{-(m+1)delta-1} <= 2^{-psi} < 2^{-(m+1)delta},
// i.e. floor((m+1)delta) + 1. Always > m+1 for delta > 1.
inline long psi_of(long m, const Rat& delta) {
  Int f = floor_rat(Rat((m + 1) * delta));
  if (!f.fits_slong_p()) throw DomainError("psi overflow");
  return f.get_si() + 1;
}

inline std::optional<long> psi_prime_feasible(long m, const Rat& d_lower, const Rat& d_upper) {
  // smallest integer p with m*d_upper <= p*d_lower <= m*d_upper + 1
  Rat lo = Rat(m * d_upper) / d_lower;
  Rat hi = Rat(m * d_upper + 1) / d_lower;
  Int c = ceil_rat(lo);
  if (Rat(c) > hi) return std::nullopt;
  if (!c.fits_slong_p()) throw DomainError("psi' overflow");
  return c.get_si();
}

// psi'(m) per the B-scheme definition; errors when no integer satisfies the
// defining inequality (possible for d_lower > 1 at unlucky m; surfaced, never
// silently adjusted).
inline long psi_prime_of(long m, const Rat& d_lower, const Rat& d_upper) {
  auto p = psi_prime_feasible(m, d_lower, d_upper);
  if (!p)
    throw PreconditionError("psi'(m) infeasible: no integer in [m d_upper / d_lower, (m d_upper + 1)/d_lower] at m=" +
                            std::to_string(m));
  return *p;
}

// THEOREM3 adjustment: for d_lower == d_upper the defining inequality gives
// psi'(m) ~ m; the construction uses m + 10 instead.
inline long psi_prime_scheme(long m, const ConstructionParams& p) {
  if (p.mode == BuildMode::THEOREM3 && p.d_lower == p.d_upper) return m + 10;
  return psi_prime_of(m, p.d_lower, p.d_upper);
}

// Largeness condition on m for a B/C step: (1 - 2^{1-(psi'(m)-m)})^{d-1} > eta*.
inline bool largeness_holds(long m, long psi_prime, const ConstructionParams& p) {
  long diff = psi_prime - m;
  if (p.d == 1) return true;  // no face directions; the capture fraction is vacuous
  if (diff < 1) return false;
  Rat base = 1 - pow2(1 - diff);
  if (sgn(base) <= 0) return false;
  return rat_pow(base, static_cast<unsigned long>(p.d - 1)) > p.eta_star;
}

// ---------------------------------------------------------------------------
// Digit constraints
// ---------------------------------------------------------------------------

enum class ConstraintKind : std::uint8_t {
  FULL,    // all 2^d children
  SV,      // the smallest-vertex child (digit 0)
  FACE,    // children staying on the smallest face (first axis bit 0)
  CORNER,  // the face child with maximal vertex coordinate sum
  CENTER,  // the child containing the parent's center (all axis bits 1)
};

inline const char* constraint_name(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::FULL: return "FULL";
    case ConstraintKind::SV: return "SV";
    case ConstraintKind::FACE: return "FACE";
    case ConstraintKind::CORNER: return "CORNER";
    case ConstraintKind::CENTER: return "CENTER";
  }
  return "?";
}

inline ConstraintKind constraint_from_name(const std::string& s) {
  if (s == "FULL") return ConstraintKind::FULL;
  if (s == "SV") return ConstraintKind::SV;
  if (s == "FACE") return ConstraintKind::FACE;
  if (s == "CORNER") return ConstraintKind::CORNER;
  if (s == "CENTER") return ConstraintKind::CENTER;
  throw SchemaError("unknown constraint kind: " + s);
}

inline unsigned long constraint_size(ConstraintKind k, int d) {
  switch (k) {
    case ConstraintKind::FULL: return 1ul << d;
    case ConstraintKind::FACE: return 1ul << (d - 1);
    default: return 1;
  }
}

inline bool constraint_contains(ConstraintKind k, unsigned digit, int d) {
  switch (k) {
    case ConstraintKind::FULL: return digit < (1u << d);
    case ConstraintKind::SV: return digit == 0;
    case ConstraintKind::FACE: return (digit & 1u) == 0 && digit < (1u << d);
    case ConstraintKind::CORNER: return digit == (1u << d) - 2;
    case ConstraintKind::CENTER: return digit == (1u << d) - 1;
  }
  return false;
}

inline std::vector<unsigned> constraint_digits(ConstraintKind k, int d) {
  std::vector<unsigned> out;
  for (unsigned e = 0; e < (1u << d); ++e)
    if (constraint_contains(k, e, d)) out.push_back(e);
  return out;
}

// ---------------------------------------------------------------------------
// Segments and the tree
// ---------------------------------------------------------------------------

enum class SegmentTag : std::uint8_t { NONE, BORDER, B_CENTRAL, C_CENTRAL };

inline const char* tag_name(SegmentTag t) {
  switch (t) {
    case SegmentTag::NONE: return "NONE";
    case SegmentTag::BORDER: return "BORDER";
    case SegmentTag::B_CENTRAL: return "B_CENTRAL";
    case SegmentTag::C_CENTRAL: return "C_CENTRAL";
  }
  return "?";
}

struct Segment {
  int id = 0;
  int parent = -1;
  long birth = 0;  // generation of masses[0]
  std::vector<ConstraintKind> constraints;  // constraints[i]: gen birth+i -> birth+i+1
  std::vector<Rat> masses;                  // masses[i]: per-cube mass at gen birth+i
  SegmentTag tag = SegmentTag::NONE;
  int b_step = -1;    // schedule index of the B/C step that created this segment
  long tag_gen = -1;  // the scale Psi(m) at which the central/border tag applies
  std::vector<long> isolate_gens;
  std::vector<int> children;

  long end() const { return birth + static_cast<long>(constraints.size()); }
  const Rat& mass_at_gen(long g) const { return masses.at(static_cast<std::size_t>(g - birth)); }
};

struct StepRecord {
  enum class Type { A_PHASE, ISOLATE, B_STEP, C_STEP };
  int index = 0;
  Type type = Type::A_PHASE;
  long m_from = 0;
  long m_to = 0;
  long psi = -1;
  long psi_prime = -1;
  long Psi = -1;
  std::vector<std::pair<int, long>> phis;  // (segment id, phi) for A phases

  static const char* type_name(Type t) {
    switch (t) {
      case Type::A_PHASE: return "A_PHASE";
      case Type::ISOLATE: return "ISOLATE";
      case Type::B_STEP: return "B_STEP";
      case Type::C_STEP: return "C_STEP";
    }
    return "?";
  }
};

struct MeasureTree {
  ConstructionParams params;
  std::vector<Segment> segments;
  std::vector<StepRecord> schedule;
  long max_gen = 0;

  const Segment& seg(int id) const { return segments.at(static_cast<std::size_t>(id)); }

  std::vector<int> leaves() const {
    std::vector<int> out;
    for (const auto& s : segments)
      if (s.children.empty()) out.push_back(s.id);
    return out;
  }

  // The segment providing generation g along the lineage of s is s itself for
  // birth < g <= end (root also provides g = 0). Children take over at end+1.
  bool provides(int s_id, long g) const {
    const Segment& s = seg(s_id);
    if (g > s.end()) return false;
    if (s.parent < 0) return g >= 0;
    return g > s.birth;
  }

  std::vector<int> providers_at(long g) const {
    std::vector<int> out;
    for (const auto& s : segments)
      if (provides(s.id, g)) out.push_back(s.id);
    return out;
  }

  // Constraint governing generation g-1 -> g along the lineage of s (g <= end).
  ConstraintKind constraint_at(int s_id, long g) const {
    const Segment* s = &seg(s_id);
    while (g <= s->birth) {
      if (s->parent < 0) throw DomainError("constraint_at: generation before root");
      s = &seg(s->parent);
    }
    return s->constraints.at(static_cast<std::size_t>(g - s->birth - 1));
  }

  // Number of segment-s cubes at generation g (product of constraint sizes
  // along the lineage).
  Int count_at(int s_id, long g) const {
    Int n = 1;
    for (long i = 1; i <= g; ++i) n *= constraint_size(constraint_at(s_id, i), params.d);
    return n;
  }

  bool matches_prefix(int s_id, const CubeIndex& q) const {
    for (long g = 1; g <= q.gen; ++g)
      if (!constraint_contains(constraint_at(s_id, g), q.digit_at(g), params.d)) return false;
    return true;
  }

  // Number of segment-s cubes at generation g lying inside q.
  Int count_below(int s_id, const CubeIndex& q, long g) const {
    if (g < q.gen || q.gen > seg(s_id).end()) return 0;
    if (!matches_prefix(s_id, q)) return 0;
    Int n = 1;
    for (long i = q.gen + 1; i <= g; ++i) n *= constraint_size(constraint_at(s_id, i), params.d);
    return n;
  }

  Rat total_mass_at(long g) const {
    Rat total = 0;
    for (int s : providers_at(g)) total += seg(s).mass_at_gen(g) * Rat(count_at(s, g));
    return total;
  }

  // mu_{q.gen}(q); exact, any materializable cube.
  Rat cube_mass(const CubeIndex& q) const {
    if (q.gen > max_gen) throw DomainError("cube_mass: generation beyond the built tree");
    Rat total = 0;
    for (int s : providers_at(q.gen))
      if (matches_prefix(s, q)) total += seg(s).mass_at_gen(q.gen);
    return total;
  }

  // Mass at generation `depth` of the part of the support below q.
  Rat subtree_mass(const CubeIndex& q, long depth) const {
    if (depth > max_gen) throw DomainError("subtree_mass: depth beyond the built tree");
    Rat total = 0;
    for (int s : providers_at(depth)) {
      Int cnt = count_below(s, q, depth);
      if (cnt != 0) total += seg(s).mass_at_gen(depth) * Rat(cnt);
    }
    return total;
  }

  std::vector<const StepRecord*> b_steps() const {
    std::vector<const StepRecord*> out;
    for (const auto& r : schedule)
      if (r.type == StepRecord::Type::B_STEP || r.type == StepRecord::Type::C_STEP)
        out.push_back(&r);
    return out;
  }

  // Central segments created by the k-th B/C step (1-based among B/C steps).
  std::vector<int> central_segments_of_step(int b_index) const {
    auto steps = b_steps();
    if (b_index < 1 || b_index > static_cast<int>(steps.size()))
      throw DomainError("central_segments_of_step: no such completed B/C step");
    int rec_index = steps[static_cast<std::size_t>(b_index - 1)]->index;
    std::vector<int> out;
    for (const auto& s : segments)
      if (s.b_step == rec_index &&
          (s.tag == SegmentTag::B_CENTRAL || s.tag == SegmentTag::C_CENTRAL))
        out.push_back(s.id);
    return out;
  }
};

// Materializes a full generation as a sparse cube->mass map. Only usable when
// the cube count at that generation is small; the compressed tree itself has
// no such limit.
inline std::map<CubeIndex, Rat> expand_level(const MeasureTree& tree, long g,
                                             unsigned long limit = 2000000) {
  if (g > tree.max_gen) throw DomainError("expand_level: generation beyond the built tree");
  check_gen(g);
  std::map<CubeIndex, Rat> out;
  for (int sid : tree.providers_at(g)) {
    Int cnt = tree.count_at(sid, g);
    if (cnt > static_cast<long>(limit))
      throw DomainError("expand_level: generation too populous to materialize");
    const Rat& mass = tree.seg(sid).mass_at_gen(g);
    CubeIndex root;
    root.gen = 0;
    root.coords.assign(static_cast<std::size_t>(tree.params.d), 0);
    std::vector<CubeIndex> frontier{root};
    for (long i = 1; i <= g; ++i) {
      auto digits = constraint_digits(tree.constraint_at(sid, i), tree.params.d);
      std::vector<CubeIndex> next;
      next.reserve(frontier.size() * digits.size());
      for (const auto& c : frontier)
        for (unsigned e : digits) next.push_back(c.child(e));
      frontier = std::move(next);
    }
    for (auto& c : frontier) out[c] += mass;
  }
  return out;
}

// Uniformly random cube of segment s at generation g (digit-wise uniform,
// which is uniform over the family since it is a digit product set).
template <typename Rng>
inline CubeIndex sample_segment_cube(const MeasureTree& tree, int sid, long g, Rng& rng) {
  check_gen(g);
  if (g > tree.seg(sid).end()) throw DomainError("sample_segment_cube: generation beyond segment");
  CubeIndex c;
  c.gen = 0;
  c.coords.assign(static_cast<std::size_t>(tree.params.d), 0);
  for (long i = 1; i <= g; ++i) {
    auto digits = constraint_digits(tree.constraint_at(sid, i), tree.params.d);
    c = c.child(digits[rng.below(digits.size())]);
  }
  return c;
}

struct CentralSample {
  Point x;           // a point of a central cube at scale Psi(m)
  CubeIndex cube;    // the central cube containing x
  CubeIndex parent;  // the step-m ancestor Q
  Rat r_x;           // x_1 - (Q's smallest first coordinate), the lemma radius
  long m = 0;        // the generation the B/C step was applied at
};

// Samples a random point of a random central cube of the given B/C step
// (1-based among completed B/C steps). The point is dyadic at resolution
// tag_gen + offset_bits.
template <typename Rng>
inline CentralSample sample_central_point(const MeasureTree& tree, int b_index, Rng& rng,
                                          int offset_bits = 4) {
  auto centrals = tree.central_segments_of_step(b_index);
  int sid = centrals[rng.below(centrals.size())];
  const Segment& s = tree.seg(sid);
  CentralSample out;
  out.m = tree.b_steps()[static_cast<std::size_t>(b_index - 1)]->m_from;
  out.cube = sample_segment_cube(tree, sid, s.tag_gen, rng);
  out.x = smallest_vertex(out.cube);
  for (auto& xi : out.x)
    xi += Rat(Int(static_cast<unsigned long>(rng.below(1ull << offset_bits)))) *
          pow2(-s.tag_gen - offset_bits);
  CubeIndex parent = out.cube;
  while (parent.gen > out.m) parent = parent.parent();
  out.parent = parent;
  out.r_x = out.x.at(0) - smallest_vertex(parent).at(0);
  return out;
}

// Radius window of the center lemma for a B/C step applied at generation m:
// [2^{-m-1}, 1.125 * 2^{-m-1}).
inline std::pair<Rat, Rat> lemcenter_window(long m) {
  Rat lo = pow2(-m - 1);
  return {lo, Rat(lo * make_rat(9, 8))};
}

// ---------------------------------------------------------------------------
// Scheme A branch rule
// ---------------------------------------------------------------------------

enum class ABranch { A2, A3 };

// A2 (spread) iff 2^{-d} mu >= 2^{-(m+1) d_upper}; decided exactly.
inline ABranch scheme_A_branch(const Rat& mass, long m, const ConstructionParams& p) {
  return rat_ge_pow2(mass, Rat(p.d - (m + 1) * p.d_upper)) ? ABranch::A2 : ABranch::A3;
}

// Eq. (*m2*a) band at generation n: 2^{-n d_upper} <= mass < c_d 2^{-n d_upper}.
inline bool in_uniform_band(const Rat& mass, long n, const ConstructionParams& p) {
  return rat_ge_pow2(mass, Rat(-n * p.d_upper)) && rat_lt_pow2(Rat(mass / p.c_d), Rat(-n * p.d_upper));
}

// Eq. (*m2*a-bis) at generation m: 2^{-m d_upper} <= mass < c_d 2^d 2^{-m d_upper}.
inline bool in_bis_band(const Rat& mass, long m, const ConstructionParams& p) {
  return rat_ge_pow2(mass, Rat(-m * p.d_upper)) &&
         rat_lt_pow2(Rat(mass / (p.c_d * pow2(p.d))), Rat(-m * p.d_upper));
}

// Eq. (8) envelope: c_d^{-2} 2^{-n d_upper} <= mass <= c_d^2 2^{-n d_lower}.
inline bool in_envelope(const Rat& mass, long n, const ConstructionParams& p) {
  Rat c2 = p.c_d * p.c_d;
  return rat_ge_pow2(Rat(mass * c2), Rat(-n * p.d_upper)) &&
         rat_le_pow2(Rat(mass / c2), Rat(-n * p.d_lower));
}

// ---------------------------------------------------------------------------
// The construction schedule (Steps 1, 2k, 2k+1)
// ---------------------------------------------------------------------------

namespace detail {

struct PendingA {
  std::vector<ConstraintKind> cons;
  std::vector<Rat> masses;  // one per appended generation
  long phi = -1;
};

// Conditions under which an A phase ending at generation m may close:
// every leaf is in the uniform band, psi'(m) exists, largeness holds, and in
// THEOREM2 mode additionally m < psi'(m) < psi(m).
inline bool a_phase_may_close(long m, const std::vector<Rat>& leaf_masses,
                              const ConstructionParams& p) {
  for (const Rat& mu : leaf_masses)
    if (!in_uniform_band(mu, m, p)) return false;
  long pp;
  if (p.mode == BuildMode::THEOREM3 && p.d_lower == p.d_upper) {
    pp = m + 10;
  } else {
    auto o = psi_prime_feasible(m, p.d_lower, p.d_upper);
    if (!o) return false;
    pp = *o;
  }
  if (pp <= m) return false;
  if (!largeness_holds(m, pp, p)) return false;
  if (p.mode == BuildMode::THEOREM2 && pp >= psi_of(m, p.delta)) return false;
  return true;
}

}  // namespace detail

// Builds the full measure tree per the alternating schedule. Deterministic:
// equal params give identical trees.
inline MeasureTree build_measure(const ConstructionParams& params) {
  params.validate();
  MeasureTree tree;
  tree.params = params;

  Segment root;
  root.id = 0;
  root.birth = 0;
  root.masses = {Rat(1)};
  tree.segments.push_back(root);

  std::vector<int> leaves = {0};
  long m = 0;
  int step_index = 0;

  auto leaf_masses = [&]() {
    std::vector<Rat> v;
    for (int id : leaves) v.push_back(tree.seg(id).masses.back());
    return v;
  };

  // Runs scheme A on all leaves until the closing conditions hold, then
  // isolates. Returns false (leaving the tree untouched) when the budget
  // cannot accommodate the step boundary m' + 1.
  auto a_phase_and_isolate = [&](bool first_step) -> bool {
    std::vector<detail::PendingA> pending(leaves.size());
    std::vector<Rat> cur = leaf_masses();
    long mm = m;
    // phi(Q) is the first generation strictly after the phase start at which
    // the band holds, so at least one scheme-A application happens.
    while (mm == m || !detail::a_phase_may_close(mm, cur, params)) {
      if (mm >= params.depth_budget) {
        if (first_step)
          throw BudgetError("depth budget exhausted during step 1 (A phase reached generation " +
                            std::to_string(mm) + " without closing)");
        return false;
      }
      for (std::size_t i = 0; i < leaves.size(); ++i) {
        ABranch b = scheme_A_branch(cur[i], mm, params);
        if (b == ABranch::A2) {
          pending[i].cons.push_back(ConstraintKind::FULL);
          cur[i] /= pow2(params.d);
        } else {
          pending[i].cons.push_back(ConstraintKind::SV);
        }
        pending[i].masses.push_back(cur[i]);
      }
      ++mm;
      for (std::size_t i = 0; i < leaves.size(); ++i)
        if (pending[i].phi < 0 && in_uniform_band(cur[i], mm, params)) pending[i].phi = mm;
    }
    if (mm + 1 > params.depth_budget) {
      if (first_step) throw BudgetError("depth budget exhausted during step 1 (isolation does not fit)");
      return false;
    }
    // Commit the A phase.
    StepRecord rec;
    rec.index = ++step_index;
    rec.type = StepRecord::Type::A_PHASE;
    rec.m_from = m;
    rec.m_to = mm;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      Segment& s = tree.segments[static_cast<std::size_t>(leaves[i])];
      for (std::size_t j = 0; j < pending[i].cons.size(); ++j) {
        s.constraints.push_back(pending[i].cons[j]);
        s.masses.push_back(pending[i].masses[j]);
      }
      rec.phis.emplace_back(leaves[i], pending[i].phi);
    }
    tree.schedule.push_back(rec);
    // Isolation: every charged cube passes its mass to its smallest-vertex
    // child, making the charged cubes at the new generation pairwise
    // non-adjacent.
    StepRecord iso;
    iso.index = ++step_index;
    iso.type = StepRecord::Type::ISOLATE;
    iso.m_from = mm;
    iso.m_to = mm + 1;
    for (int id : leaves) {
      Segment& s = tree.segments[static_cast<std::size_t>(id)];
      s.constraints.push_back(ConstraintKind::SV);
      s.masses.push_back(s.masses.back());
      s.isolate_gens.push_back(mm + 1);
    }
    tree.schedule.push_back(iso);
    m = mm + 1;
    tree.max_gen = m;
    return true;
  };

  // Applies scheme B (THEOREM2) or C (THEOREM3) to every leaf at generation m.
  // Returns false when Psi(m) exceeds the budget.
  auto bc_step = [&]() -> bool {
    const bool th2 = params.mode == BuildMode::THEOREM2;
    const long psi = psi_of(m, params.delta);
    const long psi_prime = psi_prime_scheme(m, params);
    const long Psi = th2 ? psi : std::max(psi, psi_prime);
    if (Psi > params.depth_budget) return false;
    if (!largeness_holds(m, psi_prime, params))
      throw PreconditionError("largeness condition (1-2^{1-(psi'(m)-m)})^{d-1} > eta* fails at m=" +
                              std::to_string(m));
    for (int id : leaves) {
      if (!in_bis_band(tree.seg(id).masses.back(), m, params))
        throw PreconditionError("mass band 2^{-m du} <= mu < c_d 2^d 2^{-m du} fails at m=" +
                                std::to_string(m) + " for segment " + std::to_string(id));
    }
    // THEOREM3 face behavior: the full-face rule applies when d-1 <= d_upper;
    // the C2/C3 cascade when d_upper < d-1.
    const bool cascade = !th2 && params.d_upper < params.d - 1;

    StepRecord rec;
    rec.index = ++step_index;
    rec.type = th2 ? StepRecord::Type::B_STEP : StepRecord::Type::C_STEP;
    rec.m_from = m;
    rec.m_to = Psi;
    rec.psi = psi;
    rec.psi_prime = psi_prime;
    rec.Psi = Psi;

    std::vector<int> new_leaves;
    for (int id : leaves) {
      const Rat mu = tree.seg(id).masses.back();

      Segment face;
      face.id = static_cast<int>(tree.segments.size());
      face.parent = id;
      face.birth = m;
      face.masses.push_back(mu);
      face.tag = SegmentTag::BORDER;
      face.b_step = rec.index;
      face.tag_gen = Psi;
      {
        Rat f = params.eta_star * mu;
        for (long n = m + 1; n <= psi; ++n) {
          bool spread = true;
          if (cascade)
            spread = rat_ge_pow2(f, Rat((params.d - 1) - n * params.d_upper));
          if (spread) {
            face.constraints.push_back(ConstraintKind::FACE);
            f /= pow2(params.d - 1);
          } else {
            face.constraints.push_back(ConstraintKind::CORNER);
          }
          face.masses.push_back(f);
          if (cascade && !(rat_gt_pow2(Rat(f / params.eta_star), Rat(-n * params.d_upper)) &&
                           rat_lt_pow2(Rat(f / (params.c_d * pow2(params.d))), Rat(-n * params.d_upper))))
            throw ViolationError("cascade mass bound eta* 2^{-n du} < mu < c_d 2^d 2^{-n du} broken at n=" +
                                 std::to_string(n));
        }
        // When psi'(m) > psi(m) the face cubes are refined by scheme A up to Psi.
        for (long n = psi + 1; n <= Psi; ++n) {
          ABranch b = scheme_A_branch(f, n - 1, params);
          if (b == ABranch::A2) {
            face.constraints.push_back(ConstraintKind::FULL);
            f /= pow2(params.d);
          } else {
            face.constraints.push_back(ConstraintKind::SV);
          }
          face.masses.push_back(f);
        }
      }

      Segment central;
      central.id = face.id + 1;
      central.parent = id;
      central.birth = m;
      central.masses.push_back(mu);
      central.tag = th2 ? SegmentTag::B_CENTRAL : SegmentTag::C_CENTRAL;
      central.b_step = rec.index;
      central.tag_gen = Psi;
      {
        Rat z = (1 - params.eta_star) * mu;
        central.constraints.push_back(ConstraintKind::CENTER);
        central.masses.push_back(z);
        for (long n = m + 2; n <= psi_prime; ++n) {
          central.constraints.push_back(ConstraintKind::SV);
          central.masses.push_back(z);
        }
        for (long n = psi_prime + 1; n <= Psi; ++n) {
          ABranch b = scheme_A_branch(z, n - 1, params);
          if (b == ABranch::A2) {
            central.constraints.push_back(ConstraintKind::FULL);
            z /= pow2(params.d);
          } else {
            central.constraints.push_back(ConstraintKind::SV);
          }
          central.masses.push_back(z);
        }
      }

      tree.segments[static_cast<std::size_t>(id)].children = {face.id, central.id};
      tree.segments.push_back(std::move(face));
      tree.segments.push_back(std::move(central));
      new_leaves.push_back(tree.segments[tree.segments.size() - 2].id);
      new_leaves.push_back(tree.segments[tree.segments.size() - 1].id);
    }
    leaves = std::move(new_leaves);
    tree.schedule.push_back(rec);
    m = Psi;
    tree.max_gen = m;
    return true;
  };

  a_phase_and_isolate(/*first_step=*/true);
  while (true) {
    if (!bc_step()) break;
    if (!a_phase_and_isolate(/*first_step=*/false)) break;
  }
  return tree;
}

// ---------------------------------------------------------------------------
// Whole-tree verification (refinement and split identities)
// ---------------------------------------------------------------------------

inline std::vector<std::string> check_refinement(const MeasureTree& tree) {
  std::vector<std::string> violations;
  const int d = tree.params.d;
  // Total mass 1 at every generation.
  for (long g = 0; g <= tree.max_gen; ++g) {
    if (tree.total_mass_at(g) != 1)
      violations.push_back("total mass != 1 at generation " + std::to_string(g));
  }
  for (const auto& s : tree.segments) {
    // Within-segment refinement: a cube at gen g holds exactly its segment
    // children's total.
    std::size_t start = s.parent < 0 ? 0 : 1;
    for (std::size_t i = start; i < s.constraints.size(); ++i) {
      Rat lhs = s.masses[i];
      Rat rhs = Rat(Int(constraint_size(s.constraints[i], d))) * s.masses[i + 1];
      if (lhs != rhs)
        violations.push_back("segment " + std::to_string(s.id) + ": refinement broken at gen " +
                             std::to_string(s.birth + static_cast<long>(i)));
    }
    // Split identity at B/C steps, including the exact eta*/(1-eta*) split.
    if (!s.children.empty()) {
      Rat total = 0;
      for (int c : s.children) {
        const Segment& ch = tree.seg(c);
        Rat part = Rat(Int(constraint_size(ch.constraints.at(0), d))) * ch.masses.at(1);
        total += part;
        Rat expect;
        if (ch.tag == SegmentTag::BORDER) {
          expect = tree.params.eta_star * s.masses.back();
        } else {
          expect = (1 - tree.params.eta_star) * s.masses.back();
        }
        if (part != expect)
          violations.push_back("segment " + std::to_string(s.id) + " child " + std::to_string(c) +
                               ": split mass != " + format_rational(expect));
      }
      if (total != s.masses.back())
        violations.push_back("segment " + std::to_string(s.id) + ": children do not refine parent mass");
    }
  }
  return violations;
}

}  // namespace annulab

#pragma once

// Ball and annulus mass queries against a measure tree at finite depth.
// Queries return exact rational brackets: lower = mass of depth-generation
// cubes certainly inside the region, upper = lower plus everything that might
// intersect it. The traversal descends only through cubes that straddle a
// region boundary; cubes fully inside or outside are resolved through the
// compressed representation without enumeration.

#include <array>
#include <cmath>
#include <optional>
#include <vector>

#include "annulab/cube.hpp"
#include "annulab/measure.hpp"

namespace annulab {

struct MassBracket {
  Rat lower;
  Rat upper;
  long resolved_depth = 0;
};

enum class Verdict { HOLDS, FAILS, UNRESOLVED };

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::HOLDS: return "HOLDS";
    case Verdict::FAILS: return "FAILS";
    case Verdict::UNRESOLVED: return "UNRESOLVED";
  }
  return "?";
}

namespace detail {

// Region: closed ball of radius outer minus closed ball of radius r_in where
// r_in is only known to lie in [inner_lo, inner_hi]; inner absent for balls.
struct RingSpec {
  Point center;
  Rat outer;
  bool has_inner = false;
  Rat inner_lo, inner_hi;
  NormKind norm = NormKind::SUP;
};

// --- Sup-norm fast path -----------------------------------------------------
//
// Every segment's cube family is a product over axes of per-axis digit sets,
// and sup-norm ring membership of an axis-aligned cube separates per axis:
//   cube inside  {a < dist <= r}  iff  (all axes hi_i <= r) and not(all lo_i <= a)
//   cube meets   {a < dist <= r}  iff  (all axes lo_i <= r) and not(all hi_i <= a)
// so exact in/intersect counts reduce to counting admissible binary strings in
// integer intervals, one digit-DP per axis. This is what makes deep annulus
// queries (generation ~40 and beyond) run in microseconds instead of visiting
// 2^24 cubes one by one.

// Allowed bits for one axis of a constraint.
inline void axis_bits(ConstraintKind k, int axis, bool out[2]) {
  switch (k) {
    case ConstraintKind::FULL: out[0] = out[1] = true; return;
    case ConstraintKind::SV: out[0] = true; out[1] = false; return;
    case ConstraintKind::FACE:
      out[0] = true;
      out[1] = axis != 0;
      return;
    case ConstraintKind::CORNER:
      out[0] = axis == 0;
      out[1] = axis != 0;
      return;
    case ConstraintKind::CENTER: out[0] = false; out[1] = true; return;
  }
  out[0] = out[1] = false;
}

// Counts admissible positions k in [lo, hi] (clamped to [0, 2^D)) for one
// axis, where admissibility means bit g of k lies in bits[g].
class AxisCounter {
public:
  AxisCounter(const MeasureTree& tree, int sid, int axis, long depth) : depth_(depth) {
    bits_.resize(static_cast<std::size_t>(depth));
    for (long g = 1; g <= depth; ++g) {
      bool b[2];
      axis_bits(tree.constraint_at(sid, g), axis, b);
      bits_[static_cast<std::size_t>(g - 1)][0] = b[0];
      bits_[static_cast<std::size_t>(g - 1)][1] = b[1];
    }
    suffix_.assign(static_cast<std::size_t>(depth) + 1, Int(1));
    for (long g = depth; g >= 1; --g) {
      int width = (bits_[static_cast<std::size_t>(g - 1)][0] ? 1 : 0) +
                  (bits_[static_cast<std::size_t>(g - 1)][1] ? 1 : 0);
      suffix_[static_cast<std::size_t>(g - 1)] = suffix_[static_cast<std::size_t>(g)] * width;
    }
  }

  Int total() const { return suffix_[0]; }

  // Number of admissible k <= bound.
  Int count_leq(const Int& bound) const {
    if (bound < 0) return 0;
    Int cap = Int(1) << static_cast<unsigned long>(depth_);
    if (bound >= cap) return total();
    Int count = 0;
    for (long g = 1; g <= depth_; ++g) {
      int bit = mpz_tstbit(bound.get_mpz_t(), static_cast<mp_bitcnt_t>(depth_ - g)) ? 1 : 0;
      if (bit == 1 && bits_[static_cast<std::size_t>(g - 1)][0])
        count += suffix_[static_cast<std::size_t>(g)];
      if (!bits_[static_cast<std::size_t>(g - 1)][static_cast<std::size_t>(bit)]) return count;
    }
    return count + 1;  // bound itself is admissible
  }

  Int count_range(const Int& lo, const Int& hi) const {
    if (hi < lo) return 0;
    return count_leq(hi) - (lo <= 0 ? Int(0) : count_leq(lo - 1));
  }

private:
  long depth_;
  std::vector<std::array<bool, 2>> bits_;
  std::vector<Int> suffix_;
};

// Integer index interval of depth-D cubes whose closure lies within axis
// distance `a` of x ("near"), or whose axis offsets stay <= a entirely
// ("within"): used to express hi_i <= a and lo_i <= a as index ranges.
struct AxisInterval {
  Int lo, hi;  // possibly empty (hi < lo)
};

// hi_i <= a: both endpoints within [x-a, x+a]:
//   k >= (x-a) 2^D and k+1 <= (x+a) 2^D.
inline AxisInterval axis_max_within(const Rat& x, const Rat& a, long depth) {
  AxisInterval iv;
  if (sgn(a) < 0) {
    iv.lo = 1;
    iv.hi = 0;
    return iv;
  }
  Rat scale = pow2(depth);
  iv.lo = ceil_rat(Rat((x - a) * scale));
  iv.hi = floor_rat(Rat((x + a) * scale - 1));
  return iv;
}

// lo_i <= a: the closed intervals [k 2^-D, (k+1) 2^-D] and [x-a, x+a] meet:
//   k <= (x+a) 2^D and k+1 >= (x-a) 2^D.
inline AxisInterval axis_min_within(const Rat& x, const Rat& a, long depth) {
  AxisInterval iv;
  if (sgn(a) < 0) {
    iv.lo = 1;
    iv.hi = 0;
    return iv;
  }
  Rat scale = pow2(depth);
  iv.lo = ceil_rat(Rat((x - a) * scale - 1));
  iv.hi = floor_rat(Rat((x + a) * scale));
  return iv;
}

inline AxisInterval axis_intersect(const AxisInterval& a, const AxisInterval& b) {
  AxisInterval iv;
  iv.lo = a.lo > b.lo ? a.lo : b.lo;
  iv.hi = a.hi < b.hi ? a.hi : b.hi;
  return iv;
}

struct SupCounts {
  Rat lower = 0, upper = 0;
};

inline SupCounts sup_ring_counts(const MeasureTree& tree, const RingSpec& ring, long depth) {
  SupCounts out;
  const int d = tree.params.d;
  for (int sid : tree.providers_at(depth)) {
    const Rat& mass = tree.seg(sid).mass_at_gen(depth);
    Int n_in = 1, n_in_sub = 1, n_isect = 1, n_isect_sub = 1;
    for (int axis = 0; axis < d; ++axis) {
      AxisCounter counter(tree, sid, axis, depth);
      const Rat& x = ring.center[static_cast<std::size_t>(axis)];
      AxisInterval hi_le_r = axis_max_within(x, ring.outer, depth);
      AxisInterval lo_le_r = axis_min_within(x, ring.outer, depth);
      n_in *= counter.count_range(hi_le_r.lo, hi_le_r.hi);
      n_isect *= counter.count_range(lo_le_r.lo, lo_le_r.hi);
      if (ring.has_inner) {
        AxisInterval lo_le_ahi = axis_min_within(x, ring.inner_hi, depth);
        AxisInterval hi_le_alo = axis_max_within(x, ring.inner_lo, depth);
        n_in_sub *= counter.count_range(axis_intersect(hi_le_r, lo_le_ahi).lo,
                                        axis_intersect(hi_le_r, lo_le_ahi).hi);
        n_isect_sub *= counter.count_range(axis_intersect(lo_le_r, hi_le_alo).lo,
                                           axis_intersect(lo_le_r, hi_le_alo).hi);
      }
    }
    if (!ring.has_inner) {
      n_in_sub = 0;
      n_isect_sub = 0;
    }
    out.lower += mass * Rat(n_in - n_in_sub);
    out.upper += mass * Rat(n_isect - n_isect_sub);
  }
  return out;
}

enum class RingClass { SURE_IN, SURE_OUT, AMBIGUOUS };

inline RingClass classify(const CubeIndex& q, const RingSpec& ring) {
  auto [lo, hi] = cube_dist_range(q, ring.center, ring.norm);
  const bool euclid = ring.norm == NormKind::EUCLID;
  Rat r_out = euclid ? Rat(ring.outer * ring.outer) : ring.outer;
  if (lo > r_out) return RingClass::SURE_OUT;
  if (!ring.has_inner) return hi <= r_out ? RingClass::SURE_IN : RingClass::AMBIGUOUS;
  if (sgn(ring.inner_hi) < 0) return hi <= r_out ? RingClass::SURE_IN : RingClass::AMBIGUOUS;
  Rat in_lo = euclid ? Rat(ring.inner_lo * ring.inner_lo) : ring.inner_lo;
  Rat in_hi = euclid ? Rat(ring.inner_hi * ring.inner_hi) : ring.inner_hi;
  if (sgn(ring.inner_lo) >= 0 && hi <= in_lo) return RingClass::SURE_OUT;
  if (hi <= r_out && lo > in_hi) return RingClass::SURE_IN;
  return RingClass::AMBIGUOUS;
}

struct Traversal {
  const MeasureTree& tree;
  const RingSpec& ring;
  long depth;
  std::vector<int> providers;
  Rat lower = 0, upper = 0;
  long visited = 0;
  static constexpr long kVisitBudget = 4000000;

  Rat subtree(const CubeIndex& q, const std::vector<int>& pv) const {
    Rat total = 0;
    for (int s : pv) {
      Int cnt = tree.count_below(s, q, depth);
      if (cnt != 0) total += tree.seg(s).mass_at_gen(depth) * Rat(cnt);
    }
    return total;
  }

  void go(const CubeIndex& q, const std::vector<int>& pv) {
    if (pv.empty()) return;
    if (++visited > kVisitBudget)
      throw DomainError("query traversal too large at this depth; use the sup norm or a "
                        "shallower depth");
    RingClass c = classify(q, ring);
    if (c == RingClass::SURE_OUT) return;
    if (c == RingClass::SURE_IN) {
      Rat s = subtree(q, pv);
      lower += s;
      upper += s;
      return;
    }
    if (q.gen == depth) {
      upper += subtree(q, pv);
      return;
    }
    for (unsigned e = 0; e < (1u << tree.params.d); ++e) {
      std::vector<int> next;
      for (int s : pv)
        if (constraint_contains(tree.constraint_at(s, q.gen + 1), e, tree.params.d))
          next.push_back(s);
      if (!next.empty()) go(q.child(e), next);
    }
  }
};

inline MassBracket run_query(const MeasureTree& tree, const RingSpec& ring, long depth) {
  if (depth > tree.max_gen) throw DomainError("query depth exceeds the built tree");
  check_gen(depth);
  if (static_cast<int>(ring.center.size()) != tree.params.d)
    throw DomainError("query point dimension mismatch");
  MassBracket b;
  b.resolved_depth = depth;
  if (ring.norm == NormKind::SUP) {
    SupCounts counts = sup_ring_counts(tree, ring, depth);
    b.lower = counts.lower;
    b.upper = counts.upper;
    return b;
  }
  Traversal t{tree, ring, depth, tree.providers_at(depth)};
  CubeIndex root;
  root.gen = 0;
  root.coords.assign(static_cast<std::size_t>(tree.params.d), 0);
  t.go(root, t.providers);
  b.lower = t.lower;
  b.upper = t.upper;
  return b;
}

}  // namespace detail

inline MassBracket ball_mass(const MeasureTree& tree, const Point& x, const Rat& r, NormKind norm,
                             long depth) {
  if (sgn(r) < 0) throw DomainError("ball_mass: negative radius");
  detail::RingSpec ring;
  ring.center = x;
  ring.outer = r;
  ring.norm = norm;
  return detail::run_query(tree, ring, depth);
}

// Mass bracket of A(x,r,delta) = B(x,r) \ B(x, r - r^delta). For integer
// delta the inner radius is exact; otherwise r^delta is bracketed between two
// rationals at `pow_bits` precision and the bracket is propagated soundly.
inline MassBracket annulus_mass(const MeasureTree& tree, const Point& x, const Rat& r,
                                const Rat& delta, NormKind norm, long depth, long pow_bits = 192) {
  if (sgn(r) <= 0 || r >= 1) throw DomainError("annulus_mass: need 0 < r < 1");
  if (delta < 1) throw DomainError("annulus_mass: need delta >= 1");
  auto [wlo, whi] = bracket_pow(r, delta, pow_bits);
  detail::RingSpec ring;
  ring.center = x;
  ring.outer = r;
  ring.norm = norm;
  // Inner ball of radius <= 0 is at most a point, which carries no mass for
  // these cube measures (mass is uniformly spread inside charged cubes).
  if (sgn(Rat(r - wlo)) > 0) {
    ring.has_inner = true;
    ring.inner_lo = r - whi;
    ring.inner_hi = r - wlo;
  }
  return detail::run_query(tree, ring, depth);
}

// P(x,r,delta,eta): the annulus carries at least eta of the ball's mass.
// Three-valued: HOLDS and FAILS are certified by the exact brackets,
// UNRESOLVED means the finite depth cannot decide.
inline Verdict check_P(const MeasureTree& tree, const Point& x, const Rat& r, const Rat& delta,
                       const Rat& eta, NormKind norm, long depth, long pow_bits = 192) {
  if (sgn(eta) <= 0 || eta > 1) throw DomainError("check_P: eta must be in (0,1]");
  MassBracket ball = ball_mass(tree, x, r, norm, depth);
  MassBracket ann = annulus_mass(tree, x, r, delta, norm, depth, pow_bits);
  if (ann.lower >= eta * ball.upper) return Verdict::HOLDS;
  if (ann.upper < eta * ball.lower) return Verdict::FAILS;
  return Verdict::UNRESOLVED;
}

struct ScanHit {
  Rat radius;
  Verdict verdict;
};

// Evaluates check_P on an equispaced rational grid over [r_lo, r_hi) and
// returns the radii where it certifiably HOLDS. Radii whose ball carries no
// mass at the queried depth are skipped: the predicate is vacuous there.
inline std::vector<Rat> scan_radii_for_P(const MeasureTree& tree, const Point& x, const Rat& delta,
                                         const Rat& eta, NormKind norm, const Rat& r_lo,
                                         const Rat& r_hi, int grid_count, long depth,
                                         std::vector<ScanHit>* all = nullptr) {
  if (!(sgn(r_lo) > 0 && r_lo < r_hi)) throw DomainError("scan_radii_for_P: need 0 < r_lo < r_hi");
  if (grid_count < 1) throw DomainError("scan_radii_for_P: need at least one grid point");
  std::vector<Rat> holds;
  Rat step = (r_hi - r_lo) / grid_count;
  for (int i = 0; i < grid_count; ++i) {
    Rat r = r_lo + step * i;
    if (sgn(ball_mass(tree, x, r, norm, depth).upper) == 0) {
      if (all) all->push_back({r, Verdict::UNRESOLVED});
      continue;
    }
    Verdict v = check_P(tree, x, r, delta, eta, norm, depth);
    if (all) all->push_back({r, v});
    if (v == Verdict::HOLDS) holds.push_back(r);
  }
  return holds;
}

// Size of a concrete grid covering of A(x,r,delta) by balls of radius
// r^delta; an upper bound for the minimal covering number. Floating point
// with conservative (outward) intersection tests.
inline long covering_count(const Point& x, const Rat& r, const Rat& delta, int d, NormKind norm) {
  if (d < 1 || d > 3) throw DomainError("covering_count: d must be 1, 2 or 3");
  if (static_cast<int>(x.size()) != d) throw DomainError("covering_count: point dimension mismatch");
  const double rd = r.get_d();
  const double w = std::pow(rd, delta.get_d());
  if (!(w > 0) || w > rd) throw DomainError("covering_count: degenerate width");

  if (d == 1) {
    // The annulus is at most two intervals of length w; one ball of radius w
    // covers each.
    return (rd - w > 0) ? 2 : 1;
  }

  // Grid spacing such that a ball of radius w centered in a cell covers it.
  double s = w;
  if (norm == NormKind::L1) s = 2.0 * w / d;
  const double pad = 1e-12 * rd;
  const long span = static_cast<long>(std::ceil(2 * (rd + w) / s)) + 2;
  if (d == 3 && span > 3000) throw DomainError("covering_count: grid too large in d=3");
  if (span > 3000000) throw DomainError("covering_count: grid too large");

  auto cell_range = [&](double c, long i) {
    double a = c - rd - w + static_cast<double>(i) * s;
    return std::pair<double, double>{a, a + s};
  };
  auto axis_minmax = [](double lo, double hi, double c) {
    double mn = (c < lo) ? lo - c : (c > hi ? c - hi : 0.0);
    double mx = std::max(std::abs(lo - c), std::abs(hi - c));
    return std::pair<double, double>{mn, mx};
  };
  auto dist_minmax = [&](const std::vector<std::pair<double, double>>& boxes) {
    double mn = 0, mx = 0;
    switch (norm) {
      case NormKind::SUP:
        for (auto& [a, b] : boxes) {
          mn = std::max(mn, a);
          mx = std::max(mx, b);
        }
        break;
      case NormKind::L1:
        for (auto& [a, b] : boxes) {
          mn += a;
          mx += b;
        }
        break;
      case NormKind::EUCLID: {
        double s2n = 0, s2x = 0;
        for (auto& [a, b] : boxes) {
          s2n += a * a;
          s2x += b * b;
        }
        mn = std::sqrt(s2n);
        mx = std::sqrt(s2x);
        break;
      }
    }
    return std::pair<double, double>{mn, mx};
  };

  std::vector<double> c(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) c[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i)].get_d();
  long count = 0;
  std::vector<long> idx(static_cast<std::size_t>(d), 0);
  while (true) {
    std::vector<std::pair<double, double>> boxes(static_cast<std::size_t>(d));
    for (int i = 0; i < d; ++i) {
      auto [a, b] = cell_range(c[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(i)]);
      boxes[static_cast<std::size_t>(i)] =
          axis_minmax(a, b, c[static_cast<std::size_t>(i)]);
    }
    auto [mn, mx] = dist_minmax(boxes);
    if (mn <= rd + pad && mx >= rd - w - pad) ++count;
    int ax = d - 1;
    while (ax >= 0 && ++idx[static_cast<std::size_t>(ax)] == span)
      idx[static_cast<std::size_t>(ax--)] = 0;
    if (ax < 0) break;
  }
  return count;
}

}  // namespace annulab

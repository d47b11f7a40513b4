#pragma once

// Half-open dyadic cubes Q = prod_i [k_i 2^-n, (k_i+1) 2^-n) and their
// geometry against closed balls in the sup, l1 and Euclidean norms. All
// decisions are exact: Euclidean tests compare squared distances as rationals.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <vector>

#include "annulab/errors.hpp"
#include "annulab/rational.hpp"

namespace annulab {

using Point = std::vector<Rat>;

enum class NormKind { SUP, L1, EUCLID };

inline const char* norm_name(NormKind n) {
  switch (n) {
    case NormKind::SUP: return "sup";
    case NormKind::L1: return "l1";
    case NormKind::EUCLID: return "euclid";
  }
  return "?";
}

// Coordinates are stored as 64-bit integers, which caps materialized cubes at
// generation 62. The measure construction itself goes deeper through its
// compressed representation; only point queries materialize cubes.
inline constexpr long kMaxCubeGen = 62;

struct CubeIndex {
  long gen = 0;
  std::vector<std::int64_t> coords;

  int dim() const { return static_cast<int>(coords.size()); }

  CubeIndex child(unsigned digit) const {
    CubeIndex c;
    c.gen = gen + 1;
    c.coords.resize(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i)
      c.coords[i] = 2 * coords[i] + ((digit >> i) & 1u);
    return c;
  }

  CubeIndex parent() const {
    if (gen == 0) throw DomainError("generation-0 cube has no parent");
    CubeIndex p;
    p.gen = gen - 1;
    p.coords.resize(coords.size());
    for (std::size_t i = 0; i < coords.size(); ++i) {
      std::int64_t c = coords[i];
      p.coords[i] = c >= 0 ? c / 2 : -((-c + 1) / 2);
    }
    return p;
  }

  // Digit of this cube at generation g (1 <= g <= gen), as an axis bitmask.
  unsigned digit_at(long g) const {
    unsigned d = 0;
    for (std::size_t i = 0; i < coords.size(); ++i)
      d |= static_cast<unsigned>((coords[i] >> (gen - g)) & 1) << i;
    return d;
  }

  friend bool operator==(const CubeIndex& a, const CubeIndex& b) {
    return a.gen == b.gen && a.coords == b.coords;
  }
  friend auto operator<=>(const CubeIndex& a, const CubeIndex& b) {
    if (auto c = a.gen <=> b.gen; c != 0) return c;
    return a.coords <=> b.coords;
  }
};

enum class Region { INSIDE, OUTSIDE, STRADDLES };

inline bool is_descendant(const CubeIndex& q, const CubeIndex& anc) {
  if (q.gen < anc.gen || q.dim() != anc.dim()) return false;
  const long shift = q.gen - anc.gen;
  for (std::size_t i = 0; i < q.coords.size(); ++i)
    if ((q.coords[i] >> shift) != anc.coords[i]) return false;
  return true;
}

inline void check_gen(long n) {
  if (n < 0 || n > kMaxCubeGen) throw DomainError("generation out of materializable range [0,62]");
}

inline CubeIndex cube_of_point(const Point& x, long n) {
  check_gen(n);
  CubeIndex q;
  q.gen = n;
  q.coords.reserve(x.size());
  Rat two_n = pow2(n);
  for (const Rat& xi : x) {
    if (sgn(xi) < 0 || xi >= 1) throw DomainError("cube_of_point: coordinate outside [0,1)");
    Int k = floor_rat(Rat(xi * two_n));
    q.coords.push_back(k.get_si());
  }
  return q;
}

inline Point smallest_vertex(const CubeIndex& q) {
  Point v;
  v.reserve(q.coords.size());
  Rat scale = pow2(-q.gen);
  for (std::int64_t k : q.coords) v.push_back(Rat(Int(k)) * scale);
  return v;
}

inline Rat vertex_coord_sum(const CubeIndex& q) {
  Int s = 0;
  for (std::int64_t k : q.coords) s += Int(k);
  return Rat(s) * pow2(-q.gen);
}

namespace detail {

// Enumerates relative coordinates j in [0, 2^t)^d accepted by `keep`, in
// lexicographic order.
template <typename Keep>
inline std::vector<CubeIndex> enumerate_subcubes(const CubeIndex& q, long n, Keep keep) {
  if (n <= q.gen) throw DomainError("target generation must exceed the cube's generation");
  check_gen(n);
  const long t = n - q.gen;
  const int d = q.dim();
  if (t * d > 26) throw DomainError("subcube enumeration too large");
  const std::int64_t side = std::int64_t{1} << t;
  std::vector<std::int64_t> j(d, 0);
  std::vector<CubeIndex> out;
  while (true) {
    if (keep(j, side)) {
      CubeIndex c;
      c.gen = n;
      c.coords.resize(d);
      for (int i = 0; i < d; ++i) c.coords[i] = q.coords[i] * side + j[i];
      out.push_back(std::move(c));
    }
    int axis = d - 1;
    while (axis >= 0 && ++j[axis] == side) j[axis--] = 0;
    if (axis < 0) break;
  }
  return out;
}

}  // namespace detail

// Generation-n subcubes of Q having a face-adjacent generation-n neighbor
// outside Q, i.e. those touching Q's boundary.
inline std::vector<CubeIndex> boundary_cubes(const CubeIndex& q, long n) {
  return detail::enumerate_subcubes(q, n, [](const std::vector<std::int64_t>& j, std::int64_t side) {
    for (std::int64_t ji : j)
      if (ji == 0 || ji == side - 1) return true;
    return false;
  });
}

// The smallest face: generation-n subcubes whose first coordinate stays at
// Q's lower edge. Cardinality 2^{(d-1)(n-m)}.
inline std::vector<CubeIndex> smallest_face_cubes(const CubeIndex& q, long n) {
  return detail::enumerate_subcubes(q, n, [](const std::vector<std::int64_t>& j, std::int64_t) {
    return j[0] == 0;
  });
}

namespace detail {

// Per-axis offset range from the center to the cube's closure.
inline void axis_offsets(const CubeIndex& q, const Point& center, std::vector<Rat>& mins,
                         std::vector<Rat>& maxs) {
  const int d = q.dim();
  if (static_cast<int>(center.size()) != d) throw DomainError("dimension mismatch");
  mins.resize(d);
  maxs.resize(d);
  Rat scale = pow2(-q.gen);
  for (int i = 0; i < d; ++i) {
    Rat a = Rat(Int(q.coords[i])) * scale;
    Rat b = a + scale;  // closure includes the upper face
    Rat lo = a - center[i];
    Rat hi = b - center[i];
    // distance range of |x - c| over x in [a,b]
    if (sgn(lo) >= 0) {
      mins[i] = lo;
      maxs[i] = hi;
    } else if (sgn(hi) <= 0) {
      mins[i] = -hi;
      maxs[i] = -lo;
    } else {
      mins[i] = 0;
      maxs[i] = std::max(Rat(-lo), hi);
    }
  }
}

}  // namespace detail

// Exact min/max distance from `center` to the closure of Q. For EUCLID the
// squared distances are returned (still exact rationals).
inline std::pair<Rat, Rat> cube_dist_range(const CubeIndex& q, const Point& center, NormKind norm) {
  std::vector<Rat> mins, maxs;
  detail::axis_offsets(q, center, mins, maxs);
  Rat lo = 0, hi = 0;
  switch (norm) {
    case NormKind::SUP:
      for (auto& v : mins) lo = std::max(lo, v);
      for (auto& v : maxs) hi = std::max(hi, v);
      break;
    case NormKind::L1:
      for (auto& v : mins) lo += v;
      for (auto& v : maxs) hi += v;
      break;
    case NormKind::EUCLID:
      for (auto& v : mins) lo += v * v;
      for (auto& v : maxs) hi += v * v;
      break;
  }
  return {lo, hi};
}

// INSIDE  iff closure(Q) is contained in the closed ball B(center, r);
// OUTSIDE iff closure(Q) does not meet B(center, r).
inline Region cube_ball_relation(const CubeIndex& q, const Point& center, const Rat& r,
                                 NormKind norm) {
  if (sgn(r) < 0) throw DomainError("cube_ball_relation: negative radius");
  auto [lo, hi] = cube_dist_range(q, center, norm);
  if (norm == NormKind::EUCLID) {
    Rat r2 = r * r;
    if (hi <= r2) return Region::INSIDE;
    if (lo > r2) return Region::OUTSIDE;
  } else {
    if (hi <= r) return Region::INSIDE;
    if (lo > r) return Region::OUTSIDE;
  }
  return Region::STRADDLES;
}

}  // namespace annulab

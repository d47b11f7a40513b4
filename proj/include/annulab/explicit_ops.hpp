#pragma once

// Per-cube (sparse map) versions of the subdivision schemes. These are the
// operations as stated, usable whenever the affected cube counts are small;
// the production builder in measure.hpp evolves whole uniform families at
// once. Unit tests cross-check the two against each other.

#include <algorithm>
#include <map>
#include <vector>

#include "annulab/cube.hpp"
#include "annulab/measure.hpp"

namespace annulab {

struct MeasureLevel {
  long gen = 0;
  std::map<CubeIndex, Rat> masses;
};

struct ExplicitTree {
  ConstructionParams params;
  std::vector<MeasureLevel> levels;  // index == generation

  MeasureLevel& level(long g) { return levels.at(static_cast<std::size_t>(g)); }
  const MeasureLevel& level(long g) const { return levels.at(static_cast<std::size_t>(g)); }

  void ensure_level(long g) {
    while (static_cast<long>(levels.size()) <= g) {
      MeasureLevel l;
      l.gen = static_cast<long>(levels.size());
      levels.push_back(std::move(l));
    }
  }

  static ExplicitTree unit_cube(const ConstructionParams& p) {
    ExplicitTree t;
    t.params = p;
    MeasureLevel l0;
    l0.gen = 0;
    CubeIndex unit;
    unit.gen = 0;
    unit.coords.assign(static_cast<std::size_t>(p.d), 0);
    l0.masses[unit] = 1;
    t.levels.push_back(std::move(l0));
    return t;
  }
};

// One scheme-A subdivision of a charged cube: spread to all 2^d children (A2)
// or concentrate on the smallest-vertex child (A3).
inline std::map<CubeIndex, Rat> scheme_A_step(const MeasureLevel& level, const CubeIndex& q,
                                              const ConstructionParams& p) {
  auto it = level.masses.find(q);
  if (it == level.masses.end() || sgn(it->second) == 0)
    throw PreconditionError("scheme_A_step: cube is not charged");
  const Rat& mu = it->second;
  std::map<CubeIndex, Rat> out;
  if (scheme_A_branch(mu, level.gen, p) == ABranch::A2) {
    Rat share = mu / pow2(p.d);
    for (unsigned e = 0; e < (1u << p.d); ++e) out[q.child(e)] = share;
  } else {
    out[q.child(0)] = mu;
  }
  return out;
}

// Iterates scheme A below q until every charged descendant lies in the
// uniform band (*m2*a). Returns the first such generation phi(q).
inline long run_A_until_uniform(ExplicitTree& tree, const CubeIndex& q) {
  const ConstructionParams& p = tree.params;
  if (!in_envelope(tree.level(q.gen).masses.at(q), q.gen, p))
    throw PreconditionError("run_A_until_uniform: cube violates the mass envelope");
  long g = q.gen;
  std::map<CubeIndex, Rat> cur{{q, tree.level(g).masses.at(q)}};
  auto all_in_band = [&](long gen) {
    for (const auto& [c, mu] : cur)
      if (!in_uniform_band(mu, gen, p)) return false;
    return true;
  };
  // phi(q) > q.gen: at least one subdivision happens.
  while (g == q.gen || !all_in_band(g)) {
    if (g >= p.depth_budget)
      throw BudgetError("run_A_until_uniform: budget exhausted at generation " + std::to_string(g) +
                        " with " + std::to_string(cur.size()) + " charged cubes");
    std::map<CubeIndex, Rat> next;
    for (const auto& [c, mu] : cur) {
      (void)mu;
      for (auto& [child, mass] : scheme_A_step({g, cur}, c, p)) next[child] += mass;
    }
    cur = std::move(next);
    ++g;
    tree.ensure_level(g);
    for (const auto& [c, mu] : cur) tree.level(g).masses[c] = mu;
  }
  return g;
}

// Moves every charged cube's mass to its smallest-vertex child. The selected
// children are pairwise non-adjacent.
inline MeasureLevel isolate_step(const MeasureLevel& level) {
  MeasureLevel out;
  out.gen = level.gen + 1;
  for (const auto& [q, mu] : level.masses)
    if (sgn(mu) > 0) out.masses[q.child(0)] = mu;
  return out;
}

struct SchemeBCResult {
  long psi = 0;
  long psi_prime = 0;
  long Psi = 0;
  CubeIndex central_cube;                 // Q~ at generation psi'
  std::vector<CubeIndex> central_cubes;   // central cubes at scale Psi
  std::vector<CubeIndex> face_cubes;      // charged border cubes at scale Psi
};

namespace detail {

inline void bc_preconditions(const ExplicitTree& tree, const CubeIndex& q, long psi_prime) {
  const ConstructionParams& p = tree.params;
  const Rat& mu = tree.level(q.gen).masses.at(q);
  if (!in_bis_band(mu, q.gen, p))
    throw PreconditionError("scheme B/C: mass band 2^{-m du} <= mu < c_d 2^d 2^{-m du} fails at m=" +
                            std::to_string(q.gen));
  if (!largeness_holds(q.gen, psi_prime, p))
    throw PreconditionError("scheme B/C: largeness condition (1-2^{1-(psi'(m)-m)})^{d-1} > eta* fails at m=" +
                            std::to_string(q.gen));
}

// Refines a single cube by scheme A from `from` to generation `to`, writing
// every intermediate level.
inline void refine_A(ExplicitTree& tree, std::map<CubeIndex, Rat> cur, long from, long to) {
  for (long g = from; g < to; ++g) {
    std::map<CubeIndex, Rat> next;
    for (const auto& [c, mu] : cur) {
      if (scheme_A_branch(mu, g, tree.params) == ABranch::A2) {
        Rat share = mu / pow2(tree.params.d);
        for (unsigned e = 0; e < (1u << tree.params.d); ++e) next[c.child(e)] = share;
      } else {
        next[c.child(0)] = mu;
      }
    }
    cur = std::move(next);
    tree.ensure_level(g + 1);
    for (const auto& [c, mu] : cur) tree.level(g + 1).masses[c] += mu;
  }
}

}  // namespace detail

// Scheme B applied to one cube q at generation m: eta* of the mass spread
// uniformly over the smallest face at generation psi(m), the rest on the cube
// containing the center at generation psi'(m), refined by scheme A down to
// psi(m). Intermediate levels are written by aggregation.
inline SchemeBCResult scheme_B_explicit(ExplicitTree& tree, const CubeIndex& q) {
  const ConstructionParams& p = tree.params;
  const long m = q.gen;
  SchemeBCResult res;
  res.psi = psi_of(m, p.delta);
  res.psi_prime = psi_prime_scheme(m, p);
  res.Psi = res.psi;
  detail::bc_preconditions(tree, q, res.psi_prime);
  if (res.psi_prime >= res.psi)
    throw PreconditionError("scheme B requires psi'(m) < psi(m)");
  const Rat mu = tree.level(m).masses.at(q);

  // Border: the smallest face at generation psi(m).
  res.face_cubes = smallest_face_cubes(q, res.psi);
  Rat face_each = p.eta_star * mu / Rat(Int(res.face_cubes.size()));
  tree.ensure_level(res.psi);
  for (const auto& c : res.face_cubes) tree.level(res.psi).masses[c] = face_each;

  // Center: Q~ is the generation-psi' cube containing c_Q (whose smallest
  // vertex c_Q is).
  CubeIndex qt = q.child((1u << p.d) - 1);
  while (qt.gen < res.psi_prime) qt = qt.child(0);
  res.central_cube = qt;
  std::map<CubeIndex, Rat> central{{qt, Rat((1 - p.eta_star) * mu)}};
  tree.ensure_level(res.psi_prime);
  tree.level(res.psi_prime).masses[qt] = central.begin()->second;
  detail::refine_A(tree, central, res.psi_prime, res.psi);

  for (const auto& [c, mass] : tree.level(res.psi).masses) {
    (void)mass;
    if (is_descendant(c, qt)) res.central_cubes.push_back(c);
  }

  // Intermediate levels inside q by aggregation from generation psi(m).
  for (long n = m + 1; n < res.psi; ++n) {
    tree.ensure_level(n);
    // face part
    Rat agg = face_each * Rat(pow2((p.d - 1) * (res.psi - n)));
    for (const auto& c : smallest_face_cubes(q, n)) tree.level(n).masses[c] = agg;
    // central path above Q~
    if (n <= res.psi_prime) {
      CubeIndex anc = qt;
      while (anc.gen > n) anc = anc.parent();
      tree.level(n).masses[anc] = (1 - p.eta_star) * mu;
    }
  }
  return res;
}

// Scheme C applied to one cube at generation m (THEOREM3 mode). When
// d_upper < d-1 the face mass cascades with the C2/C3 rule; the central cube
// is charged at psi'(m) and everything is defined up to Psi(m).
inline SchemeBCResult scheme_C_explicit(ExplicitTree& tree, const CubeIndex& q) {
  const ConstructionParams& p = tree.params;
  const long m = q.gen;
  SchemeBCResult res;
  res.psi = psi_of(m, p.delta);
  res.psi_prime = psi_prime_scheme(m, p);
  res.Psi = std::max(res.psi, res.psi_prime);
  detail::bc_preconditions(tree, q, res.psi_prime);
  const Rat mu = tree.level(m).masses.at(q);
  const bool cascade = p.d_upper < p.d - 1;

  // Face cascade m+1..psi.
  std::map<CubeIndex, Rat> face{{q, Rat(p.eta_star * mu)}};  // virtual mass at gen m
  for (long n = m + 1; n <= res.psi; ++n) {
    std::map<CubeIndex, Rat> next;
    for (const auto& [c, f] : face) {
      bool spread = true;
      if (cascade) spread = rat_ge_pow2(f, Rat((p.d - 1) - n * p.d_upper));
      if (spread) {
        Rat share = f / pow2(p.d - 1);
        for (unsigned e = 0; e < (1u << p.d); e += 2) next[c.child(e)] = share;
      } else {
        next[c.child((1u << p.d) - 2)] = f;  // maximal vertex-coordinate sum on the face
      }
    }
    face = std::move(next);
    tree.ensure_level(n);
    for (const auto& [c, f] : face) tree.level(n).masses[c] += f;
  }
  // Refine face cubes by scheme A when Psi > psi.
  detail::refine_A(tree, face, res.psi, res.Psi);

  // Central cube at psi'.
  CubeIndex qt = q.child((1u << p.d) - 1);
  while (qt.gen < res.psi_prime) qt = qt.child(0);
  res.central_cube = qt;
  tree.ensure_level(res.psi_prime);
  tree.level(res.psi_prime).masses[qt] = (1 - p.eta_star) * mu;
  std::map<CubeIndex, Rat> central{{qt, Rat((1 - p.eta_star) * mu)}};
  detail::refine_A(tree, central, res.psi_prime, res.Psi);
  for (long n = m + 1; n < res.psi_prime; ++n) {
    tree.ensure_level(n);
    CubeIndex anc = qt;
    while (anc.gen > n) anc = anc.parent();
    tree.level(n).masses[anc] += (1 - p.eta_star) * mu;
  }

  tree.ensure_level(res.Psi);
  for (const auto& [c, mass] : tree.level(res.Psi).masses) {
    (void)mass;
    if (!is_descendant(c, q)) continue;
    if (is_descendant(c, qt))
      res.central_cubes.push_back(c);
    else
      res.face_cubes.push_back(c);
  }
  return res;
}

}  // namespace annulab

#pragma once

// Shared test fixtures: canonical parameter sets and hand-assembled toy trees.

#include "annulab/measure.hpp"

namespace annulab::testing {

inline ConstructionParams theorem2_params(long budget = 104) {
  ConstructionParams p;
  p.d = 2;
  p.d_lower = make_rat(6, 5);
  p.d_upper = make_rat(3, 2);
  p.delta = make_rat(5, 2);
  p.eta_star = make_rat(3, 4);
  p.c_d = ConstructionParams::default_c_d(2);
  p.depth_budget = budget;
  p.mode = BuildMode::THEOREM2;
  return p;
}

inline ConstructionParams theorem3_params(long budget = 40) {
  ConstructionParams p;
  p.d = 2;
  p.d_lower = make_rat(4, 5);
  p.d_upper = make_rat(3, 2);
  p.delta = Rat(2);
  p.eta_star = make_rat(3, 4);
  p.c_d = ConstructionParams::default_c_d(2);
  p.depth_budget = budget;
  p.mode = BuildMode::THEOREM3;
  return p;
}

// A tree whose support is carved by the given per-generation constraints,
// with the mass following uniform splits (mass divides by the constraint
// size at each generation). Total mass 1.
inline MeasureTree toy_tree(int d, const std::vector<ConstraintKind>& constraints) {
  MeasureTree t;
  t.params.d = d;
  t.params.d_lower = make_rat(1, 2);
  t.params.d_upper = Rat(d);
  t.params.delta = Rat(2);
  t.params.eta_star = make_rat(1, 2);
  t.params.c_d = ConstructionParams::default_c_d(d);
  t.params.depth_budget = static_cast<long>(constraints.size());
  Segment root;
  root.id = 0;
  root.birth = 0;
  root.masses.push_back(Rat(1));
  Rat m = 1;
  for (ConstraintKind k : constraints) {
    root.constraints.push_back(k);
    m /= Rat(Int(constraint_size(k, d)));
    root.masses.push_back(m);
  }
  t.segments.push_back(std::move(root));
  t.max_gen = static_cast<long>(constraints.size());
  return t;
}

}  // namespace annulab::testing

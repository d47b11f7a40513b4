#pragma once

// Dimension-envelope verification, per-point local dimension traces with
// exact witness extraction, and the finite-intersection products behind the
// independence of the central events. Everything that feeds an assertion is
// decided in exact arithmetic; log2 ratios are bracketed by integer bit
// arithmetic only.

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "annulab/cube.hpp"
#include "annulab/measure.hpp"

namespace annulab {

struct EnvelopeViolation {
  int segment = 0;
  long gen = 0;
  Rat mass;
  std::string side;  // "lower" or "upper"
};

struct EnvelopeReport {
  long checked = 0;
  std::vector<EnvelopeViolation> violations;
  bool ok() const { return violations.empty(); }
};

// Verifies c_d^{-2} 2^{-n du} <= mass <= c_d^2 2^{-n dl} for every charged
// cube at every generation. One check per (segment, generation) suffices:
// all cubes of a segment share the stored mass.
inline EnvelopeReport mass_envelope_check(const MeasureTree& tree) {
  const ConstructionParams& p = tree.params;
  Rat c2 = p.c_d * p.c_d;
  EnvelopeReport report;
  for (const auto& s : tree.segments) {
    std::size_t start = s.parent < 0 ? 0u : 1u;
    for (std::size_t i = start; i < s.masses.size(); ++i) {
      long n = s.birth + static_cast<long>(i);
      if (!tree.provides(s.id, n)) continue;
      ++report.checked;
      const Rat& mass = s.masses[i];
      if (!rat_ge_pow2(Rat(mass * c2), Rat(-n * p.d_upper)))
        report.violations.push_back({s.id, n, mass, "lower"});
      if (!rat_le_pow2(Rat(mass / c2), Rat(-n * p.d_lower)))
        report.violations.push_back({s.id, n, mass, "upper"});
    }
  }
  return report;
}

struct TracePoint {
  long gen = 0;
  Rat mass;
  // log2(mass)/(-gen) bracketed by integer bit arithmetic: ratio in
  // [ratio_lo, ratio_hi], both rationals.
  Rat ratio_lo, ratio_hi;
};

struct DimTrace {
  Point x;
  std::vector<TracePoint> points;
};

// Mass trace of the cubes Q_n(x) for n = 1..depth. x must lie in the support
// at the requested depth.
inline DimTrace trace_point(const MeasureTree& tree, const Point& x, long depth) {
  if (depth > tree.max_gen) throw DomainError("trace_point: depth beyond the built tree");
  check_gen(depth);
  DimTrace trace;
  trace.x = x;
  for (long n = 1; n <= depth; ++n) {
    CubeIndex q = cube_of_point(x, n);
    Rat mass = tree.cube_mass(q);
    if (sgn(mass) == 0)
      throw DomainError("trace_point: point leaves the support at generation " + std::to_string(n));
    // log2(mass) in [fl, fl+1], so the ratio log2(mass)/(-n) is bracketed by
    // the two integer quotients.
    long fl = floor_log2(mass);
    TracePoint tp;
    tp.gen = n;
    tp.mass = mass;
    tp.ratio_lo = Rat(Int(fl + 1)) / Rat(Int(-n));
    tp.ratio_hi = Rat(Int(fl)) / Rat(Int(-n));
    if (tp.ratio_lo > tp.ratio_hi) std::swap(tp.ratio_lo, tp.ratio_hi);
    trace.points.push_back(tp);
  }
  return trace;
}

struct WitnessLists {
  std::vector<long> upper;  // generations in the d_upper band (*m2*a style)
  std::vector<long> lower;  // generations in the d_lower band (eqm' style)
};

// Generations along x's trace where the cube mass lies in the band
// [2^{-j du}, c_d 2^{-j du}) (upper witnesses) or in
// [c_d^{-2} 2^{-j dl}, c_d^2 2^{-j dl}) (lower witnesses).
inline WitnessLists subsequence_witnesses(const MeasureTree& tree, const Point& x,
                                          long depth = -1) {
  if (depth < 0) depth = std::min(tree.max_gen, kMaxCubeGen);
  DimTrace trace = trace_point(tree, x, depth);
  const ConstructionParams& p = tree.params;
  WitnessLists w;
  Rat c2 = p.c_d * p.c_d;
  for (const auto& tp : trace.points) {
    if (in_uniform_band(tp.mass, tp.gen, p)) w.upper.push_back(tp.gen);
    if (rat_ge_pow2(Rat(tp.mass * c2), Rat(-tp.gen * p.d_lower)) &&
        rat_lt_pow2(Rat(tp.mass / c2), Rat(-tp.gen * p.d_lower)))
      w.lower.push_back(tp.gen);
  }
  return w;
}

// Exact mass of the set of points lying in central cubes at every listed
// B/C step (1-based indices among completed B/C steps). Equals (1-eta*)^p.
inline Rat central_event_product(const MeasureTree& tree, const std::set<int>& steps) {
  auto bsteps = tree.b_steps();
  for (int s : steps)
    if (s < 1 || s > static_cast<int>(bsteps.size()))
      throw DomainError("central_event_product: step " + std::to_string(s) +
                        " is not a completed B/C step");
  // Sum the end-generation mass over leaves whose ancestry took the central
  // branch at every listed step.
  Rat total = 0;
  for (int leaf : tree.leaves()) {
    bool selected = true;
    for (int want : steps) {
      int rec_index = bsteps[static_cast<std::size_t>(want - 1)]->index;
      bool central_here = false;
      for (const Segment* s = &tree.seg(leaf); s; s = s->parent >= 0 ? &tree.seg(s->parent) : nullptr) {
        if (s->b_step == rec_index) {
          central_here = s->tag == SegmentTag::B_CENTRAL || s->tag == SegmentTag::C_CENTRAL;
          break;
        }
      }
      if (!central_here) {
        selected = false;
        break;
      }
    }
    if (selected)
      total += tree.seg(leaf).masses.back() * Rat(tree.count_at(leaf, tree.seg(leaf).end()));
  }
  return total;
}

// Complement analog: mass of the points lying in border (non-central) parts
// at every listed step; equals (eta*)^p.
inline Rat border_event_product(const MeasureTree& tree, const std::set<int>& steps) {
  auto bsteps = tree.b_steps();
  for (int s : steps)
    if (s < 1 || s > static_cast<int>(bsteps.size()))
      throw DomainError("border_event_product: step " + std::to_string(s) +
                        " is not a completed B/C step");
  Rat total = 0;
  for (int leaf : tree.leaves()) {
    bool selected = true;
    for (int want : steps) {
      int rec_index = bsteps[static_cast<std::size_t>(want - 1)]->index;
      bool border_here = false;
      for (const Segment* s = &tree.seg(leaf); s; s = s->parent >= 0 ? &tree.seg(s->parent) : nullptr) {
        if (s->b_step == rec_index) {
          border_here = s->tag == SegmentTag::BORDER;
          break;
        }
      }
      if (!border_here) {
        selected = false;
        break;
      }
    }
    if (selected)
      total += tree.seg(leaf).masses.back() * Rat(tree.count_at(leaf, tree.seg(leaf).end()));
  }
  return total;
}

struct DimSummary {
  long depth = 0;
  int points = 0;
  double ratio_min = 0, ratio_max = 0, ratio_median = 0;
};

// Coarse local-dimension statistics of the deepest-generation trace ratios
// over a sample of support points. Display-grade doubles; exact band
// assertions go through subsequence_witnesses instead.
inline DimSummary dim_estimate(const MeasureTree& tree, const std::vector<Point>& sample,
                               long depth) {
  if (sample.empty()) throw DomainError("dim_estimate: empty sample");
  DimSummary s;
  s.depth = depth;
  s.points = static_cast<int>(sample.size());
  std::vector<double> ratios;
  for (const Point& x : sample) {
    DimTrace t = trace_point(tree, x, depth);
    const TracePoint& tp = t.points.back();
    ratios.push_back((tp.ratio_lo.get_d() + tp.ratio_hi.get_d()) / 2);
  }
  std::sort(ratios.begin(), ratios.end());
  s.ratio_min = ratios.front();
  s.ratio_max = ratios.back();
  s.ratio_median = ratios[ratios.size() / 2];
  return s;
}

}  // namespace annulab

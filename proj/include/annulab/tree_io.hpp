#pragma once

// Lossless tree serialization. Rationals are stored as numerator/denominator
// strings, constraints as run-length encoded kind lists; a save/load/save
// round trip is byte-identical. The format stores the compressed segment
// representation, from which any (small enough) generation can be expanded to
// a sparse cube map.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "annulab/measure.hpp"

namespace annulab {

inline constexpr int kTreeFormatVersion = 1;

namespace detail {

inline nlohmann::json params_to_json(const ConstructionParams& p) {
  nlohmann::json j;
  j["mode"] = p.mode == BuildMode::THEOREM2 ? "THEOREM2" : "THEOREM3";
  j["d"] = p.d;
  j["d_lower"] = format_rational(p.d_lower);
  j["d_upper"] = format_rational(p.d_upper);
  j["delta"] = format_rational(p.delta);
  j["eta_star"] = format_rational(p.eta_star);
  j["c_d"] = format_rational(p.c_d);
  j["depth_budget"] = p.depth_budget;
  return j;
}

inline ConstructionParams params_from_json(const nlohmann::json& j) {
  ConstructionParams p;
  std::string mode = j.at("mode").get<std::string>();
  if (mode == "THEOREM2")
    p.mode = BuildMode::THEOREM2;
  else if (mode == "THEOREM3")
    p.mode = BuildMode::THEOREM3;
  else
    throw SchemaError("unknown mode: " + mode);
  p.d = j.at("d").get<int>();
  p.d_lower = parse_rational(j.at("d_lower").get<std::string>());
  p.d_upper = parse_rational(j.at("d_upper").get<std::string>());
  p.delta = parse_rational(j.at("delta").get<std::string>());
  p.eta_star = parse_rational(j.at("eta_star").get<std::string>());
  p.c_d = parse_rational(j.at("c_d").get<std::string>());
  p.depth_budget = j.at("depth_budget").get<long>();
  return p;
}

}  // namespace detail

inline nlohmann::json tree_to_json(const MeasureTree& tree) {
  nlohmann::json j;
  j["format"] = "annulab-tree";
  j["version"] = kTreeFormatVersion;
  j["params"] = detail::params_to_json(tree.params);
  j["max_gen"] = tree.max_gen;

  nlohmann::json sched = nlohmann::json::array();
  for (const auto& r : tree.schedule) {
    nlohmann::json s;
    s["index"] = r.index;
    s["type"] = StepRecord::type_name(r.type);
    s["m_from"] = r.m_from;
    s["m_to"] = r.m_to;
    if (r.psi >= 0) s["psi"] = r.psi;
    if (r.psi_prime >= 0) s["psi_prime"] = r.psi_prime;
    if (r.Psi >= 0) s["Psi"] = r.Psi;
    if (!r.phis.empty()) {
      nlohmann::json phis = nlohmann::json::array();
      for (auto& [seg, phi] : r.phis) phis.push_back({{"segment", seg}, {"phi", phi}});
      s["phis"] = phis;
    }
    sched.push_back(s);
  }
  j["schedule"] = sched;

  nlohmann::json segs = nlohmann::json::array();
  for (const auto& s : tree.segments) {
    nlohmann::json js;
    js["id"] = s.id;
    js["parent"] = s.parent;
    js["birth"] = s.birth;
    js["tag"] = tag_name(s.tag);
    js["b_step"] = s.b_step;
    js["tag_gen"] = s.tag_gen;
    // run-length encoded constraints
    nlohmann::json rle = nlohmann::json::array();
    std::size_t i = 0;
    while (i < s.constraints.size()) {
      std::size_t jx = i;
      while (jx < s.constraints.size() && s.constraints[jx] == s.constraints[i]) ++jx;
      rle.push_back({constraint_name(s.constraints[i]), jx - i});
      i = jx;
    }
    js["constraints"] = rle;
    nlohmann::json masses = nlohmann::json::array();
    for (const auto& m : s.masses) masses.push_back(format_rational(m));
    js["masses"] = masses;
    js["isolate_gens"] = s.isolate_gens;
    js["children"] = s.children;
    segs.push_back(js);
  }
  j["segments"] = segs;
  return j;
}

inline MeasureTree tree_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "annulab-tree") throw SchemaError("not an annulab-tree document");
  if (j.at("version").get<int>() != kTreeFormatVersion)
    throw SchemaError("unsupported tree format version");
  MeasureTree tree;
  tree.params = detail::params_from_json(j.at("params"));
  tree.params.validate();
  tree.max_gen = j.at("max_gen").get<long>();

  for (const auto& s : j.at("schedule")) {
    StepRecord r;
    r.index = s.at("index").get<int>();
    std::string t = s.at("type").get<std::string>();
    if (t == "A_PHASE")
      r.type = StepRecord::Type::A_PHASE;
    else if (t == "ISOLATE")
      r.type = StepRecord::Type::ISOLATE;
    else if (t == "B_STEP")
      r.type = StepRecord::Type::B_STEP;
    else if (t == "C_STEP")
      r.type = StepRecord::Type::C_STEP;
    else
      throw SchemaError("unknown step type: " + t);
    r.m_from = s.at("m_from").get<long>();
    r.m_to = s.at("m_to").get<long>();
    r.psi = s.value("psi", -1l);
    r.psi_prime = s.value("psi_prime", -1l);
    r.Psi = s.value("Psi", -1l);
    if (s.contains("phis"))
      for (const auto& ph : s.at("phis"))
        r.phis.emplace_back(ph.at("segment").get<int>(), ph.at("phi").get<long>());
    tree.schedule.push_back(std::move(r));
  }

  for (const auto& js : j.at("segments")) {
    Segment s;
    s.id = js.at("id").get<int>();
    s.parent = js.at("parent").get<int>();
    s.birth = js.at("birth").get<long>();
    s.tag = [&] {
      std::string t = js.at("tag").get<std::string>();
      if (t == "NONE") return SegmentTag::NONE;
      if (t == "BORDER") return SegmentTag::BORDER;
      if (t == "B_CENTRAL") return SegmentTag::B_CENTRAL;
      if (t == "C_CENTRAL") return SegmentTag::C_CENTRAL;
      throw SchemaError("unknown segment tag: " + t);
    }();
    s.b_step = js.at("b_step").get<int>();
    s.tag_gen = js.at("tag_gen").get<long>();
    for (const auto& run : js.at("constraints")) {
      ConstraintKind k = constraint_from_name(run.at(0).get<std::string>());
      auto count = run.at(1).get<std::size_t>();
      for (std::size_t i = 0; i < count; ++i) s.constraints.push_back(k);
    }
    for (const auto& m : js.at("masses")) s.masses.push_back(parse_rational(m.get<std::string>()));
    if (s.masses.size() != s.constraints.size() + 1)
      throw SchemaError("segment " + std::to_string(s.id) + ": masses/constraints length mismatch");
    for (const auto& g : js.at("isolate_gens")) s.isolate_gens.push_back(g.get<long>());
    for (const auto& c : js.at("children")) s.children.push_back(c.get<int>());
    if (s.id != static_cast<int>(tree.segments.size()))
      throw SchemaError("segments must be stored in id order");
    tree.segments.push_back(std::move(s));
  }
  if (tree.segments.empty()) throw SchemaError("tree without segments");
  return tree;
}

inline std::string tree_to_string(const MeasureTree& tree) { return tree_to_json(tree).dump(2) + "\n"; }

inline void save_tree(const MeasureTree& tree, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << tree_to_string(tree);
  if (!out) throw IoError("write failed: " + path);
}

inline MeasureTree load_tree(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("tree file is not valid JSON: ") + e.what());
  }
  return tree_from_json(j);
}

}  // namespace annulab

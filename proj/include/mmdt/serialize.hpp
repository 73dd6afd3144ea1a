#pragma once

// JSON for trees and reports; Graphviz DOT export.

#include <cstdint>
#include <string>

#include "mmdt/adversarial.hpp"
#include "mmdt/evaluate.hpp"
#include "mmdt/io.hpp"
#include "mmdt/kernel.hpp"
#include "mmdt/tree.hpp"

namespace mmdt {

namespace detail {

inline Json axis_node_json(const AxisTree& t, int id) {
  const auto& n = t.nodes[static_cast<std::size_t>(id)];
  if (n.is_leaf()) return Json{{"leaf", n.component}};
  Json j;
  j["axis"] = n.axis;
  j["theta"] = n.theta;
  j["left"] = axis_node_json(t, n.left);
  j["right"] = axis_node_json(t, n.right);
  return j;
}

inline int axis_node_from_json(AxisTree& t, const Json& j) {
  if (!j.is_object()) fail(ErrorKind::parse, "tree node must be an object");
  if (j.contains("leaf")) return t.add_leaf(get_field<int>(j, "leaf"));
  const int id = t.add_cut(get_field<int>(j, "axis"), get_field<double>(j, "theta"));
  if (!j.contains("left") || !j.contains("right")) fail(ErrorKind::parse, "internal node needs left and right");
  const int l = axis_node_from_json(t, j.at("left"));
  const int r = axis_node_from_json(t, j.at("right"));
  t.nodes[static_cast<std::size_t>(id)].left = l;
  t.nodes[static_cast<std::size_t>(id)].right = r;
  return id;
}

inline void check_loaded(const std::string& violation) {
  if (!violation.empty()) fail(ErrorKind::validation, "invalid tree: " + violation);
}

/// Structural checks that need no model: bijective leaves, in-range axes.
inline std::string axis_tree_shape(const AxisTree& t) {
  if (t.num_leaves() != t.num_components) return "leaf count != K";
  std::vector<int> seen(t.num_components, 0);
  for (const auto& n : t.nodes) {
    if (n.is_leaf()) {
      if (n.component >= static_cast<int>(t.num_components)) return "leaf component out of range";
      ++seen[static_cast<std::size_t>(n.component)];
    } else if (n.axis < 0 || n.axis >= static_cast<int>(t.dim)) {
      return "axis out of range";
    }
  }
  for (int s : seen)
    if (s != 1) return "leaf map is not a bijection";
  return {};
}

}  // namespace detail

inline Json to_json(const AxisTree& t) {
  Json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "axis";
  j["dim"] = t.dim;
  j["K"] = t.num_components;
  j["model_fingerprint"] = t.model_fingerprint;
  j["options"] = {{"objective", objective_name(t.options.objective)},
                  {"seed", t.options.seed},
                  {"intervals_per_gap", t.options.intervals_per_gap}};
  j["root"] = detail::axis_node_json(t, 0);
  return j;
}

inline AxisTree axis_tree_from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorKind::parse, "tree JSON must be an object");
  if (j.contains("format_version") && j.at("format_version") != kFormatVersion)
    fail(ErrorKind::parse, "unsupported format_version");
  if (j.contains("kind") && j.at("kind") != "axis") fail(ErrorKind::parse, "not an axis tree");
  AxisTree t;
  t.dim = detail::get_field<std::size_t>(j, "dim");
  t.num_components = detail::get_field<std::size_t>(j, "K");
  if (j.contains("model_fingerprint")) t.model_fingerprint = detail::get_field<std::string>(j, "model_fingerprint");
  if (j.contains("options")) {
    const auto& o = j.at("options");
    if (o.contains("objective")) t.options.objective = parse_objective(detail::get_field<std::string>(o, "objective"));
    if (o.contains("seed")) t.options.seed = detail::get_field<std::uint64_t>(o, "seed");
    if (o.contains("intervals_per_gap")) t.options.intervals_per_gap = detail::get_field<int>(o, "intervals_per_gap");
  }
  if (!j.contains("root")) fail(ErrorKind::parse, "missing field \"root\"");
  detail::axis_node_from_json(t, j.at("root"));
  detail::check_loaded(detail::axis_tree_shape(t));
  return t;
}

// ---- kernel trees -----------------------------------------------------------

inline Json to_json(const KernelSpec& k) {
  Json profiles = Json::array();
  for (auto p : k.profiles) profiles.push_back(profile_name(p));
  return Json{{"profiles", profiles}, {"gamma", k.gamma}};
}

inline KernelSpec kernel_spec_from_json(const Json& j) {
  KernelSpec k;
  for (const auto& p : detail::get_field<std::vector<std::string>>(j, "profiles")) k.profiles.push_back(parse_profile(p));
  k.gamma = detail::get_field<Vector>(j, "gamma");
  k.validate();
  return k;
}

namespace detail {

inline Json kernel_node_json(const KernelTree& t, int id) {
  const auto& n = t.nodes[static_cast<std::size_t>(id)];
  if (n.is_leaf()) return Json{{"leaf", n.component}};
  Json j;
  j["axis"] = n.axis;
  j["prototype_component"] = n.prototype_component;
  j["prototype"] = n.prototype;
  j["theta"] = n.theta;
  j["radius"] = t.kernel.inverse(static_cast<std::size_t>(n.axis), n.theta);
  j["left"] = kernel_node_json(t, n.left);
  j["right"] = kernel_node_json(t, n.right);
  return j;
}

inline int kernel_node_from_json(KernelTree& t, const Json& j) {
  if (!j.is_object()) fail(ErrorKind::parse, "tree node must be an object");
  KernelNode n;
  if (j.contains("leaf")) {
    n.component = get_field<int>(j, "leaf");
    t.nodes.push_back(std::move(n));
    return static_cast<int>(t.nodes.size()) - 1;
  }
  n.axis = get_field<int>(j, "axis");
  n.prototype_component = get_field<int>(j, "prototype_component");
  n.prototype = get_field<Vector>(j, "prototype");
  n.theta = get_field<double>(j, "theta");
  const auto id = t.nodes.size();
  t.nodes.push_back(std::move(n));
  if (!j.contains("left") || !j.contains("right")) fail(ErrorKind::parse, "internal node needs left and right");
  const int l = kernel_node_from_json(t, j.at("left"));
  const int r = kernel_node_from_json(t, j.at("right"));
  t.nodes[id].left = l;
  t.nodes[id].right = r;
  return static_cast<int>(id);
}

}  // namespace detail

inline Json to_json(const KernelTree& t) {
  Json j;
  j["format_version"] = kFormatVersion;
  j["kind"] = "kernel";
  j["dim"] = t.dim;
  j["K"] = t.num_components;
  j["model_fingerprint"] = t.model_fingerprint;
  j["seed"] = t.seed;
  j["kernel"] = to_json(t.kernel);
  j["root"] = detail::kernel_node_json(t, 0);
  return j;
}

inline KernelTree kernel_tree_from_json(const Json& j) {
  if (!j.is_object()) fail(ErrorKind::parse, "tree JSON must be an object");
  if (j.contains("format_version") && j.at("format_version") != kFormatVersion)
    fail(ErrorKind::parse, "unsupported format_version");
  if (!j.contains("kind") || j.at("kind") != "kernel") fail(ErrorKind::parse, "not a kernel tree");
  KernelTree t;
  t.dim = detail::get_field<std::size_t>(j, "dim");
  t.num_components = detail::get_field<std::size_t>(j, "K");
  if (j.contains("model_fingerprint")) t.model_fingerprint = detail::get_field<std::string>(j, "model_fingerprint");
  if (j.contains("seed")) t.seed = detail::get_field<std::uint64_t>(j, "seed");
  if (!j.contains("kernel")) fail(ErrorKind::parse, "missing field \"kernel\"");
  t.kernel = kernel_spec_from_json(j.at("kernel"));
  if (!j.contains("root")) fail(ErrorKind::parse, "missing field \"root\"");
  detail::kernel_node_from_json(t, j.at("root"));
  detail::check_loaded(check_kernel_tree(t));
  return t;
}

inline bool is_kernel_tree_json(const Json& j) { return j.is_object() && j.contains("kind") && j.at("kind") == "kernel"; }

// ---- reports ----------------------------------------------------------------

inline Json to_json(const EvalReport& r) {
  Json j;
  j["format_version"] = kFormatVersion;
  j["exact"] = r.exact;
  j["price_l1"] = r.price_l1;
  j["price_l1_hat"] = r.price_l1_hat;
  j["price_l2sq"] = r.price_l2sq;
  j["error_rate"] = r.error_rate;
  j["baseline_cost"] = r.baseline_cost;
  j["tree_cost"] = r.tree_cost;
  j["tree_cost_hat"] = r.tree_cost_hat;
  j["mc_samples"] = r.mc_samples;
  j["mc_seed"] = r.mc_seed;
  j["confidence_radius"] = r.confidence_radius;
  j["error_confidence_radius"] = r.error_confidence_radius;
  j["empty_leaves"] = r.empty_leaves;
  Json bounds = Json::object();
  if (r.thm1) bounds["thm1"] = *r.thm1;
  if (r.thm3) bounds["thm3"] = *r.thm3;
  j["bounds"] = bounds;
  return j;
}

inline EvalReport eval_report_from_json(const Json& j) {
  EvalReport r;
  r.exact = detail::get_field<bool>(j, "exact");
  r.price_l1 = detail::get_field<double>(j, "price_l1");
  r.price_l1_hat = detail::get_field<double>(j, "price_l1_hat");
  r.price_l2sq = detail::get_field<double>(j, "price_l2sq");
  r.error_rate = detail::get_field<double>(j, "error_rate");
  r.baseline_cost = detail::get_field<double>(j, "baseline_cost");
  r.tree_cost = detail::get_field<double>(j, "tree_cost");
  r.tree_cost_hat = detail::get_field<double>(j, "tree_cost_hat");
  r.mc_samples = detail::get_field<std::size_t>(j, "mc_samples");
  r.mc_seed = detail::get_field<std::uint64_t>(j, "mc_seed");
  r.confidence_radius = detail::get_field<double>(j, "confidence_radius");
  r.error_confidence_radius = detail::get_field<double>(j, "error_confidence_radius");
  r.empty_leaves = detail::get_field<std::vector<int>>(j, "empty_leaves");
  if (j.contains("bounds")) {
    const auto& b = j.at("bounds");
    if (b.contains("thm1")) r.thm1 = detail::get_field<double>(b, "thm1");
    if (b.contains("thm3")) r.thm3 = detail::get_field<double>(b, "thm3");
  }
  return r;
}

inline Json to_json(const KernelPriceReport& r) {
  Json j;
  j["format_version"] = kFormatVersion;
  j["exact"] = r.exact;
  j["price"] = r.price;
  j["price_hat"] = r.price_hat;
  j["error_rate"] = r.error_rate;
  j["baseline_cost"] = r.baseline_cost;
  j["tree_cost"] = r.tree_cost;
  j["tree_cost_hat"] = r.tree_cost_hat;
  j["mc_samples"] = r.mc_samples;
  j["mc_seed"] = r.mc_seed;
  return j;
}

inline Json to_json(const KernelStats& s) {
  Json j;
  j["format_version"] = kFormatVersion;
  j["mode"] = s.mode == EstimationMode::exact ? "exact" : "mc";
  j["sigma2"] = s.sigma2;
  j["sigma2_per_component"] = s.sigma2_per_component;
  j["eps2"] = s.eps2;
  j["tau"] = s.tau;
  return j;
}

inline Json to_json(const AdversarialInstance& a) {
  Json j;
  j["format_version"] = kFormatVersion;
  j["construction"] = a.construction;
  Json p = Json::object(), t = Json::object();
  for (const auto& [k, v] : a.params) p[k] = v;
  for (const auto& [k, v] : a.targets) t[k] = v;
  j["params"] = p;
  j["targets"] = t;
  if (a.construction == "thm2-logk") j["verified_subset_sizes"] = a.verified_subset_sizes;
  j["model_fingerprint"] = fingerprint(a.model);
  return j;
}

// ---- DOT --------------------------------------------------------------------

inline std::string to_dot(const AxisTree& t) {
  std::string out = "digraph tree {\n  node [shape=box];\n";
  for (std::size_t id = 0; id < t.nodes.size(); ++id) {
    const auto& n = t.nodes[id];
    const std::string name = "  n" + std::to_string(id);
    if (n.is_leaf()) {
      out += name + " [label=\"cluster " + std::to_string(n.component + 1) + "\", shape=ellipse];\n";
      continue;
    }
    out += name + " [label=\"x" + std::to_string(n.axis + 1) + " \xE2\x89\xA4 " + format_double(n.theta) + "\"];\n";
    out += name + " -> n" + std::to_string(n.left) + " [label=\"yes\"];\n";
    out += name + " -> n" + std::to_string(n.right) + " [label=\"no\"];\n";
  }
  return out + "}\n";
}

/// Interval form: the left branch holds points far from the prototype on the node's axis.
inline std::string to_dot(const KernelTree& t) {
  std::string out = "digraph tree {\n  node [shape=box];\n";
  for (std::size_t id = 0; id < t.nodes.size(); ++id) {
    const auto& n = t.nodes[id];
    const std::string name = "  n" + std::to_string(id);
    if (n.is_leaf()) {
      out += name + " [label=\"cluster " + std::to_string(n.component + 1) + "\", shape=ellipse];\n";
      continue;
    }
    const auto i = static_cast<std::size_t>(n.axis);
    const std::string axis = "x" + std::to_string(i + 1);
    out += name + " [label=\"|" + axis + " - " + format_double(n.prototype[i]) + "| \xE2\x89\xA4 " +
           format_double(t.kernel.inverse(i, n.theta)) + "\"];\n";
    out += name + " -> n" + std::to_string(n.right) + " [label=\"yes\"];\n";
    out += name + " -> n" + std::to_string(n.left) + " [label=\"no\"];\n";
  }
  return out + "}\n";
}

}  // namespace mmdt

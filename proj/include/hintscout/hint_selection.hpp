#pragma once

#include <algorithm>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hintscout/errors.hpp"
#include "hintscout/kmeans.hpp"
#include "hintscout/similarity.hpp"

namespace hintscout {

inline constexpr std::string_view kToolVersion = "hintscout 0.1.0";

enum class PositionRule { center, last };

inline std::string_view rule_name(PositionRule r) { return r == PositionRule::center ? "center" : "last"; }

inline PositionRule parse_rule_name(std::string_view s) {
  if (s == "center") return PositionRule::center;
  if (s == "last") return PositionRule::last;
  throw FormatError("unknown position rule '" + std::string(s) + "'");
}

struct HintConfig {
  std::string teacher_name;
  MetricSpec metric;
  int k = 0;
  PositionRule position_rule = PositionRule::center;
  std::vector<int> hint_positions;              // 1-based, ascending
  std::vector<std::vector<int>> cluster_members; // sorted, clusters ordered by first member

  friend bool operator==(const HintConfig&, const HintConfig&) = default;
};

/// Picks one member of a sorted cluster: the maximum for `last`, the lower
/// median (element floor((m-1)/2)) for `center`.
inline int pick_position(const std::vector<int>& sorted_members, PositionRule rule) {
  if (sorted_members.empty()) throw InvariantError("empty cluster");
  if (rule == PositionRule::last) return sorted_members.back();
  return sorted_members[(sorted_members.size() - 1) / 2];
}

/// Groups layer indices by label, orders clusters by their smallest member.
inline std::vector<std::vector<int>> cluster_members(const std::vector<int>& layer_indices, const std::vector<int>& labels) {
  if (layer_indices.size() != labels.size()) throw ArgumentError("labels and layer indices differ in length");
  std::map<int, std::vector<int>> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(layer_indices[i]);
  std::vector<std::vector<int>> clusters;
  for (auto& [label, members] : by_label) {
    std::sort(members.begin(), members.end());
    clusters.push_back(std::move(members));
  }
  std::sort(clusters.begin(), clusters.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return clusters;
}

inline HintConfig select_positions(const std::vector<std::vector<int>>& clusters, PositionRule rule) {
  HintConfig cfg;
  cfg.k = static_cast<int>(clusters.size());
  cfg.position_rule = rule;
  for (auto members : clusters) {
    std::sort(members.begin(), members.end());
    cfg.hint_positions.push_back(pick_position(members, rule));
    cfg.cluster_members.push_back(std::move(members));
  }
  std::sort(cfg.cluster_members.begin(), cfg.cluster_members.end(),
            [](const auto& a, const auto& b) { return a.front() < b.front(); });
  std::sort(cfg.hint_positions.begin(), cfg.hint_positions.end());
  return cfg;
}

inline HintConfig select_positions(const ClusterAssignment& assignment, PositionRule rule) {
  const auto clusters = cluster_members(assignment.layer_indices, assignment.labels);
  if (static_cast<int>(clusters.size()) != assignment.config.k) {
    throw InvariantError("assignment has " + std::to_string(clusters.size()) + " non-empty clusters, expected " +
                         std::to_string(assignment.config.k));
  }
  HintConfig cfg = select_positions(clusters, rule);
  cfg.metric = assignment.config.metric;
  return cfg;
}

/// Conventional hint positions: the last layer of each spatial-size group.
inline std::vector<int> baseline_positions(const std::vector<int>& group_sizes) {
  std::vector<int> out;
  int total = 0;
  for (const int s : group_sizes) {
    if (s <= 0) throw ArgumentError("group sizes must be positive");
    total += s;
    out.push_back(total);
  }
  return out;
}

inline void check_invariants(const HintConfig& cfg) {
  if (cfg.k < 1) throw InvariantError("hint config: k must be positive");
  if (cfg.hint_positions.size() != static_cast<std::size_t>(cfg.k) ||
      cfg.cluster_members.size() != static_cast<std::size_t>(cfg.k)) {
    throw InvariantError("hint config: expected one position and one member list per cluster");
  }
  for (std::size_t i = 1; i < cfg.hint_positions.size(); ++i) {
    if (cfg.hint_positions[i] <= cfg.hint_positions[i - 1]) {
      throw InvariantError("hint config: positions must be strictly increasing");
    }
  }
  for (const int p : cfg.hint_positions) {
    if (p < 1) throw InvariantError("hint config: positions are 1-based");
    const bool owned = std::any_of(cfg.cluster_members.begin(), cfg.cluster_members.end(), [p](const auto& members) {
      return std::find(members.begin(), members.end(), p) != members.end();
    });
    if (!owned) throw InvariantError("hint config: position " + std::to_string(p) + " belongs to no cluster");
  }
  for (const auto& members : cfg.cluster_members) {
    if (members.empty() || !std::is_sorted(members.begin(), members.end())) {
      throw InvariantError("hint config: cluster member lists must be non-empty and sorted");
    }
    const int owned = static_cast<int>(std::count_if(cfg.hint_positions.begin(), cfg.hint_positions.end(), [&](int p) {
      return std::find(members.begin(), members.end(), p) != members.end();
    }));
    if (owned != 1) throw InvariantError("hint config: each cluster must hold exactly one position");
  }
}

inline nlohmann::ordered_json hint_config_to_json(const HintConfig& cfg) {
  nlohmann::ordered_json j;
  j["teacher"] = cfg.teacher_name;
  j["metric"] = metric_to_json(cfg.metric);
  j["k"] = cfg.k;
  j["rule"] = std::string(rule_name(cfg.position_rule));
  j["indexing"] = "1-based";
  j["positions"] = cfg.hint_positions;
  j["clusters"] = cfg.cluster_members;
  j["tool_version"] = std::string(kToolVersion);
  return j;
}

/// Writes the hint config as indented JSON with a fixed key order.
inline void emit_hint_config(const HintConfig& cfg, std::ostream& out) {
  check_invariants(cfg);
  out << hint_config_to_json(cfg).dump(2) << '\n';
  if (!out) throw IoError("failed writing hint config");
}

inline HintConfig parse_hint_config(const std::string& text) {
  HintConfig cfg;
  try {
    const auto j = nlohmann::json::parse(text);
    cfg.teacher_name = j.at("teacher").get<std::string>();
    cfg.metric = metric_from_json(j.at("metric"));
    cfg.k = j.at("k").get<int>();
    cfg.position_rule = parse_rule_name(j.at("rule").get<std::string>());
    if (j.contains("indexing") && j["indexing"] != "1-based") {
      throw FormatError("hint config: unsupported indexing convention");
    }
    cfg.hint_positions = j.at("positions").get<std::vector<int>>();
    cfg.cluster_members = j.at("clusters").get<std::vector<std::vector<int>>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("hint config: ") + e.what());
  }
  check_invariants(cfg);
  return cfg;
}

}  // namespace hintscout

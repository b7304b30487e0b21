#pragma once

#include "mixhmm/types.hpp"

#include <json.hpp>

#include <string>
#include <utility>
#include <vector>

namespace mixhmm {

/// How a fitted mixture maps onto a reference one. aligned.components[k] is
/// fitted.components[component_perm[k]] with states reordered by
/// state_perms[k] (aligned state l is fitted state state_perms[k][l]).
struct Alignment {
  std::vector<int> component_perm;
  std::vector<std::vector<int>> state_perms;
  MixtureParameters aligned;
  double transition_distance = 0.0;  // summed Frobenius norms, after aligning
  double mean_distance = 0.0;        // summed squared mean distances
};

/// Resolves label switching: exhaustively picks the component permutation
/// minimizing summed Frobenius distance between transition matrices, then
/// per component the state permutation minimizing summed squared distance
/// between state means. Component/state counts must be permutable onto the
/// reference shapes (K and each L_k <= 6).
Alignment align_parameters(const MixtureParameters& fitted,
                           const MixtureParameters& reference);

using FeatureGroups = std::vector<std::pair<std::string, std::vector<int>>>;

/// Parses {"name": [indices], ...}; groups come out name-sorted.
FeatureGroups groups_from_json(const nlohmann::json& j);

struct GroupSummaryRow {
  int component = 0;
  int state = 0;
  std::string group;
  double mean_mu = 0.0;  // mean over the group's dims of the state mean
  double mean_v = 0.0;   // same for the state input effect
};

/// One row per (component, state, group). Empty groups and out-of-range
/// indices are rejected by name.
std::vector<GroupSummaryRow> group_summary(const MixtureParameters& params,
                                           const FeatureGroups& groups);

std::string group_summary_csv(const std::vector<GroupSummaryRow>& rows);

struct TrajectoryRecord {
  std::string id;
  int label = 0;
  std::vector<int> states;       // decoded path, local within the component
  std::vector<double> severity;  // per visit: sum of the state's means
  std::vector<bool> missing;     // true where a visit has no observed dims
};

std::vector<TrajectoryRecord> export_trajectories(const FitResult& fit,
                                                  const SequenceDataset& data);

/// JSON-lines: one record per sequence.
std::string trajectories_to_jsonl(const std::vector<TrajectoryRecord>& recs);

}  // namespace mixhmm

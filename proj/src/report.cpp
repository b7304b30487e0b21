#include "mixhmm/report.hpp"

#include "mixhmm/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace mixhmm {

using nlohmann::json;

namespace {

HMMParameters permute_states(const HMMParameters& p,
                             const std::vector<int>& perm) {
  const auto n = static_cast<Eigen::Index>(perm.size());
  HMMParameters out = p;
  for (Eigen::Index l = 0; l < n; ++l) {
    const int src = perm[static_cast<std::size_t>(l)];
    out.pi[l] = p.pi[src];
    out.mu.row(l) = p.mu.row(src);
    out.var.row(l) = p.var.row(src);
    out.v.row(l) = p.v.row(src);
    for (Eigen::Index c = 0; c < n; ++c)
      out.A(l, c) = p.A(src, perm[static_cast<std::size_t>(c)]);
  }
  return out;
}

std::vector<int> best_state_perm(const HMMParameters& fitted,
                                 const HMMParameters& reference) {
  const int n = static_cast<int>(reference.n_states());
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (int l = 0; l < n; ++l)
      cost += (fitted.mu.row(perm[static_cast<std::size_t>(l)]) -
               reference.mu.row(l))
                  .squaredNorm();
    if (cost < best_cost) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

}  // namespace

Alignment align_parameters(const MixtureParameters& fitted,
                           const MixtureParameters& reference) {
  const int k = reference.n_components();
  if (fitted.n_components() != k)
    throw std::invalid_argument("align_parameters: component counts differ");
  for (int i = 0; i < k; ++i)
    if (fitted.components[static_cast<std::size_t>(i)].dim() !=
        reference.components[static_cast<std::size_t>(i)].dim())
      throw std::invalid_argument("align_parameters: dimensions differ");

  // Stage 1: match components on raw transition-matrix distance.
  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best_perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    bool compatible = true;
    for (int i = 0; i < k && compatible; ++i) {
      const auto& f = fitted.components[static_cast<std::size_t>(
          perm[static_cast<std::size_t>(i)])];
      const auto& r = reference.components[static_cast<std::size_t>(i)];
      if (f.n_states() != r.n_states()) {
        compatible = false;
        break;
      }
      cost += (f.A - r.A).norm();
    }
    if (compatible && cost < best_cost) {
      best_cost = cost;
      best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  if (best_perm.empty())
    throw std::invalid_argument(
        "align_parameters: no component permutation matches the reference "
        "state counts");

  // Stage 2: align states within each matched pair on mean distance.
  Alignment out;
  out.component_perm = best_perm;
  out.aligned.alpha = Vector(k);
  for (int i = 0; i < k; ++i) {
    const auto src = static_cast<std::size_t>(best_perm[static_cast<std::size_t>(i)]);
    const auto& ref_comp = reference.components[static_cast<std::size_t>(i)];
    const std::vector<int> sperm =
        best_state_perm(fitted.components[src], ref_comp);
    out.state_perms.push_back(sperm);
    out.aligned.alpha[i] = fitted.alpha[static_cast<Eigen::Index>(src)];
    out.aligned.components.push_back(
        permute_states(fitted.components[src], sperm));

    const auto& a = out.aligned.components.back();
    out.transition_distance += (a.A - ref_comp.A).norm();
    out.mean_distance += (a.mu - ref_comp.mu).squaredNorm();
  }
  return out;
}

FeatureGroups groups_from_json(const json& j) {
  FeatureGroups groups;
  for (auto it = j.begin(); it != j.end(); ++it)
    groups.emplace_back(it.key(), it.value().get<std::vector<int>>());
  std::sort(groups.begin(), groups.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return groups;
}

std::vector<GroupSummaryRow> group_summary(const MixtureParameters& params,
                                           const FeatureGroups& groups) {
  const Eigen::Index d_dim =
      params.components.empty() ? 0 : params.components.front().dim();
  for (const auto& [name, dims] : groups) {
    if (dims.empty())
      throw std::invalid_argument("group '" + name + "' is empty");
    for (int d : dims)
      if (d < 0 || d >= d_dim)
        throw std::invalid_argument("group '" + name + "': feature index " +
                                    std::to_string(d) + " outside [0, " +
                                    std::to_string(d_dim) + ")");
  }

  std::vector<GroupSummaryRow> rows;
  for (int k = 0; k < params.n_components(); ++k) {
    const auto& comp = params.components[static_cast<std::size_t>(k)];
    for (Eigen::Index l = 0; l < comp.n_states(); ++l)
      for (const auto& [name, dims] : groups) {
        GroupSummaryRow row;
        row.component = k;
        row.state = static_cast<int>(l);
        row.group = name;
        for (int d : dims) {
          row.mean_mu += comp.mu(l, d);
          row.mean_v += comp.v(l, d);
        }
        row.mean_mu /= static_cast<double>(dims.size());
        row.mean_v /= static_cast<double>(dims.size());
        rows.push_back(std::move(row));
      }
  }
  return rows;
}

std::string group_summary_csv(const std::vector<GroupSummaryRow>& rows) {
  std::ostringstream os;
  os << "component,state,group,mean_mu,mean_v\n";
  for (const auto& r : rows) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", r.mean_mu, r.mean_v);
    os << r.component << ',' << r.state << ',' << r.group << ',' << buf
       << '\n';
  }
  return os.str();
}

std::vector<TrajectoryRecord> export_trajectories(const FitResult& fit,
                                                  const SequenceDataset& data) {
  if (fit.paths.size() != data.size())
    throw std::invalid_argument(
        "export_trajectories: fit and dataset sequence counts differ");
  const BlockMap map = BlockMap::from_spec(fit.spec);
  std::vector<TrajectoryRecord> recs;
  recs.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Sequence& seq = data.sequences[i];
    TrajectoryRecord rec;
    rec.id = seq.id;
    rec.label = fit.labels[i];
    const auto& comp =
        fit.params.components[static_cast<std::size_t>(rec.label)];
    for (std::size_t t = 0; t < fit.paths[i].size(); ++t) {
      const int local = map.local_state(fit.paths[i][t]);
      rec.states.push_back(local);
      rec.severity.push_back(comp.mu.row(local).sum());
      rec.missing.push_back(
          !seq.mask.row(static_cast<Eigen::Index>(t)).any());
    }
    recs.push_back(std::move(rec));
  }
  return recs;
}

std::string trajectories_to_jsonl(const std::vector<TrajectoryRecord>& recs) {
  std::ostringstream os;
  for (const auto& r : recs) {
    json j{{"id", r.id},
           {"label", r.label},
           {"states", r.states},
           {"severity", r.severity},
           {"missing", r.missing}};
    os << j.dump() << '\n';
  }
  return os.str();
}

}  // namespace mixhmm

#include "mixhmm/em.hpp"

#include "engine.hpp"
#include "mixhmm/mixture.hpp"
#include "mixhmm/validation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace mixhmm {
namespace {

struct ObservedStats {
  Vector mean;  // per-dimension observed mean (0 when a dim is never seen)
  Vector var;   // per-dimension observed variance (1 when degenerate)
  std::vector<std::vector<double>> values;  // observed values per dimension
};

ObservedStats observed_stats(const SequenceDataset& data) {
  const Eigen::Index d_dim = data.dim;
  ObservedStats st;
  st.mean = Vector::Zero(d_dim);
  st.var = Vector::Ones(d_dim);
  st.values.resize(static_cast<std::size_t>(d_dim));
  for (const auto& seq : data.sequences)
    for (Eigen::Index t = 0; t < seq.length(); ++t)
      for (Eigen::Index d = 0; d < d_dim; ++d)
        if (seq.mask(t, d))
          st.values[static_cast<std::size_t>(d)].push_back(
              seq.observations(t, d));
  for (Eigen::Index d = 0; d < d_dim; ++d) {
    const auto& vals = st.values[static_cast<std::size_t>(d)];
    if (vals.empty()) continue;
    double s = 0.0;
    for (double v : vals) s += v;
    st.mean(d) = s / static_cast<double>(vals.size());
    if (vals.size() < 2) continue;
    double ss = 0.0;
    for (double v : vals) ss += (v - st.mean(d)) * (v - st.mean(d));
    st.var(d) = std::max(kVarianceFloor, ss / static_cast<double>(vals.size()));
  }
  return st;
}

double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

Matrix uniform_transitions(int n_states, bool left_to_right) {
  Matrix a = Matrix::Zero(n_states, n_states);
  for (int j = 0; j < n_states; ++j) {
    if (left_to_right) {
      const double p = 1.0 / static_cast<double>(n_states - j);
      for (int l = j; l < n_states; ++l) a(j, l) = p;
    } else {
      a.row(j).setConstant(1.0 / static_cast<double>(n_states));
    }
  }
  return a;
}

}  // namespace

MixtureParameters initialize(const SequenceDataset& data, const ModelSpec& spec,
                             std::uint64_t seed, InitStrategy strategy) {
  if (data.total_observed() == 0)
    throw std::invalid_argument(
        "initialize: dataset has no observed entries to seed emissions from");

  const Eigen::Index d_dim = data.dim;
  const ObservedStats st = observed_stats(data);

  // Flat list of (sequence, row) pairs for drawing initial means.
  std::vector<std::pair<std::size_t, Eigen::Index>> rows;
  for (std::size_t i = 0; i < data.size(); ++i)
    for (Eigen::Index t = 0; t < data.sequences[i].length(); ++t)
      rows.emplace_back(i, t);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick_row(0, rows.size() - 1);
  std::vector<std::vector<double>> sorted = st.values;
  if (strategy == InitStrategy::spread_quantile)
    for (auto& vals : sorted) std::sort(vals.begin(), vals.end());

  MixtureParameters mix;
  mix.alpha =
      Vector::Constant(spec.n_components, 1.0 / spec.n_components);
  const int total = spec.total_states();
  int flat_state = 0;
  for (int k = 0; k < spec.n_components; ++k) {
    const int states = spec.states_per_component[static_cast<std::size_t>(k)];
    HMMParameters p;
    p.pi = Vector::Constant(states, 1.0 / states);
    p.A = uniform_transitions(states, spec.left_to_right);
    p.mu = Matrix::Zero(states, d_dim);
    p.var = Matrix::Zero(states, d_dim);
    p.v = Matrix::Zero(states, d_dim);
    for (int l = 0; l < states; ++l, ++flat_state) {
      if (strategy == InitStrategy::random_obs) {
        const auto [i, t] = rows[pick_row(rng)];
        const Sequence& seq = data.sequences[i];
        for (Eigen::Index d = 0; d < d_dim; ++d)
          p.mu(l, d) = seq.mask(t, d) ? seq.observations(t, d) : st.mean(d);
      } else {
        const double q = (flat_state + 0.5) / static_cast<double>(total);
        for (Eigen::Index d = 0; d < d_dim; ++d)
          p.mu(l, d) = quantile(sorted[static_cast<std::size_t>(d)], q);
      }
      p.var.row(l) = st.var.transpose();
    }
    mix.components.push_back(std::move(p));
  }
  return mix;
}

EStepResult e_step(const SequenceDataset& data, const HMMParameters& flat) {
  EStepResult r;
  r.posteriors.reserve(data.size());
  for (const auto& seq : data.sequences) {
    r.posteriors.push_back(
        forward_backward(seq, flat, SequenceOffsets::none()));
    r.total_loglik += r.posteriors.back().loglik;
  }
  return r;
}

HMMParameters m_step(const SequenceDataset& data,
                     const std::vector<Posteriors>& posteriors,
                     const ModelSpec& spec, const HMMParameters& previous,
                     double variance_floor) {
  return detail::m_step_under_effects(data, posteriors, spec, previous,
                                      PersonalEffects::zeros(data),
                                      variance_floor);
}

FitResult fit(const SequenceDataset& data, const ModelSpec& spec,
              const FitOptions& options) {
  if (spec.personalized())
    throw std::invalid_argument(
        "em::fit handles specs without personalization flags; use "
        "variational::fit_personalized for personalized specs");
  return detail::run_fit(data, spec, options);
}

}  // namespace mixhmm

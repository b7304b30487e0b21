#pragma once

#include "mixhmm/inference.hpp"
#include "mixhmm/types.hpp"

#include <cstdint>

namespace mixhmm {

enum class InitStrategy {
  random_obs,       // state means drawn from observed data rows
  spread_quantile,  // state means at per-dimension quantiles, spread over
                    // the flattened states so components start distinct
};

struct FitOptions {
  int max_iters = 500;
  double rel_tol = 1e-6;
  int n_restarts = 5;
  std::uint64_t seed = 0;
  double variance_floor = kVarianceFloor;
  InitStrategy init_strategy = InitStrategy::random_obs;
  int n_threads = 1;
  // Estimate alpha from posterior block masses instead of hard Viterbi
  // cluster counts.
  bool alpha_from_posterior = false;
};

/// Deterministic in (dataset, spec, seed, strategy). pi and A start uniform
/// (upper-triangular-uniform rows under left_to_right), variances at the
/// per-dimension data variance, v at zero, alpha uniform.
MixtureParameters initialize(const SequenceDataset& data, const ModelSpec& spec,
                             std::uint64_t seed,
                             InitStrategy strategy = InitStrategy::random_obs);

struct EStepResult {
  std::vector<Posteriors> posteriors;  // one per sequence, dataset order
  double total_loglik = 0.0;
};

EStepResult e_step(const SequenceDataset& data, const HMMParameters& flat);

/// Exact M-step for the non-personalized family: pi and A from responsibility
/// sums (structural zeros preserved), per-state-per-dimension (mu, v) from
/// the 2x2 weighted normal equations, variances from weighted squared
/// residuals. States with responsibility below 1e-12 keep their previous
/// parameters; degenerate dose designs fall back to v = 0.
HMMParameters m_step(const SequenceDataset& data,
                     const std::vector<Posteriors>& posteriors,
                     const ModelSpec& spec, const HMMParameters& previous,
                     double variance_floor = kVarianceFloor);

/// Best-of-restarts EM for specs without personalization flags.
FitResult fit(const SequenceDataset& data, const ModelSpec& spec,
              const FitOptions& options = {});

}  // namespace mixhmm

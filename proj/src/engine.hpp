#pragma once

// Internal fitting engine shared by the em and variational modules. The
// non-personalized path is the personalized one with every effect pinned at
// zero mean / zero variance, so both public entry points walk byte-identical
// code when the flags are off.

#include "mixhmm/em.hpp"
#include "mixhmm/inference.hpp"
#include "mixhmm/types.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace mixhmm::detail {

/// splitmix64-style stream derivation: restart r of run seed s draws from
/// mix_seed(s, r), so runs are reproducible and restarts decorrelated.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Runs fn(0..n-1) on up to n_threads workers. Work items are independent
/// and results are written by index, so the schedule cannot change results.
void parallel_for(std::size_t n, int n_threads,
                  const std::function<void(std::size_t)>& fn);

/// Offsets for sequence i assembled from the effect rows the spec turns on.
/// With `corrections` the offset variances ride along so emission terms are
/// expectations under q rather than plug-ins.
SequenceOffsets offsets_for(const PersonalEffects& effects, std::size_t i,
                            const ModelSpec& spec, bool corrections);

/// Sum over rows/dims of KL(N(mean, var) || N(0, prior_var)).
double kl_gaussian_sum(const Matrix& mean, const Matrix& var,
                       double prior_var);

/// Per-sequence posteriors under the current variational means. When
/// `corrections` is set the emission terms carry the -var/2 expectations of
/// q(r) and q(m); otherwise the means are plugged in directly.
std::vector<Posteriors> posteriors_under_effects(const SequenceDataset& data,
                                                 const HMMParameters& flat,
                                                 const ModelSpec& spec,
                                                 const PersonalEffects& effects,
                                                 bool corrections,
                                                 int n_threads);

/// M-step with observations re-centered by the variational effect means and
/// variances widened by the effect uncertainties. `effects` may be the
/// all-zeros record, in which case this is the plain M-step.
HMMParameters m_step_under_effects(const SequenceDataset& data,
                                   const std::vector<Posteriors>& posteriors,
                                   const ModelSpec& spec,
                                   const HMMParameters& previous,
                                   const PersonalEffects& effects,
                                   double variance_floor);

/// Full coordinate-ascent fit: restarts, E/update/M sweeps, convergence on
/// relative objective change, Viterbi decode and component extraction.
/// The objective is the log-likelihood when both personalization flags are
/// off and the ELBO otherwise.
FitResult run_fit(const SequenceDataset& data, const ModelSpec& spec,
                  const FitOptions& options);

}  // namespace mixhmm::detail

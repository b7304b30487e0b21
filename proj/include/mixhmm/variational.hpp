#pragma once

#include "mixhmm/em.hpp"
#include "mixhmm/inference.hpp"
#include "mixhmm/types.hpp"

#include <utility>

namespace mixhmm {

struct ELBOReport {
  double total = 0.0;            // expected_loglik - kl_r - kl_m
  double expected_loglik = 0.0;  // sum of corrected per-sequence logZ
  double kl_r = 0.0;
  double kl_m = 0.0;
};

/// Closed-form Gaussian update of q(r) for one sequence given fixed state
/// responsibilities: precision_d = 1/prior_var_r + sum_t gamma/var, mean from
/// the precision-weighted residuals. m_mean may be empty when the input
/// effect is not modeled. Returns (mean, var) per dimension.
std::pair<Vector, Vector> update_personal_offsets(const Sequence& seq,
                                                  const Posteriors& posteriors,
                                                  const HMMParameters& flat,
                                                  double prior_var_r,
                                                  const Vector& m_mean);

/// Closed-form Gaussian update of q(m): precision_d = 1/prior_var_m +
/// sum_t gamma * dose^2 / var. r_mean may be empty when the state offset is
/// not modeled. Returns (mean, var) per dimension.
std::pair<Vector, Vector> update_personal_input_effects(
    const Sequence& seq, const Posteriors& posteriors,
    const HMMParameters& flat, double prior_var_m, const Vector& r_mean);

/// Evidence lower bound at the given parameters and variational posteriors,
/// with q(x) implicitly optimal (forward recursion over corrected emissions).
/// With both personalization flags off this equals the exact log-likelihood.
ELBOReport elbo(const SequenceDataset& data, const HMMParameters& flat,
                const PersonalEffects& effects, const ModelSpec& spec);

/// Variational EM for specs with personalization flags. With both flags off
/// this reproduces em::fit exactly (same engine underneath).
FitResult fit_personalized(const SequenceDataset& data, const ModelSpec& spec,
                           const FitOptions& options = {});

}  // namespace mixhmm

#include "mixhmm/variational.hpp"

#include "engine.hpp"

#include <utility>

namespace mixhmm {

std::pair<Vector, Vector> update_personal_offsets(const Sequence& seq,
                                                  const Posteriors& posteriors,
                                                  const HMMParameters& flat,
                                                  double prior_var_r,
                                                  const Vector& m_mean) {
  const Eigen::Index d_dim = seq.dim();
  const Eigen::Index n_states = flat.n_states();
  Vector precision = Vector::Constant(d_dim, 1.0 / prior_var_r);
  Vector score = Vector::Zero(d_dim);
  for (Eigen::Index t = 0; t < seq.length(); ++t) {
    const double dose = seq.inputs(t);
    for (Eigen::Index d = 0; d < d_dim; ++d) {
      if (!seq.mask(t, d)) continue;
      const double m = m_mean.size() > 0 ? m_mean(d) : 0.0;
      for (Eigen::Index l = 0; l < n_states; ++l) {
        const double g = posteriors.gamma(t, l);
        if (g == 0.0) continue;
        const double w = g / flat.var(l, d);
        precision(d) += w;
        score(d) += w * (seq.observations(t, d) - flat.mu(l, d) -
                         (flat.v(l, d) + m) * dose);
      }
    }
  }
  Vector var = precision.cwiseInverse();
  Vector mean = score.cwiseProduct(var);
  return {std::move(mean), std::move(var)};
}

std::pair<Vector, Vector> update_personal_input_effects(
    const Sequence& seq, const Posteriors& posteriors,
    const HMMParameters& flat, double prior_var_m, const Vector& r_mean) {
  const Eigen::Index d_dim = seq.dim();
  const Eigen::Index n_states = flat.n_states();
  Vector precision = Vector::Constant(d_dim, 1.0 / prior_var_m);
  Vector score = Vector::Zero(d_dim);
  for (Eigen::Index t = 0; t < seq.length(); ++t) {
    const double dose = seq.inputs(t);
    if (dose == 0.0) continue;  // no dose, no information about m
    for (Eigen::Index d = 0; d < d_dim; ++d) {
      if (!seq.mask(t, d)) continue;
      const double r = r_mean.size() > 0 ? r_mean(d) : 0.0;
      for (Eigen::Index l = 0; l < n_states; ++l) {
        const double g = posteriors.gamma(t, l);
        if (g == 0.0) continue;
        const double w = g / flat.var(l, d);
        precision(d) += w * dose * dose;
        score(d) += w * dose *
                    (seq.observations(t, d) - flat.mu(l, d) - r -
                     flat.v(l, d) * dose);
      }
    }
  }
  Vector var = precision.cwiseInverse();
  Vector mean = score.cwiseProduct(var);
  return {std::move(mean), std::move(var)};
}

ELBOReport elbo(const SequenceDataset& data, const HMMParameters& flat,
                const PersonalEffects& effects, const ModelSpec& spec) {
  ELBOReport rep;
  for (std::size_t i = 0; i < data.size(); ++i)
    rep.expected_loglik += sequence_log_likelihood(
        data.sequences[i], flat, detail::offsets_for(effects, i, spec, true));
  if (spec.personal_state_offset)
    rep.kl_r = detail::kl_gaussian_sum(effects.r_mean, effects.r_var,
                                       spec.prior_var_r);
  if (spec.personal_input_effect)
    rep.kl_m = detail::kl_gaussian_sum(effects.m_mean, effects.m_var,
                                       spec.prior_var_m);
  rep.total = rep.expected_loglik - rep.kl_r - rep.kl_m;
  return rep;
}

FitResult fit_personalized(const SequenceDataset& data, const ModelSpec& spec,
                           const FitOptions& options) {
  // Deliberately no flag check: with both flags off this runs the same
  // engine path as em::fit and reproduces it exactly.
  return detail::run_fit(data, spec, options);
}

}  // namespace mixhmm

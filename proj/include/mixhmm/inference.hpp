#pragma once

#include "mixhmm/types.hpp"

namespace mixhmm {

/// Exact smoothed posteriors of one sequence under one (flattened) model.
struct Posteriors {
  Matrix gamma;             // T x L state responsibilities, rows sum to 1
  std::vector<Matrix> xi;   // T-1 slices of L x L pairwise responsibilities
  double loglik = 0.0;
};

struct DecodedPath {
  std::vector<int> states;  // argmax joint path, ties toward lower index
  double map_loglik = 0.0;
};

/// Per-sequence offsets plugged into the emission mean, with optional
/// variances for the expected-log-density correction used by the
/// variational E-step. Empty vectors mean zero / no correction.
struct SequenceOffsets {
  Vector r_mean, m_mean;
  Vector r_var, m_var;

  static SequenceOffsets none() { return {}; }
  bool has_means() const { return r_mean.size() > 0 || m_mean.size() > 0; }
  bool has_correction() const { return r_var.size() > 0 || m_var.size() > 0; }
};

/// Log-density of the observed entries of y under the state's diagonal
/// Gaussian with mean mu + r + (v + m) * dose. Masked dims contribute
/// nothing; an all-masked row returns exactly 0. With offset variances
/// present, subtracts 0.5 * (r_var + dose^2 * m_var) / var per observed dim
/// (the Gaussian-uncertainty correction to the expected log-density).
double emission_log_density(const Eigen::Ref<const Vector>& y,
                            const Eigen::Ref<const BoolVector>& mask,
                            double dose,
                            const Eigen::Ref<const Vector>& mu,
                            const Eigen::Ref<const Vector>& var,
                            const Eigen::Ref<const Vector>& v,
                            const SequenceOffsets& offsets);

/// T x L matrix of per-step emission log-densities. Throws NumericalError
/// naming the dimension on non-finite observed values or doses.
Matrix emission_log_matrix(const Sequence& seq, const HMMParameters& flat,
                           const SequenceOffsets& offsets);

/// Forward-backward in log-space. Throws NumericalError("broken chain ...")
/// when all transition mass out of the reachable set is zero.
Posteriors forward_backward(const Sequence& seq, const HMMParameters& flat,
                            const SequenceOffsets& offsets);

DecodedPath viterbi(const Sequence& seq, const HMMParameters& flat,
                    const SequenceOffsets& offsets);

/// Forward pass only; equals forward_backward(...).loglik.
double sequence_log_likelihood(const Sequence& seq, const HMMParameters& flat,
                               const SequenceOffsets& offsets);

// Variants over a precomputed emission log matrix; fitting code builds the
// matrix once per sequence per sweep and reuses it.
Posteriors forward_backward_logb(const Matrix& logb, const HMMParameters& flat);
DecodedPath viterbi_logb(const Matrix& logb, const HMMParameters& flat);
double log_likelihood_logb(const Matrix& logb, const HMMParameters& flat);

}  // namespace mixhmm

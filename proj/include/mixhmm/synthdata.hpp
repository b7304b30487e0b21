#pragma once

#include "mixhmm/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <utility>
#include <vector>

namespace mixhmm {

/// Latent variables retained from generation for scoring fits against.
struct GroundTruth {
  MixtureParameters params;              // generating parameters
  std::vector<int> components;           // z per sequence
  std::vector<std::vector<int>> paths;   // local state path per sequence
  Matrix r;                              // N x D offsets (zero when unused)
  Matrix m;                              // N x D input effects
};

/// Squared-exponential kernel Gram matrix over integer time points:
/// sigma^2 * exp(-(s-t)^2 / (2*length_scale^2)), plus 1e-8 on the diagonal
/// so Cholesky factorization is stable.
Matrix se_kernel_covariance(int n_times, double length_scale, double sigma);

struct NoiseConfig {
  enum class Kind { iid, se_kernel };
  Kind kind = Kind::iid;      // iid draws per-state variances from params
  double length_scale = 1.0;  // se_kernel only; one GP draw per (sequence,
  double sigma = 0.1;         // dimension) replaces the iid noise
};

/// Ranges for the per-sequence latent draws; which draws happen at all is
/// governed by the spec flags (r/m by the personalization flags, doses by
/// use_inputs).
struct EffectsConfig {
  double r_low = -1.0, r_high = 1.0;    // r_id ~ Uniform(r_low, r_high)
  double m_low = -0.5, m_high = 0.5;
  double dose_max = 1.0;                // piecewise-constant dose levels
  int dose_segments = 3;                // constant segments per sequence
  double missing_frac = 0.0;            // per-entry Bernoulli masking
};

/// Ancestral sampling: z ~ Cat(alpha), x a Markov path under component z,
/// y_t = mu + r + (v + m) * dose_t + noise. Deterministic in seed, with
/// per-sequence seed streams so generation order cannot matter.
std::pair<SequenceDataset, GroundTruth> simulate(
    const ModelSpec& spec, const MixtureParameters& params,
    const EffectsConfig& effects, int n_sequences, int n_times,
    std::uint64_t seed, const NoiseConfig& noise = {});

/// The two-component synthetic benchmark: 200 sequences of length 30, D=1,
/// A1 = [[.8,.2],[.2,.8]], A2 = [[.2,.8],[.8,.2]], means (0,2), variance 0.1
/// per state, r ~ Uniform(-1,1), and smooth noise from an SE-kernel GP whose
/// marginal variance is 0.1.
std::pair<SequenceDataset, GroundTruth> simulate_paper_experiment(
    std::uint64_t seed);

nlohmann::json ground_truth_to_json(const GroundTruth& truth);
GroundTruth ground_truth_from_json(const nlohmann::json& j);

}  // namespace mixhmm

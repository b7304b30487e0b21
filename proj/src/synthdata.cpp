#include "mixhmm/synthdata.hpp"

#include "engine.hpp"
#include "mixhmm/serialization.hpp"
#include "mixhmm/validation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace mixhmm {

using nlohmann::json;

namespace {

int categorical(const Vector& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double acc = 0.0;
  for (Eigen::Index k = 0; k < p.size(); ++k) {
    acc += p[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(p.size() - 1);  // guard against rounding at u ~ 1
}

Vector piecewise_doses(int n_times, const EffectsConfig& cfg,
                       std::mt19937_64& rng) {
  std::uniform_real_distribution<double> level(0.0, cfg.dose_max);
  const int segments = std::max(1, cfg.dose_segments);
  Vector doses(n_times);
  for (int s = 0; s < segments; ++s) {
    const int lo = n_times * s / segments;
    const int hi = n_times * (s + 1) / segments;
    const double d = level(rng);
    for (int t = lo; t < hi; ++t) doses[t] = d;
  }
  return doses;
}

}  // namespace

Matrix se_kernel_covariance(int n_times, double length_scale, double sigma) {
  if (n_times < 1 || length_scale <= 0.0 || sigma <= 0.0)
    throw std::invalid_argument(
        "se_kernel_covariance: need n_times >= 1 and positive scale/sigma");
  Matrix cov(n_times, n_times);
  const double s2 = sigma * sigma;
  const double denom = 2.0 * length_scale * length_scale;
  for (int s = 0; s < n_times; ++s)
    for (int t = 0; t < n_times; ++t) {
      const double dt = static_cast<double>(s - t);
      cov(s, t) = s2 * std::exp(-dt * dt / denom);
    }
  cov.diagonal().array() += 1e-8;  // jitter for the factorization
  return cov;
}

std::pair<SequenceDataset, GroundTruth> simulate(
    const ModelSpec& spec, const MixtureParameters& params,
    const EffectsConfig& effects, int n_sequences, int n_times,
    std::uint64_t seed, const NoiseConfig& noise) {
  if (n_sequences < 1 || n_times < 1)
    throw std::invalid_argument("simulate: need n_sequences, n_times >= 1");
  {
    auto violations = validate_parameters(params, spec);
    if (!violations.empty()) throw ValidationFailure(std::move(violations));
  }

  const Eigen::Index d_dim = spec.obs_dim;
  Matrix chol;  // lower factor of the GP covariance, shared by all sequences
  if (noise.kind == NoiseConfig::Kind::se_kernel)
    chol = Eigen::LLT<Matrix>(
               se_kernel_covariance(n_times, noise.length_scale, noise.sigma))
               .matrixL();

  SequenceDataset data;
  data.dim = d_dim;
  GroundTruth truth;
  truth.params = params;
  truth.r = Matrix::Zero(n_sequences, d_dim);
  truth.m = Matrix::Zero(n_sequences, d_dim);

  for (int i = 0; i < n_sequences; ++i) {
    std::mt19937_64 rng(
        detail::mix_seed(seed, static_cast<std::uint64_t>(i)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Fixed draw order: z, path, doses, r, m, noise, mask.
    const int z = categorical(params.alpha, rng);
    const HMMParameters& comp = params.components[static_cast<std::size_t>(z)];
    std::vector<int> path(static_cast<std::size_t>(n_times));
    path[0] = categorical(comp.pi, rng);
    for (int t = 1; t < n_times; ++t)
      path[static_cast<std::size_t>(t)] = categorical(
          comp.A.row(path[static_cast<std::size_t>(t - 1)]).transpose(), rng);

    Sequence s;
    s.id = std::to_string(i);
    s.inputs = spec.use_inputs ? piecewise_doses(n_times, effects, rng)
                               : Vector::Zero(n_times);
    if (spec.personal_state_offset) {
      std::uniform_real_distribution<double> r_draw(effects.r_low,
                                                    effects.r_high);
      for (Eigen::Index d = 0; d < d_dim; ++d) truth.r(i, d) = r_draw(rng);
    }
    if (spec.personal_input_effect) {
      std::uniform_real_distribution<double> m_draw(effects.m_low,
                                                    effects.m_high);
      for (Eigen::Index d = 0; d < d_dim; ++d) truth.m(i, d) = m_draw(rng);
    }

    Matrix eps(n_times, d_dim);
    if (noise.kind == NoiseConfig::Kind::iid) {
      for (int t = 0; t < n_times; ++t) {
        const int l = path[static_cast<std::size_t>(t)];
        for (Eigen::Index d = 0; d < d_dim; ++d)
          eps(t, d) = gauss(rng) * std::sqrt(comp.var(l, d));
      }
    } else {
      // One smooth GP draw per dimension for the whole sequence.
      for (Eigen::Index d = 0; d < d_dim; ++d) {
        Vector white(n_times);
        for (int t = 0; t < n_times; ++t) white[t] = gauss(rng);
        eps.col(d) = chol * white;
      }
    }

    s.observations = Matrix(n_times, d_dim);
    for (int t = 0; t < n_times; ++t) {
      const int l = path[static_cast<std::size_t>(t)];
      const double dose = s.inputs[t];
      for (Eigen::Index d = 0; d < d_dim; ++d)
        s.observations(t, d) = comp.mu(l, d) + truth.r(i, d) +
                               (comp.v(l, d) + truth.m(i, d)) * dose +
                               eps(t, d);
    }
    s.mask = BoolMatrix::Constant(n_times, d_dim, true);
    if (effects.missing_frac > 0.0)
      for (int t = 0; t < n_times; ++t)
        for (Eigen::Index d = 0; d < d_dim; ++d)
          if (unit(rng) < effects.missing_frac) s.mask(t, d) = false;

    data.sequences.push_back(std::move(s));
    truth.components.push_back(z);
    truth.paths.push_back(std::move(path));
  }
  return {std::move(data), std::move(truth)};
}

std::pair<SequenceDataset, GroundTruth> simulate_paper_experiment(
    std::uint64_t seed) {
  ModelSpec spec = ModelSpec::uniform(2, 2, 1);
  spec.personal_state_offset = true;

  MixtureParameters mix;
  mix.alpha = Vector::Constant(2, 0.5);
  HMMParameters comp;
  comp.pi = Vector::Constant(2, 0.5);
  comp.A = Matrix(2, 2);
  comp.A << 0.8, 0.2, 0.2, 0.8;
  comp.mu = Matrix(2, 1);
  comp.mu << 0.0, 2.0;
  comp.var = Matrix::Constant(2, 1, 0.1);
  comp.v = Matrix::Zero(2, 1);
  mix.components.push_back(comp);
  comp.A << 0.2, 0.8, 0.8, 0.2;
  mix.components.push_back(comp);

  NoiseConfig noise;
  noise.kind = NoiseConfig::Kind::se_kernel;
  noise.length_scale = 1.0;
  // Amplitude chosen so the marginal noise variance matches the generating
  // state variance 0.1.
  noise.sigma = std::sqrt(0.1);

  EffectsConfig effects;  // r ~ Uniform(-1, 1), no doses, no masking
  return simulate(spec, mix, effects, 200, 30, seed, noise);
}

json ground_truth_to_json(const GroundTruth& truth) {
  return json{{"params", mixture_to_json(truth.params)},
              {"components", truth.components},
              {"paths", truth.paths},
              {"r", matrix_to_json(truth.r)},
              {"m", matrix_to_json(truth.m)}};
}

GroundTruth ground_truth_from_json(const json& j) {
  GroundTruth truth;
  truth.params = mixture_from_json(j.at("params"));
  truth.components = j.at("components").get<std::vector<int>>();
  truth.paths = j.at("paths").get<std::vector<std::vector<int>>>();
  truth.r = matrix_from_json(j.at("r"), "truth.r");
  truth.m = matrix_from_json(j.at("m"), "truth.m");
  return truth;
}

}  // namespace mixhmm

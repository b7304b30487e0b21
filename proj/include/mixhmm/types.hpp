#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixhmm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;
using BoolVector = Eigen::Matrix<bool, Eigen::Dynamic, 1>;

// Emission variances are clamped to this floor everywhere they are estimated.
inline constexpr double kVarianceFloor = 1e-6;
// Simplex rows (pi, A rows, alpha) must sum to one within this at validation.
inline constexpr double kSimplexTol = 1e-12;
// Rows off by more than kSimplexTol but within this are renormalized on parse.
inline constexpr double kRenormTol = 1e-9;

/// Thrown by inference/fitting code on numerical failure (broken chains,
/// non-finite observations). Contract violations use std::invalid_argument.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One multivariate longitudinal record: a T x D observation matrix with an
/// entry-wise observed mask and a scalar input (dose) series.
struct Sequence {
  std::string id;
  Matrix observations;            // T x D; masked entries hold arbitrary values
  BoolMatrix mask;                // T x D; true = observed
  Vector inputs;                  // length T, >= 0; all-zero when doses absent
  std::optional<Vector> times;    // strictly increasing when present

  Eigen::Index length() const { return observations.rows(); }
  Eigen::Index dim() const { return observations.cols(); }

  /// Fully-observed sequence without inputs.
  static Sequence dense(std::string id, Matrix obs) {
    Sequence s;
    s.id = std::move(id);
    s.mask = BoolMatrix::Constant(obs.rows(), obs.cols(), true);
    s.inputs = Vector::Zero(obs.rows());
    s.observations = std::move(obs);
    return s;
  }
};

struct SequenceDataset {
  std::vector<Sequence> sequences;
  Eigen::Index dim = 0;

  std::size_t size() const { return sequences.size(); }

  Eigen::Index total_observed() const {
    Eigen::Index n = 0;
    for (const auto& s : sequences) n += s.mask.count();
    return n;
  }
};

/// Structural description of a model in the family: a K-component mixture
/// with L_k states each, optional scalar inputs and per-sequence effects.
struct ModelSpec {
  int n_components = 1;
  std::vector<int> states_per_component;
  int obs_dim = 0;
  bool use_inputs = false;             // state input effects v
  bool personal_state_offset = false;  // per-sequence offset r
  bool personal_input_effect = false;  // per-sequence input effect m (needs v)
  bool left_to_right = false;          // upper-triangular transition matrices
  double prior_var_r = 1.0;
  double prior_var_m = 1.0;

  int total_states() const {
    return std::accumulate(states_per_component.begin(),
                           states_per_component.end(), 0);
  }
  bool personalized() const {
    return personal_state_offset || personal_input_effect;
  }

  static ModelSpec uniform(int n_components, int states_each, int obs_dim) {
    ModelSpec s;
    s.n_components = n_components;
    s.states_per_component.assign(static_cast<std::size_t>(n_components),
                                  states_each);
    s.obs_dim = obs_dim;
    return s;
  }
};

/// Parameters of one HMM component (or of a flattened mixture): initial
/// distribution, transitions, and diagonal-Gaussian emissions with optional
/// per-state input effects.
struct HMMParameters {
  Vector pi;    // length L
  Matrix A;     // L x L, row-stochastic
  Matrix mu;    // L x D state means
  Matrix var;   // L x D diagonal variances
  Matrix v;     // L x D state input effects; zero matrix when inputs unused

  Eigen::Index n_states() const { return pi.size(); }
  Eigen::Index dim() const { return mu.cols(); }
};

struct MixtureParameters {
  Vector alpha;                          // length K mixing weights
  std::vector<HMMParameters> components;

  int n_components() const { return static_cast<int>(components.size()); }
};

/// Variational Gaussians over the per-sequence offsets r and m, stored
/// row-per-sequence. All-zero (mean and variance) when the flag is off.
struct PersonalEffects {
  std::vector<std::string> ids;  // aligned with the training dataset
  Matrix r_mean, r_var;          // N x D
  Matrix m_mean, m_var;          // N x D

  std::size_t size() const { return ids.size(); }

  static PersonalEffects zeros(const SequenceDataset& data) {
    PersonalEffects e;
    const auto n = static_cast<Eigen::Index>(data.size());
    e.ids.reserve(data.size());
    for (const auto& s : data.sequences) e.ids.push_back(s.id);
    e.r_mean = Matrix::Zero(n, data.dim);
    e.r_var = Matrix::Zero(n, data.dim);
    e.m_mean = Matrix::Zero(n, data.dim);
    e.m_var = Matrix::Zero(n, data.dim);
    return e;
  }
};

/// Everything a fit produces: parameters, effects, the objective trace
/// (log-likelihood for EM, ELBO for variational fits), decoded paths over
/// flattened states and the component label of each sequence.
struct FitResult {
  ModelSpec spec;
  MixtureParameters params;
  PersonalEffects effects;
  std::vector<double> objective_trace;
  double loglik = 0.0;
  double map_loglik = 0.0;  // joint log-probability of the Viterbi paths
  std::vector<std::vector<int>> paths;
  std::vector<int> labels;
  int n_iters = 0;
  bool converged = false;
};

}  // namespace mixhmm

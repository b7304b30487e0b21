#pragma once

// Shared fixtures and independent oracles. The oracles re-derive everything
// from first principles (direct density formulas, exhaustive path
// enumeration) with none of the library's inference code, so agreement is
// meaningful evidence.

#include "mixhmm/inference.hpp"
#include "mixhmm/types.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace testutil {

/// Scratch directory removed on destruction; names are unique per process
/// run so parallel test invocations cannot collide.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    const auto stamp =
        std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            ("mixhmm-" + tag + "-" + std::to_string(stamp) + "-" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

using mixhmm::BoolMatrix;
using mixhmm::HMMParameters;
using mixhmm::Matrix;
using mixhmm::MixtureParameters;
using mixhmm::Sequence;
using mixhmm::SequenceDataset;
using mixhmm::SequenceOffsets;
using mixhmm::Vector;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

inline double logsumexp(const std::vector<double>& xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

inline Vector random_simplex(Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  Vector p(n);
  for (Eigen::Index i = 0; i < n; ++i) p[i] = u(rng);
  return p / p.sum();
}

inline Matrix random_stochastic(Eigen::Index n, std::mt19937_64& rng) {
  Matrix a(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    a.row(r) = random_simplex(n, rng).transpose();
  return a;
}

inline HMMParameters random_hmm(Eigen::Index n_states, Eigen::Index dim,
                                bool with_v, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> mu_draw(-3.0, 3.0);
  std::uniform_real_distribution<double> var_draw(0.2, 2.0);
  std::uniform_real_distribution<double> v_draw(-1.0, 1.0);
  HMMParameters p;
  p.pi = random_simplex(n_states, rng);
  p.A = random_stochastic(n_states, rng);
  p.mu = Matrix(n_states, dim);
  p.var = Matrix(n_states, dim);
  p.v = Matrix::Zero(n_states, dim);
  for (Eigen::Index l = 0; l < n_states; ++l)
    for (Eigen::Index d = 0; d < dim; ++d) {
      p.mu(l, d) = mu_draw(rng);
      p.var(l, d) = var_draw(rng);
      if (with_v) p.v(l, d) = v_draw(rng);
    }
  return p;
}

inline MixtureParameters random_mixture(int n_components,
                                        const std::vector<int>& states,
                                        Eigen::Index dim, bool with_v,
                                        std::mt19937_64& rng) {
  MixtureParameters mix;
  mix.alpha = random_simplex(n_components, rng);
  for (int k = 0; k < n_components; ++k)
    mix.components.push_back(
        random_hmm(states[static_cast<std::size_t>(k)], dim, with_v, rng));
  return mix;
}

inline Sequence random_sequence(std::string id, Eigen::Index t_len,
                                Eigen::Index dim, double missing_frac,
                                bool with_doses, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> y_draw(-4.0, 4.0);
  std::uniform_real_distribution<double> dose_draw(0.0, 2.0);
  Sequence s;
  s.id = std::move(id);
  s.observations = Matrix(t_len, dim);
  s.mask = BoolMatrix::Constant(t_len, dim, true);
  s.inputs = Vector::Zero(t_len);
  for (Eigen::Index t = 0; t < t_len; ++t) {
    if (with_doses) s.inputs[t] = dose_draw(rng);
    for (Eigen::Index d = 0; d < dim; ++d) {
      s.observations(t, d) = y_draw(rng);
      if (unit(rng) < missing_frac) s.mask(t, d) = false;
    }
  }
  return s;
}

inline SequenceDataset random_dataset(std::size_t n, Eigen::Index t_len,
                                      Eigen::Index dim, double missing_frac,
                                      bool with_doses, std::mt19937_64& rng) {
  SequenceDataset data;
  data.dim = dim;
  for (std::size_t i = 0; i < n; ++i)
    data.sequences.push_back(random_sequence(std::to_string(i), t_len, dim,
                                             missing_frac, with_doses, rng));
  return data;
}

// ---- oracles ----

/// Direct expected Gaussian log-density, written independently of the
/// library's emission code.
inline double oracle_emission(const Vector& y,
                              const Eigen::Matrix<bool, Eigen::Dynamic, 1>& mask,
                              double dose, const Vector& mu, const Vector& var,
                              const Vector& v, const SequenceOffsets& off) {
  double lp = 0.0;
  for (Eigen::Index d = 0; d < y.size(); ++d) {
    if (!mask[d]) continue;
    double mean = mu[d] + v[d] * dose;
    if (off.r_mean.size() > 0) mean += off.r_mean[d];
    if (off.m_mean.size() > 0) mean += off.m_mean[d] * dose;
    lp += -0.5 * std::log(kTwoPi * var[d]) -
          0.5 * (y[d] - mean) * (y[d] - mean) / var[d];
    if (off.r_var.size() > 0) lp -= 0.5 * off.r_var[d] / var[d];
    if (off.m_var.size() > 0) lp -= 0.5 * dose * dose * off.m_var[d] / var[d];
  }
  return lp;
}

/// Log-joint of one complete path, -inf when the path uses a zero entry.
inline double oracle_path_logp(const Sequence& seq, const HMMParameters& p,
                               const SequenceOffsets& off,
                               const std::vector<int>& path) {
  double lp = p.pi[path[0]] > 0.0
                  ? std::log(p.pi[path[0]])
                  : -std::numeric_limits<double>::infinity();
  for (std::size_t t = 1; t < path.size(); ++t) {
    const double a = p.A(path[t - 1], path[t]);
    lp += a > 0.0 ? std::log(a) : -std::numeric_limits<double>::infinity();
  }
  for (std::size_t t = 0; t < path.size(); ++t)
    lp += oracle_emission(seq.observations.row(static_cast<Eigen::Index>(t))
                              .transpose(),
                          seq.mask.row(static_cast<Eigen::Index>(t))
                              .transpose(),
                          seq.inputs[static_cast<Eigen::Index>(t)],
                          p.mu.row(path[t]).transpose(),
                          p.var.row(path[t]).transpose(),
                          p.v.row(path[t]).transpose(), off);
  return lp;
}

/// Marginal log-likelihood by exhaustive enumeration of all L^T paths.
inline double oracle_loglik(const Sequence& seq, const HMMParameters& p,
                            const SequenceOffsets& off = {}) {
  const auto t_len = static_cast<std::size_t>(seq.length());
  const int n_states = static_cast<int>(p.n_states());
  std::vector<int> path(t_len, 0);
  std::vector<double> logps;
  for (;;) {
    const double lp = oracle_path_logp(seq, p, off, path);
    if (std::isfinite(lp)) logps.push_back(lp);
    std::size_t t = t_len;
    while (t > 0 && ++path[t - 1] == n_states) path[--t] = 0;
    if (t == 0) break;
  }
  return logsumexp(logps);
}

/// Brute-force most-probable path; enumeration is lexicographic and keeps
/// strict improvements, matching no particular tie rule (callers use
/// tie-free random instances).
inline std::pair<std::vector<int>, double> oracle_viterbi(
    const Sequence& seq, const HMMParameters& p,
    const SequenceOffsets& off = {}) {
  const auto t_len = static_cast<std::size_t>(seq.length());
  const int n_states = static_cast<int>(p.n_states());
  std::vector<int> path(t_len, 0), best_path(t_len, 0);
  double best = -std::numeric_limits<double>::infinity();
  for (;;) {
    const double lp = oracle_path_logp(seq, p, off, path);
    if (lp > best) {
      best = lp;
      best_path = path;
    }
    std::size_t t = t_len;
    while (t > 0 && ++path[t - 1] == n_states) path[--t] = 0;
    if (t == 0) break;
  }
  return {best_path, best};
}

}  // namespace testutil

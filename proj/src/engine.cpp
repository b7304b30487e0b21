#include "engine.hpp"

#include "mixhmm/mixture.hpp"
#include "mixhmm/validation.hpp"
#include "mixhmm/variational.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

namespace mixhmm::detail {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 over seed + stream * golden-ratio increment; adjacent streams
  // land far apart in state space.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void parallel_for(std::size_t n, int n_threads,
                  const std::function<void(std::size_t)>& fn) {
  std::size_t workers =
      n_threads <= 0 ? std::max(1u, std::thread::hardware_concurrency())
                     : static_cast<std::size_t>(n_threads);
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

SequenceOffsets offsets_for(const PersonalEffects& effects, std::size_t i,
                            const ModelSpec& spec, bool corrections) {
  SequenceOffsets o;
  const auto row = static_cast<Eigen::Index>(i);
  if (spec.personal_state_offset) {
    o.r_mean = effects.r_mean.row(row).transpose();
    if (corrections) o.r_var = effects.r_var.row(row).transpose();
  }
  if (spec.personal_input_effect) {
    o.m_mean = effects.m_mean.row(row).transpose();
    if (corrections) o.m_var = effects.m_var.row(row).transpose();
  }
  return o;
}

double kl_gaussian_sum(const Matrix& mean, const Matrix& var,
                       double prior_var) {
  double kl = 0.0;
  for (Eigen::Index i = 0; i < mean.rows(); ++i)
    for (Eigen::Index d = 0; d < mean.cols(); ++d)
      kl += 0.5 * ((mean(i, d) * mean(i, d) + var(i, d)) / prior_var - 1.0 -
                   std::log(var(i, d) / prior_var));
  return kl;
}

std::vector<Posteriors> posteriors_under_effects(const SequenceDataset& data,
                                                 const HMMParameters& flat,
                                                 const ModelSpec& spec,
                                                 const PersonalEffects& effects,
                                                 bool corrections,
                                                 int n_threads) {
  std::vector<Posteriors> post(data.size());
  parallel_for(data.size(), n_threads, [&](std::size_t i) {
    post[i] = forward_backward(data.sequences[i], flat,
                               offsets_for(effects, i, spec, corrections));
  });
  return post;
}

HMMParameters m_step_under_effects(const SequenceDataset& data,
                                   const std::vector<Posteriors>& posteriors,
                                   const ModelSpec& spec,
                                   const HMMParameters& previous,
                                   const PersonalEffects& effects,
                                   double variance_floor) {
  const Eigen::Index n_states = previous.n_states();
  const Eigen::Index d_dim = previous.dim();
  HMMParameters next = previous;  // dead states/rows keep previous values

  Vector pi_acc = Vector::Zero(n_states);
  for (const auto& p : posteriors) pi_acc += p.gamma.row(0).transpose();
  next.pi = pi_acc / pi_acc.sum();

  Matrix a_acc = Matrix::Zero(n_states, n_states);
  for (const auto& p : posteriors)
    for (const auto& slice : p.xi) a_acc += slice;
  for (Eigen::Index j = 0; j < n_states; ++j) {
    const double row_sum = a_acc.row(j).sum();
    // Structural zeros stay exact: their accumulated mass is exactly 0.
    if (row_sum >= kSimplexTol) next.A.row(j) = a_acc.row(j) / row_sum;
  }

  // Weighted sufficient statistics per (state, dimension) for the 2x2
  // normal equations in (mu, v), against dose-adjusted targets.
  Matrix sw = Matrix::Zero(n_states, d_dim);
  Matrix s_d = sw, s_dd = sw, s_y = sw, s_yd = sw;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Sequence& seq = data.sequences[i];
    const Matrix& gamma = posteriors[i].gamma;
    const auto row = static_cast<Eigen::Index>(i);
    for (Eigen::Index t = 0; t < seq.length(); ++t) {
      const double dose = seq.inputs(t);
      for (Eigen::Index d = 0; d < d_dim; ++d) {
        if (!seq.mask(t, d)) continue;
        const double target = seq.observations(t, d) - effects.r_mean(row, d) -
                              effects.m_mean(row, d) * dose;
        for (Eigen::Index l = 0; l < n_states; ++l) {
          const double g = gamma(t, l);
          if (g == 0.0) continue;
          sw(l, d) += g;
          s_d(l, d) += g * dose;
          s_dd(l, d) += g * dose * dose;
          s_y(l, d) += g * target;
          s_yd(l, d) += g * target * dose;
        }
      }
    }
  }

  for (Eigen::Index l = 0; l < n_states; ++l) {
    for (Eigen::Index d = 0; d < d_dim; ++d) {
      if (sw(l, d) < kSimplexTol) continue;  // no responsibility: keep previous
      double mean = 0.0, slope = 0.0;
      bool solved = false;
      if (spec.use_inputs && s_dd(l, d) >= kSimplexTol) {
        const double det = sw(l, d) * s_dd(l, d) - s_d(l, d) * s_d(l, d);
        if (det > 1e-12 * sw(l, d) * s_dd(l, d)) {
          mean = (s_dd(l, d) * s_y(l, d) - s_d(l, d) * s_yd(l, d)) / det;
          slope = (sw(l, d) * s_yd(l, d) - s_d(l, d) * s_y(l, d)) / det;
          solved = true;
        }
      }
      if (!solved) mean = s_y(l, d) / sw(l, d);  // degenerate dose: v = 0
      next.mu(l, d) = mean;
      next.v(l, d) = slope;
    }
  }

  // Second pass: weighted squared residuals, widened by the effect
  // uncertainties (exactly the terms the expected log-density subtracts).
  Matrix sq = Matrix::Zero(n_states, d_dim);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Sequence& seq = data.sequences[i];
    const Matrix& gamma = posteriors[i].gamma;
    const auto row = static_cast<Eigen::Index>(i);
    for (Eigen::Index t = 0; t < seq.length(); ++t) {
      const double dose = seq.inputs(t);
      for (Eigen::Index d = 0; d < d_dim; ++d) {
        if (!seq.mask(t, d)) continue;
        const double target = seq.observations(t, d) - effects.r_mean(row, d) -
                              effects.m_mean(row, d) * dose;
        const double widen =
            effects.r_var(row, d) + dose * dose * effects.m_var(row, d);
        for (Eigen::Index l = 0; l < n_states; ++l) {
          const double g = gamma(t, l);
          if (g == 0.0) continue;
          const double resid = target - next.mu(l, d) - next.v(l, d) * dose;
          sq(l, d) += g * (resid * resid + widen);
        }
      }
    }
  }
  for (Eigen::Index l = 0; l < n_states; ++l)
    for (Eigen::Index d = 0; d < d_dim; ++d)
      if (sw(l, d) >= kSimplexTol)
        next.var(l, d) = std::max(variance_floor, sq(l, d) / sw(l, d));

  return next;
}

namespace {

struct RestartState {
  HMMParameters flat;
  PersonalEffects effects;
  std::vector<Posteriors> posteriors;
  std::vector<double> trace;
  bool converged = false;
};

RestartState run_restart(const SequenceDataset& data, const ModelSpec& spec,
                         const FitOptions& options, std::uint64_t seed) {
  const bool use_r = spec.personal_state_offset;
  const bool use_m = spec.personal_input_effect;
  const bool personalized = use_r || use_m;

  RestartState s;
  s.flat =
      build_block_diagonal(initialize(data, spec, seed, options.init_strategy));
  s.effects = PersonalEffects::zeros(data);
  if (use_r) s.effects.r_var.setConstant(spec.prior_var_r);
  if (use_m) s.effects.m_var.setConstant(spec.prior_var_m);

  const int max_iters = std::max(1, options.max_iters);
  double prev_obj = 0.0;
  for (int iter = 0; iter < max_iters; ++iter) {
    s.posteriors = posteriors_under_effects(data, s.flat, spec, s.effects,
                                            personalized, options.n_threads);
    double obj = 0.0;
    for (const auto& p : s.posteriors) obj += p.loglik;
    if (use_r)
      obj -= kl_gaussian_sum(s.effects.r_mean, s.effects.r_var,
                             spec.prior_var_r);
    if (use_m)
      obj -= kl_gaussian_sum(s.effects.m_mean, s.effects.m_var,
                             spec.prior_var_m);
    s.trace.push_back(obj);
    if (iter > 0 &&
        std::abs(obj - prev_obj) / std::max(1.0, std::abs(prev_obj)) <
            options.rel_tol) {
      s.converged = true;
      break;
    }
    prev_obj = obj;
    // Stop here on the last allowed sweep so the returned parameters are the
    // ones the recorded objective was measured at.
    if (iter + 1 == max_iters) break;

    if (use_r) {
      for (std::size_t i = 0; i < data.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        const Vector m_mean =
            use_m ? Vector(s.effects.m_mean.row(row).transpose()) : Vector();
        auto [mean, var] =
            update_personal_offsets(data.sequences[i], s.posteriors[i], s.flat,
                                    spec.prior_var_r, m_mean);
        s.effects.r_mean.row(row) = mean.transpose();
        s.effects.r_var.row(row) = var.transpose();
      }
    }
    if (use_m) {
      for (std::size_t i = 0; i < data.size(); ++i) {
        const auto row = static_cast<Eigen::Index>(i);
        const Vector r_mean =
            use_r ? Vector(s.effects.r_mean.row(row).transpose()) : Vector();
        auto [mean, var] = update_personal_input_effects(
            data.sequences[i], s.posteriors[i], s.flat, spec.prior_var_m,
            r_mean);
        s.effects.m_mean.row(row) = mean.transpose();
        s.effects.m_var.row(row) = var.transpose();
      }
    }

    s.flat = m_step_under_effects(data, s.posteriors, spec, s.flat, s.effects,
                                  options.variance_floor);
    if (use_r) {
      // Absorb the mean offset into the state means; pure reparameterization
      // for the likelihood and strictly smaller KL, so still an ascent step.
      const Vector center =
          s.effects.r_mean.colwise().mean().transpose();
      s.flat.mu.rowwise() += center.transpose();
      s.effects.r_mean.rowwise() -= center.transpose();
    }
  }
  return s;
}

}  // namespace

FitResult run_fit(const SequenceDataset& data, const ModelSpec& spec,
                  const FitOptions& options) {
  std::vector<Violation> violations = validate_dataset(data);
  {
    auto sv = validate_spec(spec);
    violations.insert(violations.end(), sv.begin(), sv.end());
  }
  if (data.dim > 0 && spec.obs_dim > 0 && spec.obs_dim != data.dim)
    violations.push_back({"spec", "obs_dim",
                          "model dimension " + std::to_string(spec.obs_dim) +
                              " does not match dataset dimension " +
                              std::to_string(data.dim)});
  if (!violations.empty()) throw ValidationFailure(std::move(violations));

  const int n_restarts = std::max(1, options.n_restarts);
  RestartState best;
  double best_obj = -std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < n_restarts; ++restart) {
    RestartState s = run_restart(
        data, spec, options,
        mix_seed(options.seed, static_cast<std::uint64_t>(restart)));
    // Strict comparison: ties keep the earlier restart.
    if (s.trace.back() > best_obj) {
      best_obj = s.trace.back();
      best = std::move(s);
    }
  }

  FitResult result;
  result.spec = spec;
  result.objective_trace = std::move(best.trace);
  result.n_iters = static_cast<int>(result.objective_trace.size());
  result.converged = best.converged;
  result.effects = std::move(best.effects);

  // Decode and report likelihoods with the effect means plugged in (no
  // variance corrections: these are statements about the returned point
  // estimates, not the variational bound).
  const auto n = data.size();
  std::vector<DecodedPath> paths(n);
  std::vector<double> logliks(n);
  parallel_for(n, options.n_threads, [&](std::size_t i) {
    const SequenceOffsets o = offsets_for(result.effects, i, spec, false);
    paths[i] = viterbi(data.sequences[i], best.flat, o);
    logliks[i] = sequence_log_likelihood(data.sequences[i], best.flat, o);
  });
  result.paths.reserve(n);
  for (const auto& p : paths) {
    result.map_loglik += p.map_loglik;
    result.paths.push_back(p.states);
  }
  for (double ll : logliks) result.loglik += ll;

  const BlockMap map = BlockMap::from_spec(spec);
  result.labels = assign_clusters(paths, map);
  result.params = extract_components(best.flat, map, result.labels);
  if (options.alpha_from_posterior) {
    Vector alpha = posterior_component_masses(best.posteriors, map);
    for (Eigen::Index k = 0; k < alpha.size(); ++k)
      alpha(k) = std::max(alpha(k), 1e-6);  // same guard as hard counts
    result.params.alpha = alpha / alpha.sum();
  }
  return result;
}

}  // namespace mixhmm::detail

// Acceptance gate: one PASS/FAIL line per criterion, exit code = number of
// failed criteria. Heavier statistical checks (synthetic recovery, model
// selection) run real fits, so this binary takes several minutes.
#include "helpers.hpp"

#include "mixhmm/em.hpp"
#include "mixhmm/inference.hpp"
#include "mixhmm/mixture.hpp"
#include "mixhmm/report.hpp"
#include "mixhmm/selection.hpp"
#include "mixhmm/synthdata.hpp"
#include "mixhmm/types.hpp"
#include "mixhmm/variational.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

using namespace mixhmm;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

template <typename F>
Outcome guarded(F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {false, std::string("unexpected exception: ") + e.what()};
  }
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

ModelSpec personalized_spec(int n_components, int n_states) {
  ModelSpec spec = ModelSpec::uniform(n_components, n_states, 1);
  spec.personal_state_offset = true;
  return spec;
}

FitOptions benchmark_options(int restarts) {
  FitOptions options;
  options.n_restarts = restarts;
  options.max_iters = 200;
  options.seed = 0;
  options.n_threads = 0;  // all cores
  return options;
}

// Criteria 1 and 3 share five personalized fits of the synthetic benchmark.
struct SeedScan {
  int params_ok = 0;       // seeds with A/mu/var inside tolerance
  int purity_ok = 0;       // seeds with aligned label purity >= 0.95
  double worst_a = 0.0;    // max elementwise errors across all seeds
  double worst_mu = 0.0;
  double worst_var = 0.0;
  double min_purity = 1.0;
  double max_seconds = 0.0;
};

SeedScan run_seed_scan() {
  SeedScan scan;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto [data, truth] = simulate_paper_experiment(seed);
    const auto start = std::chrono::steady_clock::now();
    const FitResult fit_result =
        fit_personalized(data, personalized_spec(2, 2), benchmark_options(20));
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    scan.max_seconds = std::max(scan.max_seconds, seconds);

    const Alignment alignment =
        align_parameters(fit_result.params, truth.params);
    double err_a = 0.0, err_mu = 0.0, err_var = 0.0;
    for (std::size_t k = 0; k < 2; ++k) {
      const auto& got = alignment.aligned.components[k];
      const auto& want = truth.params.components[k];
      err_a = std::max(err_a, max_abs_diff(got.A, want.A));
      err_mu = std::max(err_mu, max_abs_diff(got.mu, want.mu));
      err_var = std::max(err_var, max_abs_diff(got.var, want.var));
    }
    scan.worst_a = std::max(scan.worst_a, err_a);
    scan.worst_mu = std::max(scan.worst_mu, err_mu);
    scan.worst_var = std::max(scan.worst_var, err_var);
    if (err_a <= 0.05 && err_mu <= 0.15 && err_var <= 0.05) ++scan.params_ok;

    // aligned.components[k] is fitted component component_perm[k], so fitted
    // label l plays the role of reference component inverse[l].
    std::vector<int> inverse(alignment.component_perm.size());
    for (std::size_t k = 0; k < inverse.size(); ++k)
      inverse[static_cast<std::size_t>(alignment.component_perm[k])] =
          static_cast<int>(k);
    int agree = 0;
    for (std::size_t i = 0; i < fit_result.labels.size(); ++i)
      if (inverse[static_cast<std::size_t>(fit_result.labels[i])] ==
          truth.components[i])
        ++agree;
    const double purity =
        static_cast<double>(agree) / static_cast<double>(data.size());
    scan.min_purity = std::min(scan.min_purity, purity);
    if (purity >= 0.95) ++scan.purity_ok;
  }
  return scan;
}

Outcome criterion_recovery(const SeedScan& scan) {
  std::ostringstream out;
  out << std::setprecision(3) << scan.params_ok
      << "/5 seeds inside |dA|<=0.05, |dmu|<=0.15, |dvar|<=0.05 "
      << "(worst errors " << scan.worst_a << ", " << scan.worst_mu << ", "
      << scan.worst_var << "); slowest seed " << std::setprecision(4)
      << scan.max_seconds << "s (limit 300s)";
  return {scan.params_ok >= 4 && scan.max_seconds < 300.0, out.str()};
}

Outcome criterion_purity(const SeedScan& scan) {
  std::ostringstream out;
  out << std::setprecision(4) << scan.purity_ok
      << "/5 seeds with aligned label purity >= 0.95 (min purity "
      << scan.min_purity << ")";
  return {scan.purity_ok >= 4, out.str()};
}

Outcome criterion_single_model() {
  auto [data, truth] = simulate_paper_experiment(2);
  (void)truth;

  const FitResult two =
      fit_personalized(data, personalized_spec(1, 2), benchmark_options(10));
  const double row_err =
      (two.params.components[0].A - Matrix::Constant(2, 2, 0.5))
          .cwiseAbs()
          .maxCoeff();

  const FitResult four =
      fit_personalized(data, personalized_spec(1, 4), benchmark_options(20));
  std::vector<double> means;
  for (Eigen::Index l = 0; l < 4; ++l)
    means.push_back(four.params.components[0].mu(l, 0));
  std::sort(means.begin(), means.end());
  const bool pairs_ok = std::abs(means[0]) <= 0.4 && std::abs(means[1]) <= 0.4 &&
                        std::abs(means[2] - 2.0) <= 0.4 &&
                        std::abs(means[3] - 2.0) <= 0.4;

  std::ostringstream out;
  out << std::setprecision(3) << "K=1 rows max |a-0.5| = " << row_err
      << " (limit 0.08); 4-state sorted means";
  for (double m : means) out << ' ' << m;
  out << " vs (0, 0, 2, 2) +/- 0.4";
  return {row_err <= 0.08 && pairs_ok, out.str()};
}

Outcome criterion_oracle_equivalence() {
  std::mt19937_64 rng(2024);
  double max_ll_err = 0.0;
  int path_mismatches = 0;
  for (int i = 0; i < 200; ++i) {
    const Eigen::Index n_states = 1 + i % 3;
    const Eigen::Index dim = 1 + i % 2;
    const Eigen::Index t_len = 2 + i % 3;
    const HMMParameters p = testutil::random_hmm(n_states, dim, true, rng);
    const Sequence seq =
        testutil::random_sequence("s", t_len, dim, 0.25, true, rng);
    const double ll =
        sequence_log_likelihood(seq, p, SequenceOffsets::none());
    max_ll_err =
        std::max(max_ll_err, std::abs(ll - testutil::oracle_loglik(seq, p)));
    const DecodedPath decoded = viterbi(seq, p, SequenceOffsets::none());
    if (decoded.states != testutil::oracle_viterbi(seq, p).first)
      ++path_mismatches;
  }
  std::ostringstream out;
  out << std::setprecision(3) << "200 instances: max |loglik - enumeration| = "
      << max_ll_err << " (limit 1e-10), " << path_mismatches
      << " Viterbi path mismatches (limit 0)";
  return {max_ll_err <= 1e-10 && path_mismatches == 0, out.str()};
}

double min_trace_step(const std::vector<double>& trace) {
  double worst = 0.0;
  for (std::size_t j = 1; j < trace.size(); ++j)
    worst = std::min(worst, trace[j] - trace[j - 1]);
  return worst;
}

Outcome criterion_monotonicity() {
  std::mt19937_64 rng(77);
  double worst_em = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Eigen::Index dim = 1 + i % 2;
    const auto data = testutil::random_dataset(6, 8, dim, 0.2, true, rng);
    ModelSpec spec = ModelSpec::uniform(1 + i % 2, 2, static_cast<int>(dim));
    if (i % 3 == 0) spec.use_inputs = true;
    FitOptions options;
    options.n_restarts = 1;
    options.max_iters = 15;
    options.rel_tol = 0.0;
    options.seed = static_cast<std::uint64_t>(i);
    worst_em =
        std::min(worst_em, min_trace_step(fit(data, spec, options)
                                              .objective_trace));
  }

  double worst_vem = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Eigen::Index dim = 1 + i % 2;
    const auto data = testutil::random_dataset(6, 8, dim, 0.2, true, rng);
    ModelSpec spec = ModelSpec::uniform(1 + i % 2, 2, static_cast<int>(dim));
    spec.personal_state_offset = true;
    if (i % 2 == 0) {
      spec.use_inputs = true;
      spec.personal_input_effect = true;
    }
    FitOptions options;
    options.n_restarts = 1;
    options.max_iters = 10;
    options.rel_tol = 0.0;
    options.seed = static_cast<std::uint64_t>(i);
    worst_vem = std::min(
        worst_vem,
        min_trace_step(fit_personalized(data, spec, options).objective_trace));
  }

  std::ostringstream out;
  out << std::setprecision(3) << "worst EM step " << worst_em
      << " over 100 traces (limit -1e-8); worst ELBO step " << worst_vem
      << " over 50 traces (limit -1e-6)";
  return {worst_em >= -1e-8 && worst_vem >= -1e-6, out.str()};
}

Outcome criterion_block_diagonal() {
  std::mt19937_64 rng(31);
  double max_err = 0.0;
  int crossings = 0;
  for (int i = 0; i < 100; ++i) {
    const int n_components = 1 + i % 3;
    const std::vector<int> states(static_cast<std::size_t>(n_components),
                                  1 + (i / 3) % 3);
    const Eigen::Index dim = 1 + i % 2;
    const MixtureParameters mix =
        testutil::random_mixture(n_components, states, dim, true, rng);
    const Sequence seq = testutil::random_sequence("s", 6, dim, 0.2, true, rng);
    const HMMParameters flat = build_block_diagonal(mix);

    const double flat_ll =
        sequence_log_likelihood(seq, flat, SequenceOffsets::none());
    std::vector<double> terms;
    for (int k = 0; k < n_components; ++k)
      terms.push_back(std::log(mix.alpha(k)) +
                      sequence_log_likelihood(
                          seq, mix.components[static_cast<std::size_t>(k)],
                          SequenceOffsets::none()));
    max_err = std::max(max_err, std::abs(flat_ll - testutil::logsumexp(terms)));

    const auto path = viterbi(seq, flat, SequenceOffsets::none()).states;
    const BlockMap map = BlockMap::from_mixture(mix);
    for (int state : path)
      if (map.component_of(state) != map.component_of(path.front()))
        ++crossings;
  }
  std::ostringstream out;
  out << std::setprecision(3)
      << "100 mixtures: max |flat - logsumexp| = " << max_err
      << " (limit 1e-9), " << crossings << " block crossings (limit 0)";
  return {max_err <= 1e-9 && crossings == 0, out.str()};
}

Outcome criterion_criteria_algebra() {
  const int k8 = count_free_parameters(ModelSpec::uniform(1, 8, 59));
  const int k16 = count_free_parameters(ModelSpec::uniform(1, 16, 59));
  const bool pins = k8 == 1479 && k16 == 3087;

  std::mt19937_64 rng(5);
  bool inequalities = true;
  for (int i = 0; i < 20 && inequalities; ++i) {
    const auto data = testutil::random_dataset(10, 6, 1, 0.1, true, rng);
    const ModelSpec spec = ModelSpec::uniform(1 + i % 2, 2, 1);
    FitOptions options;
    options.n_restarts = 1;
    options.max_iters = 10;
    options.seed = static_cast<std::uint64_t>(i);
    const FitResult fit_result = fit(data, spec, options);
    const Criteria at_n = criteria(fit_result, spec, data.size());  // N = 10
    const Criteria at_7 = criteria(fit_result, spec, 7);
    inequalities = at_n.icl >= at_n.aic - 1e-9 &&
                   at_n.bic >= at_n.aic - 1e-9 && at_7.bic < at_7.aic;
  }

  const auto data = simulate_paper_experiment(2).first;
  SelectOptions options;
  options.fit = benchmark_options(20);
  const SelectionTable table =
      select(data, personalized_spec(1, 2), {1, 2, 3}, options);

  std::ostringstream out;
  out << "k(L=8,D=59) = " << k8 << ", k(L=16,D=59) = " << k16
      << " (want 1479, 3087); ICL/BIC orderings "
      << (inequalities ? "hold" : "violated") << "; K sweep over {1,2,3} chose "
      << table.chosen_icl << " by ICL (want 2)";
  return {pins && inequalities && table.chosen_icl == 2, out.str()};
}

Outcome criterion_missing_data() {
  std::mt19937_64 rng(13);
  double max_reduced_err = 0.0;
  bool invariant = true;
  for (int i = 0; i < 50; ++i) {
    const Eigen::Index n_states = 1 + i % 3;
    const Eigen::Index dim = 2 + i % 2;
    const HMMParameters p = testutil::random_hmm(n_states, dim, true, rng);
    const Sequence seq =
        testutil::random_sequence("s", 5, dim, 0.35, true, rng);

    // Masked density must equal the density of the explicitly reduced model.
    for (Eigen::Index t = 0; t < seq.length(); ++t) {
      const Vector y = seq.observations.row(t).transpose();
      const BoolVector mask = seq.mask.row(t).transpose();
      const double dose = seq.inputs(t);
      const auto n_obs = mask.count();
      for (Eigen::Index l = 0; l < n_states; ++l) {
        const Vector mu = p.mu.row(l).transpose();
        const Vector var = p.var.row(l).transpose();
        const Vector v = p.v.row(l).transpose();
        const double full = emission_log_density(y, mask, dose, mu, var, v,
                                                 SequenceOffsets::none());
        Vector y_r(n_obs), mu_r(n_obs), var_r(n_obs), v_r(n_obs);
        const BoolVector mask_r = BoolVector::Constant(n_obs, true);
        Eigen::Index j = 0;
        for (Eigen::Index d = 0; d < dim; ++d) {
          if (!mask(d)) continue;
          y_r(j) = y(d);
          mu_r(j) = mu(d);
          var_r(j) = var(d);
          v_r(j) = v(d);
          ++j;
        }
        const double reduced = emission_log_density(
            y_r, mask_r, dose, mu_r, var_r, v_r, SequenceOffsets::none());
        max_reduced_err = std::max(max_reduced_err, std::abs(full - reduced));
      }
    }

    // Perturbing masked entries must change nothing, bit for bit.
    Sequence perturbed = seq;
    for (Eigen::Index t = 0; t < seq.length(); ++t)
      for (Eigen::Index d = 0; d < dim; ++d)
        if (!seq.mask(t, d))
          perturbed.observations(t, d) = 1e6 + 13.0 * static_cast<double>(t + d);
    const Posteriors a = forward_backward(seq, p, SequenceOffsets::none());
    const Posteriors b = forward_backward(perturbed, p, SequenceOffsets::none());
    invariant = invariant && a.loglik == b.loglik && a.gamma == b.gamma &&
                viterbi(seq, p, SequenceOffsets::none()).states ==
                    viterbi(perturbed, p, SequenceOffsets::none()).states;
  }
  std::ostringstream out;
  out << std::setprecision(3)
      << "50 instances: max |masked - reduced-model| = " << max_reduced_err
      << " (limit 1e-12); masked perturbations "
      << (invariant ? "change nothing" : "changed an output");
  return {max_reduced_err <= 1e-12 && invariant, out.str()};
}

Outcome criterion_input_effect_recovery() {
  ModelSpec spec = ModelSpec::uniform(1, 2, 3);
  spec.use_inputs = true;
  MixtureParameters truth;
  truth.alpha = Vector::Ones(1);
  HMMParameters c;
  c.pi = Vector(2);
  c.pi << 0.6, 0.4;
  c.A = Matrix(2, 2);
  c.A << 0.7, 0.3, 0.4, 0.6;
  c.mu = Matrix(2, 3);
  c.mu << 0.0, 1.0, -1.0, 2.0, 3.0, 1.0;
  c.var = Matrix::Constant(2, 3, 0.1);
  c.v = Matrix(2, 3);
  c.v << 1.0, 0.5, -0.8, -0.5, 1.2, 0.3;
  truth.components.push_back(c);

  const auto data = simulate(spec, truth, EffectsConfig{}, 150, 20, 11).first;
  FitOptions options = benchmark_options(10);
  const FitResult fit_result = fit(data, spec, options);
  const Alignment alignment = align_parameters(fit_result.params, truth);
  const double v_err = max_abs_diff(alignment.aligned.components[0].v, c.v);

  std::ostringstream out;
  out << std::setprecision(3) << "IOHMM (L=2, D=3, known nonzero v): max "
      << "|v - truth| = " << v_err << " after alignment (limit 0.1)";
  return {v_err <= 0.1, out.str()};
}

int g_failures = 0;

void report(int id, const char* name, const Outcome& outcome) {
  std::printf("%s %d %s: %s\n", outcome.pass ? "PASS" : "FAIL", id, name,
              outcome.detail.c_str());
  std::fflush(stdout);
  if (!outcome.pass) ++g_failures;
}

}  // namespace

int main() {
  Outcome recovery{false, "seed scan did not run"};
  Outcome purity{false, "seed scan did not run"};
  const Outcome scan_outcome = guarded([&] {
    const SeedScan scan = run_seed_scan();
    recovery = criterion_recovery(scan);
    purity = criterion_purity(scan);
    return Outcome{true, ""};
  });
  if (!scan_outcome.pass) recovery = purity = scan_outcome;

  report(1, "synthetic recovery", recovery);
  report(2, "single-model baseline", guarded(criterion_single_model));
  report(3, "cluster purity", purity);
  report(4, "oracle equivalence", guarded(criterion_oracle_equivalence));
  report(5, "objective monotonicity", guarded(criterion_monotonicity));
  report(6, "block-diagonal identity", guarded(criterion_block_diagonal));
  report(7, "criteria algebra", guarded(criterion_criteria_algebra));
  report(8, "missing-data correctness", guarded(criterion_missing_data));
  report(9, "input-effect recovery", guarded(criterion_input_effect_recovery));
  return g_failures;
}

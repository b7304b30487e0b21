#include "mixhmm/cli.hpp"

#include "mixhmm/em.hpp"
#include "mixhmm/mixture.hpp"
#include "mixhmm/report.hpp"
#include "mixhmm/selection.hpp"
#include "mixhmm/serialization.hpp"
#include "mixhmm/synthdata.hpp"
#include "mixhmm/validation.hpp"
#include "mixhmm/variational.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace mixhmm {

using nlohmann::json;

namespace {

std::string iso_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

std::string stem_of(const std::string& path) {
  const std::string suffix = ".json";
  if (path.size() > suffix.size() &&
      path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0)
    return path.substr(0, path.size() - suffix.size());
  return path;
}

void ensure_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

void write_text(const std::string& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write " + path);
  out << text;
}

void write_json(const json& j, const std::string& path) {
  ensure_parent(path);
  save_json(j, path);
}

void require_valid(std::vector<Violation> violations) {
  if (!violations.empty()) throw ValidationFailure(std::move(violations));
}

std::vector<int> parse_k_range(const std::string& text) {
  std::vector<int> ks;
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const int lo = std::stoi(text.substr(0, dots));
    const int hi = std::stoi(text.substr(dots + 2));
    for (int k = lo; k <= hi; ++k) ks.push_back(k);
  } else {
    std::istringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) ks.push_back(std::stoi(item));
  }
  if (ks.empty())
    throw CLI::ValidationError("--k-range", "empty range '" + text + "'");
  return ks;
}

InitStrategy parse_init(const std::string& name) {
  if (name == "random-obs") return InitStrategy::random_obs;
  if (name == "spread-quantile") return InitStrategy::spread_quantile;
  throw CLI::ValidationError(
      "--init", "expected random-obs or spread-quantile, got '" + name + "'");
}

// Options shared by fit and select.
struct FitFlags {
  bool inputs = false;
  bool personal_r = false;
  bool personal_m = false;
  bool left_to_right = false;
  double prior_var_r = 1.0;
  double prior_var_m = 1.0;
  int restarts = 5;
  std::uint64_t seed = 0;
  int max_iters = 500;
  double tol = 1e-6;
  int threads = 0;  // 0 = all available cores
  std::string init = "random-obs";
  bool alpha_soft = false;
};

void add_fit_flags(CLI::App* cmd, FitFlags& f) {
  cmd->add_flag("--inputs", f.inputs, "Model dose effects on emissions");
  cmd->add_flag("--personal-r", f.personal_r,
                "Per-sequence state offset (variational)");
  cmd->add_flag("--personal-m", f.personal_m,
                "Per-sequence dose effect (variational, implies --inputs)");
  cmd->add_flag("--left-to-right", f.left_to_right,
                "Upper-triangular transition matrices");
  cmd->add_option("--prior-var-r", f.prior_var_r, "Prior variance of r");
  cmd->add_option("--prior-var-m", f.prior_var_m, "Prior variance of m");
  cmd->add_option("--restarts", f.restarts, "Random restarts per fit");
  cmd->add_option("--seed", f.seed, "Master seed; all randomness derives");
  cmd->add_option("--max-iters", f.max_iters, "Iteration cap per restart");
  cmd->add_option("--tol", f.tol, "Relative objective-change tolerance");
  cmd->add_option("--threads", f.threads, "Worker threads (0 = all cores)");
  cmd->add_option("--init", f.init,
                  "Initialization: random-obs | spread-quantile");
  cmd->add_flag("--alpha-soft", f.alpha_soft,
                "Mixing weights from posterior mass, not hard counts");
}

FitOptions fit_options_from(const FitFlags& f) {
  FitOptions o;
  o.max_iters = f.max_iters;
  o.rel_tol = f.tol;
  o.n_restarts = f.restarts;
  o.seed = f.seed;
  o.init_strategy = parse_init(f.init);
  o.n_threads = f.threads;
  o.alpha_from_posterior = f.alpha_soft;
  return o;
}

ModelSpec spec_from(const FitFlags& f, const std::vector<int>& states,
                    Eigen::Index obs_dim) {
  ModelSpec spec;
  spec.n_components = static_cast<int>(states.size());
  spec.states_per_component = states;
  spec.obs_dim = static_cast<int>(obs_dim);
  spec.use_inputs = f.inputs || f.personal_m;
  spec.personal_state_offset = f.personal_r;
  spec.personal_input_effect = f.personal_m;
  spec.left_to_right = f.left_to_right;
  spec.prior_var_r = f.prior_var_r;
  spec.prior_var_m = f.prior_var_m;
  return spec;
}

void run_simulate(const std::string& out, bool paper, std::uint64_t seed,
                  const std::string& model_path, int n, int len,
                  const std::string& noise_kind, double length_scale,
                  double sigma, const EffectsConfig& effects) {
  SequenceDataset data;
  GroundTruth truth;
  if (paper) {
    std::tie(data, truth) = simulate_paper_experiment(seed);
  } else {
    if (model_path.empty())
      throw CLI::ValidationError("simulate",
                                 "need --paper-experiment or --model");
    const ModelFile model = model_from_json(load_json(model_path));
    NoiseConfig noise;
    if (noise_kind == "se") {
      noise.kind = NoiseConfig::Kind::se_kernel;
      noise.length_scale = length_scale;
      noise.sigma = sigma;
    } else if (noise_kind != "iid") {
      throw CLI::ValidationError("--noise",
                                 "expected iid or se, got '" + noise_kind + "'");
    }
    std::tie(data, truth) =
        simulate(model.spec, model.params, effects, n, len, seed, noise);
  }
  write_json(dataset_to_json(data), out);
  write_json(ground_truth_to_json(truth), stem_of(out) + ".truth.json");
  std::cerr << "wrote " << out << " and " << stem_of(out) << ".truth.json\n";
}

void run_fit_cmd(const std::string& data_path, int components,
                 std::vector<int> states, const FitFlags& flags,
                 const std::string& out) {
  const SequenceDataset data = load_dataset(data_path);
  if (states.empty()) states.assign(static_cast<std::size_t>(components), 2);
  if (states.size() == 1 && components > 1)
    states.assign(static_cast<std::size_t>(components), states.front());
  if (static_cast<int>(states.size()) != components)
    throw CLI::ValidationError(
        "--states", "expected one state count or one per component");

  const ModelSpec spec = spec_from(flags, states, data.dim);
  const FitOptions options = fit_options_from(flags);
  const FitResult result = spec.personalized()
                               ? fit_personalized(data, spec, options)
                               : fit(data, spec, options);

  json fit_json = fit_result_to_json(result);
  fit_json["meta"] = json{{"created", iso_now()}};
  write_json(fit_json, out);

  ModelFile model{result.spec, result.params,
                  result.spec.personalized()
                      ? std::optional<PersonalEffects>(result.effects)
                      : std::nullopt};
  write_json(model_to_json(model), stem_of(out) + ".model.json");

  std::ostringstream trace;
  trace << "iter,objective\n";
  for (std::size_t i = 0; i < result.objective_trace.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", result.objective_trace[i]);
    trace << i << ',' << buf << '\n';
  }
  write_text(stem_of(out) + ".trace.csv", trace.str());

  std::cerr << "fit: loglik=" << result.loglik
            << " iters=" << result.n_iters
            << (result.converged ? " (converged)" : " (iteration cap)")
            << "\n";
}

void run_decode(const std::string& data_path, const std::string& model_path,
                const std::string& out) {
  const SequenceDataset data = load_dataset(data_path);
  require_valid(validate_dataset(data));
  const ModelFile model = model_from_json(load_json(model_path));
  require_valid(validate_parameters(model.params, model.spec));
  if (model.spec.obs_dim != data.dim)
    throw ValidationFailure({{"model", "obs_dim",
                              "model dimension " +
                                  std::to_string(model.spec.obs_dim) +
                                  " does not match dataset dimension " +
                                  std::to_string(data.dim)}});

  const HMMParameters flat = build_block_diagonal(model.params);
  const BlockMap map = BlockMap::from_mixture(model.params);
  std::ostringstream os;
  for (const auto& seq : data.sequences) {
    SequenceOffsets offsets;
    if (model.effects) {
      const auto& ids = model.effects->ids;
      const auto it = std::find(ids.begin(), ids.end(), seq.id);
      if (it != ids.end()) {
        const auto row = static_cast<Eigen::Index>(it - ids.begin());
        if (model.spec.personal_state_offset)
          offsets.r_mean = model.effects->r_mean.row(row).transpose();
        if (model.spec.personal_input_effect)
          offsets.m_mean = model.effects->m_mean.row(row).transpose();
      }
    }
    const DecodedPath path = viterbi(seq, flat, offsets);
    const int label = path.states.empty() ? 0 : map.component_of(path.states.front());
    json j{{"id", seq.id},
           {"label", label},
           {"path", path.states},
           {"map_loglik", path.map_loglik}};
    os << j.dump() << '\n';
  }
  write_text(out, os.str());
}

void run_select(const std::string& data_path, const std::string& k_range,
                int states, const FitFlags& flags, bool structural_k,
                bool bic_obs, const std::string& out) {
  const SequenceDataset data = load_dataset(data_path);
  ModelSpec tmpl = spec_from(flags, {states}, data.dim);
  SelectOptions options;
  options.fit = fit_options_from(flags);
  options.structural_k = structural_k;
  options.bic_by_observations = bic_obs;
  const SelectionTable table =
      select(data, tmpl, parse_k_range(k_range), options);
  for (const auto& w : table.warnings) std::cerr << "warning: " << w << "\n";
  write_text(out, table.to_csv());
  std::cout << table.to_text();
}

void run_report(const std::string& fit_path, const std::string& data_path,
                const std::string& groups_path,
                const std::string& reference_path, const std::string& out_dir) {
  const FitResult result = fit_result_from_json(load_json(fit_path));
  const SequenceDataset data = load_dataset(data_path);
  std::filesystem::create_directories(out_dir);
  const auto out = [&out_dir](const std::string& name) {
    return (std::filesystem::path(out_dir) / name).string();
  };

  write_text(out("trajectories.jsonl"),
             trajectories_to_jsonl(export_trajectories(result, data)));

  if (!groups_path.empty()) {
    const FeatureGroups groups = groups_from_json(load_json(groups_path));
    write_text(out("summary.csv"),
               group_summary_csv(group_summary(result.params, groups)));
  }

  if (!reference_path.empty()) {
    const GroundTruth truth = ground_truth_from_json(load_json(reference_path));
    const Alignment alignment = align_parameters(result.params, truth.params);
    double max_a = 0.0, max_mu = 0.0, max_var = 0.0, max_v = 0.0;
    for (int k = 0; k < truth.params.n_components(); ++k) {
      const auto& a = alignment.aligned.components[static_cast<std::size_t>(k)];
      const auto& r = truth.params.components[static_cast<std::size_t>(k)];
      max_a = std::max(max_a, (a.A - r.A).cwiseAbs().maxCoeff());
      max_mu = std::max(max_mu, (a.mu - r.mu).cwiseAbs().maxCoeff());
      max_var = std::max(max_var, (a.var - r.var).cwiseAbs().maxCoeff());
      max_v = std::max(max_v, (a.v - r.v).cwiseAbs().maxCoeff());
    }
    json j{{"component_perm", alignment.component_perm},
           {"state_perms", alignment.state_perms},
           {"transition_distance", alignment.transition_distance},
           {"mean_distance", alignment.mean_distance},
           {"max_abs_error",
            json{{"A", max_a}, {"mu", max_mu}, {"var", max_var},
                 {"v", max_v}}},
           {"aligned", mixture_to_json(alignment.aligned)}};
    if (truth.components.size() == result.labels.size()) {
      // component_perm maps reference slot -> fitted label; invert it to
      // score the hard clustering against the generating assignment.
      std::vector<int> to_ref(alignment.component_perm.size());
      for (std::size_t i = 0; i < alignment.component_perm.size(); ++i)
        to_ref[static_cast<std::size_t>(alignment.component_perm[i])] =
            static_cast<int>(i);
      std::size_t hits = 0;
      for (std::size_t i = 0; i < result.labels.size(); ++i)
        if (to_ref[static_cast<std::size_t>(result.labels[i])] ==
            truth.components[i])
          ++hits;
      j["label_purity"] =
          static_cast<double>(hits) / static_cast<double>(result.labels.size());
    }
    write_json(j, out("alignment.json"));
  }
  std::cerr << "report written to " << out_dir << "\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Mixtures of (personalized, input-output) hidden Markov models "
               "for multivariate longitudinal data"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Draw a synthetic dataset");
  bool sim_paper = false;
  std::uint64_t sim_seed = 0;
  std::string sim_model, sim_out = "data.json", sim_noise = "iid";
  int sim_n = 100, sim_len = 20;
  double sim_length_scale = 1.0, sim_sigma = 0.1;
  EffectsConfig sim_effects;
  sim->add_flag("--paper-experiment", sim_paper,
                "200 two-state two-component sequences with personal offsets "
                "and smooth noise");
  sim->add_option("--seed", sim_seed, "Master seed");
  sim->add_option("--model", sim_model, "Generating model JSON");
  sim->add_option("--n", sim_n, "Number of sequences");
  sim->add_option("--len", sim_len, "Sequence length");
  sim->add_option("--noise", sim_noise, "iid | se");
  sim->add_option("--length-scale", sim_length_scale, "SE kernel length scale");
  sim->add_option("--sigma", sim_sigma, "SE kernel amplitude (std dev)");
  sim->add_option("--r-low", sim_effects.r_low, "Offset range low");
  sim->add_option("--r-high", sim_effects.r_high, "Offset range high");
  sim->add_option("--m-low", sim_effects.m_low, "Input-effect range low");
  sim->add_option("--m-high", sim_effects.m_high, "Input-effect range high");
  sim->add_option("--dose-max", sim_effects.dose_max, "Dose level cap");
  sim->add_option("--dose-segments", sim_effects.dose_segments,
                  "Piecewise-constant dose segments");
  sim->add_option("--missing-frac", sim_effects.missing_frac,
                  "Per-entry masking probability");
  sim->add_option("--out", sim_out, "Dataset path (truth sidecar alongside)");
  sim->callback([&] {
    run_simulate(sim_out, sim_paper, sim_seed, sim_model, sim_n, sim_len,
                 sim_noise, sim_length_scale, sim_sigma, sim_effects);
  });

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Fit a mixture to a dataset");
  std::string fit_data, fit_out = "fit.json";
  int fit_components = 1;
  std::vector<int> fit_states;
  FitFlags fit_flags;
  fit_cmd->add_option("--data", fit_data, "Dataset (JSON or CSV)")->required();
  fit_cmd->add_option("--components", fit_components, "Mixture components");
  fit_cmd->add_option("--states", fit_states,
                      "States per component (one value or K comma-separated)")
      ->delimiter(',');
  add_fit_flags(fit_cmd, fit_flags);
  fit_cmd->add_option("--out", fit_out,
                      "Fit JSON; model JSON and trace CSV land alongside");
  fit_cmd->callback([&] {
    run_fit_cmd(fit_data, fit_components, fit_states, fit_flags, fit_out);
  });

  // decode
  auto* dec = app.add_subcommand("decode", "Viterbi paths and labels");
  std::string dec_data, dec_model, dec_out = "paths.jsonl";
  dec->add_option("--data", dec_data, "Dataset (JSON or CSV)")->required();
  dec->add_option("--model", dec_model, "Model JSON")->required();
  dec->add_option("--out", dec_out, "JSON-lines output");
  dec->callback([&] { run_decode(dec_data, dec_model, dec_out); });

  // select
  auto* sel = app.add_subcommand("select", "Information-criteria K sweep");
  std::string sel_data, sel_k_range = "1..3", sel_out = "table.csv";
  int sel_states = 2;
  bool sel_structural = false, sel_bic_obs = false;
  FitFlags sel_flags;
  sel->add_option("--data", sel_data, "Dataset (JSON or CSV)")->required();
  sel->add_option("--k-range", sel_k_range, "e.g. 1..5 or 2,3,5");
  sel->add_option("--states", sel_states, "States per component");
  add_fit_flags(sel, sel_flags);
  sel->add_flag("--structural-k", sel_structural,
                "Count only block-diagonal transition parameters");
  sel->add_flag("--bic-obs", sel_bic_obs,
                "BIC sample size = observed entries, not sequences");
  sel->add_option("--out", sel_out, "Criteria table CSV");
  sel->callback([&] {
    run_select(sel_data, sel_k_range, sel_states, sel_flags, sel_structural,
               sel_bic_obs, sel_out);
  });

  // report
  auto* rep = app.add_subcommand("report", "Post-fit summaries");
  std::string rep_fit, rep_data, rep_groups, rep_reference, rep_out = "report";
  rep->add_option("--fit", rep_fit, "Fit JSON")->required();
  rep->add_option("--data", rep_data, "Dataset the fit was made on")
      ->required();
  rep->add_option("--groups", rep_groups, "Feature groups JSON");
  rep->add_option("--reference", rep_reference,
                  "Ground-truth sidecar to score recovery against");
  rep->add_option("--out", rep_out, "Output directory");
  rep->callback([&] {
    run_report(rep_fit, rep_data, rep_groups, rep_reference, rep_out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 4;
  } catch (const ValidationFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const json::parse_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace mixhmm

#include "helpers.hpp"
#include "mixhmm/selection.hpp"
#include "mixhmm/synthdata.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

using namespace mixhmm;

namespace {

// Two well-separated two-state components; selection should land on K=2.
SequenceDataset separated_dataset() {
  MixtureParameters truth;
  truth.alpha = Vector::Constant(2, 0.5);
  for (int k = 0; k < 2; ++k) {
    HMMParameters c;
    c.pi = Vector::Constant(2, 0.5);
    c.A = Matrix(2, 2);
    c.A << 0.85, 0.15, 0.15, 0.85;
    c.mu = Matrix(2, 1);
    c.mu << (k == 0 ? -5.0 : 5.0), (k == 0 ? -2.0 : 9.0);
    c.var = Matrix::Constant(2, 1, 0.3);
    c.v = Matrix::Zero(2, 1);
    truth.components.push_back(c);
  }
  return simulate(ModelSpec::uniform(2, 2, 1), truth, {}, 30, 12, 77).first;
}

}  // namespace

TEST_CASE("count_free_parameters follows L^2 + 3LD - 1") {
  // K=2 components of 3 states, D=4: L=6 -> 36 + 72 - 1.
  ModelSpec spec = ModelSpec::uniform(2, 3, 4);
  CHECK(count_free_parameters(spec) == 36 + 3 * 6 * 4 - 1);

  // Two reference shapes: 8 and 16 total states over 59 dimensions.
  CHECK(count_free_parameters(ModelSpec::uniform(1, 8, 59)) == 1479);
  CHECK(count_free_parameters(ModelSpec::uniform(2, 8, 59)) == 3087);
  CHECK(count_free_parameters(ModelSpec::uniform(1, 1, 1)) == 3);
}

TEST_CASE("the structural count trims to per-component transitions") {
  const ModelSpec spec = ModelSpec::uniform(3, 6, 21);
  CHECK(count_free_parameters(spec, true) == 3 * 36 + 3 * 18 * 21 - 1);
  // Unequal blocks sum their own squares.
  ModelSpec uneven = ModelSpec::uniform(2, 2, 1);
  uneven.states_per_component = {2, 3};
  CHECK(count_free_parameters(uneven, true) == (4 + 9) + 3 * 5 * 1 - 1);
  CHECK(count_free_parameters(uneven, false) == 25 + 3 * 5 * 1 - 1);
}

TEST_CASE("criteria are affine in the recorded likelihoods") {
  FitResult fit;
  fit.loglik = -123.456;
  fit.map_loglik = -150.25;
  const ModelSpec spec = ModelSpec::uniform(2, 2, 3);
  const Criteria c = criteria(fit, spec, 50);

  const int k = count_free_parameters(spec);
  CHECK(c.k == k);
  CHECK(c.aic == -2.0 * fit.loglik + 2.0 * k);
  CHECK(c.bic == -2.0 * fit.loglik + k * std::log(50.0));
  CHECK(c.icl == -2.0 * fit.map_loglik + 2.0 * k);

  const Criteria cs = criteria(fit, spec, 50, true);
  CHECK(cs.k == count_free_parameters(spec, true));
}

TEST_CASE("ICL dominates AIC, and BIC dominates AIC from eight sequences") {
  // map_loglik <= loglik always, so ICL >= AIC at the same k; ln N >= 2
  // exactly when N >= 8.
  FitResult fit;
  fit.loglik = -40.0;
  fit.map_loglik = -46.5;
  const ModelSpec spec = ModelSpec::uniform(1, 2, 1);
  for (std::size_t n : {8ul, 20ul, 1000ul}) {
    const Criteria c = criteria(fit, spec, n);
    CHECK(c.icl >= c.aic);
    CHECK(c.bic >= c.aic);
  }
  const Criteria c7 = criteria(fit, spec, 7);
  CHECK(c7.bic < c7.aic);  // ln 7 < 2 flips the inequality
}

TEST_CASE("select sweeps component counts and flags the minimizers") {
  const auto data = separated_dataset();
  SelectOptions opt;
  opt.fit.n_restarts = 6;
  opt.fit.seed = 0;
  opt.fit.max_iters = 100;
  const auto table = select(data, ModelSpec::uniform(1, 2, 1), {1, 2, 3}, opt);

  REQUIRE(table.rows.size() == 3);
  CHECK(table.rows[0].n_components == 1);
  CHECK(table.rows[1].n_components == 2);
  CHECK(table.rows[2].n_components == 3);
  CHECK(table.rows[0].k == count_free_parameters(ModelSpec::uniform(1, 2, 1)));
  CHECK(table.rows[1].k == count_free_parameters(ModelSpec::uniform(2, 2, 1)));

  // Likelihood can only improve with more components.
  CHECK(table.rows[1].loglik >= table.rows[0].loglik - 1e-6);
  // The generating structure has two clusters.
  CHECK(table.chosen_icl == 2);
  CHECK(table.chosen_bic == 2);

  int aic_flags = 0, bic_flags = 0, icl_flags = 0;
  for (const auto& r : table.rows) {
    aic_flags += r.best_aic ? 1 : 0;
    bic_flags += r.best_bic ? 1 : 0;
    icl_flags += r.best_icl ? 1 : 0;
  }
  CHECK(aic_flags == 1);
  CHECK(bic_flags == 1);
  CHECK(icl_flags == 1);
  CHECK(table.warnings.empty());
}

TEST_CASE("select orders and deduplicates the requested range") {
  const auto data = separated_dataset();
  SelectOptions opt;
  opt.fit.n_restarts = 1;
  opt.fit.max_iters = 5;
  const auto table = select(data, ModelSpec::uniform(1, 2, 1), {2, 1, 2}, opt);
  REQUIRE(table.rows.size() == 2);
  CHECK(table.rows[0].n_components == 1);
  CHECK(table.rows[1].n_components == 2);
  REQUIRE(table.warnings.size() == 1);
  CHECK(table.warnings[0].find("duplicate") != std::string::npos);
}

TEST_CASE("select works on a single-entry range and rejects an empty one") {
  const auto data = separated_dataset();
  SelectOptions opt;
  opt.fit.n_restarts = 1;
  opt.fit.max_iters = 5;
  const auto table = select(data, ModelSpec::uniform(1, 2, 1), {1}, opt);
  REQUIRE(table.rows.size() == 1);
  CHECK(table.rows[0].best_aic);
  CHECK(table.rows[0].best_bic);
  CHECK(table.rows[0].best_icl);
  CHECK(table.chosen_aic == 1);

  CHECK_THROWS_AS(select(data, ModelSpec::uniform(1, 2, 1), {}, opt),
                  std::invalid_argument);
}

TEST_CASE("bic_by_observations rescales the BIC sample size") {
  const auto data = separated_dataset();
  SelectOptions by_seq, by_obs;
  by_seq.fit.n_restarts = by_obs.fit.n_restarts = 2;
  by_seq.fit.max_iters = by_obs.fit.max_iters = 20;
  by_obs.bic_by_observations = true;

  const auto a = select(data, ModelSpec::uniform(1, 2, 1), {1}, by_seq);
  const auto b = select(data, ModelSpec::uniform(1, 2, 1), {1}, by_obs);
  CHECK(a.rows[0].loglik == b.rows[0].loglik);  // same fit underneath
  const double n_seq = static_cast<double>(data.size());
  const double n_obs = static_cast<double>(data.total_observed());
  const int k = a.rows[0].k;
  CHECK(b.rows[0].bic - a.rows[0].bic ==
        doctest::Approx(k * (std::log(n_obs) - std::log(n_seq)))
            .epsilon(1e-9));
}

TEST_CASE("the CSV table is complete and machine-parseable") {
  const auto data = separated_dataset();
  SelectOptions opt;
  opt.fit.n_restarts = 2;
  opt.fit.max_iters = 20;
  const auto table = select(data, ModelSpec::uniform(1, 2, 1), {1, 2}, opt);
  const std::string csv = table.to_csv();

  std::istringstream is(csv);
  std::string header;
  std::getline(is, header);
  CHECK(header ==
        "K,k,loglik,map_loglik,AIC,BIC,ICL,chosen_AIC,chosen_BIC,chosen_ICL");
  int lines = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    ++lines;
    // Round-trip one numeric field at full precision.
    std::istringstream ls(line);
    std::string field;
    std::getline(ls, field, ',');  // K
    std::getline(ls, field, ',');  // k
    std::getline(ls, field, ',');  // loglik
    const double loglik = std::stod(field);
    CHECK(loglik == table.rows[static_cast<std::size_t>(lines - 1)].loglik);
  }
  CHECK(lines == 2);
}

TEST_CASE("the text table uses scientific criteria and marks choices") {
  SelectionTable table;
  SelectionRow r1;
  r1.n_components = 1;
  r1.k = 9;
  r1.aic = 11076.25;
  r1.bic = 11100.0;
  r1.icl = 11200.0;
  SelectionRow r2;
  r2.n_components = 2;
  r2.k = 27;
  r2.aic = 9167.5;
  r2.bic = 9200.0;
  r2.icl = 9300.0;
  r2.best_aic = r2.best_bic = r2.best_icl = true;
  table.rows = {r1, r2};

  const std::string text = table.to_text();
  CHECK(text.find("K") != std::string::npos);
  CHECK(text.find("1.1076e+04") != std::string::npos);
  CHECK(text.find("9.1675e+03") != std::string::npos);
  CHECK(text.find("AIC BIC ICL") != std::string::npos);
}

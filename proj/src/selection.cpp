#include "mixhmm/selection.hpp"

#include "mixhmm/variational.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mixhmm {
namespace {

std::string full(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4e", x);
  return buf;
}

}  // namespace

int count_free_parameters(const ModelSpec& spec, bool structural) {
  const int total = spec.total_states();
  int quad = total * total;
  if (structural) {
    quad = 0;
    for (int states : spec.states_per_component) quad += states * states;
  }
  return quad + 3 * total * spec.obs_dim - 1;
}

Criteria criteria(const FitResult& fit, const ModelSpec& spec,
                  std::size_t n_train, bool structural_k) {
  Criteria c;
  c.k = count_free_parameters(spec, structural_k);
  c.aic = -2.0 * fit.loglik + 2.0 * c.k;
  c.bic = -2.0 * fit.loglik + c.k * std::log(static_cast<double>(n_train));
  c.icl = -2.0 * fit.map_loglik + 2.0 * c.k;
  return c;
}

std::string SelectionTable::to_csv() const {
  std::ostringstream os;
  os << "K,k,loglik,map_loglik,AIC,BIC,ICL,chosen_AIC,chosen_BIC,chosen_ICL\n";
  for (const auto& r : rows)
    os << r.n_components << ',' << r.k << ',' << full(r.loglik) << ','
       << full(r.map_loglik) << ',' << full(r.aic) << ',' << full(r.bic) << ','
       << full(r.icl) << ',' << (r.best_aic ? 1 : 0) << ','
       << (r.best_bic ? 1 : 0) << ',' << (r.best_icl ? 1 : 0) << '\n';
  return os.str();
}

std::string SelectionTable::to_text() const {
  std::ostringstream os;
  os << "  K      k          AIC          BIC          ICL  chosen\n";
  for (const auto& r : rows) {
    char line[128];
    std::snprintf(line, sizeof line, "%3d %6d  %11s  %11s  %11s  ",
                  r.n_components, r.k, sci(r.aic).c_str(), sci(r.bic).c_str(),
                  sci(r.icl).c_str());
    os << line;
    std::string chosen;
    if (r.best_aic) chosen += "AIC ";
    if (r.best_bic) chosen += "BIC ";
    if (r.best_icl) chosen += "ICL ";
    if (!chosen.empty()) chosen.pop_back();
    os << chosen << '\n';
  }
  return os.str();
}

SelectionTable select(const SequenceDataset& data, const ModelSpec& tmpl,
                      const std::vector<int>& k_range,
                      const SelectOptions& options) {
  if (k_range.empty())
    throw std::invalid_argument("select: empty component range");
  if (tmpl.states_per_component.empty())
    throw std::invalid_argument("select: template spec has no state counts");

  SelectionTable table;
  std::vector<int> ks = k_range;
  std::sort(ks.begin(), ks.end());
  const auto last = std::unique(ks.begin(), ks.end());
  if (last != ks.end()) {
    table.warnings.push_back("duplicate component counts in range dropped");
    ks.erase(last, ks.end());
  }

  const int states_each = tmpl.states_per_component.front();
  const std::size_t bic_n = options.bic_by_observations
                                ? static_cast<std::size_t>(data.total_observed())
                                : data.size();

  for (int k_components : ks) {
    ModelSpec spec = tmpl;
    spec.n_components = k_components;
    spec.states_per_component.assign(static_cast<std::size_t>(k_components),
                                     states_each);
    FitResult result;
    try {
      result = spec.personalized() ? fit_personalized(data, spec, options.fit)
                                   : fit(data, spec, options.fit);
    } catch (const NumericalError& e) {
      throw NumericalError("select: fit for K=" +
                           std::to_string(k_components) + " failed: " +
                           e.what());
    }
    const Criteria c = criteria(result, spec, bic_n, options.structural_k);
    SelectionRow row;
    row.n_components = k_components;
    row.k = c.k;
    row.loglik = result.loglik;
    row.map_loglik = result.map_loglik;
    row.aic = c.aic;
    row.bic = c.bic;
    row.icl = c.icl;
    table.rows.push_back(row);
  }

  auto mark = [&table](double SelectionRow::* value, bool SelectionRow::* flag,
                       int* chosen) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_i = 0;
    for (std::size_t i = 0; i < table.rows.size(); ++i)
      if (table.rows[i].*value < best) {
        best = table.rows[i].*value;
        best_i = i;
      }
    table.rows[best_i].*flag = true;
    *chosen = table.rows[best_i].n_components;
  };
  mark(&SelectionRow::aic, &SelectionRow::best_aic, &table.chosen_aic);
  mark(&SelectionRow::bic, &SelectionRow::best_bic, &table.chosen_bic);
  mark(&SelectionRow::icl, &SelectionRow::best_icl, &table.chosen_icl);
  return table;
}

}  // namespace mixhmm

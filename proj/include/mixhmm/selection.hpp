#pragma once

#include "mixhmm/em.hpp"
#include "mixhmm/types.hpp"

#include <string>
#include <vector>

namespace mixhmm {

/// Free-parameter count k = L^2 + 3*L*D - 1 with L the total state count
/// summed over components. The quadratic term deliberately counts the full
/// flattened transition matrix even though off-block entries are structural
/// zeros; pass structural = true for the tighter sum of per-component L_k^2.
int count_free_parameters(const ModelSpec& spec, bool structural = false);

struct Criteria {
  int k = 0;
  double aic = 0.0;  // -2*loglik + 2k
  double bic = 0.0;  // -2*loglik + k*ln(N)
  double icl = 0.0;  // -2*map_loglik + 2k
};

/// n_train is the BIC sample size; by convention the number of sequences
/// (callers wanting per-observation BIC pass the observed-entry count).
Criteria criteria(const FitResult& fit, const ModelSpec& spec,
                  std::size_t n_train, bool structural_k = false);

struct SelectionRow {
  int n_components = 0;
  int k = 0;
  double loglik = 0.0;
  double map_loglik = 0.0;
  double aic = 0.0;
  double bic = 0.0;
  double icl = 0.0;
  bool best_aic = false;
  bool best_bic = false;
  bool best_icl = false;
};

struct SelectionTable {
  std::vector<SelectionRow> rows;  // ascending K
  int chosen_aic = 0;              // K minimizing each criterion
  int chosen_bic = 0;
  int chosen_icl = 0;
  std::vector<std::string> warnings;

  std::string to_csv() const;   // machine-readable, full precision
  std::string to_text() const;  // aligned table, %.4e criteria
};

struct SelectOptions {
  FitOptions fit;                    // shared across K so seeds are comparable
  bool structural_k = false;
  bool bic_by_observations = false;  // BIC N = observed entries, not sequences
};

/// Fits the template spec at each K in k_range (duplicates dropped with a
/// warning, rows ordered by K) and tabulates the criteria. The template's
/// first states_per_component entry is replicated K times, mirroring the
/// equal-sized-component convention.
SelectionTable select(const SequenceDataset& data, const ModelSpec& tmpl,
                      const std::vector<int>& k_range,
                      const SelectOptions& options = {});

}  // namespace mixhmm

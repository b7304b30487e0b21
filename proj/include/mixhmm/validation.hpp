#pragma once

#include "mixhmm/types.hpp"

namespace mixhmm {

/// One named invariant failure. Validation never throws; every malformed
/// field yields one of these instead.
struct Violation {
  std::string item;    // sequence id, "dataset", "component k", "alpha", ...
  std::string field;
  std::string reason;

  std::string to_string() const { return item + "." + field + ": " + reason; }
};

/// Thrown by entry points (fit, the command-line loaders) when validation
/// finds problems; carries the full list so callers report every issue at
/// once instead of failing on the first.
struct ValidationFailure : std::runtime_error {
  std::vector<Violation> violations;
  explicit ValidationFailure(std::vector<Violation> v);
};

std::vector<Violation> validate_dataset(const SequenceDataset& data);

std::vector<Violation> validate_parameters(const MixtureParameters& params,
                                           const ModelSpec& spec);

std::vector<Violation> validate_spec(const ModelSpec& spec);

std::vector<Violation> validate_effects(const PersonalEffects& effects,
                                        const ModelSpec& spec);

}  // namespace mixhmm

#pragma once

#include "mixhmm/types.hpp"

#include <json.hpp>

#include <iosfwd>

namespace mixhmm {

/// Contents of a model file: spec + parameters, optionally the variational
/// effects of the fit that produced it.
struct ModelFile {
  ModelSpec spec;
  MixtureParameters params;
  std::optional<PersonalEffects> effects;
};

// Row-major nested-array codecs, shared by every format below.
nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j, const char* what);

// Dataset JSON: {"dim": D, "sequences": [{"id", "observations" (null =
// missing), "inputs"?, "times"?}]}.
nlohmann::json dataset_to_json(const SequenceDataset& data);
SequenceDataset dataset_from_json(const nlohmann::json& j);

// Model JSON: {"spec", "alpha", "components": [{"pi","A","mu","var","v"}],
// "blocks", "effects"?}. Simplex rows off by at most 1e-9 are renormalized
// on parse; anything worse is left for validation to flag.
nlohmann::json model_to_json(const ModelFile& model);
ModelFile model_from_json(const nlohmann::json& j);

// Bare mixture parameters ({"alpha", "components"}), shared by the model
// file and the simulators' ground-truth sidecar.
nlohmann::json mixture_to_json(const MixtureParameters& params);
MixtureParameters mixture_from_json(const nlohmann::json& j);

nlohmann::json fit_result_to_json(const FitResult& fit);
FitResult fit_result_from_json(const nlohmann::json& j);

/// Long-format CSV (header id,t,feature_index,value,dose) to a dataset.
/// Entries absent from the file are masked; dose defaults to 0.
SequenceDataset dataset_from_csv(std::istream& in);

SequenceDataset load_dataset(const std::string& path);  // by extension
void save_json(const nlohmann::json& j, const std::string& path);
nlohmann::json load_json(const std::string& path);

}  // namespace mixhmm

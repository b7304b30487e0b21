#include "mixhmm/validation.hpp"

#include <cmath>
#include <set>
#include <sstream>
#include <utility>

namespace mixhmm {

namespace {

std::string fmt(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

void check_simplex(std::vector<Violation>& out, const std::string& item,
                   const std::string& field, const Vector& p) {
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!std::isfinite(p[i]) || p[i] < 0.0) {
      out.push_back({item, field,
                     "entry " + std::to_string(i) + " = " + fmt(p[i]) +
                         " is not a probability"});
      return;
    }
  }
  const double s = p.sum();
  if (std::abs(s - 1.0) > kSimplexTol)
    out.push_back({item, field, "sums to " + fmt(s) + ", expected 1"});
}

std::string join_violations(const std::vector<Violation>& v) {
  std::ostringstream os;
  os << "validation failed (" << v.size() << " problem"
     << (v.size() == 1 ? "" : "s") << ")";
  for (const auto& x : v) os << "\n  " << x.to_string();
  return os.str();
}

}  // namespace

ValidationFailure::ValidationFailure(std::vector<Violation> v)
    : std::runtime_error(join_violations(v)), violations(std::move(v)) {}

std::vector<Violation> validate_dataset(const SequenceDataset& data) {
  std::vector<Violation> out;
  if (data.sequences.empty()) {
    out.push_back({"dataset", "sequences", "dataset is empty"});
    return out;
  }
  if (data.dim <= 0)
    out.push_back({"dataset", "dim", "dim must be positive, got " +
                                         std::to_string(data.dim)});
  std::set<std::string> seen;
  for (const auto& s : data.sequences) {
    if (!seen.insert(s.id).second)
      out.push_back({s.id, "id", "duplicate sequence id"});
    const Eigen::Index t = s.observations.rows();
    if (t == 0) out.push_back({s.id, "observations", "sequence has length 0"});
    if (s.observations.cols() != data.dim)
      out.push_back({s.id, "observations",
                     "dim " + std::to_string(s.observations.cols()) +
                         " does not match dataset dim " +
                         std::to_string(data.dim)});
    if (s.mask.rows() != t || s.mask.cols() != s.observations.cols())
      out.push_back({s.id, "mask", "shape does not match observations"});
    if (s.inputs.size() != t)
      out.push_back({s.id, "inputs",
                     "length " + std::to_string(s.inputs.size()) +
                         " does not match sequence length " +
                         std::to_string(t)});
    for (Eigen::Index i = 0; i < s.inputs.size(); ++i) {
      if (!std::isfinite(s.inputs[i]) || s.inputs[i] < 0.0) {
        out.push_back({s.id, "inputs",
                       "entry " + std::to_string(i) + " = " + fmt(s.inputs[i]) +
                           " (doses must be finite and >= 0)"});
        break;
      }
    }
    // Only observed entries need to be finite; masked values are irrelevant.
    if (s.mask.rows() == t && s.mask.cols() == s.observations.cols()) {
      bool flagged = false;
      for (Eigen::Index r = 0; r < t && !flagged; ++r)
        for (Eigen::Index c = 0; c < s.observations.cols() && !flagged; ++c)
          if (s.mask(r, c) && !std::isfinite(s.observations(r, c))) {
            out.push_back({s.id, "observations",
                           "non-finite observed value at (t=" +
                               std::to_string(r) + ", d=" + std::to_string(c) +
                               ")"});
            flagged = true;
          }
    }
    if (s.times) {
      if (s.times->size() != t)
        out.push_back({s.id, "times", "length does not match sequence length"});
      for (Eigen::Index i = 1; i < s.times->size(); ++i)
        if (!((*s.times)[i] > (*s.times)[i - 1])) {
          out.push_back({s.id, "times",
                         "not strictly increasing at index " +
                             std::to_string(i)});
          break;
        }
    }
  }
  return out;
}

std::vector<Violation> validate_spec(const ModelSpec& spec) {
  std::vector<Violation> out;
  if (spec.n_components < 1)
    out.push_back({"spec", "n_components", "must be >= 1"});
  if (static_cast<int>(spec.states_per_component.size()) != spec.n_components)
    out.push_back({"spec", "states_per_component",
                   "length does not match n_components"});
  for (std::size_t k = 0; k < spec.states_per_component.size(); ++k)
    if (spec.states_per_component[k] < 1)
      out.push_back({"spec", "states_per_component",
                     "component " + std::to_string(k) + " has < 1 state"});
  if (spec.obs_dim < 1) out.push_back({"spec", "obs_dim", "must be >= 1"});
  if (spec.personal_input_effect && !spec.use_inputs)
    out.push_back({"spec", "personal_input_effect",
                   "requires use_inputs (m shifts the input effect v)"});
  if (!(spec.prior_var_r > 0.0))
    out.push_back({"spec", "prior_var_r", "must be positive"});
  if (!(spec.prior_var_m > 0.0))
    out.push_back({"spec", "prior_var_m", "must be positive"});
  return out;
}

std::vector<Violation> validate_parameters(const MixtureParameters& params,
                                           const ModelSpec& spec) {
  std::vector<Violation> out = validate_spec(spec);
  if (params.n_components() != spec.n_components) {
    out.push_back({"mixture", "components",
                   "found " + std::to_string(params.n_components()) +
                       " components, spec has " +
                       std::to_string(spec.n_components)});
    return out;
  }
  check_simplex(out, "mixture", "alpha", params.alpha);
  for (int k = 0; k < params.n_components(); ++k) {
    const auto& c = params.components[static_cast<std::size_t>(k)];
    const std::string item = "component " + std::to_string(k);
    const int states = spec.states_per_component[static_cast<std::size_t>(k)];
    if (c.pi.size() != states || c.A.rows() != states || c.A.cols() != states ||
        c.mu.rows() != states || c.var.rows() != states ||
        c.v.rows() != states) {
      out.push_back({item, "shape",
                     "expected " + std::to_string(states) + " states"});
      continue;
    }
    if (c.mu.cols() != spec.obs_dim || c.var.cols() != spec.obs_dim ||
        c.v.cols() != spec.obs_dim) {
      out.push_back({item, "shape",
                     "expected obs_dim " + std::to_string(spec.obs_dim)});
      continue;
    }
    check_simplex(out, item, "pi", c.pi);
    for (Eigen::Index l = 0; l < c.A.rows(); ++l)
      check_simplex(out, item, "A row " + std::to_string(l),
                    c.A.row(l).transpose());
    for (Eigen::Index l = 0; l < c.var.rows(); ++l)
      for (Eigen::Index d = 0; d < c.var.cols(); ++d)
        if (!std::isfinite(c.var(l, d)) || c.var(l, d) < kVarianceFloor) {
          out.push_back({item, "var",
                         "(" + std::to_string(l) + "," + std::to_string(d) +
                             ") = " + fmt(c.var(l, d)) + " below floor " +
                             fmt(kVarianceFloor)});
          l = c.var.rows();  // one violation per component is enough
          break;
        }
    if (!c.mu.allFinite()) out.push_back({item, "mu", "non-finite entry"});
    if (!c.v.allFinite()) out.push_back({item, "v", "non-finite entry"});
    if (!spec.use_inputs && c.v.cwiseAbs().maxCoeff() != 0.0)
      out.push_back({item, "v", "must be zero when use_inputs is off"});
    if (spec.left_to_right) {
      for (Eigen::Index i = 0; i < c.A.rows(); ++i)
        for (Eigen::Index j = 0; j < i; ++j)
          if (c.A(i, j) != 0.0) {
            out.push_back({item, "A",
                           "left_to_right requires A(" + std::to_string(i) +
                               "," + std::to_string(j) + ") = 0, got " +
                               fmt(c.A(i, j))});
            i = c.A.rows();
            break;
          }
    }
  }
  return out;
}

std::vector<Violation> validate_effects(const PersonalEffects& effects,
                                        const ModelSpec& spec) {
  std::vector<Violation> out;
  const auto n = static_cast<Eigen::Index>(effects.size());
  auto check = [&](const Matrix& mean, const Matrix& var, bool enabled,
                   const std::string& name) {
    if (mean.rows() != n || var.rows() != n ||
        mean.cols() != spec.obs_dim || var.cols() != spec.obs_dim) {
      out.push_back({"effects", name, "shape does not match N x obs_dim"});
      return;
    }
    if (enabled) {
      if ((var.array() <= 0.0).any())
        out.push_back({"effects", name + "_var", "variances must be > 0"});
    } else {
      if (mean.cwiseAbs().maxCoeff() != 0.0 ||
          var.cwiseAbs().maxCoeff() != 0.0)
        out.push_back({"effects", name,
                       "must be identically zero when the flag is off"});
    }
  };
  check(effects.r_mean, effects.r_var, spec.personal_state_offset, "r");
  check(effects.m_mean, effects.m_var, spec.personal_input_effect, "m");
  return out;
}

}  // namespace mixhmm

#include "mixhmm/mixture.hpp"

namespace mixhmm {

namespace {
constexpr double kEmptyComponentEps = 1e-6;
}

int BlockMap::component_of(int flat_state) const {
  for (std::size_t k = 0; k < blocks.size(); ++k)
    if (flat_state >= blocks[k].first &&
        flat_state < blocks[k].first + blocks[k].second)
      return static_cast<int>(k);
  throw std::invalid_argument("flat state " + std::to_string(flat_state) +
                              " outside every block");
}

BlockMap BlockMap::from_spec(const ModelSpec& spec) {
  BlockMap map;
  int start = 0;
  for (int l : spec.states_per_component) {
    map.blocks.emplace_back(start, l);
    start += l;
  }
  return map;
}

BlockMap BlockMap::from_mixture(const MixtureParameters& mix) {
  BlockMap map;
  int start = 0;
  for (const auto& c : mix.components) {
    map.blocks.emplace_back(start, static_cast<int>(c.n_states()));
    start += static_cast<int>(c.n_states());
  }
  return map;
}

HMMParameters build_block_diagonal(const MixtureParameters& mix) {
  const BlockMap map = BlockMap::from_mixture(mix);
  const int total = map.total_states();
  const Eigen::Index dim = mix.components.empty() ? 0 : mix.components[0].dim();

  HMMParameters flat;
  flat.pi = Vector::Zero(total);
  flat.A = Matrix::Zero(total, total);
  flat.mu = Matrix::Zero(total, dim);
  flat.var = Matrix::Zero(total, dim);
  flat.v = Matrix::Zero(total, dim);
  for (std::size_t k = 0; k < mix.components.size(); ++k) {
    const auto& c = mix.components[k];
    const int start = map.blocks[k].first;
    const int len = map.blocks[k].second;
    flat.pi.segment(start, len) = mix.alpha[static_cast<Eigen::Index>(k)] * c.pi;
    flat.A.block(start, start, len, len) = c.A;
    flat.mu.middleRows(start, len) = c.mu;
    flat.var.middleRows(start, len) = c.var;
    flat.v.middleRows(start, len) = c.v;
  }
  return flat;
}

std::vector<int> assign_clusters(const std::vector<DecodedPath>& paths,
                                 const BlockMap& map) {
  std::vector<int> labels;
  labels.reserve(paths.size());
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto& p = paths[i];
    if (p.states.empty())
      throw std::invalid_argument("empty decoded path at index " +
                                  std::to_string(i));
    const int label = map.component_of(p.states.front());
    for (int s : p.states)
      if (map.component_of(s) != label)
        throw std::logic_error(
            "internal error: decoded path " + std::to_string(i) +
            " crosses blocks (structural zeros violated)");
    labels.push_back(label);
  }
  return labels;
}

MixtureParameters extract_components(const HMMParameters& flat,
                                     const BlockMap& map,
                                     const std::vector<int>& labels) {
  const int n_comp = map.n_components();
  MixtureParameters mix;
  mix.alpha = Vector::Zero(n_comp);
  for (int lab : labels) {
    if (lab < 0 || lab >= n_comp)
      throw std::invalid_argument("label " + std::to_string(lab) +
                                  " outside [0, K)");
    mix.alpha[lab] += 1.0;
  }
  if (!labels.empty()) mix.alpha /= static_cast<double>(labels.size());
  for (Eigen::Index k = 0; k < n_comp; ++k)
    if (mix.alpha[k] == 0.0) mix.alpha[k] = kEmptyComponentEps;
  mix.alpha /= mix.alpha.sum();

  for (int k = 0; k < n_comp; ++k) {
    const int start = map.blocks[static_cast<std::size_t>(k)].first;
    const int len = map.blocks[static_cast<std::size_t>(k)].second;
    HMMParameters c;
    c.pi = flat.pi.segment(start, len);
    const double mass = c.pi.sum();
    if (mass > 0.0)
      c.pi /= mass;
    else
      c.pi = Vector::Constant(len, 1.0 / len);  // dead block
    c.A = flat.A.block(start, start, len, len);
    c.mu = flat.mu.middleRows(start, len);
    c.var = flat.var.middleRows(start, len);
    c.v = flat.v.middleRows(start, len);
    mix.components.push_back(std::move(c));
  }
  return mix;
}

Vector posterior_component_masses(const std::vector<Posteriors>& posteriors,
                                  const BlockMap& map) {
  Vector mass = Vector::Zero(map.n_components());
  for (const auto& post : posteriors)
    for (int k = 0; k < map.n_components(); ++k)
      mass[k] += post.gamma.row(0)
                     .segment(map.blocks[static_cast<std::size_t>(k)].first,
                              map.blocks[static_cast<std::size_t>(k)].second)
                     .sum();
  if (!posteriors.empty()) mass /= static_cast<double>(posteriors.size());
  return mass;
}

}  // namespace mixhmm

#pragma once

#include "mixhmm/inference.hpp"
#include "mixhmm/types.hpp"

namespace mixhmm {

/// Maps flattened state indices to (component, local state) and back.
struct BlockMap {
  std::vector<std::pair<int, int>> blocks;  // (start, length) per component

  int n_components() const { return static_cast<int>(blocks.size()); }
  int total_states() const {
    return blocks.empty() ? 0 : blocks.back().first + blocks.back().second;
  }
  int component_of(int flat_state) const;
  int local_state(int flat_state) const {
    return flat_state - blocks[static_cast<std::size_t>(component_of(flat_state))].first;
  }

  static BlockMap from_spec(const ModelSpec& spec);
  static BlockMap from_mixture(const MixtureParameters& mix);
};

/// One HMM whose transition matrix carries the component matrices on the
/// diagonal and exact zeros elsewhere; flattened pi is the concatenation of
/// alpha_k * pi_k. A decoded path under this model stays inside one block.
HMMParameters build_block_diagonal(const MixtureParameters& mix);

/// Component label per path: the block containing its states. A path that
/// crosses blocks means the structural zeros were violated somewhere
/// upstream, which is an internal error.
std::vector<int> assign_clusters(const std::vector<DecodedPath>& paths,
                                 const BlockMap& map);

/// Slices per-component parameters back out of a flattened model. alpha_k =
/// (#sequences labeled k) / N, with empty components given epsilon = 1e-6
/// before renormalization so criteria stay finite.
MixtureParameters extract_components(const HMMParameters& flat,
                                     const BlockMap& map,
                                     const std::vector<int>& labels);

/// Soft alternative to hard-count alpha: posterior component mass, i.e. the
/// block mass of gamma at t = 0 (constant over t since paths cannot cross
/// blocks), averaged over sequences.
Vector posterior_component_masses(const std::vector<Posteriors>& posteriors,
                                  const BlockMap& map);

}  // namespace mixhmm

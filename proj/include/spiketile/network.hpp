#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "spiketile/errors.hpp"

namespace spiketile {

inline constexpr int kTileDim = 16;        // neurons per tile edge
inline constexpr int kMaxTimesteps = 128;  // output memory depth per tile row
inline constexpr int kMaxOutputTiles = 4;  // output rows the hardware can record
inline constexpr int kWeightQMax = 127;    // symmetric int8, -128 never emitted
inline constexpr int kMembraneQMin = -128;
inline constexpr int kMembraneQMax = 127;

/// Directed weighted edge. A spike emitted by `pre` at timestep t is weighted
/// into `post`'s input current at t+1 (one timestep of synaptic delay).
struct Synapse {
  int pre = 0;
  int post = 0;
  double weight = 0.0;

  friend bool operator==(const Synapse&, const Synapse&) = default;
};

inline int tile_row_of(int neuron) { return neuron / kTileDim; }
inline int tile_slot_of(int neuron) { return neuron % kTileDim; }
inline int tile_row_count(int neuron_count) {
  return (neuron_count + kTileDim - 1) / kTileDim;
}

/// Spiking network with integrate-and-fire dynamics:
///   U(t) = beta * U(t-1) + I(t); spike and reset U to 0 when U >= threshold.
/// Any directed topology. Immutable after make(); safe to share across
/// threads.
struct NetworkGraph {
  int neuron_count = 0;
  double threshold = 1.0;
  double beta = 1.0;  // membrane decay, 1 = perfect integrator
  std::vector<int> input_ids;
  std::vector<int> output_ids;
  std::vector<Synapse> synapses;  // sorted by (pre, post), duplicates merged

  /// Validates and normalizes. Multi-edges between the same (pre, post) pair
  /// are merged by summing weights. Throws ContractError on bad indices or
  /// duplicated ids, InputError on non-finite numbers or beta outside (0, 1].
  static NetworkGraph make(int neuron_count, std::vector<Synapse> synapses,
                           std::vector<int> input_ids, std::vector<int> output_ids,
                           double threshold, double beta = 1.0) {
    if (neuron_count < 1)
      throw ContractError("network: neuron_count must be >= 1, got " +
                          std::to_string(neuron_count));
    if (!std::isfinite(threshold))
      throw InputError("network: threshold is not finite");
    if (!(beta > 0.0 && beta <= 1.0) || !std::isfinite(beta))
      throw InputError("network: beta must lie in (0, 1], got " + std::to_string(beta));

    auto check_ids = [&](const std::vector<int>& ids, const char* what) {
      std::set<int> seen;
      for (int id : ids) {
        if (id < 0 || id >= neuron_count)
          throw ContractError(std::string("network: ") + what + " id " +
                              std::to_string(id) + " out of range [0, " +
                              std::to_string(neuron_count) + ")");
        if (!seen.insert(id).second)
          throw ContractError(std::string("network: duplicate ") + what + " id " +
                              std::to_string(id));
      }
    };
    check_ids(input_ids, "input");
    check_ids(output_ids, "output");

    for (const Synapse& s : synapses) {
      if (s.pre < 0 || s.pre >= neuron_count || s.post < 0 || s.post >= neuron_count)
        throw ContractError("network: synapse (" + std::to_string(s.pre) + " -> " +
                            std::to_string(s.post) + ") out of range [0, " +
                            std::to_string(neuron_count) + ")");
      if (!std::isfinite(s.weight))
        throw InputError("network: weight of synapse (" + std::to_string(s.pre) +
                         " -> " + std::to_string(s.post) + ") is not finite");
    }

    std::sort(synapses.begin(), synapses.end(), [](const Synapse& a, const Synapse& b) {
      return std::tie(a.pre, a.post) < std::tie(b.pre, b.post);
    });
    std::vector<Synapse> merged;
    merged.reserve(synapses.size());
    for (const Synapse& s : synapses) {
      if (!merged.empty() && merged.back().pre == s.pre && merged.back().post == s.post)
        merged.back().weight += s.weight;
      else
        merged.push_back(s);
    }

    NetworkGraph g;
    g.neuron_count = neuron_count;
    g.threshold = threshold;
    g.beta = beta;
    g.input_ids = std::move(input_ids);
    g.output_ids = std::move(output_ids);
    g.synapses = std::move(merged);
    return g;
  }

  friend bool operator==(const NetworkGraph&, const NetworkGraph&) = default;
};

/// Number of stored (merged) synapses.
inline std::size_t count_synapses(const NetworkGraph& g) { return g.synapses.size(); }

/// Ascending tile rows that contain at least one of the given neurons.
inline std::vector<int> output_tile_rows(const std::vector<int>& neuron_ids) {
  std::set<int> rows;
  for (int id : neuron_ids) rows.insert(tile_row_of(id));
  return {rows.begin(), rows.end()};
}

/// Injected input current, dense over (timestep, input slot). Slot k feeds
/// the k-th entry of the network's input_ids.
struct StimulusPlan {
  int horizon = 0;
  int width = 0;
  std::vector<double> injections;  // horizon * width, timestep-major

  static StimulusPlan zeros(int horizon, int width) {
    if (horizon < 0 || width < 0) throw ContractError("stimulus: negative dimensions");
    StimulusPlan p;
    p.horizon = horizon;
    p.width = width;
    p.injections.assign(static_cast<std::size_t>(horizon) * width, 0.0);
    return p;
  }

  double at(int t, int slot) const {
    return injections[static_cast<std::size_t>(t) * width + slot];
  }
  double& at(int t, int slot) {
    return injections[static_cast<std::size_t>(t) * width + slot];
  }

  friend bool operator==(const StimulusPlan&, const StimulusPlan&) = default;
};

/// Dense spike raster over a run, plus the packed 16-bit output words the
/// hardware records (one word per output tile row per timestep, bit k =
/// neuron 16*row + k).
struct SpikeTrain {
  int horizon = 0;
  int neuron_count = 0;
  std::vector<int> output_tile_rows;       // ascending
  std::vector<std::uint8_t> spikes;        // horizon * neuron_count
  std::vector<std::uint16_t> output_words; // horizon * output_tile_rows.size()

  std::uint8_t spike(int t, int n) const {
    return spikes[static_cast<std::size_t>(t) * neuron_count + n];
  }
  std::uint16_t output_word(int t, int row_ordinal) const {
    return output_words[static_cast<std::size_t>(t) * output_tile_rows.size() + row_ordinal];
  }
  /// Total spikes of one neuron across the run.
  long long spike_count(int n) const {
    long long c = 0;
    for (int t = 0; t < horizon; ++t) c += spike(t, n);
    return c;
  }

  friend bool operator==(const SpikeTrain&, const SpikeTrain&) = default;
};

/// Mutable per-neuron state threaded through single-step simulation.
struct NeuronStateVector {
  std::vector<double> membranes;          // integer-valued in int mode
  std::vector<std::uint8_t> last_spikes;  // spikes emitted on the previous step

  static NeuronStateVector zeros(int neuron_count) {
    NeuronStateVector s;
    s.membranes.assign(neuron_count, 0.0);
    s.last_spikes.assign(neuron_count, 0);
    return s;
  }

  friend bool operator==(const NeuronStateVector&, const NeuronStateVector&) = default;
};

}  // namespace spiketile

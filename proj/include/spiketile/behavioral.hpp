#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "spiketile/errors.hpp"
#include "spiketile/network.hpp"

namespace spiketile {

/// Float: IEEE double dynamics, arbitrary beta.
/// Int: hardware-faithful integer dynamics. Beta is forced to 1, currents
/// accumulate in 64-bit, the threshold compare sees the unsaturated sum, and
/// the stored membrane saturates to int8 range. Weights, threshold and
/// injections must be integer-valued.
enum class SimMode { Float, Int };

namespace detail {

inline long long require_integral(double v, const char* what) {
  double r = std::nearbyint(v);
  if (!std::isfinite(v) || r != v)
    throw InputError(std::string("int mode: ") + what + " must be integer-valued, got " +
                     std::to_string(v));
  return static_cast<long long>(r);
}

inline long long saturate_membrane(long long v) {
  if (v < kMembraneQMin) return kMembraneQMin;
  if (v > kMembraneQMax) return kMembraneQMax;
  return v;
}

}  // namespace detail

/// Steps a fixed network. Builds the adjacency once; reuse across steps and
/// runs. The state vector is owned by the caller.
class BehavioralSimulator {
 public:
  BehavioralSimulator(const NetworkGraph& net, SimMode mode)
      : mode_(mode),
        neuron_count_(net.neuron_count),
        threshold_f_(net.threshold),
        beta_(net.beta),
        input_ids_(net.input_ids),
        output_rows_(output_tile_rows(net.output_ids)) {
    if (mode_ == SimMode::Int) {
      threshold_i_ = detail::require_integral(net.threshold, "threshold");
      // beta forced to 1; nothing to convert
    }
    row_ptr_.assign(neuron_count_ + 1, 0);
    for (const Synapse& s : net.synapses) row_ptr_[s.pre + 1]++;
    for (int i = 0; i < neuron_count_; ++i) row_ptr_[i + 1] += row_ptr_[i];
    targets_.resize(net.synapses.size());
    weights_f_.resize(net.synapses.size());
    std::vector<int> cursor(row_ptr_.begin(), row_ptr_.end() - 1);
    for (const Synapse& s : net.synapses) {
      int k = cursor[s.pre]++;
      targets_[k] = s.post;
      weights_f_[k] = s.weight;
    }
    if (mode_ == SimMode::Int) {
      weights_i_.resize(weights_f_.size());
      for (std::size_t k = 0; k < weights_f_.size(); ++k)
        weights_i_[k] = detail::require_integral(weights_f_[k], "weight");
    }
  }

  int neuron_count() const { return neuron_count_; }
  const std::vector<int>& output_rows() const { return output_rows_; }

  /// One timestep: gathers currents from last_spikes (the one-step synaptic
  /// delay), adds injections, updates membranes, fires at >= threshold.
  /// Returns the spikes emitted this step and writes them back into
  /// state.last_spikes.
  std::vector<std::uint8_t> step(NeuronStateVector& state,
                                 std::span<const double> injection) const {
    if (static_cast<int>(state.membranes.size()) != neuron_count_ ||
        static_cast<int>(state.last_spikes.size()) != neuron_count_)
      throw ContractError("behavioral: state size does not match network");
    if (injection.size() != input_ids_.size())
      throw ContractError("behavioral: injection width " + std::to_string(injection.size()) +
                          " does not match input count " + std::to_string(input_ids_.size()));
    return mode_ == SimMode::Float ? step_float(state, injection) : step_int(state, injection);
  }

 private:
  std::vector<std::uint8_t> step_float(NeuronStateVector& state,
                                       std::span<const double> injection) const {
    std::vector<double> current(neuron_count_, 0.0);
    for (int pre = 0; pre < neuron_count_; ++pre) {
      if (!state.last_spikes[pre]) continue;
      for (int k = row_ptr_[pre]; k < row_ptr_[pre + 1]; ++k)
        current[targets_[k]] += weights_f_[k];
    }
    for (std::size_t i = 0; i < input_ids_.size(); ++i) {
      if (!std::isfinite(injection[i]))
        throw InputError("behavioral: injection slot " + std::to_string(i) + " is not finite");
      current[input_ids_[i]] += injection[i];
    }
    std::vector<std::uint8_t> out(neuron_count_, 0);
    for (int n = 0; n < neuron_count_; ++n) {
      double u = beta_ * state.membranes[n] + current[n];
      if (u >= threshold_f_) {
        out[n] = 1;
        state.membranes[n] = 0.0;
      } else {
        state.membranes[n] = u;
      }
    }
    state.last_spikes = out;
    return out;
  }

  std::vector<std::uint8_t> step_int(NeuronStateVector& state,
                                     std::span<const double> injection) const {
    std::vector<long long> current(neuron_count_, 0);
    for (int pre = 0; pre < neuron_count_; ++pre) {
      if (!state.last_spikes[pre]) continue;
      for (int k = row_ptr_[pre]; k < row_ptr_[pre + 1]; ++k)
        current[targets_[k]] += weights_i_[k];
    }
    for (std::size_t i = 0; i < input_ids_.size(); ++i)
      current[input_ids_[i]] += detail::require_integral(injection[i], "injection");
    std::vector<std::uint8_t> out(neuron_count_, 0);
    for (int n = 0; n < neuron_count_; ++n) {
      // beta == 1 here; stored membrane is always in int8 range already
      long long u = static_cast<long long>(state.membranes[n]) + current[n];
      if (u >= threshold_i_) {
        out[n] = 1;
        state.membranes[n] = 0.0;
      } else {
        state.membranes[n] = static_cast<double>(detail::saturate_membrane(u));
      }
    }
    state.last_spikes = out;
    return out;
  }

  SimMode mode_;
  int neuron_count_;
  double threshold_f_;
  long long threshold_i_ = 0;
  double beta_;
  std::vector<int> input_ids_;
  std::vector<int> output_rows_;
  std::vector<int> row_ptr_;       // CSR over presynaptic neuron
  std::vector<int> targets_;
  std::vector<double> weights_f_;
  std::vector<long long> weights_i_;
};

/// Single-step convenience wrapper. Rebuilds adjacency per call; fine for
/// small networks, use BehavioralSimulator directly in loops.
inline std::vector<std::uint8_t> behavioral_step(const NetworkGraph& net,
                                                 NeuronStateVector& state,
                                                 std::span<const double> injection,
                                                 SimMode mode) {
  return BehavioralSimulator(net, mode).step(state, injection);
}

namespace detail {

inline std::uint16_t pack_row_word(const std::vector<std::uint8_t>& spikes, int row,
                                   int neuron_count) {
  std::uint16_t w = 0;
  for (int k = 0; k < kTileDim; ++k) {
    int n = row * kTileDim + k;
    if (n < neuron_count && spikes[n]) w |= static_cast<std::uint16_t>(1u << k);
  }
  return w;
}

}  // namespace detail

/// Full run from zero state. Injection row t of the plan is applied at
/// timestep t. Output words are packed from the output tile rows.
inline SpikeTrain behavioral_run(const NetworkGraph& net, const StimulusPlan& stim,
                                 SimMode mode,
                                 std::vector<double>* membrane_trace = nullptr) {
  if (stim.width != static_cast<int>(net.input_ids.size()))
    throw ContractError("behavioral: stimulus width " + std::to_string(stim.width) +
                        " does not match input count " + std::to_string(net.input_ids.size()));
  if (stim.horizon < 0) throw ContractError("behavioral: negative horizon");

  BehavioralSimulator sim(net, mode);
  NeuronStateVector state = NeuronStateVector::zeros(net.neuron_count);

  SpikeTrain train;
  train.horizon = stim.horizon;
  train.neuron_count = net.neuron_count;
  train.output_tile_rows = sim.output_rows();
  train.spikes.reserve(static_cast<std::size_t>(stim.horizon) * net.neuron_count);
  train.output_words.reserve(static_cast<std::size_t>(stim.horizon) *
                             train.output_tile_rows.size());
  if (membrane_trace) {
    membrane_trace->clear();
    membrane_trace->reserve(static_cast<std::size_t>(stim.horizon) * net.neuron_count);
  }

  for (int t = 0; t < stim.horizon; ++t) {
    std::span<const double> inj(stim.injections.data() +
                                    static_cast<std::size_t>(t) * stim.width,
                                static_cast<std::size_t>(stim.width));
    std::vector<std::uint8_t> s = sim.step(state, inj);
    for (int row : train.output_tile_rows)
      train.output_words.push_back(detail::pack_row_word(s, row, net.neuron_count));
    train.spikes.insert(train.spikes.end(), s.begin(), s.end());
    if (membrane_trace)
      membrane_trace->insert(membrane_trace->end(), state.membranes.begin(),
                             state.membranes.end());
  }
  return train;
}

/// Argmax of total output spike counts, ties broken toward the lowest index.
/// Returns a position into output_ids.
inline int classify_rate(const SpikeTrain& train, const std::vector<int>& output_ids) {
  if (output_ids.empty()) throw ContractError("classify: output_ids is empty");
  if (train.horizon <= 0) throw InputError("classify: empty horizon");
  int best = 0;
  long long best_count = -1;
  for (std::size_t j = 0; j < output_ids.size(); ++j) {
    int id = output_ids[j];
    if (id < 0 || id >= train.neuron_count)
      throw ContractError("classify: output id " + std::to_string(id) + " out of range");
    long long c = train.spike_count(id);
    if (c > best_count) {
      best_count = c;
      best = static_cast<int>(j);
    }
  }
  return best;
}

}  // namespace spiketile

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <vector>

#include "spiketile/errors.hpp"
#include "spiketile/network.hpp"

namespace spiketile {

/// Round half away from zero (2.5 -> 3, -2.5 -> -3).
inline long long round_half_away(double v) { return std::llround(v); }

struct QuantizedSynapse {
  int pre = 0;
  int post = 0;
  std::int8_t weight = 0;

  friend bool operator==(const QuantizedSynapse&, const QuantizedSynapse&) = default;
};

/// Int8 image of a float network. Weights are symmetric int8 (the value -128
/// is never produced), threshold is scaled by the same factor and kept >= 1
/// so a padded all-zero neuron can never fire.
struct QuantizedNetwork {
  int neuron_count = 0;
  long long threshold_q = 1;
  double scale = 1.0;  // int weight = round(float weight * scale)
  std::vector<int> input_ids;
  std::vector<int> output_ids;
  std::vector<QuantizedSynapse> synapses;  // same order as the source graph

  friend bool operator==(const QuantizedNetwork&, const QuantizedNetwork&) = default;
};

/// Symmetric per-network quantization: scale = 127 / max|w|.
/// Requires beta == 1 (the hardware has no decay path) and threshold > 0.
inline QuantizedNetwork quantize(const NetworkGraph& g) {
  if (g.beta != 1.0)
    throw CompileError("quantize: only beta == 1 networks map to hardware, got beta = " +
                       std::to_string(g.beta));
  if (!(g.threshold > 0.0))
    throw CompileError("quantize: threshold must be positive, got " +
                       std::to_string(g.threshold));

  double max_abs = 0.0;
  for (const Synapse& s : g.synapses) max_abs = std::max(max_abs, std::fabs(s.weight));
  if (max_abs == 0.0)
    throw CompileError("quantize: network has no nonzero weight, scale is undefined");

  QuantizedNetwork q;
  q.neuron_count = g.neuron_count;
  q.scale = static_cast<double>(kWeightQMax) / max_abs;
  q.input_ids = g.input_ids;
  q.output_ids = g.output_ids;
  q.synapses.reserve(g.synapses.size());
  for (const Synapse& s : g.synapses) {
    long long w = round_half_away(s.weight * q.scale);
    if (w > kWeightQMax) w = kWeightQMax;    // guards FP round-up at the extreme
    if (w < -kWeightQMax) w = -kWeightQMax;  // keeps -128 out of the image
    q.synapses.push_back({s.pre, s.post, static_cast<std::int8_t>(w)});
  }
  q.threshold_q = std::max<long long>(1, round_half_away(g.threshold * q.scale));
  return q;
}

/// The quantized network as a plain graph with integer-valued weights, for
/// running through the behavioral simulator in int mode.
inline NetworkGraph dequantize_graph(const QuantizedNetwork& q) {
  std::vector<Synapse> syn;
  syn.reserve(q.synapses.size());
  for (const QuantizedSynapse& s : q.synapses)
    syn.push_back({s.pre, s.post, static_cast<double>(s.weight)});
  return NetworkGraph::make(q.neuron_count, std::move(syn), q.input_ids, q.output_ids,
                            static_cast<double>(q.threshold_q), 1.0);
}

/// Maps a float-domain stimulus into the quantized current domain:
/// each injection becomes round(value * scale).
inline StimulusPlan scale_stimulus(const StimulusPlan& s, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw ContractError("scale_stimulus: scale must be positive and finite");
  StimulusPlan out = s;
  for (double& v : out.injections) {
    if (!std::isfinite(v)) throw InputError("scale_stimulus: non-finite injection");
    v = static_cast<double>(round_half_away(v * scale));
  }
  return out;
}

}  // namespace spiketile

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "spiketile/errors.hpp"
#include "spiketile/network.hpp"
#include "spiketile/quantize.hpp"

namespace spiketile {

/// Direct current injection for the integer pipeline: pixel p becomes a
/// constant per-timestep current round(p * gain / 255). With an IF neuron at
/// threshold_q this approximates a rate code: spike count over T steps is
/// about T * round(p * gain / 255) / threshold_q.
inline StimulusPlan encode_injection(std::span<const std::uint8_t> image, int horizon,
                                     long long gain) {
  if (horizon < 1) throw InputError("encode: horizon must be >= 1");
  if (horizon > kMaxTimesteps)
    throw InputError("encode: horizon " + std::to_string(horizon) + " exceeds the " +
                     std::to_string(kMaxTimesteps) + " timestep cap");
  if (gain <= 0) throw InputError("encode: gain must be positive");
  StimulusPlan plan = StimulusPlan::zeros(horizon, static_cast<int>(image.size()));
  std::vector<double> row(image.size());
  for (std::size_t i = 0; i < image.size(); ++i)
    row[i] = static_cast<double>(
        round_half_away(static_cast<double>(image[i]) * static_cast<double>(gain) / 255.0));
  for (int t = 0; t < horizon; ++t)
    for (std::size_t i = 0; i < image.size(); ++i)
      plan.at(t, static_cast<int>(i)) = row[i];
  return plan;
}

/// Float-domain equivalent used for training and the float reference path:
/// pixel p becomes p / 255 * gain.
inline StimulusPlan encode_injection_float(std::span<const std::uint8_t> image, int horizon,
                                           double gain) {
  if (horizon < 1) throw InputError("encode: horizon must be >= 1");
  if (!(gain > 0.0) || !std::isfinite(gain))
    throw InputError("encode: gain must be positive and finite");
  StimulusPlan plan = StimulusPlan::zeros(horizon, static_cast<int>(image.size()));
  for (int t = 0; t < horizon; ++t)
    for (std::size_t i = 0; i < image.size(); ++i)
      plan.at(t, static_cast<int>(i)) = static_cast<double>(image[i]) / 255.0 * gain;
  return plan;
}

/// Constant drive vector for the trainer (same scaling as the float plan).
inline std::vector<double> encode_drive(std::span<const std::uint8_t> image, double gain) {
  if (!(gain > 0.0) || !std::isfinite(gain))
    throw InputError("encode: gain must be positive and finite");
  std::vector<double> drive(image.size());
  for (std::size_t i = 0; i < image.size(); ++i)
    drive[i] = static_cast<double>(image[i]) / 255.0 * gain;
  return drive;
}

}  // namespace spiketile

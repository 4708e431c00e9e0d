#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "spiketile/errors.hpp"
#include "spiketile/network.hpp"

namespace spiketile {

/// Hand-coded recurrent demo network: reports whether two input pulses are an
/// even number of timesteps apart.
///
/// Neuron 1 takes the input. The first pulse passes through 2 and starts the
/// 3<->4 oscillator, which from then on inhibits 2 so later pulses cannot
/// restart it. Neurons 1 and 3 form an AND onto the output: each alone
/// contributes 64 against a threshold of 127, so the output fires only when
/// a pulse lands on the oscillator phase where 3 just fired, i.e. when the
/// separation is even. 2 and 4 inhibit the output so near-miss phases drain
/// instead of accumulating. The output sits at index 16 so the network spans
/// two tile rows.
///
/// All weights are in {+-64, +-127} and the threshold is 127, which makes the
/// quantizer's scale exactly 1: the float, integer and cycle paths produce
/// identical spike trains.
inline NetworkGraph build_parity_network() {
  std::vector<Synapse> syn = {
      {1, 2, 127.0},  {2, 3, 127.0},  {3, 4, 127.0},   {4, 3, 127.0},
      {3, 2, -127.0}, {4, 2, -127.0}, {1, 16, 64.0},   {3, 16, 64.0},
      {2, 16, -64.0}, {4, 16, -127.0}};
  return NetworkGraph::make(17, std::move(syn), {1}, {16}, 127.0, 1.0);
}

inline constexpr double kParityPulse = 127.0;  // one pulse makes neuron 1 fire
inline constexpr std::array<int, 5> kParityColumns = {1, 2, 3, 4, 16};

/// One demo scenario plus its expected spike table over kParityColumns.
struct ParityCase {
  const char* name;
  std::array<int, 2> pulse_steps;  // 0-based timesteps of the two pulses
  std::vector<std::array<std::uint8_t, 5>> golden;  // rows are timesteps
};

inline const ParityCase& parity_case_even() {
  static const ParityCase c{"even",
                            {0, 2},
                            {{{1, 0, 0, 0, 0}},
                             {{0, 1, 0, 0, 0}},
                             {{1, 0, 1, 0, 0}},
                             {{0, 0, 0, 1, 1}}}};
  return c;
}

inline const ParityCase& parity_case_odd() {
  static const ParityCase c{"odd",
                            {0, 3},
                            {{{1, 0, 0, 0, 0}},
                             {{0, 1, 0, 0, 0}},
                             {{0, 0, 1, 0, 0}},
                             {{1, 0, 0, 1, 0}},
                             {{0, 0, 1, 0, 0}}}};
  return c;
}

inline StimulusPlan parity_stimulus(const ParityCase& c, int horizon) {
  if (horizon < static_cast<int>(c.golden.size()))
    throw ContractError("parity: horizon shorter than the golden table");
  StimulusPlan plan = StimulusPlan::zeros(horizon, 1);
  for (int t : c.pulse_steps) plan.at(t, 0) = kParityPulse;
  return plan;
}

/// True when the train matches the golden table over its rows.
inline bool check_parity_golden(const SpikeTrain& train, const ParityCase& c) {
  if (train.horizon < static_cast<int>(c.golden.size())) return false;
  for (std::size_t t = 0; t < c.golden.size(); ++t)
    for (std::size_t j = 0; j < kParityColumns.size(); ++j)
      if (train.spike(static_cast<int>(t), kParityColumns[j]) != c.golden[t][j]) return false;
  return true;
}

}  // namespace spiketile

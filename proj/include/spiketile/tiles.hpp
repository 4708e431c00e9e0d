#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "spiketile/errors.hpp"
#include "spiketile/network.hpp"
#include "spiketile/quantize.hpp"

namespace spiketile {

/// One 16x16 block of the connectivity matrix. x selects the presynaptic
/// slice [16x, 16x+16), y the postsynaptic slice [16y, 16y+16).
/// weights[pre_slot * 16 + post_slot], int8, never -128.
struct Tile {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::array<std::int8_t, kTileDim * kTileDim> weights{};

  std::int8_t weight(int pre_slot, int post_slot) const {
    return weights[pre_slot * kTileDim + post_slot];
  }

  friend bool operator==(const Tile&, const Tile&) = default;
};

/// Complete streamable program: all nonzero tiles in stream order
/// (ascending postsynaptic row y, then ascending x within a row), plus the
/// scalar parameters the neuron array needs.
struct TileProgram {
  std::vector<Tile> tiles;
  int neuron_count = 0;
  std::vector<int> output_tile_ids;  // ascending tile rows holding output neurons
  long long threshold_q = 1;
  double scale = 1.0;
  int horizon_cap = kMaxTimesteps;

  friend bool operator==(const TileProgram&, const TileProgram&) = default;
};

/// Count of nonzero weight slots across all tiles.
inline long long count_nonzero_slots(const TileProgram& p) {
  long long n = 0;
  for (const Tile& t : p.tiles)
    for (std::int8_t w : t.weights)
      if (w != 0) ++n;
  return n;
}

/// Splits a quantized network into 16x16 tiles. All-zero tiles are omitted;
/// slots for neuron ids beyond neuron_count stay zero (padding).
inline TileProgram tile_partition(const QuantizedNetwork& q) {
  if (q.neuron_count < 1) throw ContractError("tile_partition: empty network");
  if (q.threshold_q < 1) throw ContractError("tile_partition: threshold_q must be >= 1");

  std::vector<int> out_rows = output_tile_rows(q.output_ids);
  if (static_cast<int>(out_rows.size()) > kMaxOutputTiles)
    throw CompileError("tile_partition: output neurons span " +
                       std::to_string(out_rows.size()) + " tile rows, hardware records at most " +
                       std::to_string(kMaxOutputTiles));

  // map key (y, x) gives stream order for free
  std::map<std::pair<int, int>, std::array<std::int8_t, kTileDim * kTileDim>> blocks;
  for (const QuantizedSynapse& s : q.synapses) {
    if (s.weight == 0) continue;
    if (s.weight == -128)
      throw ContractError("tile_partition: weight -128 is not representable in the image");
    int x = tile_row_of(s.pre);
    int y = tile_row_of(s.post);
    if (x > 0xFFFF || y > 0xFFFF)
      throw CompileError("tile_partition: tile index (" + std::to_string(x) + ", " +
                         std::to_string(y) + ") exceeds the 16-bit index field");
    auto& w = blocks[{y, x}];  // value-initialized to zeros on first touch
    w[tile_slot_of(s.pre) * kTileDim + tile_slot_of(s.post)] = s.weight;
  }

  TileProgram p;
  p.neuron_count = q.neuron_count;
  p.output_tile_ids = std::move(out_rows);
  p.threshold_q = q.threshold_q;
  p.scale = q.scale;
  p.tiles.reserve(blocks.size());
  for (auto& [yx, w] : blocks) {
    Tile t;
    t.y = static_cast<std::uint16_t>(yx.first);
    t.x = static_cast<std::uint16_t>(yx.second);
    t.weights = w;
    p.tiles.push_back(t);
  }
  return p;
}

}  // namespace spiketile

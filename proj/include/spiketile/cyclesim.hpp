#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "spiketile/behavioral.hpp"
#include "spiketile/errors.hpp"
#include "spiketile/network.hpp"
#include "spiketile/tiles.hpp"

namespace spiketile {

struct PipelineConfig {
  int adder_tree_latency = 5;  // cycles from crossbar issue to FIFO landing
  int fifo_depth = 8;          // synchronization FIFO capacity, entries
  long long clock_hz = 100'000'000;
  int max_timesteps = kMaxTimesteps;    // output memory depth
  int max_output_tiles = kMaxOutputTiles;
};

struct CycleReport {
  long long total_cycles = 0;
  std::vector<long long> cycles_per_timestep;
  long long tiles_streamed = 0;
  long long stall_cycles = 0;           // issue stalls; the stream never backpressures
  long long reset_events = 0;           // stream finalizes (row changes + end flush)
  long long injection_row_updates = 0;  // input-only rows touched outside the stream
  double seconds = 0.0;
  double ms_per_inference = 0.0;
};

struct CycleEstimate {
  long long stream_cycles_per_timestep = 0;     // tiles + adder latency + drain
  long long injection_cycles_per_timestep = 0;  // input-only row updates
  long long overhead_cycles_per_timestep = 2;   // bank swap + timestep control
  long long cycles_per_timestep = 0;
  long long total_cycles = 0;
  double seconds = 0.0;
  double ms_per_inference = 0.0;
};

struct SimOutput {
  SpikeTrain train;
  CycleReport report;
  std::vector<std::uint16_t> output_mem;  // horizon x output_tile_ids.size()
};

/// Weighted column reduction for one tile: for each postsynaptic slot j,
/// the sum of weights[i*16+j] over presynaptic slots i set in spike_word.
inline std::array<std::int32_t, kTileDim> crossbar_column_sums(std::uint16_t spike_word,
                                                               const Tile& tile) {
  std::array<std::int32_t, kTileDim> sums{};
  for (int i = 0; i < kTileDim; ++i) {
    if (!(spike_word >> i & 1u)) continue;
    for (int j = 0; j < kTileDim; ++j) sums[j] += tile.weights[i * kTileDim + j];
  }
  return sums;
}

/// Working registers of the 16-lane neuron array while one postsynaptic tile
/// row is active.
struct NeuronArrayState {
  std::array<long long, kTileDim> acc{};        // wide accumulators
  std::array<std::int8_t, kTileDim> membranes{};  // loaded from membrane memory

  void load_row(std::span<const std::int8_t> row_membranes) {
    acc.fill(0);
    for (int i = 0; i < kTileDim; ++i) membranes[i] = row_membranes[i];
  }
};

struct NeuronUnitResult {
  std::uint16_t spike_word = 0;
  std::array<std::int8_t, kTileDim> membranes{};  // post-reset writeback values
};

/// One consume cycle of the neuron array. Accumulates column sums plus
/// injected current; on RESET it compares the full-width value
/// membrane + accumulator against threshold_q per lane, emits the spike word,
/// and saturates non-firing membranes into int8 for writeback.
inline std::optional<NeuronUnitResult> neuron_unit_step(NeuronArrayState& state,
                                                        std::span<const std::int32_t> column_sums,
                                                        std::span<const long long> injection,
                                                        bool reset, long long threshold_q) {
  if (column_sums.size() != kTileDim || injection.size() != kTileDim)
    throw ContractError("neuron_unit_step: lane count must be 16");
  for (int j = 0; j < kTileDim; ++j) state.acc[j] += column_sums[j] + injection[j];
  if (!reset) return std::nullopt;

  NeuronUnitResult res;
  for (int j = 0; j < kTileDim; ++j) {
    long long wide = static_cast<long long>(state.membranes[j]) + state.acc[j];
    if (wide >= threshold_q) {
      res.spike_word |= static_cast<std::uint16_t>(1u << j);
      res.membranes[j] = 0;
    } else {
      res.membranes[j] = static_cast<std::int8_t>(detail::saturate_membrane(wide));
    }
  }
  state.acc.fill(0);
  state.membranes = res.membranes;
  return res;
}

/// Double-buffered per-row spike words. Reads see the previous timestep.
class SpikeMemory {
 public:
  explicit SpikeMemory(int rows)
      : bank_{std::vector<std::uint16_t>(rows, 0), std::vector<std::uint16_t>(rows, 0)} {}

  std::uint16_t read(int row) const { return bank_[cur_][row]; }
  void write(int row, std::uint16_t w) { bank_[1 - cur_][row] = w; }
  void swap() { cur_ ^= 1; }

 private:
  std::vector<std::uint16_t> bank_[2];
  int cur_ = 0;
};

namespace detail {

struct StreamEntry {
  int y = 0;
  bool flush = false;
  std::array<std::int32_t, kTileDim> sums{};
  long long ready_cycle = 0;  // cycle the adder tree delivers it
  long long land_cycle = 0;   // cycle it entered the FIFO
};

inline void validate_program(const TileProgram& p) {
  if (p.neuron_count < 1) throw ContractError("cyclesim: program has no neurons");
  if (p.threshold_q < 1) throw ContractError("cyclesim: threshold_q must be >= 1");
  int rows = tile_row_count(p.neuron_count);
  for (std::size_t i = 0; i < p.tiles.size(); ++i) {
    const Tile& t = p.tiles[i];
    if (t.x >= rows || t.y >= rows)
      throw ContractError("cyclesim: tile (" + std::to_string(t.x) + ", " +
                          std::to_string(t.y) + ") beyond neuron count");
    if (i > 0) {
      auto key = [](const Tile& a) { return std::pair<int, int>(a.y, a.x); };
      if (!(key(p.tiles[i - 1]) < key(t)))
        throw ContractError("cyclesim: tiles not in stream order");
    }
  }
  for (int r : p.output_tile_ids)
    if (r < 0 || r >= rows)
      throw ContractError("cyclesim: output tile id out of range");
}

}  // namespace detail

/// Executes a compiled program on the cycle model of the accelerator:
/// per timestep the control unit streams every tile through the pipelined
/// crossbar (one tile per cycle), partial sums land in the synchronization
/// FIFO after the adder-tree latency, and the neuron array drains the FIFO,
/// firing a RESET whenever the postsynaptic row changes and once at end of
/// stream. Input-only tile rows (neurons with injections but no incoming
/// tiles) are updated in a short per-timestep pass after the stream drains.
/// FIFO overflow raises SimFault.
///
/// input_ids[k] is the neuron fed by stimulus slot k; injections must be
/// integer-valued.
inline SimOutput simulate(const TileProgram& program, const StimulusPlan& stim,
                          const std::vector<int>& input_ids,
                          const PipelineConfig& cfg = {}) {
  detail::validate_program(program);
  if (cfg.adder_tree_latency < 1) throw InputError("cyclesim: adder_tree_latency must be >= 1");
  if (cfg.fifo_depth < 1) throw InputError("cyclesim: fifo_depth must be >= 1");
  if (cfg.clock_hz <= 0) throw InputError("cyclesim: clock_hz must be positive");
  if (stim.horizon < 1) throw InputError("cyclesim: horizon must be >= 1");
  if (stim.horizon > program.horizon_cap || stim.horizon > cfg.max_timesteps)
    throw InputError("cyclesim: horizon " + std::to_string(stim.horizon) +
                     " exceeds output memory depth " +
                     std::to_string(std::min(program.horizon_cap, cfg.max_timesteps)));
  if (static_cast<int>(program.output_tile_ids.size()) > cfg.max_output_tiles)
    throw InputError("cyclesim: program records " +
                     std::to_string(program.output_tile_ids.size()) +
                     " output tile rows, configured memory holds " +
                     std::to_string(cfg.max_output_tiles));
  if (stim.width != static_cast<int>(input_ids.size()))
    throw ContractError("cyclesim: stimulus width does not match input count");
  {
    std::set<int> seen;
    for (int id : input_ids) {
      if (id < 0 || id >= program.neuron_count)
        throw ContractError("cyclesim: input id " + std::to_string(id) + " out of range");
      if (!seen.insert(id).second)
        throw ContractError("cyclesim: duplicate input id " + std::to_string(id));
    }
  }

  const int n_rows = tile_row_count(program.neuron_count);
  const int horizon = stim.horizon;

  // injection wiring: per tile row, the (lane, stimulus slot) pairs feeding it
  std::vector<std::vector<std::pair<int, int>>> row_taps(n_rows);
  for (std::size_t k = 0; k < input_ids.size(); ++k)
    row_taps[tile_row_of(input_ids[k])].push_back({tile_slot_of(input_ids[k]),
                                                   static_cast<int>(k)});

  std::set<int> streamed_rows;
  for (const Tile& t : program.tiles) streamed_rows.insert(t.y);
  std::vector<int> injection_only_rows;
  for (int r = 0; r < n_rows; ++r)
    if (!row_taps[r].empty() && !streamed_rows.count(r)) injection_only_rows.push_back(r);

  // integer-valued stimulus, validated once up front
  std::vector<long long> inj_q(stim.injections.size());
  for (std::size_t i = 0; i < stim.injections.size(); ++i)
    inj_q[i] = detail::require_integral(stim.injections[i], "injection");

  SpikeMemory spikes(n_rows);
  std::vector<std::array<std::int8_t, kTileDim>> membrane_mem(
      n_rows, std::array<std::int8_t, kTileDim>{});
  NeuronArrayState array_state;

  const std::size_t out_rows = program.output_tile_ids.size();
  std::vector<int> out_ordinal(n_rows, -1);
  for (std::size_t j = 0; j < out_rows; ++j) out_ordinal[program.output_tile_ids[j]] = static_cast<int>(j);

  SimOutput out;
  out.train.horizon = horizon;
  out.train.neuron_count = program.neuron_count;
  out.train.output_tile_rows = program.output_tile_ids;
  out.train.spikes.assign(static_cast<std::size_t>(horizon) * program.neuron_count, 0);
  out.train.output_words.assign(static_cast<std::size_t>(horizon) * out_rows, 0);
  out.output_mem.assign(static_cast<std::size_t>(horizon) * out_rows, 0);
  out.report.cycles_per_timestep.reserve(horizon);

  const std::array<std::int32_t, kTileDim> zero_sums{};
  const std::array<long long, kTileDim> zero_inj{};

  auto injection_lanes = [&](int row, int t) {
    std::array<long long, kTileDim> lanes{};
    for (auto [slot, k] : row_taps[row])
      lanes[slot] = inj_q[static_cast<std::size_t>(t) * stim.width + k];
    return lanes;
  };

  auto commit_row = [&](int row, int t, const NeuronUnitResult& res) {
    membrane_mem[row] = res.membranes;
    spikes.write(row, res.spike_word);
    for (int k = 0; k < kTileDim; ++k) {
      int n = row * kTileDim + k;
      if (n < program.neuron_count)
        out.train.spikes[static_cast<std::size_t>(t) * program.neuron_count + n] =
            static_cast<std::uint8_t>(res.spike_word >> k & 1u);
    }
    if (out_ordinal[row] >= 0) {
      std::size_t at = static_cast<std::size_t>(t) * out_rows + out_ordinal[row];
      out.train.output_words[at] = res.spike_word;
      out.output_mem[at] = res.spike_word;
    }
  };

  for (int t = 0; t < horizon; ++t) {
    long long ts_cycles = 0;

    if (!program.tiles.empty()) {
      std::deque<detail::StreamEntry> pipe;  // inside the adder tree
      std::deque<detail::StreamEntry> fifo;  // synchronization FIFO
      std::size_t next_issue = 0;
      bool flush_issued = false;
      int active_row = -1;
      long long cycle = 0;

      while (!(next_issue == program.tiles.size() && flush_issued && pipe.empty() &&
               fifo.empty())) {
        // partial sums leaving the adder tree land in the FIFO
        while (!pipe.empty() && pipe.front().ready_cycle == cycle) {
          if (static_cast<int>(fifo.size()) >= cfg.fifo_depth)
            throw SimFault("cyclesim: synchronization FIFO overflow at depth " +
                           std::to_string(cfg.fifo_depth) + " (timestep " +
                           std::to_string(t) + ", cycle " + std::to_string(cycle) + ")");
          pipe.front().land_cycle = cycle;
          fifo.push_back(pipe.front());
          pipe.pop_front();
        }

        // neuron array consumes one registered entry per cycle
        if (!fifo.empty() && fifo.front().land_cycle < cycle) {
          detail::StreamEntry e = fifo.front();
          fifo.pop_front();
          if (e.flush) {
            auto res = neuron_unit_step(array_state, zero_sums,
                                        injection_lanes(active_row, t), true,
                                        program.threshold_q);
            commit_row(active_row, t, *res);
            out.report.reset_events++;
            active_row = -1;
          } else {
            if (e.y != active_row) {
              if (active_row >= 0) {
                auto res = neuron_unit_step(array_state, zero_sums,
                                            injection_lanes(active_row, t), true,
                                            program.threshold_q);
                commit_row(active_row, t, *res);
                out.report.reset_events++;
              }
              array_state.load_row(membrane_mem[e.y]);
              active_row = e.y;
            }
            neuron_unit_step(array_state, e.sums, zero_inj, false, program.threshold_q);
          }
        }

        // control unit issues one tile per cycle, then the end-of-stream flush
        if (next_issue < program.tiles.size()) {
          const Tile& tile = program.tiles[next_issue++];
          detail::StreamEntry e;
          e.y = tile.y;
          e.sums = crossbar_column_sums(spikes.read(tile.x), tile);
          e.ready_cycle = cycle + cfg.adder_tree_latency;
          pipe.push_back(e);
          out.report.tiles_streamed++;
        } else if (!flush_issued) {
          detail::StreamEntry e;
          e.flush = true;
          e.ready_cycle = cycle + cfg.adder_tree_latency;
          pipe.push_back(e);
          flush_issued = true;
        }

        ++cycle;
      }
      ts_cycles += cycle;
    }

    for (int row : injection_only_rows) {
      array_state.load_row(membrane_mem[row]);
      auto res = neuron_unit_step(array_state, zero_sums, injection_lanes(row, t), true,
                                  program.threshold_q);
      commit_row(row, t, *res);
      out.report.injection_row_updates++;
      ts_cycles += 1;
    }

    spikes.swap();
    ts_cycles += 2;  // bank swap + timestep control
    out.report.cycles_per_timestep.push_back(ts_cycles);
    out.report.total_cycles += ts_cycles;
  }

  out.report.seconds = static_cast<double>(out.report.total_cycles) /
                       static_cast<double>(cfg.clock_hz);
  out.report.ms_per_inference = out.report.seconds * 1e3;
  return out;
}

/// Closed-form cycle count for the same machine simulate() models. Exact for
/// any program this library emits: the stream never stalls, so per timestep
/// the cost is (tiles + adder latency + drain) plus one cycle per
/// injection-only row plus fixed overhead.
inline CycleEstimate estimate_throughput(const TileProgram& program, int horizon,
                                         const std::vector<int>& input_ids,
                                         const PipelineConfig& cfg = {}) {
  detail::validate_program(program);
  if (horizon < 1) throw InputError("cyclesim: horizon must be >= 1");

  std::set<int> streamed_rows;
  for (const Tile& t : program.tiles) streamed_rows.insert(t.y);
  std::set<int> inj_rows;
  for (int id : input_ids) {
    if (id < 0 || id >= program.neuron_count)
      throw ContractError("cyclesim: input id out of range");
    int r = tile_row_of(id);
    if (!streamed_rows.count(r)) inj_rows.insert(r);
  }

  CycleEstimate est;
  est.stream_cycles_per_timestep =
      program.tiles.empty()
          ? 0
          : static_cast<long long>(program.tiles.size()) + cfg.adder_tree_latency + 2;
  est.injection_cycles_per_timestep = static_cast<long long>(inj_rows.size());
  est.overhead_cycles_per_timestep = 2;
  est.cycles_per_timestep = est.stream_cycles_per_timestep +
                            est.injection_cycles_per_timestep +
                            est.overhead_cycles_per_timestep;
  est.total_cycles = est.cycles_per_timestep * horizon;
  est.seconds = static_cast<double>(est.total_cycles) / static_cast<double>(cfg.clock_hz);
  est.ms_per_inference = est.seconds * 1e3;
  return est;
}

}  // namespace spiketile

#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "spiketile/behavioral.hpp"
#include "spiketile/cyclesim.hpp"
#include "spiketile/encode.hpp"
#include "spiketile/errors.hpp"
#include "spiketile/idx.hpp"
#include "spiketile/memimage.hpp"
#include "spiketile/parity.hpp"
#include "spiketile/quantize.hpp"
#include "spiketile/serialize.hpp"
#include "spiketile/tiles.hpp"
#include "spiketile/trainer.hpp"

namespace spiketile {

/// Dataset slice in a manifest stage.
struct DataRef {
  std::string images;
  std::string labels;
  int offset = 0;
  int count = 0;  // 0 = everything after offset
};

struct TrainStage {
  std::vector<int> layers;
  DataRef data;
  int epochs = 10;
  double learning_rate = 0.5;
  int batch_size = 32;
  int horizon = 25;
  double threshold = 1.0;
  double gain = 0.5;  // float drive gain fed to encode_drive
};

struct EvalStage {
  DataRef data;
  double gain = 0.0;  // 0 = inherit the train gain (or 0.5 * threshold)
};

/// Declarative description of one end-to-end run. Exactly one of
/// `network_path` (a network JSON, or the literal "parity") and `train`
/// provides the network.
struct RunManifest {
  unsigned seed = 1;
  int timesteps = 100;  // evaluation horizon
  int threads = 0;
  std::string network_path;
  std::optional<TrainStage> train;
  std::optional<EvalStage> eval;
  std::string emit_dir;      // compiled image output; when set, evaluation
                             // executes the re-parsed image
  std::string network_out;   // save the (trained or loaded) network JSON
  std::string report_path;   // write the report JSON here
};

struct RunReport {
  // network + compiled shape
  int neuron_count = 0;
  long long synapse_count = 0;
  int tile_count = 0;
  long long threshold_q = 0;
  double scale = 0.0;

  // timing (identical for every image: cycle count is data independent)
  long long cycles_per_image = 0;
  double ms_per_image = 0.0;
  long long estimated_cycles_per_image = 0;
  double estimated_ms_per_image = 0.0;

  // evaluation
  int eval_count = 0;
  double accuracy_float = 0.0;
  double accuracy_int = 0.0;
  double accuracy_cycle = 0.0;
  double agreement_float_vs_cycle = 0.0;
  int spike_exact_images = 0;  // behavioral int vs cycle model, full rasters

  // parity mode
  bool parity_mode = false;
  bool parity_even_pass = false;
  bool parity_odd_pass = false;

  std::vector<EpochLog> train_log;
};

struct BenchReport {
  int timesteps = 0;
  int tile_count = 0;
  long long tiles_streamed = 0;
  long long estimated_total_cycles = 0;
  double estimated_ms = 0.0;
  long long simulated_total_cycles = 0;
  double simulated_ms = 0.0;
  bool estimate_exact = false;
  double host_seconds = 0.0;  // wall time of the cycle simulation
};

namespace detail {

inline int json_int(const nlohmann::json& j, const char* key, int dflt) {
  return j.contains(key) ? j.at(key).get<int>() : dflt;
}
inline double json_double(const nlohmann::json& j, const char* key, double dflt) {
  return j.contains(key) ? j.at(key).get<double>() : dflt;
}
inline std::string json_string(const nlohmann::json& j, const char* key, std::string dflt) {
  return j.contains(key) ? j.at(key).get<std::string>() : dflt;
}

inline DataRef dataref_from_json(const nlohmann::json& j) {
  DataRef d;
  d.images = j.at("images").get<std::string>();
  d.labels = j.at("labels").get<std::string>();
  d.offset = json_int(j, "offset", 0);
  d.count = json_int(j, "count", 0);
  return d;
}

template <typename Fn>
inline auto tag_stage(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(std::string("[") + stage + "] " + e.what());
  }
}

/// Static chunking with results indexed by item: identical output for any
/// thread count.
template <typename Fn>
inline void parallel_for(std::size_t n, int threads, Fn&& fn) {
  if (n == 0) return;
  int want = threads > 0 ? threads
                         : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::size_t n_threads = std::min<std::size_t>(want, n);
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::size_t chunk = (n + n_threads - 1) / n_threads;
  std::vector<std::thread> pool;
  for (std::size_t k = 0; k < n_threads; ++k) {
    std::size_t b = k * chunk, e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([b, e, &fn] {
      for (std::size_t i = b; i < e; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

inline RunManifest manifest_from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {"seed",    "timesteps",  "threads",
                                              "network", "train",      "eval",
                                              "emit_dir", "network_out", "report"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key()))
      throw ParseError("manifest: unknown key \"" + it.key() + "\"");

  RunManifest m;
  try {
    m.seed = static_cast<unsigned>(detail::json_int(j, "seed", 1));
    m.timesteps = detail::json_int(j, "timesteps", 100);
    m.threads = detail::json_int(j, "threads", 0);
    m.network_path = detail::json_string(j, "network", "");
    m.emit_dir = detail::json_string(j, "emit_dir", "");
    m.network_out = detail::json_string(j, "network_out", "");
    m.report_path = detail::json_string(j, "report", "");
    if (j.contains("train")) {
      const auto& t = j.at("train");
      TrainStage ts;
      ts.layers = t.at("layers").get<std::vector<int>>();
      ts.data = detail::dataref_from_json(t);
      ts.epochs = detail::json_int(t, "epochs", 10);
      ts.learning_rate = detail::json_double(t, "learning_rate", 0.5);
      ts.batch_size = detail::json_int(t, "batch_size", 32);
      ts.horizon = detail::json_int(t, "horizon", 25);
      ts.threshold = detail::json_double(t, "threshold", 1.0);
      ts.gain = detail::json_double(t, "gain", 0.5);
      m.train = std::move(ts);
    }
    if (j.contains("eval")) {
      EvalStage es;
      es.data = detail::dataref_from_json(j.at("eval"));
      es.gain = detail::json_double(j.at("eval"), "gain", 0.0);
      m.eval = std::move(es);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("manifest: " + std::string(e.what()));
  }
  if (m.train.has_value() == !m.network_path.empty())
    throw ParseError("manifest: provide exactly one of \"network\" and \"train\"");
  return m;
}

inline RunManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return manifest_from_json(j);
}

namespace detail {

struct DataSlice {
  IdxDataset ds;
  int offset = 0;
  int count = 0;
};

inline DataSlice load_slice(const DataRef& ref) {
  DataSlice s;
  s.ds = load_idx(ref.images, ref.labels);
  s.offset = ref.offset;
  if (s.offset < 0 || s.offset > s.ds.count)
    throw InputError("dataset: offset " + std::to_string(s.offset) + " outside 0.." +
                     std::to_string(s.ds.count));
  s.count = ref.count > 0 ? ref.count : s.ds.count - s.offset;
  if (s.offset + s.count > s.ds.count)
    throw InputError("dataset: slice [" + std::to_string(s.offset) + ", " +
                     std::to_string(s.offset + s.count) + ") exceeds " +
                     std::to_string(s.ds.count) + " samples");
  return s;
}

}  // namespace detail

inline nlohmann::ordered_json report_to_json(const RunReport& r) {
  nlohmann::ordered_json j;
  j["network"] = {{"neuron_count", r.neuron_count},
                  {"synapse_count", r.synapse_count},
                  {"tile_count", r.tile_count},
                  {"threshold_q", r.threshold_q},
                  {"scale", r.scale}};
  j["timing"] = {{"cycles_per_image", r.cycles_per_image},
                 {"ms_per_image", r.ms_per_image},
                 {"estimated_cycles_per_image", r.estimated_cycles_per_image},
                 {"estimated_ms_per_image", r.estimated_ms_per_image}};
  if (r.eval_count > 0) {
    j["eval"] = {{"count", r.eval_count},
                 {"accuracy_float", r.accuracy_float},
                 {"accuracy_int", r.accuracy_int},
                 {"accuracy_cycle", r.accuracy_cycle},
                 {"agreement_float_vs_cycle", r.agreement_float_vs_cycle},
                 {"spike_exact_images", r.spike_exact_images}};
  }
  if (r.parity_mode)
    j["parity"] = {{"even_pass", r.parity_even_pass}, {"odd_pass", r.parity_odd_pass}};
  if (!r.train_log.empty()) {
    auto& log = j["train_log"] = nlohmann::ordered_json::array();
    for (const EpochLog& e : r.train_log)
      log.push_back({{"epoch", e.epoch},
                     {"loss", e.mean_loss},
                     {"train_accuracy", e.train_accuracy}});
  }
  return j;
}

/// Runs a manifest end to end: (train) -> quantize -> tile -> (emit + parse
/// back) -> behavioral float/int + cycle model evaluation -> report. Stage
/// failures propagate with a "[stage]" prefix on the message.
inline RunReport run_pipeline(const RunManifest& m,
                              const std::function<void(const std::string&)>& progress = {}) {
  RunReport rep;
  auto say = [&](const std::string& s) {
    if (progress) progress(s);
  };

  if (m.timesteps < 1 || m.timesteps > kMaxTimesteps)
    throw InputError("manifest: timesteps must lie in 1.." + std::to_string(kMaxTimesteps));

  // ---- obtain the float network
  NetworkGraph net;
  double gain_f = 0.5;
  if (m.train) {
    detail::tag_stage("train", [&] {
      const TrainStage& ts = *m.train;
      LayeredSpec spec = LayeredSpec::make(ts.layers, ts.threshold, 1.0, ts.horizon);
      detail::DataSlice slice = detail::load_slice(ts.data);
      if (spec.input_size() != slice.ds.rows * slice.ds.cols)
        throw InputError("train: input layer " + std::to_string(spec.input_size()) +
                         " does not match " + std::to_string(slice.ds.rows * slice.ds.cols) +
                         " pixels");
      std::vector<LabeledSample> data(slice.count);
      for (int i = 0; i < slice.count; ++i) {
        data[i].drive = encode_drive(slice.ds.image(slice.offset + i), ts.gain);
        data[i].label = slice.ds.labels[slice.offset + i];
      }
      TrainConfig cfg;
      cfg.learning_rate = ts.learning_rate;
      cfg.batch_size = ts.batch_size;
      cfg.epochs = ts.epochs;
      cfg.seed = m.seed;
      cfg.threads = m.threads;
      LayerWeights w = train_layered(spec, data, cfg, &rep.train_log,
                                     [&](const EpochLog& e) {
                                       say("epoch " + std::to_string(e.epoch) + ": loss " +
                                           std::to_string(e.mean_loss) + ", train acc " +
                                           std::to_string(e.train_accuracy));
                                     });
      net = flatten(spec, w);
      gain_f = ts.gain;
    });
  } else if (m.network_path == "parity") {
    net = build_parity_network();
    rep.parity_mode = true;
  } else {
    detail::tag_stage("load", [&] { net = load_network(m.network_path); });
    gain_f = 0.5 * net.threshold;
  }
  if (m.eval && m.eval->gain > 0.0) gain_f = m.eval->gain;

  if (!m.network_out.empty())
    detail::tag_stage("save", [&] { save_network(net, m.network_out); });

  rep.neuron_count = net.neuron_count;
  rep.synapse_count = static_cast<long long>(count_synapses(net));

  // ---- compile
  QuantizedNetwork qnet;
  TileProgram program;
  detail::tag_stage("compile", [&] {
    qnet = quantize(net);
    program = tile_partition(qnet);
  });
  rep.tile_count = static_cast<int>(program.tiles.size());
  rep.threshold_q = program.threshold_q;
  rep.scale = program.scale;
  say("compiled " + std::to_string(rep.tile_count) + " tiles, threshold_q " +
      std::to_string(rep.threshold_q));

  if (!m.emit_dir.empty()) {
    detail::tag_stage("emit", [&] {
      emit_mem(program, m.emit_dir);
      TileProgram back = parse_mem(m.emit_dir);
      if (!(back == program))
        throw CompileError("emitted image does not parse back to the same program");
      program = std::move(back);  // evaluation runs the on-disk image
    });
    say("emitted memory image to " + m.emit_dir);
  }

  // ---- timing
  PipelineConfig pcfg;
  detail::tag_stage("timing", [&] {
    CycleEstimate est = estimate_throughput(program, m.timesteps, qnet.input_ids, pcfg);
    rep.estimated_cycles_per_image = est.total_cycles;
    rep.estimated_ms_per_image = est.ms_per_inference;
  });

  // ---- parity golden tables
  if (rep.parity_mode) {
    detail::tag_stage("parity", [&] {
      NetworkGraph int_graph = dequantize_graph(qnet);
      for (bool even : {true, false}) {
        const ParityCase& pc = even ? parity_case_even() : parity_case_odd();
        int horizon = 16;
        StimulusPlan stim = parity_stimulus(pc, horizon);
        SpikeTrain ft = behavioral_run(net, stim, SimMode::Float);
        StimulusPlan stim_q = scale_stimulus(stim, qnet.scale);
        SpikeTrain it = behavioral_run(int_graph, stim_q, SimMode::Int);
        SimOutput co = simulate(program, stim_q, qnet.input_ids, pcfg);
        rep.cycles_per_image = co.report.total_cycles;
        rep.ms_per_image = co.report.ms_per_inference;
        bool pass = check_parity_golden(ft, pc) && check_parity_golden(it, pc) &&
                    check_parity_golden(co.train, pc) && ft == it && it == co.train;
        // outside the table window the output must fire exactly once for the
        // even separation and never for the odd one
        long long out_spikes = ft.spike_count(16);
        pass = pass && out_spikes == (even ? 1 : 0);
        (even ? rep.parity_even_pass : rep.parity_odd_pass) = pass;
        say(std::string("parity ") + pc.name + ": " + (pass ? "pass" : "FAIL"));
      }
    });
  }

  // ---- evaluation
  if (m.eval) {
    detail::tag_stage("eval", [&] {
      detail::DataSlice slice = detail::load_slice(m.eval->data);
      if (static_cast<int>(net.input_ids.size()) != slice.ds.rows * slice.ds.cols)
        throw InputError("eval: network has " + std::to_string(net.input_ids.size()) +
                         " inputs, images have " +
                         std::to_string(slice.ds.rows * slice.ds.cols) + " pixels");
      NetworkGraph int_graph = dequantize_graph(qnet);
      const int n = slice.count;
      struct PerImage {
        int pf = -1, pi = -1, pc = -1;
        bool exact = false;
        long long cycles = 0;
      };
      std::vector<PerImage> res(n);
      detail::parallel_for(n, m.threads, [&](std::size_t i) {
        auto img = slice.ds.image(slice.offset + static_cast<int>(i));
        StimulusPlan stim_f = encode_injection_float(img, m.timesteps, gain_f);
        SpikeTrain ft = behavioral_run(net, stim_f, SimMode::Float);
        StimulusPlan stim_q = scale_stimulus(stim_f, qnet.scale);
        SpikeTrain it = behavioral_run(int_graph, stim_q, SimMode::Int);
        SimOutput co = simulate(program, stim_q, qnet.input_ids, pcfg);
        res[i].pf = classify_rate(ft, net.output_ids);
        res[i].pi = classify_rate(it, net.output_ids);
        res[i].pc = classify_rate(co.train, net.output_ids);
        res[i].exact = it == co.train;
        res[i].cycles = co.report.total_cycles;
      });
      long long cf = 0, ci = 0, cc = 0, agree = 0, exact = 0;
      for (int i = 0; i < n; ++i) {
        int label = slice.ds.labels[slice.offset + i];
        cf += res[i].pf == label;
        ci += res[i].pi == label;
        cc += res[i].pc == label;
        agree += res[i].pf == res[i].pc;
        exact += res[i].exact;
        if (i > 0 && res[i].cycles != res[0].cycles)
          throw Error("eval: cycle count varied between images");
      }
      rep.eval_count = n;
      rep.accuracy_float = static_cast<double>(cf) / n;
      rep.accuracy_int = static_cast<double>(ci) / n;
      rep.accuracy_cycle = static_cast<double>(cc) / n;
      rep.agreement_float_vs_cycle = static_cast<double>(agree) / n;
      rep.spike_exact_images = static_cast<int>(exact);
      rep.cycles_per_image = res.empty() ? 0 : res[0].cycles;
      rep.ms_per_image = static_cast<double>(rep.cycles_per_image) /
                         static_cast<double>(pcfg.clock_hz) * 1e3;
      say("eval " + std::to_string(n) + " images: float " + std::to_string(rep.accuracy_float) +
          ", cycle " + std::to_string(rep.accuracy_cycle) + ", agreement " +
          std::to_string(rep.agreement_float_vs_cycle));
    });
  } else if (!rep.parity_mode) {
    // no dataset: still execute one zero stimulus so timing is measured
    detail::tag_stage("timing", [&] {
      StimulusPlan stim = StimulusPlan::zeros(m.timesteps, static_cast<int>(qnet.input_ids.size()));
      SimOutput co = simulate(program, stim, qnet.input_ids, pcfg);
      rep.cycles_per_image = co.report.total_cycles;
      rep.ms_per_image = co.report.ms_per_inference;
    });
  }

  if (!m.report_path.empty()) {
    detail::tag_stage("report", [&] {
      std::ofstream out(m.report_path, std::ios::trunc);
      if (!out) throw IoError("cannot open " + m.report_path + " for writing");
      out << report_to_json(rep).dump(2) << "\n";
      if (!out) throw IoError("write failed for " + m.report_path);
    });
  }
  return rep;
}

/// Estimate vs cycle model vs host wall clock for one program.
inline BenchReport bench_program(const TileProgram& program, const std::vector<int>& input_ids,
                                 int timesteps, const PipelineConfig& cfg = {}) {
  BenchReport b;
  b.timesteps = timesteps;
  b.tile_count = static_cast<int>(program.tiles.size());
  CycleEstimate est = estimate_throughput(program, timesteps, input_ids, cfg);
  b.estimated_total_cycles = est.total_cycles;
  b.estimated_ms = est.ms_per_inference;
  StimulusPlan stim = StimulusPlan::zeros(timesteps, static_cast<int>(input_ids.size()));
  auto t0 = std::chrono::steady_clock::now();
  SimOutput out = simulate(program, stim, input_ids, cfg);
  auto t1 = std::chrono::steady_clock::now();
  b.simulated_total_cycles = out.report.total_cycles;
  b.simulated_ms = out.report.ms_per_inference;
  b.tiles_streamed = out.report.tiles_streamed;
  b.estimate_exact = b.simulated_total_cycles == b.estimated_total_cycles;
  b.host_seconds = std::chrono::duration<double>(t1 - t0).count();
  return b;
}

}  // namespace spiketile

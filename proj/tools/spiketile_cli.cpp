// Command line front end: train, compile, simulate, run, parity-demo, bench.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spiketile/spiketile.hpp"

namespace st = spiketile;

namespace {

st::PipelineConfig pipeline_flags(CLI::App* cmd, int* latency, int* depth, double* clock_mhz) {
  cmd->add_option("--adder-latency", *latency, "adder tree latency in cycles")
      ->capture_default_str();
  cmd->add_option("--fifo-depth", *depth, "synchronization FIFO depth")->capture_default_str();
  cmd->add_option("--clock-mhz", *clock_mhz, "clock for wall time figures")
      ->capture_default_str();
  return {};
}

st::PipelineConfig make_config(int latency, int depth, double clock_mhz) {
  st::PipelineConfig cfg;
  cfg.adder_tree_latency = latency;
  cfg.fifo_depth = depth;
  cfg.clock_hz = static_cast<long long>(clock_mhz * 1e6);
  return cfg;
}

int cmd_train(const std::string& images, const std::string& labels, int offset, int count,
              const std::vector<int>& layers, int epochs, double lr, int batch, int horizon,
              double threshold, double gain, unsigned seed, int threads,
              const std::string& out) {
  st::IdxDataset ds = st::load_idx(images, labels);
  int n = count > 0 ? count : ds.count - offset;
  if (offset < 0 || offset + n > ds.count) {
    std::cerr << "slice [" << offset << ", " << offset + n << ") exceeds " << ds.count
              << " samples\n";
    return 1;
  }
  st::LayeredSpec spec = st::LayeredSpec::make(layers, threshold, 1.0, horizon);
  if (spec.input_size() != ds.rows * ds.cols) {
    std::cerr << "input layer " << spec.input_size() << " does not match " << ds.rows * ds.cols
              << " pixels\n";
    return 1;
  }
  std::vector<st::LabeledSample> data(n);
  for (int i = 0; i < n; ++i) {
    data[i].drive = st::encode_drive(ds.image(offset + i), gain);
    data[i].label = ds.labels[offset + i];
  }
  st::TrainConfig cfg;
  cfg.learning_rate = lr;
  cfg.batch_size = batch;
  cfg.epochs = epochs;
  cfg.seed = seed;
  cfg.threads = threads;
  st::LayerWeights w = st::train_layered(spec, data, cfg, nullptr, [](const st::EpochLog& e) {
    std::printf("epoch %2d  loss %.4f  train acc %.4f\n", e.epoch, e.mean_loss,
                e.train_accuracy);
  });
  st::NetworkGraph net = st::flatten(spec, w);
  st::save_network(net, out);
  std::printf("saved %s (%d neurons, %lld synapses)\n", out.c_str(), net.neuron_count,
              static_cast<long long>(st::count_synapses(net)));
  return 0;
}

int cmd_compile(const std::string& network, const std::string& out_dir,
                const std::string& c_array) {
  st::NetworkGraph net = st::load_network(network);
  st::QuantizedNetwork q = st::quantize(net);
  st::TileProgram p = st::tile_partition(q);
  st::MemoryImage img = st::emit_mem(p, out_dir);
  st::TileProgram back = st::parse_mem(out_dir);
  if (!(back == p)) {
    std::cerr << "round trip mismatch after emit\n";
    return 1;
  }
  std::printf("%s: %d tiles, %d neurons, scale %.6g, threshold_q %lld\n", out_dir.c_str(),
              img.tile_count, img.neuron_count, img.scale, img.threshold_q);
  if (!c_array.empty()) {
    std::ofstream f(c_array, std::ios::trunc);
    if (!f) {
      std::cerr << "cannot open " << c_array << "\n";
      return 1;
    }
    f << st::render_c_array(img);
    std::printf("wrote %s\n", c_array.c_str());
  }
  return 0;
}

int cmd_simulate(const std::string& image_dir, const std::string& stimulus,
                 const std::string& out, const st::PipelineConfig& cfg) {
  st::TileProgram p = st::parse_mem(image_dir);
  st::StimulusFile stim = st::load_stimulus(stimulus);
  st::SimOutput res = st::simulate(p, stim.plan, stim.input_ids, cfg);

  std::printf("horizon %d, %lld cycles (%.3f ms at %.0f MHz), %lld tiles streamed, %lld resets\n",
              stim.plan.horizon, res.report.total_cycles, res.report.ms_per_inference,
              cfg.clock_hz / 1e6, res.report.tiles_streamed, res.report.reset_events);
  for (int t = 0; t < stim.plan.horizon; ++t) {
    std::printf("t=%-3d ", t + 1);
    for (std::size_t j = 0; j < p.output_tile_ids.size(); ++j)
      std::printf("row%d=%04X ", p.output_tile_ids[j],
                  res.output_mem[t * p.output_tile_ids.size() + j]);
    std::printf("\n");
  }
  if (!out.empty()) {
    nlohmann::ordered_json j;
    j["total_cycles"] = res.report.total_cycles;
    j["ms"] = res.report.ms_per_inference;
    j["tiles_streamed"] = res.report.tiles_streamed;
    j["reset_events"] = res.report.reset_events;
    j["stall_cycles"] = res.report.stall_cycles;
    j["output_tile_ids"] = p.output_tile_ids;
    auto& words = j["output_words"] = nlohmann::ordered_json::array();
    for (int t = 0; t < stim.plan.horizon; ++t) {
      nlohmann::ordered_json row = nlohmann::ordered_json::array();
      for (std::size_t k = 0; k < p.output_tile_ids.size(); ++k) {
        char buf[8];
        std::snprintf(buf, sizeof buf, "%04X", res.output_mem[t * p.output_tile_ids.size() + k]);
        row.push_back(buf);
      }
      words.push_back(row);
    }
    std::ofstream f(out, std::ios::trunc);
    if (!f) {
      std::cerr << "cannot open " << out << "\n";
      return 1;
    }
    f << j.dump(2) << "\n";
  }
  return 0;
}

int cmd_run(const std::string& manifest_path) {
  st::RunManifest m = st::load_manifest(manifest_path);
  st::RunReport rep = st::run_pipeline(m, [](const std::string& s) {
    std::printf("%s\n", s.c_str());
    std::fflush(stdout);
  });
  std::printf("tiles %d, threshold_q %lld, %.3f ms/image (estimated %.3f)\n", rep.tile_count,
              rep.threshold_q, rep.ms_per_image, rep.estimated_ms_per_image);
  if (rep.eval_count > 0)
    std::printf("eval %d images: float %.4f, int %.4f, cycle %.4f, agreement %.4f, "
                "spike-exact %d/%d\n",
                rep.eval_count, rep.accuracy_float, rep.accuracy_int, rep.accuracy_cycle,
                rep.agreement_float_vs_cycle, rep.spike_exact_images, rep.eval_count);
  if (rep.parity_mode) {
    std::printf("parity even: %s, odd: %s\n", rep.parity_even_pass ? "pass" : "FAIL",
                rep.parity_odd_pass ? "pass" : "FAIL");
    if (!rep.parity_even_pass || !rep.parity_odd_pass) return 1;
  }
  return 0;
}

int cmd_parity(const std::string& gap, const st::PipelineConfig& cfg) {
  const st::ParityCase& pc = gap == "even" ? st::parity_case_even() : st::parity_case_odd();
  st::NetworkGraph net = st::build_parity_network();
  st::QuantizedNetwork q = st::quantize(net);
  st::TileProgram prog = st::tile_partition(q);

  const int horizon = 16;
  st::StimulusPlan stim = st::parity_stimulus(pc, horizon);
  st::SpikeTrain ft = st::behavioral_run(net, stim, st::SimMode::Float);
  st::StimulusPlan stim_q = st::scale_stimulus(stim, q.scale);
  st::SpikeTrain it = st::behavioral_run(st::dequantize_graph(q), stim_q, st::SimMode::Int);
  st::SimOutput co = st::simulate(prog, stim_q, q.input_ids, cfg);

  std::printf("two pulses %d timesteps apart (%s)\n", pc.pulse_steps[1] - pc.pulse_steps[0],
              pc.name);
  std::printf("t\\idx ");
  for (int col : st::kParityColumns) std::printf("%4d", col);
  std::printf("\n");
  for (std::size_t t = 0; t < pc.golden.size(); ++t) {
    std::printf("t=%-3zu ", t + 1);
    for (int col : st::kParityColumns) std::printf("%4d", co.train.spike(static_cast<int>(t), col));
    std::printf("\n");
  }

  bool paths_equal = ft == it && it == co.train;
  bool golden = st::check_parity_golden(co.train, pc) && paths_equal;
  long long out_spikes = co.train.spike_count(16);
  golden = golden && out_spikes == (gap == "even" ? 1 : 0);
  std::printf("float/int/cycle spike trains identical: %s\n", paths_equal ? "yes" : "NO");
  std::printf("output neuron spikes over %d steps: %lld\n", horizon, out_spikes);
  std::printf("%s\n", golden ? "PASSED" : "FAILED");
  return golden ? 0 : 1;
}

int cmd_bench(const std::string& network, const std::string& image_dir,
              const std::string& stimulus, int timesteps, const st::PipelineConfig& cfg) {
  st::TileProgram prog;
  std::vector<int> input_ids;
  if (!network.empty()) {
    st::NetworkGraph net = st::load_network(network);
    st::QuantizedNetwork q = st::quantize(net);
    prog = st::tile_partition(q);
    input_ids = q.input_ids;
  } else {
    prog = st::parse_mem(image_dir);
    if (!stimulus.empty()) input_ids = st::load_stimulus(stimulus).input_ids;
  }
  st::BenchReport b = st::bench_program(prog, input_ids, timesteps, cfg);
  std::printf("tiles %d, horizon %d\n", b.tile_count, b.timesteps);
  std::printf("estimated  %8lld cycles  %.4f ms\n", b.estimated_total_cycles, b.estimated_ms);
  std::printf("simulated  %8lld cycles  %.4f ms  (%s)\n", b.simulated_total_cycles,
              b.simulated_ms, b.estimate_exact ? "estimate exact" : "ESTIMATE MISMATCH");
  std::printf("host wall time %.3f s (%.0fx realtime at %.0f MHz)\n", b.host_seconds,
              b.host_seconds / (b.simulated_ms / 1e3), cfg.clock_hz / 1e6);
  return b.estimate_exact ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"training, compilation and simulation for the 16x16-tile SNN accelerator"};
  app.require_subcommand(1);

  // train
  std::string images, labels, out = "network.json";
  int offset = 0, count = 0, epochs = 10, batch = 32, horizon = 25, threads = 0;
  std::vector<int> layers;
  double lr = 0.5, threshold = 1.0, gain = 0.5;
  unsigned seed = 1;
  auto* train = app.add_subcommand("train", "train a layered network with surrogate gradients");
  train->add_option("--images", images, "IDX image file")->required();
  train->add_option("--labels", labels, "IDX label file")->required();
  train->add_option("--offset", offset, "first sample")->capture_default_str();
  train->add_option("--count", count, "samples to use (0 = rest)")->capture_default_str();
  train->add_option("--layers", layers, "layer sizes, e.g. 784 32 10")->required()->expected(2, 16);
  train->add_option("--epochs", epochs)->capture_default_str();
  train->add_option("--lr", lr, "learning rate")->capture_default_str();
  train->add_option("--batch", batch)->capture_default_str();
  train->add_option("--horizon", horizon, "training timesteps")->capture_default_str();
  train->add_option("--threshold", threshold)->capture_default_str();
  train->add_option("--gain", gain, "drive gain for pixel 255")->capture_default_str();
  train->add_option("--seed", seed)->capture_default_str();
  train->add_option("--threads", threads, "0 = all cores")->capture_default_str();
  train->add_option("--out", out, "output network JSON")->capture_default_str();

  // compile
  std::string cnetwork, cout_dir = "image", c_array;
  auto* compile = app.add_subcommand("compile", "quantize and tile a network into .mem files");
  compile->add_option("--network", cnetwork, "network JSON")->required();
  compile->add_option("--out", cout_dir, "output directory")->capture_default_str();
  compile->add_option("--c-array", c_array, "also write a C source image");

  // simulate
  std::string sim_dir, sim_stim, sim_out;
  int latency = 5, depth = 8;
  double clock_mhz = 100.0;
  auto* sim = app.add_subcommand("simulate", "run a compiled image on the cycle model");
  sim->add_option("--image-dir", sim_dir, "directory with .mem files")->required();
  sim->add_option("--stimulus", sim_stim, "stimulus JSON")->required();
  sim->add_option("--out", sim_out, "write a JSON report");
  pipeline_flags(sim, &latency, &depth, &clock_mhz);

  // run
  std::string manifest;
  auto* run = app.add_subcommand("run", "execute a manifest end to end");
  run->add_option("--manifest", manifest, "manifest JSON")->required();

  // parity-demo
  std::string gap;
  auto* parity = app.add_subcommand("parity-demo", "hand-coded recurrent network demo");
  parity->add_option("--gap", gap, "pulse separation parity")
      ->required()
      ->check(CLI::IsMember({"even", "odd"}));

  // bench
  std::string bnetwork, bdir, bstim;
  int btimesteps = 100;
  auto* bench = app.add_subcommand("bench", "estimate vs cycle model timing");
  bench->add_option("--network", bnetwork, "network JSON");
  bench->add_option("--image-dir", bdir, "compiled image directory");
  bench->add_option("--stimulus", bstim, "stimulus JSON (for input wiring with --image-dir)");
  bench->add_option("--timesteps", btimesteps)->capture_default_str();
  pipeline_flags(bench, &latency, &depth, &clock_mhz);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train)
      return cmd_train(images, labels, offset, count, layers, epochs, lr, batch, horizon,
                       threshold, gain, seed, threads, out);
    if (*compile) return cmd_compile(cnetwork, cout_dir, c_array);
    if (*sim) return cmd_simulate(sim_dir, sim_stim, sim_out, make_config(latency, depth, clock_mhz));
    if (*run) return cmd_run(manifest);
    if (*parity) return cmd_parity(gap, make_config(latency, depth, clock_mhz));
    if (*bench) {
      if (bnetwork.empty() == bdir.empty()) {
        std::cerr << "bench: provide exactly one of --network and --image-dir\n";
        return 1;
      }
      return cmd_bench(bnetwork, bdir, bstim, btimesteps, make_config(latency, depth, clock_mhz));
    }
  } catch (const st::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

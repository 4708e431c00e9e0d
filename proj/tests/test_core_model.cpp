#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "spiketile/behavioral.hpp"
#include "spiketile/network.hpp"
#include "spiketile/trainer.hpp"

using namespace spiketile;

namespace {

NetworkGraph single_neuron(double threshold, double beta = 1.0) {
  return NetworkGraph::make(1, {}, {0}, {0}, threshold, beta);
}

StimulusPlan constant_plan(int horizon, int width, double v) {
  StimulusPlan p = StimulusPlan::zeros(horizon, width);
  for (double& x : p.injections) x = v;
  return p;
}

}  // namespace

TEST_CASE("integrate and fire with unit current and threshold 2", "[core]") {
  // U grows by 1 per step, fires on reaching 2, resets to 0: spikes on the
  // 2nd, 4th and 6th steps.
  NetworkGraph net = single_neuron(2.0);
  SpikeTrain tr = behavioral_run(net, constant_plan(6, 1, 1.0), SimMode::Int);
  std::vector<int> expect = {0, 1, 0, 1, 0, 1};
  for (int t = 0; t < 6; ++t) REQUIRE(static_cast<int>(tr.spike(t, 0)) == expect[t]);
}

TEST_CASE("constant-current spike period is ceil(threshold / current)", "[core]") {
  const int T = 60;
  for (int theta = 1; theta <= 20; ++theta) {
    for (int cur = 1; cur <= theta; ++cur) {
      NetworkGraph net = single_neuron(theta);
      SpikeTrain tr = behavioral_run(net, constant_plan(T, 1, cur), SimMode::Int);
      int period = (theta + cur - 1) / cur;
      for (int t = 0; t < T; ++t) {
        bool expect = (t + 1) % period == 0;
        INFO("theta " << theta << " current " << cur << " t " << t);
        REQUIRE(static_cast<bool>(tr.spike(t, 0)) == expect);
      }
    }
  }
}

TEST_CASE("membrane equal to threshold fires", "[core]") {
  NetworkGraph net = single_neuron(5.0);
  StimulusPlan p = StimulusPlan::zeros(3, 1);
  p.at(0, 0) = 5.0;
  NeuronStateVector st = NeuronStateVector::zeros(1);
  auto s0 = behavioral_step(net, st, std::span<const double>(&p.injections[0], 1), SimMode::Int);
  REQUIRE(s0[0] == 1);
  REQUIRE(st.membranes[0] == 0.0);  // reset to zero, not threshold-subtract
}

TEST_CASE("leaky membrane converges below threshold and never fires", "[core]") {
  NetworkGraph net = single_neuron(1.0, 0.5);
  SpikeTrain tr = behavioral_run(net, constant_plan(40, 1, 0.4), SimMode::Float);
  for (int t = 0; t < 40; ++t) REQUIRE(tr.spike(t, 0) == 0);
  // fixed point of u = 0.5 u + 0.4 is 0.8
  std::vector<double> trace;
  behavioral_run(net, constant_plan(40, 1, 0.4), SimMode::Float, &trace);
  REQUIRE(trace.back() == Catch::Approx(0.8).margin(1e-9));
}

TEST_CASE("synaptic delay is exactly one timestep", "[core]") {
  NetworkGraph net = NetworkGraph::make(2, {{0, 1, 3.0}}, {0}, {1}, 3.0, 1.0);
  StimulusPlan p = StimulusPlan::zeros(4, 1);
  p.at(0, 0) = 3.0;
  SpikeTrain tr = behavioral_run(net, p, SimMode::Int);
  REQUIRE(tr.spike(0, 0) == 1);
  REQUIRE(tr.spike(0, 1) == 0);
  REQUIRE(tr.spike(1, 1) == 1);  // weight arrives one step after the source spike
  REQUIRE(tr.spike(2, 1) == 0);
}

TEST_CASE("beta is forced to 1 in int mode", "[core]") {
  NetworkGraph net = single_neuron(10.0, 0.5);
  SpikeTrain ti = behavioral_run(net, constant_plan(20, 1, 1.0), SimMode::Int);
  // with decay it would stall at 2 and never fire; the int path integrates
  REQUIRE(ti.spike_count(0) == 2);  // fires at steps 10 and 20
  SpikeTrain tf = behavioral_run(net, constant_plan(20, 1, 1.0), SimMode::Float);
  REQUIRE(tf.spike_count(0) == 0);
}

TEST_CASE("int mode saturates stored membranes but compares wide", "[core]") {
  SECTION("positive clamp at 127, as if accumulating 300 against threshold 400") {
    NetworkGraph net = single_neuron(400.0);
    StimulusPlan p = StimulusPlan::zeros(2, 1);
    p.at(0, 0) = 300.0;
    p.at(1, 0) = 300.0;
    std::vector<double> trace;
    SpikeTrain tr = behavioral_run(net, p, SimMode::Int, &trace);
    REQUIRE(tr.spike(0, 0) == 0);
    REQUIRE(trace[0] == 127.0);  // 300 stored as the int8 ceiling
    // wide compare sees 127 + 300 = 427 >= 400
    REQUIRE(tr.spike(1, 0) == 1);
  }
  SECTION("threshold compare happens before saturation") {
    NetworkGraph net = single_neuron(300.0);
    StimulusPlan p = StimulusPlan::zeros(2, 1);
    p.at(0, 0) = 100.0;
    p.at(1, 0) = 250.0;
    SpikeTrain tr = behavioral_run(net, p, SimMode::Int);
    // 100 + 250 = 350 >= 300 must fire even though a saturated membrane
    // (127) plus nothing would not
    REQUIRE(tr.spike(1, 0) == 1);
  }
  SECTION("negative clamp at -128") {
    NetworkGraph net = single_neuron(10.0);
    StimulusPlan p = StimulusPlan::zeros(3, 1);
    p.at(0, 0) = -300.0;
    p.at(1, 0) = 0.0;
    p.at(2, 0) = 137.0;
    std::vector<double> trace;
    SpikeTrain tr = behavioral_run(net, p, SimMode::Int, &trace);
    REQUIRE(trace[0] == -128.0);
    REQUIRE(tr.spike(2, 0) == 0);  // -128 + 137 = 9 < 10
  }
}

TEST_CASE("duplicate synapses merge by summing", "[core]") {
  NetworkGraph net = NetworkGraph::make(2, {{0, 1, 0.5}, {0, 1, 0.75}}, {0}, {1}, 1.0, 1.0);
  REQUIRE(count_synapses(net) == 1);
  REQUIRE(net.synapses[0].weight == 1.25);
}

TEST_CASE("synapse counting on fully connected stacks", "[core]") {
  LayeredSpec big = LayeredSpec::make({784, 128, 10}, 1.0);
  NetworkGraph net = flatten(big, zero_like(big));
  REQUIRE(count_synapses(net) == 101632);
  REQUIRE(net.neuron_count == 922);

  LayeredSpec tiny = LayeredSpec::make({2, 2}, 1.0);
  REQUIRE(count_synapses(flatten(tiny, zero_like(tiny))) == 4);
}

TEST_CASE("rate classification breaks ties toward the lowest index", "[core]") {
  SpikeTrain tr;
  tr.horizon = 9;
  tr.neuron_count = 4;
  tr.spikes.assign(9 * 4, 0);
  auto fill = [&](int n, int count) {
    for (int t = 0; t < count; ++t) tr.spikes[t * 4 + n] = 1;
  };
  fill(0, 5);
  fill(1, 9);
  fill(2, 9);
  fill(3, 1);
  REQUIRE(classify_rate(tr, {0, 1, 2, 3}) == 1);
  REQUIRE(classify_rate(tr, {3, 2, 1, 0}) == 1);  // position of neuron 2 now
}

TEST_CASE("classification rejects empty runs and bad ids", "[core]") {
  SpikeTrain tr;
  tr.horizon = 0;
  tr.neuron_count = 1;
  REQUIRE_THROWS_AS(classify_rate(tr, {0}), InputError);
  tr.horizon = 1;
  tr.spikes.assign(1, 0);
  REQUIRE_THROWS_AS(classify_rate(tr, {}), ContractError);
  REQUIRE_THROWS_AS(classify_rate(tr, {5}), ContractError);
}

TEST_CASE("output words pack 16 neurons per tile row", "[core]") {
  // neurons 0 and 17 as outputs: rows 0 and 1, bit = neuron mod 16
  NetworkGraph net = NetworkGraph::make(20, {{0, 17, 2.0}}, {0}, {0, 17}, 2.0, 1.0);
  StimulusPlan p = StimulusPlan::zeros(2, 1);
  p.at(0, 0) = 2.0;
  SpikeTrain tr = behavioral_run(net, p, SimMode::Int);
  REQUIRE(tr.output_tile_rows == std::vector<int>{0, 1});
  REQUIRE(tr.output_word(0, 0) == 0x0001);  // neuron 0 fired
  REQUIRE(tr.output_word(0, 1) == 0x0000);
  REQUIRE(tr.output_word(1, 0) == 0x0000);
  REQUIRE(tr.output_word(1, 1) == 0x0002);  // neuron 17 = row 1, bit 1
}

TEST_CASE("runs are deterministic", "[core]") {
  std::mt19937 rng(11);
  std::vector<Synapse> syn;
  for (int i = 0; i < 40; ++i)
    syn.push_back({static_cast<int>(rng() % 12), static_cast<int>(rng() % 12),
                   (static_cast<double>(rng() % 2000) - 1000.0) / 317.0});
  NetworkGraph net = NetworkGraph::make(12, syn, {0, 1, 2}, {10, 11}, 1.7, 0.9);
  StimulusPlan p = StimulusPlan::zeros(12, 3);
  for (double& v : p.injections) v = static_cast<double>(rng() % 100) / 23.0;
  SpikeTrain a = behavioral_run(net, p, SimMode::Float);
  SpikeTrain b = behavioral_run(net, p, SimMode::Float);
  REQUIRE(a == b);
}

TEST_CASE("validation errors", "[core]") {
  SECTION("graph construction") {
    REQUIRE_THROWS_AS(NetworkGraph::make(0, {}, {}, {}, 1.0), ContractError);
    REQUIRE_THROWS_AS(NetworkGraph::make(2, {{0, 2, 1.0}}, {}, {}, 1.0), ContractError);
    REQUIRE_THROWS_AS(NetworkGraph::make(2, {}, {0, 0}, {}, 1.0), ContractError);
    REQUIRE_THROWS_AS(NetworkGraph::make(2, {}, {}, {3}, 1.0), ContractError);
    REQUIRE_THROWS_AS(NetworkGraph::make(2, {}, {}, {}, 1.0, 0.0), InputError);
    REQUIRE_THROWS_AS(NetworkGraph::make(2, {}, {}, {}, 1.0, 1.5), InputError);
    double inf = std::numeric_limits<double>::infinity();
    REQUIRE_THROWS_AS(NetworkGraph::make(2, {{0, 1, inf}}, {}, {}, 1.0), InputError);
  }
  SECTION("stepping") {
    NetworkGraph net = single_neuron(1.0);
    NeuronStateVector st = NeuronStateVector::zeros(2);  // wrong size
    double inj = 0.0;
    REQUIRE_THROWS_AS(behavioral_step(net, st, std::span<const double>(&inj, 1), SimMode::Int),
                      ContractError);
    st = NeuronStateVector::zeros(1);
    REQUIRE_THROWS_AS(behavioral_step(net, st, std::span<const double>(), SimMode::Int),
                      ContractError);
    double nan = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(behavioral_step(net, st, std::span<const double>(&nan, 1), SimMode::Float),
                      InputError);
    double frac = 0.5;
    REQUIRE_THROWS_AS(behavioral_step(net, st, std::span<const double>(&frac, 1), SimMode::Int),
                      InputError);
  }
  SECTION("int mode needs integral weights and threshold") {
    NetworkGraph net = NetworkGraph::make(2, {{0, 1, 0.5}}, {0}, {1}, 1.0, 1.0);
    REQUIRE_THROWS_AS(behavioral_run(net, StimulusPlan::zeros(1, 1), SimMode::Int), InputError);
    NetworkGraph net2 = NetworkGraph::make(2, {{0, 1, 1.0}}, {0}, {1}, 1.5, 1.0);
    REQUIRE_THROWS_AS(behavioral_run(net2, StimulusPlan::zeros(1, 1), SimMode::Int), InputError);
  }
}

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "spiketile/behavioral.hpp"
#include "spiketile/trainer.hpp"

using namespace spiketile;

namespace {

LayerWeights random_weights(const LayeredSpec& spec, unsigned seed) {
  return init_weights(spec, seed);
}

std::vector<double> random_drive(int n, unsigned seed, double lo, double hi) {
  std::mt19937 rng(seed);
  std::vector<double> d(n);
  for (double& v : d) v = lo + (hi - lo) * (static_cast<double>(rng()) / 4294967296.0);
  return d;
}

}  // namespace

TEST_CASE("surrogate derivative pinned values", "[trainer]") {
  // (1/pi) / (1 + (pi u)^2): equals 1/pi at the threshold and decays
  // symmetrically around it
  REQUIRE(surrogate_grad(0.0) == Catch::Approx(1.0 / kPi).epsilon(1e-15));
  REQUIRE(surrogate_grad(1.0) == Catch::Approx(1.0 / (kPi * (1.0 + kPi * kPi))).epsilon(1e-12));
  REQUIRE(surrogate_grad(-1.0) == surrogate_grad(1.0));
  for (double u : {0.1, 0.5, 2.0, 10.0}) {
    REQUIRE(surrogate_grad(u) < surrogate_grad(0.0));
    REQUIRE(surrogate_grad(u) > 0.0);
  }
}

TEST_CASE("smooth activation is the antiderivative of the surrogate", "[trainer]") {
  const double eps = 1e-6;
  for (double u : {-2.0, -0.5, 0.0, 0.3, 1.0, 4.0}) {
    double numeric =
        (surrogate_activation(u + eps) - surrogate_activation(u - eps)) / (2.0 * eps);
    REQUIRE(numeric == Catch::Approx(surrogate_grad(u)).epsilon(1e-7));
  }
}

TEST_CASE("hard forward matches the behavioral simulator exactly", "[trainer]") {
  for (unsigned seed : {1u, 2u, 3u, 4u, 5u}) {
    LayeredSpec spec = LayeredSpec::make({3, 5, 4, 2}, 1.0, 1.0, 7);
    LayerWeights w = random_weights(spec, seed);
    std::vector<double> drive = random_drive(3, seed + 100, 0.0, 1.4);

    ForwardCache cache;
    trainer_forward(spec, w, drive, SpikeMode::Hard, kPi, &cache);

    NetworkGraph net = flatten(spec, w);
    StimulusPlan stim = StimulusPlan::zeros(spec.horizon, 3);
    for (int t = 0; t < spec.horizon; ++t)
      for (int i = 0; i < 3; ++i) stim.at(t, i) = drive[i];
    SpikeTrain tr = behavioral_run(net, stim, SimMode::Float);

    for (int t = 0; t < spec.horizon; ++t)
      for (int l = 0; l < spec.layer_count(); ++l)
        for (int j = 0; j < spec.layer_sizes[l]; ++j) {
          double s = cache.S[l][static_cast<std::size_t>(t) * spec.layer_sizes[l] + j];
          INFO("seed " << seed << " t " << t << " layer " << l << " unit " << j);
          REQUIRE(static_cast<double>(tr.spike(t, spec.layer_offset(l) + j)) == s);
        }
  }
}

TEST_CASE("softmax rate loss", "[trainer]") {
  RateLoss rl = rate_softmax_loss({1.0, 1.0, 1.0, 1.0}, 2);
  REQUIRE(rl.loss == Catch::Approx(std::log(4.0)).epsilon(1e-12));
  double sum = 0.0;
  for (double p : rl.probs) sum += p;
  REQUIRE(sum == Catch::Approx(1.0).epsilon(1e-12));

  // big counts stay finite
  RateLoss big = rate_softmax_loss({1000.0, 0.0}, 0);
  REQUIRE(std::isfinite(big.loss));
  REQUIRE(big.loss < 1e-6);

  REQUIRE_THROWS_AS(rate_softmax_loss({1.0}, 1), ContractError);
}

TEST_CASE("analytic gradient agrees with central differences", "[trainer]") {
  struct Fixture {
    std::vector<int> layers;
    int horizon;
    unsigned seed;
  };
  const Fixture fixtures[] = {
      {{4, 6, 3}, 6, 21}, {{3, 5, 5, 2}, 8, 22}, {{5, 4, 2}, 10, 23}, {{2, 8, 3}, 5, 24}};
  for (const Fixture& f : fixtures) {
    LayeredSpec spec = LayeredSpec::make(f.layers, 1.0, 1.0, f.horizon);
    LayerWeights w = random_weights(spec, f.seed);
    LabeledSample sample;
    sample.drive = random_drive(spec.input_size(), f.seed + 50, 0.2, 1.3);
    sample.label = static_cast<int>(f.seed) % spec.output_size();
    double worst = finite_diff_check(spec, w, sample, 1e-4, 200, f.seed);
    INFO("layers " << f.layers[0] << "-.. seed " << f.seed << " worst rel err " << worst);
    REQUIRE(worst <= 1e-3);
  }
}

TEST_CASE("gradient check covers leaky membranes too", "[trainer]") {
  LayeredSpec spec = LayeredSpec::make({4, 5, 3}, 0.8, 0.7, 6);
  LayerWeights w = random_weights(spec, 31);
  LabeledSample sample;
  sample.drive = random_drive(4, 77, 0.1, 1.0);
  sample.label = 1;
  REQUIRE(finite_diff_check(spec, w, sample, 1e-4, 200, 5) <= 1e-3);
}

TEST_CASE("weight initialization is seeded and bounded", "[trainer]") {
  LayeredSpec spec = LayeredSpec::make({9, 7, 2}, 1.0);
  LayerWeights a = init_weights(spec, 42);
  LayerWeights b = init_weights(spec, 42);
  LayerWeights c = init_weights(spec, 43);
  REQUIRE(a == b);
  REQUIRE(a != c);
  for (double v : a[0]) REQUIRE(std::fabs(v) <= 1.0 / 3.0);
  for (double v : a[1]) REQUIRE(std::fabs(v) <= 1.0 / std::sqrt(7.0));
}

TEST_CASE("training result does not depend on thread count", "[trainer]") {
  LayeredSpec spec = LayeredSpec::make({4, 6, 2}, 1.0, 1.0, 8);
  std::vector<LabeledSample> data;
  std::mt19937 rng(5);
  for (int i = 0; i < 12; ++i) {
    LabeledSample s;
    s.drive = random_drive(4, rng(), 0.0, 1.2);
    s.label = i % 2;
    data.push_back(s);
  }
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 5;
  cfg.seed = 9;
  cfg.threads = 1;
  LayerWeights w1 = train_layered(spec, data, cfg);
  cfg.threads = 4;
  LayerWeights w4 = train_layered(spec, data, cfg);
  REQUIRE(w1 == w4);
}

TEST_CASE("parity task: drive both classes apart", "[trainer]") {
  // four constant-drive patterns, XOR labels; the classic non-linearly
  // separable check that the hidden layer actually learns
  LayeredSpec spec = LayeredSpec::make({2, 6, 2}, 1.0, 1.0, 12);
  auto sample = [](double a, double b, int label) {
    LabeledSample s;
    s.drive = {a, b};
    s.label = label;
    return s;
  };
  std::vector<LabeledSample> data = {sample(0.0, 0.0, 0), sample(0.9, 0.9, 0),
                                     sample(0.9, 0.0, 1), sample(0.0, 0.9, 1)};
  TrainConfig cfg;
  cfg.learning_rate = 0.4;
  cfg.batch_size = 4;
  cfg.epochs = 300;
  cfg.seed = 3;
  cfg.threads = 1;
  LayerWeights w = train_layered(spec, data, cfg);
  int correct = 0;
  for (const LabeledSample& s : data) {
    ForwardResult f = trainer_forward(spec, w, s.drive, SpikeMode::Hard);
    int arg = static_cast<int>(std::max_element(f.counts.begin(), f.counts.end()) -
                               f.counts.begin());
    correct += arg == s.label;
  }
  REQUIRE(correct == 4);
}

TEST_CASE("flatten lays out layers contiguously", "[trainer]") {
  LayeredSpec spec = LayeredSpec::make({2, 3, 2}, 1.5, 1.0, 4);
  LayerWeights w = zero_like(spec);
  w[0][0 * 2 + 1] = 0.25;  // input 1 -> hidden 0
  w[1][1 * 3 + 2] = -0.5;  // hidden 2 -> output 1
  NetworkGraph net = flatten(spec, w);
  REQUIRE(net.neuron_count == 7);
  REQUIRE(net.input_ids == std::vector<int>{0, 1});
  REQUIRE(net.output_ids == std::vector<int>{5, 6});
  REQUIRE(count_synapses(net) == 12);  // zero edges kept
  bool found_a = false, found_b = false;
  for (const Synapse& s : net.synapses) {
    if (s.pre == 1 && s.post == 2) {
      REQUIRE(s.weight == 0.25);
      found_a = true;
    }
    if (s.pre == 4 && s.post == 6) {
      REQUIRE(s.weight == -0.5);
      found_b = true;
    }
  }
  REQUIRE(found_a);
  REQUIRE(found_b);
}

TEST_CASE("trainer contract violations", "[trainer]") {
  REQUIRE_THROWS_AS(LayeredSpec::make({5}, 1.0), ContractError);
  REQUIRE_THROWS_AS(LayeredSpec::make({5, 0}, 1.0), ContractError);
  REQUIRE_THROWS_AS(LayeredSpec::make({2, 2}, -1.0), InputError);

  LayeredSpec spec = LayeredSpec::make({2, 2}, 1.0);
  LayerWeights bad(1);
  bad[0].assign(3, 0.0);
  REQUIRE_THROWS_AS(trainer_forward(spec, bad, {0.1, 0.2}, SpikeMode::Hard), ContractError);
  LayerWeights w = zero_like(spec);
  REQUIRE_THROWS_AS(trainer_forward(spec, w, {0.1}, SpikeMode::Hard), ContractError);

  std::vector<LabeledSample> data = {{{0.1, 0.2}, 5}};
  TrainConfig cfg;
  REQUIRE_THROWS_AS(train_layered(spec, data, cfg), ContractError);
  REQUIRE_THROWS_AS(train_layered(spec, {}, cfg), ContractError);
}

TEST_CASE("divergence raises a training error", "[trainer]") {
  // an absurd step size overflows at least one weight to +-inf on the first
  // update; the trainer must notice instead of silently continuing
  LayeredSpec spec = LayeredSpec::make({2, 2}, 1.0, 1.0, 32);
  std::vector<LabeledSample> data = {{{1.5, 1.5}, 0}, {{1.5, 1.5}, 1}};
  TrainConfig cfg;
  cfg.learning_rate = 1e308;
  cfg.surrogate_slope = 0.1;
  cfg.epochs = 3;
  cfg.batch_size = 2;
  cfg.threads = 1;
  REQUIRE_THROWS_AS(train_layered(spec, data, cfg), TrainError);
}

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "spiketile/errors.hpp"
#include "spiketile/network.hpp"

namespace spiketile {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

/// Feedforward fully-connected topology for training. Weights W[l] connect
/// layer l to layer l+1, stored row-major by postsynaptic neuron:
/// W[l][post * layer_sizes[l] + pre].
struct LayeredSpec {
  std::vector<int> layer_sizes;
  double threshold = 1.0;
  double beta = 1.0;
  int horizon = 25;  // timesteps unrolled during training

  static LayeredSpec make(std::vector<int> sizes, double threshold, double beta = 1.0,
                          int horizon = 25) {
    if (sizes.size() < 2) throw ContractError("layered: need at least input and output layers");
    for (int n : sizes)
      if (n < 1) throw ContractError("layered: layer sizes must be >= 1");
    if (!(threshold > 0.0) || !std::isfinite(threshold))
      throw InputError("layered: threshold must be positive and finite");
    if (!(beta > 0.0 && beta <= 1.0))
      throw InputError("layered: beta must lie in (0, 1]");
    if (horizon < 1) throw ContractError("layered: horizon must be >= 1");
    LayeredSpec s;
    s.layer_sizes = std::move(sizes);
    s.threshold = threshold;
    s.beta = beta;
    s.horizon = horizon;
    return s;
  }

  int layer_count() const { return static_cast<int>(layer_sizes.size()); }
  int input_size() const { return layer_sizes.front(); }
  int output_size() const { return layer_sizes.back(); }
  int neuron_count() const {
    return std::accumulate(layer_sizes.begin(), layer_sizes.end(), 0);
  }
  int layer_offset(int l) const {
    return std::accumulate(layer_sizes.begin(), layer_sizes.begin() + l, 0);
  }
  std::size_t weight_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
      n += static_cast<std::size_t>(layer_sizes[l]) * layer_sizes[l + 1];
    return n;
  }
};

using LayerWeights = std::vector<std::vector<double>>;

/// One training example: constant per-timestep current into the input layer.
struct LabeledSample {
  std::vector<double> drive;  // input_size entries, injected every timestep
  int label = 0;
};

/// Hard runs the spiking dynamics (Heaviside at threshold, gradients use the
/// surrogate). Smooth replaces the spike function by the exact antiderivative
/// of the surrogate derivative, yielding a differentiable model whose
/// analytic gradient can be checked against finite differences.
enum class SpikeMode { Hard, Smooth };

/// d(spike)/d(membrane) surrogate, centered at threshold:
///   g(u) = (1/pi) / (1 + (slope * u)^2), maximal (1/pi) at u = 0.
inline double surrogate_grad(double u, double slope = kPi) {
  double p = slope * u;
  return 1.0 / (kPi * (1.0 + p * p));
}

/// Antiderivative of surrogate_grad; the activation used in Smooth mode.
inline double surrogate_activation(double u, double slope = kPi) {
  return std::atan(slope * u) / (kPi * slope);
}

namespace detail {

inline void check_weight_shapes(const LayeredSpec& spec, const LayerWeights& w) {
  if (static_cast<int>(w.size()) != spec.layer_count() - 1)
    throw ContractError("trainer: expected " + std::to_string(spec.layer_count() - 1) +
                        " weight matrices, got " + std::to_string(w.size()));
  for (int l = 0; l + 1 < spec.layer_count(); ++l) {
    std::size_t want = static_cast<std::size_t>(spec.layer_sizes[l]) * spec.layer_sizes[l + 1];
    if (w[l].size() != want)
      throw ContractError("trainer: weight matrix " + std::to_string(l) + " has " +
                          std::to_string(w[l].size()) + " entries, expected " +
                          std::to_string(want));
  }
}

inline double uniform_pm(std::mt19937& rng, double half_range) {
  // two 32-bit draws -> 53 bits -> [0, 1), platform independent
  std::uint64_t hi = rng();
  std::uint64_t lo = rng();
  std::uint64_t bits = (hi << 32 | lo) >> 11;
  double u = static_cast<double>(bits) * (1.0 / 9007199254740992.0);
  return (2.0 * u - 1.0) * half_range;
}

}  // namespace detail

struct ForwardCache {
  // [layer][t * n + i]; U is the pre-reset membrane, S the emitted spike value
  std::vector<std::vector<double>> U;
  std::vector<std::vector<double>> S;
};

struct ForwardResult {
  std::vector<double> counts;  // per output neuron, summed over the horizon
};

/// Unrolled forward pass. Layer l >= 1 sees layer l-1's spikes from the
/// previous timestep (one synaptic delay); the input layer integrates the
/// drive directly. Matches the behavioral float simulator bit for bit in
/// Hard mode on the flattened graph.
inline ForwardResult trainer_forward(const LayeredSpec& spec, const LayerWeights& w,
                                     const std::vector<double>& drive, SpikeMode mode,
                                     double slope = kPi, ForwardCache* cache = nullptr) {
  detail::check_weight_shapes(spec, w);
  if (static_cast<int>(drive.size()) != spec.input_size())
    throw ContractError("trainer: drive size " + std::to_string(drive.size()) +
                        " does not match input layer " + std::to_string(spec.input_size()));

  const int L = spec.layer_count();
  const int T = spec.horizon;
  const double theta = spec.threshold;

  std::vector<std::vector<double>> V(L);  // post-reset membranes
  for (int l = 0; l < L; ++l) V[l].assign(spec.layer_sizes[l], 0.0);

  if (cache) {
    cache->U.assign(L, {});
    cache->S.assign(L, {});
    for (int l = 0; l < L; ++l) {
      cache->U[l].assign(static_cast<std::size_t>(T) * spec.layer_sizes[l], 0.0);
      cache->S[l].assign(static_cast<std::size_t>(T) * spec.layer_sizes[l], 0.0);
    }
  }
  // previous timestep's spikes per layer, for the delayed feedforward path
  std::vector<std::vector<double>> prev_s(L);
  for (int l = 0; l < L; ++l) prev_s[l].assign(spec.layer_sizes[l], 0.0);

  ForwardResult res;
  res.counts.assign(spec.output_size(), 0.0);

  auto activate = [&](double u_centered) {
    return mode == SpikeMode::Hard ? (u_centered >= 0.0 ? 1.0 : 0.0)
                                   : surrogate_activation(u_centered, slope);
  };

  std::vector<std::vector<double>> cur_s(L);
  for (int l = 0; l < L; ++l) cur_s[l].assign(spec.layer_sizes[l], 0.0);

  for (int t = 0; t < T; ++t) {
    for (int l = 0; l < L; ++l) {
      const int n = spec.layer_sizes[l];
      for (int j = 0; j < n; ++j) {
        double current;
        if (l == 0) {
          current = drive[j];
        } else {
          const int m = spec.layer_sizes[l - 1];
          const double* wrow = w[l - 1].data() + static_cast<std::size_t>(j) * m;
          const double* s = prev_s[l - 1].data();
          double acc = 0.0;
          for (int i = 0; i < m; ++i)
            if (s[i] != 0.0) acc += wrow[i] * s[i];
          current = acc;
        }
        double u = spec.beta * V[l][j] + current;
        double sj = activate(u - theta);
        V[l][j] = u * (1.0 - sj);
        cur_s[l][j] = sj;
        if (cache) {
          cache->U[l][static_cast<std::size_t>(t) * n + j] = u;
          cache->S[l][static_cast<std::size_t>(t) * n + j] = sj;
        }
        if (l == L - 1) res.counts[j] += sj;
      }
    }
    for (int l = 0; l < L; ++l) prev_s[l].swap(cur_s[l]);
  }
  return res;
}

struct RateLoss {
  double loss = 0.0;
  std::vector<double> probs;
};

/// Cross entropy of softmax over total output spike counts.
inline RateLoss rate_softmax_loss(const std::vector<double>& counts, int label) {
  if (label < 0 || label >= static_cast<int>(counts.size()))
    throw ContractError("loss: label " + std::to_string(label) + " out of range");
  double m = *std::max_element(counts.begin(), counts.end());
  double sum = 0.0;
  for (double c : counts) sum += std::exp(c - m);
  double lse = m + std::log(sum);
  RateLoss rl;
  rl.probs.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) rl.probs[i] = std::exp(counts[i] - lse);
  rl.loss = lse - counts[label];
  return rl;
}

inline LayerWeights zero_like(const LayeredSpec& spec) {
  LayerWeights g(spec.layer_count() - 1);
  for (int l = 0; l + 1 < spec.layer_count(); ++l)
    g[l].assign(static_cast<std::size_t>(spec.layer_sizes[l]) * spec.layer_sizes[l + 1], 0.0);
  return g;
}

/// Backpropagation through the unrolled dynamics of one sample. The forward
/// runs in the given mode; every spike derivative is the surrogate. Fills
/// grad (overwriting) and returns the loss.
inline double sample_grad(const LayeredSpec& spec, const LayerWeights& w,
                          const LabeledSample& sample, SpikeMode mode, double slope,
                          LayerWeights& grad) {
  const int L = spec.layer_count();
  const int T = spec.horizon;
  const double theta = spec.threshold;

  ForwardCache cache;
  ForwardResult fwd = trainer_forward(spec, w, sample.drive, mode, slope, &cache);
  RateLoss rl = rate_softmax_loss(fwd.counts, sample.label);

  grad = zero_like(spec);

  // adjoint of the emitted spike value, per layer >= 1, full horizon
  std::vector<std::vector<double>> aS(L);
  for (int l = 1; l < L; ++l)
    aS[l].assign(static_cast<std::size_t>(T) * spec.layer_sizes[l], 0.0);
  // adjoint of the post-reset membrane V_l(t), produced while visiting t+1
  std::vector<std::vector<double>> aV(L);
  for (int l = 1; l < L; ++l) aV[l].assign(spec.layer_sizes[l], 0.0);

  const int nL = spec.output_size();
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < nL; ++j)
      aS[L - 1][static_cast<std::size_t>(t) * nL + j] =
          rl.probs[j] - (j == sample.label ? 1.0 : 0.0);

  std::vector<double> aU;
  for (int t = T - 1; t >= 0; --t) {
    for (int l = L - 1; l >= 1; --l) {
      const int n = spec.layer_sizes[l];
      const int m = spec.layer_sizes[l - 1];
      aU.assign(n, 0.0);
      for (int j = 0; j < n; ++j) {
        double u = cache.U[l][static_cast<std::size_t>(t) * n + j];
        double s = cache.S[l][static_cast<std::size_t>(t) * n + j];
        double g = surrogate_grad(u - theta, slope);
        double as = aS[l][static_cast<std::size_t>(t) * n + j];
        double av = aV[l][j];
        // U feeds the spike through the surrogate and the reset V = U(1-s)
        aU[j] = g * (as - av * u) + av * (1.0 - s);
      }
      // V_l(t-1) enters U_l(t) scaled by beta
      for (int j = 0; j < n; ++j) aV[l][j] = spec.beta * aU[j];

      if (t >= 1) {
        const double* s_prev = cache.S[l - 1].data() + static_cast<std::size_t>(t - 1) * m;
        double* gw = grad[l - 1].data();
        for (int j = 0; j < n; ++j) {
          if (aU[j] == 0.0) continue;
          double* grow = gw + static_cast<std::size_t>(j) * m;
          for (int i = 0; i < m; ++i) grow[i] += aU[j] * s_prev[i];
        }
        if (l - 1 >= 1) {
          double* as_prev = aS[l - 1].data() + static_cast<std::size_t>(t - 1) * m;
          const double* wl = w[l - 1].data();
          for (int j = 0; j < n; ++j) {
            if (aU[j] == 0.0) continue;
            const double* wrow = wl + static_cast<std::size_t>(j) * m;
            for (int i = 0; i < m; ++i) as_prev[i] += wrow[i] * aU[j];
          }
        }
      }
    }
  }
  return rl.loss;
}

/// Mean gradient over a batch. Per-sample work may run on several threads;
/// the reduction is in sample order, so results do not depend on thread
/// count.
inline LayerWeights bptt_grad(const LayeredSpec& spec, const LayerWeights& w,
                              const std::vector<LabeledSample>& batch, SpikeMode mode,
                              double slope, int threads, double* mean_loss = nullptr,
                              std::vector<std::vector<double>>* batch_counts = nullptr) {
  detail::check_weight_shapes(spec, w);
  if (batch.empty()) throw ContractError("trainer: empty batch");
  for (const LabeledSample& s : batch) {
    if (s.label < 0 || s.label >= spec.output_size())
      throw ContractError("trainer: label " + std::to_string(s.label) + " out of range");
    if (static_cast<int>(s.drive.size()) != spec.input_size())
      throw ContractError("trainer: sample drive size mismatch");
  }

  const std::size_t B = batch.size();
  std::vector<LayerWeights> grads(B);
  std::vector<double> losses(B, 0.0);
  if (batch_counts) batch_counts->assign(B, {});

  int n_threads = threads > 0 ? threads
                              : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  n_threads = static_cast<int>(std::min<std::size_t>(n_threads, B));

  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      losses[i] = sample_grad(spec, w, batch[i], mode, slope, grads[i]);
      if (batch_counts) {
        ForwardResult f = trainer_forward(spec, w, batch[i].drive, mode, slope);
        (*batch_counts)[i] = std::move(f.counts);
      }
    }
  };
  if (n_threads <= 1) {
    work(0, B);
  } else {
    std::vector<std::thread> pool;
    std::size_t chunk = (B + n_threads - 1) / n_threads;
    for (int k = 0; k < n_threads; ++k) {
      std::size_t b = k * chunk, e = std::min(B, b + chunk);
      if (b >= e) break;
      pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) th.join();
  }

  LayerWeights mean = zero_like(spec);
  double inv = 1.0 / static_cast<double>(B);
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t l = 0; l < mean.size(); ++l)
      for (std::size_t k = 0; k < mean[l].size(); ++k) mean[l][k] += grads[i][l][k];
  for (auto& m : mean)
    for (double& v : m) v *= inv;
  if (mean_loss) {
    double acc = 0.0;
    for (double v : losses) acc += v;
    *mean_loss = acc * inv;
  }
  return mean;
}

/// Uniform init in +-1/sqrt(fan_in), deterministic for a given seed.
inline LayerWeights init_weights(const LayeredSpec& spec, unsigned seed) {
  std::mt19937 rng(seed);
  LayerWeights w = zero_like(spec);
  for (int l = 0; l + 1 < spec.layer_count(); ++l) {
    double half = 1.0 / std::sqrt(static_cast<double>(spec.layer_sizes[l]));
    for (double& v : w[l]) v = detail::uniform_pm(rng, half);
  }
  return w;
}

/// The layered network as a flat graph: inputs first, then each hidden layer,
/// outputs last. Keeps zero-weight edges (fully connected structure).
inline NetworkGraph flatten(const LayeredSpec& spec, const LayerWeights& w) {
  detail::check_weight_shapes(spec, w);
  std::vector<Synapse> syn;
  syn.reserve(spec.weight_count());
  for (int l = 0; l + 1 < spec.layer_count(); ++l) {
    int off_pre = spec.layer_offset(l);
    int off_post = spec.layer_offset(l + 1);
    int m = spec.layer_sizes[l], n = spec.layer_sizes[l + 1];
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < m; ++i)
        syn.push_back({off_pre + i, off_post + j, w[l][static_cast<std::size_t>(j) * m + i]});
  }
  std::vector<int> inputs(spec.input_size());
  std::iota(inputs.begin(), inputs.end(), 0);
  std::vector<int> outputs(spec.output_size());
  std::iota(outputs.begin(), outputs.end(), spec.layer_offset(spec.layer_count() - 1));
  return NetworkGraph::make(spec.neuron_count(), std::move(syn), std::move(inputs),
                            std::move(outputs), spec.threshold, spec.beta);
}

struct TrainConfig {
  double learning_rate = 0.5;
  int batch_size = 32;
  int epochs = 10;
  unsigned seed = 1;
  double surrogate_slope = kPi;
  int threads = 0;  // 0 = hardware concurrency; result is identical either way
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double train_accuracy = 0.0;
};

namespace detail {

// Fisher-Yates with rejection-sampled bounds; stable across platforms.
inline void shuffle_indices(std::vector<std::size_t>& idx, std::mt19937& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    std::uint32_t bound = static_cast<std::uint32_t>(i);
    std::uint32_t limit = std::numeric_limits<std::uint32_t>::max() / bound * bound;
    std::uint32_t r;
    do {
      r = rng();
    } while (r >= limit);
    std::swap(idx[i - 1], idx[r % bound]);
  }
}

}  // namespace detail

/// Minibatch SGD with the surrogate gradient. Returns the trained weights;
/// flatten() turns them into a graph. Throws TrainError if the loss stops
/// being finite.
inline LayerWeights train_layered(const LayeredSpec& spec,
                                  const std::vector<LabeledSample>& data,
                                  const TrainConfig& cfg,
                                  std::vector<EpochLog>* log = nullptr,
                                  const std::function<void(const EpochLog&)>& on_epoch = {}) {
  if (data.empty()) throw ContractError("train: empty dataset");
  if (cfg.batch_size < 1) throw ContractError("train: batch_size must be >= 1");
  if (cfg.epochs < 1) throw ContractError("train: epochs must be >= 1");
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate))
    throw InputError("train: learning_rate must be positive and finite");

  LayerWeights w = init_weights(spec, cfg.seed);
  std::mt19937 shuffle_rng(cfg.seed + 1);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    detail::shuffle_indices(order, shuffle_rng);
    double loss_sum = 0.0;
    long long correct = 0;
    std::size_t done = 0;
    while (done < order.size()) {
      std::size_t take = std::min<std::size_t>(cfg.batch_size, order.size() - done);
      std::vector<LabeledSample> batch(take);
      for (std::size_t i = 0; i < take; ++i) batch[i] = data[order[done + i]];
      double mean_loss = 0.0;
      std::vector<std::vector<double>> counts;
      LayerWeights g = bptt_grad(spec, w, batch, SpikeMode::Hard, cfg.surrogate_slope,
                                 cfg.threads, &mean_loss, &counts);
      if (!std::isfinite(mean_loss))
        throw TrainError("train: loss became non-finite in epoch " + std::to_string(epoch));
      loss_sum += mean_loss * static_cast<double>(take);
      for (std::size_t i = 0; i < take; ++i) {
        const auto& c = counts[i];
        int arg = static_cast<int>(std::max_element(c.begin(), c.end()) - c.begin());
        if (arg == batch[i].label) ++correct;
      }
      for (std::size_t l = 0; l < w.size(); ++l)
        for (std::size_t k = 0; k < w[l].size(); ++k) {
          w[l][k] -= cfg.learning_rate * g[l][k];
          if (!std::isfinite(w[l][k]))
            throw TrainError("train: weights became non-finite in epoch " +
                             std::to_string(epoch));
        }
      done += take;
    }
    EpochLog el;
    el.epoch = epoch;
    el.mean_loss = loss_sum / static_cast<double>(data.size());
    el.train_accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
    if (log) log->push_back(el);
    if (on_epoch) on_epoch(el);
  }
  return w;
}

/// Central-difference check of the analytic gradient in Smooth mode.
/// Samples up to max_coords weight coordinates (all of them when the network
/// is small) and returns the worst relative error.
inline double finite_diff_check(const LayeredSpec& spec, const LayerWeights& w,
                                const LabeledSample& sample, double eps = 1e-4,
                                std::size_t max_coords = 100, unsigned seed = 7,
                                double slope = kPi) {
  detail::check_weight_shapes(spec, w);
  LayerWeights analytic;
  sample_grad(spec, w, sample, SpikeMode::Smooth, slope, analytic);

  std::vector<std::pair<int, std::size_t>> coords;
  for (std::size_t l = 0; l < w.size(); ++l)
    for (std::size_t k = 0; k < w[l].size(); ++k) coords.push_back({static_cast<int>(l), k});
  if (coords.size() > max_coords) {
    std::mt19937 rng(seed);
    std::vector<std::size_t> idx(coords.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    detail::shuffle_indices(idx, rng);
    std::vector<std::pair<int, std::size_t>> pick;
    pick.reserve(max_coords);
    for (std::size_t i = 0; i < max_coords; ++i) pick.push_back(coords[idx[i]]);
    coords.swap(pick);
  }

  LayerWeights probe = w;
  auto loss_at = [&]() {
    ForwardResult f = trainer_forward(spec, probe, sample.drive, SpikeMode::Smooth, slope);
    return rate_softmax_loss(f.counts, sample.label).loss;
  };

  double worst = 0.0;
  for (auto [l, k] : coords) {
    double keep = probe[l][k];
    probe[l][k] = keep + eps;
    double up = loss_at();
    probe[l][k] = keep - eps;
    double down = loss_at();
    probe[l][k] = keep;
    double numeric = (up - down) / (2.0 * eps);
    double a = analytic[l][k];
    double rel = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), 1e-6});
    worst = std::max(worst, rel);
  }
  return worst;
}

}  // namespace spiketile

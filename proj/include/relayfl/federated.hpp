#pragma once

// FedAvg over a desk-scale synthetic classification task (softmax regression on
// Gaussian clusters), with the model changes aggregated over the air by one of
// the schemes below. Communication cost is counted in transmission blocks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "relayfl/aggregation.hpp"
#include "relayfl/channel.hpp"
#include "relayfl/errors.hpp"
#include "relayfl/optimizer.hpp"
#include "relayfl/random.hpp"
#include "relayfl/single_relay.hpp"

namespace relayfl {

struct LearningTask {
  std::size_t num_classes = 0;
  std::size_t feature_dim = 0;
  std::vector<double> train_features; // row-major, one row per sample
  std::vector<int> train_labels;
  std::vector<double> test_features;
  std::vector<int> test_labels;

  std::size_t num_train() const { return train_labels.size(); }
  std::size_t num_test() const { return test_labels.size(); }
  /// Weights (num_classes x feature_dim, row-major) followed by one bias per class.
  std::size_t model_dim() const { return num_classes * (feature_dim + 1); }

  std::span<const double> train_row(std::size_t i) const {
    return {train_features.data() + i * feature_dim, feature_dim};
  }
};

struct TaskParams {
  std::size_t num_classes = 10;
  std::size_t feature_dim = 50;
  std::size_t samples_per_class = 100;
  double separation = 4.0;
};

/// Unit-variance Gaussian clusters whose means are pairwise `separation` apart
/// (scaled basis vectors), shuffled and split 80/20 into train and test.
inline LearningTask make_synthetic_task(const TaskParams& params, RandomStream& rng) {
  if (params.num_classes == 0 || params.feature_dim == 0 || params.samples_per_class == 0 ||
      !(params.separation > 0.0))
    throw DomainError("make_synthetic_task: all parameters must be positive");
  if (params.feature_dim < params.num_classes)
    throw DomainError("make_synthetic_task: feature_dim must be at least num_classes");
  const std::size_t F = params.feature_dim;
  const std::size_t total = params.num_classes * params.samples_per_class;
  const double offset = params.separation / std::sqrt(2.0);

  std::vector<double> features(total * F);
  std::vector<int> labels(total);
  for (std::size_t c = 0; c < params.num_classes; ++c) {
    for (std::size_t s = 0; s < params.samples_per_class; ++s) {
      const std::size_t i = c * params.samples_per_class + s;
      labels[i] = static_cast<int>(c);
      for (std::size_t j = 0; j < F; ++j) features[i * F + j] = rng.normal() + (j == c ? offset : 0.0);
    }
  }
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.engine());

  LearningTask task;
  task.num_classes = params.num_classes;
  task.feature_dim = F;
  const std::size_t num_test = total / 5;
  for (std::size_t pos = 0; pos < total; ++pos) {
    const std::size_t i = order[pos];
    const bool test = pos < num_test;
    auto& dst = test ? task.test_features : task.train_features;
    dst.insert(dst.end(), features.begin() + static_cast<std::ptrdiff_t>(i * F),
               features.begin() + static_cast<std::ptrdiff_t>((i + 1) * F));
    (test ? task.test_labels : task.train_labels).push_back(labels[i]);
  }
  return task;
}

// --- softmax regression ----------------------------------------------------

namespace detail {

inline void class_probabilities(std::span<const double> w, std::size_t C, std::size_t F, std::span<const double> x,
                                std::vector<double>& p) {
  p.resize(C);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < C; ++c) {
    double z = w[C * F + c];
    for (std::size_t j = 0; j < F; ++j) z += w[c * F + j] * x[j];
    p[c] = z;
    top = std::max(top, z);
  }
  double total = 0.0;
  for (auto& v : p) {
    v = std::exp(v - top);
    total += v;
  }
  for (auto& v : p) v /= total;
}

} // namespace detail

/// Mean cross-entropy over the given training samples.
inline double local_loss(std::span<const double> w, const LearningTask& task, std::span<const std::size_t> indices) {
  const std::size_t C = task.num_classes, F = task.feature_dim;
  std::vector<double> p;
  double loss = 0.0;
  for (auto i : indices) {
    detail::class_probabilities(w, C, F, task.train_row(i), p);
    loss -= std::log(std::max(p[static_cast<std::size_t>(task.train_labels[i])], 1e-300));
  }
  return indices.empty() ? 0.0 : loss / static_cast<double>(indices.size());
}

inline std::vector<double> local_gradient(std::span<const double> w, const LearningTask& task,
                                          std::span<const std::size_t> indices) {
  const std::size_t C = task.num_classes, F = task.feature_dim;
  std::vector<double> grad(task.model_dim(), 0.0);
  std::vector<double> p;
  for (auto i : indices) {
    auto x = task.train_row(i);
    detail::class_probabilities(w, C, F, x, p);
    p[static_cast<std::size_t>(task.train_labels[i])] -= 1.0;
    for (std::size_t c = 0; c < C; ++c) {
      for (std::size_t j = 0; j < F; ++j) grad[c * F + j] += p[c] * x[j];
      grad[C * F + c] += p[c];
    }
  }
  if (!indices.empty())
    for (auto& g : grad) g /= static_cast<double>(indices.size());
  return grad;
}

inline double test_accuracy(std::span<const double> w, const LearningTask& task) {
  if (task.num_test() == 0) return 0.0;
  const std::size_t C = task.num_classes, F = task.feature_dim;
  std::vector<double> p;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < task.num_test(); ++i) {
    detail::class_probabilities(w, C, F, {task.test_features.data() + i * F, F}, p);
    const auto best = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    correct += best == task.test_labels[i];
  }
  return static_cast<double>(correct) / static_cast<double>(task.num_test());
}

// --- partitions -------------------------------------------------------------

struct Partition {
  std::vector<std::vector<std::size_t>> assignments;

  std::size_t num_devices() const { return assignments.size(); }

  DeviceWeights weights() const {
    std::vector<std::size_t> counts;
    for (const auto& a : assignments) counts.push_back(a.size());
    return DeviceWeights::from_counts(counts);
  }
};

/// Random permutation split into K parts of floor(D/K) samples each.
inline Partition partition_iid(const LearningTask& task, std::size_t K, RandomStream& rng) {
  const std::size_t D = task.num_train();
  if (K == 0 || D < K) throw DomainError("partition_iid: need 1 <= K <= D");
  std::vector<std::size_t> order(D);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng.engine());
  const std::size_t per = D / K;
  Partition p;
  for (std::size_t k = 0; k < K; ++k)
    p.assignments.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(k * per),
                               order.begin() + static_cast<std::ptrdiff_t>((k + 1) * per));
  return p;
}

/// Label-sorted data cut into K*C contiguous shards; device k receives shards
/// k, k + K, k + 2K, ... The last shard absorbs any remainder.
inline Partition partition_shards(const LearningTask& task, std::size_t K, std::size_t C) {
  const std::size_t D = task.num_train();
  if (K == 0 || C == 0) throw DomainError("partition_shards: K and C must be positive");
  const std::size_t shards = K * C;
  if (shards > D) throw DomainError("partition_shards: more shards than samples");
  std::vector<std::size_t> order(D);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return task.train_labels[a] < task.train_labels[b]; });
  const std::size_t size = D / shards;
  Partition p;
  p.assignments.resize(K);
  for (std::size_t s = 0; s < shards; ++s) {
    const std::size_t begin = s * size;
    const std::size_t end = s + 1 == shards ? D : begin + size;
    auto& dst = p.assignments[s % K];
    dst.insert(dst.end(), order.begin() + static_cast<std::ptrdiff_t>(begin),
               order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return p;
}

// --- FedAvg steps -----------------------------------------------------------

/// tau full-batch gradient steps from w; returns the accumulated model change.
inline std::vector<double> local_update(std::span<const double> w, const LearningTask& task,
                                        std::span<const std::size_t> indices, int tau, double lr) {
  if (tau < 1) throw DomainError("local_update: tau must be at least 1");
  std::vector<double> local(w.begin(), w.end());
  for (int step = 0; step < tau; ++step) {
    const auto grad = local_gradient(local, task, indices);
    for (std::size_t i = 0; i < local.size(); ++i) local[i] -= lr * grad[i];
  }
  for (std::size_t i = 0; i < local.size(); ++i) local[i] -= w[i];
  return local;
}

inline std::vector<double> global_update(std::span<const double> w, std::span<const double> estimate) {
  std::vector<double> next(w.begin(), w.end());
  for (std::size_t i = 0; i < next.size(); ++i) next[i] += estimate[i];
  return next;
}

/// ||estimate - truth||^2 / ||truth||^2, or nullopt when the truth is zero.
inline std::optional<double> nmse(std::span<const double> estimate, std::span<const double> truth) {
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    err += (estimate[i] - truth[i]) * (estimate[i] - truth[i]);
    ref += truth[i] * truth[i];
  }
  if (!(ref > 0.0)) return std::nullopt;
  return err / ref;
}

inline double to_db(double linear) {
  return linear > 0.0 ? 10.0 * std::log10(linear) : -std::numeric_limits<double>::infinity();
}

struct LearningRateSchedule {
  double base = 0.05;
  double decay = 0.9;
  int period = 50;
  double floor = 1e-5;

  double at(int round) const { return std::max(base * std::pow(decay, round / period), floor); }
};

// --- training loop ----------------------------------------------------------

enum class Scheme { proposed, relay_only, no_relay, error_free };

inline const char* to_string(Scheme s) {
  switch (s) {
  case Scheme::proposed: return "proposed";
  case Scheme::relay_only: return "relay_only";
  case Scheme::no_relay: return "no_relay";
  case Scheme::error_free: return "error_free";
  }
  return "?";
}

inline int blocks_per_round(Scheme s) { return s == Scheme::proposed || s == Scheme::relay_only ? 2 : 1; }

struct RoundMetrics {
  int round = 0;
  int transmission_blocks_used = 0; // cumulative
  double nmse_db = 0.0;             // -inf for an exact estimate, NaN when undefined
  double test_accuracy = 0.0;
  double mse_predicted = 0.0;
  SolverWarnings warnings;
  // Populated for single-relay layouts only.
  std::optional<double> mse_norelay_bound;
  std::optional<bool> cond40;
  std::optional<bool> cond41;
};

struct TrainOptions {
  Scheme scheme = Scheme::proposed;
  PowerBudget budget{};
  SolverConfig solver{};
  LearningRateSchedule schedule{};
  PathLossParams path_loss{};
  int tau = 1;
  int total_blocks = 100;
  std::optional<double> csi_kappa; // optimiser sees perturbed channels when set
  bool keep_weight_history = false;
};

struct TrainResult {
  std::vector<RoundMetrics> rounds;
  std::vector<double> final_weights;
  std::vector<std::vector<double>> weight_history; // w after each round, if requested
};

namespace detail {
enum StreamPurpose : std::uint64_t { kChannels = 1, kNoise = 2, kCsi = 3 };

inline SchemeVariant variant_for(Scheme s) {
  switch (s) {
  case Scheme::proposed: return SchemeVariant::full;
  case Scheme::relay_only: return SchemeVariant::relay_only;
  default: return SchemeVariant::no_relay_singlephase;
  }
}
} // namespace detail

struct AggregationOutcome {
  std::vector<double> estimate;
  double mse_predicted = 0.0;
  SolverWarnings warnings;
  std::optional<double> mse_norelay_bound;
  std::optional<bool> cond40;
  std::optional<bool> cond41;
};

/// One over-the-air aggregation of the local updates. `channel_rng`,
/// `noise_rng` and `csi_rng` are consumed only when symbols are actually sent.
inline AggregationOutcome aggregate_updates(std::span<const std::vector<double>> deltas, const DeviceWeights& weights,
                                            const NodeLayout& layout, const TrainOptions& opts,
                                            RandomStream& channel_rng, RandomStream& noise_rng, RandomStream& csi_rng) {
  if (deltas.size() != weights.size()) throw DomainError("aggregate_updates: one update per device required");
  const std::size_t d = deltas.empty() ? 0 : deltas[0].size();
  AggregationOutcome out;
  if (opts.scheme == Scheme::error_free) {
    out.estimate.assign(d, 0.0);
    for (std::size_t k = 0; k < deltas.size(); ++k)
      for (std::size_t i = 0; i < d; ++i) out.estimate[i] += weights[k] * deltas[k][i];
    return out;
  }
  const auto stats = make_normalization_stats(deltas, weights);
  if (!(stats.global_var > 0.0)) {
    // Every device sent the same constant: the broadcast mean already is the aggregate.
    out.estimate.assign(d, stats.global_mean);
    return out;
  }
  const double nu = std::sqrt(stats.global_var);
  std::vector<std::vector<double>> symbols;
  symbols.reserve(deltas.size());
  for (const auto& delta : deltas) symbols.push_back(normalize(delta, stats.global_mean, nu));

  const ChannelRealization channels = realize_channels(layout, opts.path_loss, channel_rng);
  const ChannelRealization known =
      opts.csi_kappa ? perceived_channels(channels, layout, opts.path_loss, *opts.csi_kappa, csi_rng) : channels;
  const auto solved = solve(known, weights, opts.budget, opts.solver, detail::variant_for(opts.scheme));
  out.warnings = solved.trace.warnings;
  out.mse_predicted = relay_mse(solved.config, channels, weights, opts.budget.sigma2);

  const auto x_hat = simulate_round(solved.config, channels, symbols, opts.budget.sigma2, noise_rng);
  out.estimate.resize(d);
  for (std::size_t i = 0; i < d; ++i) out.estimate[i] = denormalize(x_hat[i], stats.global_mean, nu);

  if (channels.N == 1) {
    const auto cond = check_theorem_conditions(snr_summary(channels, opts.budget), weights.size());
    out.mse_norelay_bound = norelay_optimum(channels.h, weights, 2.0 * opts.budget.p0, opts.budget.sigma2).mse;
    out.cond40 = cond.cond_40;
    out.cond41 = cond.cond_41;
  }
  return out;
}

/// Runs FedAvg until the block budget is spent. Channels and receiver noise for
/// round t come from streams keyed by (one draw of `rng`, t), so schemes run
/// from equal `rng` states see identical channels round by round.
inline TrainResult train(const LearningTask& task, const Partition& partition, const NodeLayout& layout,
                         const TrainOptions& opts, RandomStream& rng) {
  if (opts.total_blocks < 1) throw DomainError("train: total_blocks must be at least 1");
  if (partition.num_devices() != layout.num_devices())
    throw DomainError("train: partition and layout disagree on the number of devices");
  opts.budget.validate();
  const DeviceWeights weights = partition.weights();
  const std::size_t K = partition.num_devices();
  const std::uint64_t base = rng.engine()();
  const int per_round = blocks_per_round(opts.scheme);
  const int num_rounds = opts.total_blocks / per_round;

  TrainResult out;
  std::vector<double> w(task.model_dim(), 0.0);
  for (int t = 0; t < num_rounds; ++t) {
    const double lr = opts.schedule.at(t);
    std::vector<std::vector<double>> deltas(K);
    for (std::size_t k = 0; k < K; ++k) deltas[k] = local_update(w, task, partition.assignments[k], opts.tau, lr);

    const auto round = static_cast<std::uint64_t>(t);
    auto channel_rng = RandomStream::keyed({base, round, detail::kChannels});
    auto noise_rng = RandomStream::keyed({base, round, detail::kNoise});
    auto csi_rng = RandomStream::keyed({base, round, detail::kCsi});
    auto agg = aggregate_updates(deltas, weights, layout, opts, channel_rng, noise_rng, csi_rng);

    std::vector<double> truth(w.size(), 0.0);
    for (std::size_t k = 0; k < K; ++k)
      for (std::size_t i = 0; i < truth.size(); ++i) truth[i] += weights[k] * deltas[k][i];

    RoundMetrics m;
    m.round = t;
    const auto e = nmse(agg.estimate, truth);
    m.nmse_db = e ? to_db(*e) : std::numeric_limits<double>::quiet_NaN();
    m.mse_predicted = agg.mse_predicted;
    m.warnings = agg.warnings;
    m.mse_norelay_bound = agg.mse_norelay_bound;
    m.cond40 = agg.cond40;
    m.cond41 = agg.cond41;
    w = global_update(w, agg.estimate);
    m.transmission_blocks_used = (t + 1) * per_round;
    m.test_accuracy = test_accuracy(w, task);
    out.rounds.push_back(m);
    if (opts.keep_weight_history) out.weight_history.push_back(w);
  }
  out.final_weights = std::move(w);
  return out;
}

} // namespace relayfl

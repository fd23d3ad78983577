#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "relayfl/federated.hpp"

using namespace relayfl;

namespace {

TaskParams small_params() {
  TaskParams p;
  p.num_classes = 3;
  p.feature_dim = 4;
  p.samples_per_class = 20;
  p.separation = 3.0;
  return p;
}

std::vector<std::size_t> all_indices(const LearningTask& task) {
  std::vector<std::size_t> idx(task.num_train());
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

NodeLayout draw_line(std::size_t K, std::size_t N, std::uint64_t seed) {
  RandomStream rng(seed);
  return line_layout(K, N, LineScenario{}, rng);
}

} // namespace

TEST(Task, ShapesAndDeterminism) {
  RandomStream a(1), b(1);
  const auto t1 = make_synthetic_task(small_params(), a);
  const auto t2 = make_synthetic_task(small_params(), b);
  EXPECT_EQ(t1.train_features, t2.train_features);
  EXPECT_EQ(t1.test_labels, t2.test_labels);
  EXPECT_EQ(t1.num_train() + t1.num_test(), 60u);
  EXPECT_EQ(t1.num_test(), 12u);
  EXPECT_EQ(t1.model_dim(), 15u);
  EXPECT_EQ(t1.train_features.size(), t1.num_train() * 4);
}

TEST(Task, RejectsBadParameters) {
  RandomStream rng(1);
  auto p = small_params();
  p.feature_dim = 2;
  EXPECT_THROW(make_synthetic_task(p, rng), DomainError);
  p = small_params();
  p.separation = 0.0;
  EXPECT_THROW(make_synthetic_task(p, rng), DomainError);
}

TEST(Task, SingleClassIsAlwaysRight) {
  RandomStream rng(2);
  auto p = small_params();
  p.num_classes = 1;
  const auto task = make_synthetic_task(p, rng);
  EXPECT_DOUBLE_EQ(test_accuracy(std::vector<double>(task.model_dim(), 0.0), task), 1.0);
}

TEST(Task, WellSeparatedClustersAreLearnable) {
  RandomStream rng(3);
  auto p = small_params();
  p.separation = 12.0;
  p.samples_per_class = 100;
  const auto task = make_synthetic_task(p, rng);
  const auto idx = all_indices(task);
  std::vector<double> w(task.model_dim(), 0.0);
  for (int step = 0; step < 200; ++step) w = global_update(w, local_update(w, task, idx, 1, 0.05));
  EXPECT_GE(test_accuracy(w, task), 0.99);
}

TEST(Gradient, MatchesFiniteDifferences) {
  RandomStream rng(4);
  const auto task = make_synthetic_task(small_params(), rng);
  const auto idx = all_indices(task);
  std::vector<double> w(task.model_dim());
  for (auto& v : w) v = rng.normal(0.0, 0.3);
  const auto grad = local_gradient(w, task, idx);
  const double h = 1e-6;
  for (std::size_t i = 0; i < w.size(); ++i) {
    auto wp = w, wm = w;
    wp[i] += h;
    wm[i] -= h;
    const double fd = (local_loss(wp, task, idx) - local_loss(wm, task, idx)) / (2 * h);
    EXPECT_NEAR(grad[i], fd, 1e-5) << "coordinate " << i;
  }
}

TEST(LocalUpdate, ZeroLearningRateAndTauValidation) {
  RandomStream rng(5);
  const auto task = make_synthetic_task(small_params(), rng);
  const auto idx = all_indices(task);
  std::vector<double> w(task.model_dim(), 0.1);
  for (double v : local_update(w, task, idx, 3, 0.0)) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(local_update(w, task, idx, 0, 0.1), DomainError);
  // Two single steps equal one two-step update.
  const auto d1 = local_update(w, task, idx, 1, 0.05);
  const auto w1 = global_update(w, d1);
  const auto d2 = local_update(w1, task, idx, 1, 0.05);
  const auto both = local_update(w, task, idx, 2, 0.05);
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(both[i], d1[i] + d2[i], 1e-14);
}

TEST(Partitions, IidSplitsEvenly) {
  RandomStream rng(6);
  auto p = small_params();
  p.num_classes = 1;
  p.feature_dim = 1;
  p.samples_per_class = 13; // 10 train, 3 test
  const auto task = make_synthetic_task(p, rng);
  ASSERT_EQ(task.num_train(), 11u);
  const auto part = partition_iid(task, 2, rng);
  EXPECT_EQ(part.assignments[0].size(), 5u);
  EXPECT_EQ(part.assignments[1].size(), 5u);
  std::set<std::size_t> seen(part.assignments[0].begin(), part.assignments[0].end());
  for (auto i : part.assignments[1]) EXPECT_TRUE(seen.insert(i).second);
  EXPECT_THROW(partition_iid(task, 0, rng), DomainError);
  EXPECT_THROW(partition_iid(task, 12, rng), DomainError);
}

TEST(Partitions, ShardsAreDisjointAndCover) {
  LearningTask balanced;
  balanced.num_classes = 2;
  balanced.feature_dim = 1;
  balanced.train_labels = {1, 0, 1, 0, 1, 0};
  balanced.train_features.assign(6, 0.0);
  const auto one_each = partition_shards(balanced, 2, 1);
  for (const auto& a : one_each.assignments) {
    ASSERT_EQ(a.size(), 3u);
    std::set<int> labels;
    for (auto i : a) labels.insert(balanced.train_labels[i]);
    EXPECT_EQ(labels.size(), 1u);
  }
  RandomStream rng(7);
  const auto task = make_synthetic_task(small_params(), rng);
  const auto part = partition_shards(task, 3, 2);
  std::vector<int> hits(task.num_train(), 0);
  for (const auto& a : part.assignments)
    for (auto i : a) ++hits[i];
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_NEAR(part.weights().values()[0] + part.weights().values()[1] + part.weights().values()[2], 1.0, 1e-15);
  EXPECT_THROW(partition_shards(task, task.num_train(), 2), DomainError);
}

TEST(Metrics, NmseAndDecibels) {
  const std::vector<double> truth{1.0, -2.0}, twice{2.0, -4.0};
  EXPECT_DOUBLE_EQ(*nmse(twice, truth), 1.0);
  EXPECT_DOUBLE_EQ(*nmse(truth, truth), 0.0);
  EXPECT_FALSE(nmse(truth, std::vector<double>{0.0, 0.0}).has_value());
  EXPECT_EQ(to_db(0.0), -std::numeric_limits<double>::infinity());
  EXPECT_DOUBLE_EQ(to_db(100.0), 20.0);
  const auto next = global_update(std::vector<double>{1.0, 1.0}, std::vector<double>{0.5, -1.0});
  EXPECT_EQ(next, (std::vector<double>{1.5, 0.0}));
}

TEST(Metrics, LearningRateSchedule) {
  const LearningRateSchedule s;
  EXPECT_DOUBLE_EQ(s.at(0), 0.05);
  EXPECT_DOUBLE_EQ(s.at(49), 0.05);
  EXPECT_DOUBLE_EQ(s.at(50), 0.045);
  EXPECT_NEAR(s.at(100), 0.0405, 1e-17);
  EXPECT_NEAR(s.at(1000), 0.006078832729528468, 1e-17);
  EXPECT_DOUBLE_EQ(s.at(5000), 1e-5);
}

TEST(Schemes, BlockAccounting) {
  EXPECT_EQ(blocks_per_round(Scheme::proposed), 2);
  EXPECT_EQ(blocks_per_round(Scheme::relay_only), 2);
  EXPECT_EQ(blocks_per_round(Scheme::no_relay), 1);
  EXPECT_EQ(blocks_per_round(Scheme::error_free), 1);
}

class TrainFixture : public ::testing::Test {
protected:
  void SetUp() override {
    RandomStream rng(8);
    task = make_synthetic_task(small_params(), rng);
    partition = partition_iid(task, 4, rng);
    layout = draw_line(4, 1, 9);
  }
  TrainResult run(Scheme s, int blocks, double sigma2 = 1e-10) const {
    TrainOptions o;
    o.scheme = s;
    o.total_blocks = blocks;
    o.budget.sigma2 = sigma2;
    o.keep_weight_history = true;
    RandomStream rng(10);
    return train(task, partition, layout, o, rng);
  }
  LearningTask task;
  Partition partition;
  NodeLayout layout;
};

TEST_F(TrainFixture, RoundCountsFollowTheBlockBudget) {
  for (auto s : {Scheme::proposed, Scheme::relay_only, Scheme::no_relay, Scheme::error_free}) {
    const auto r = run(s, 11);
    const int per = blocks_per_round(s);
    ASSERT_EQ(static_cast<int>(r.rounds.size()), 11 / per) << to_string(s);
    for (std::size_t t = 0; t < r.rounds.size(); ++t) {
      EXPECT_EQ(r.rounds[t].round, static_cast<int>(t));
      EXPECT_EQ(r.rounds[t].transmission_blocks_used, static_cast<int>(t + 1) * per);
    }
    EXPECT_LE(r.rounds.back().transmission_blocks_used, 11);
  }
}

TEST_F(TrainFixture, ErrorFreeIsExactAndDescends) {
  const auto r = run(Scheme::error_free, 30);
  const auto idx = all_indices(task);
  double prev = local_loss(std::vector<double>(task.model_dim(), 0.0), task, idx);
  for (std::size_t t = 0; t < r.rounds.size(); ++t) {
    EXPECT_EQ(r.rounds[t].nmse_db, -std::numeric_limits<double>::infinity());
    EXPECT_FALSE(r.rounds[t].mse_norelay_bound.has_value());
    const double loss = local_loss(r.weight_history[t], task, idx);
    EXPECT_LE(loss, prev + 1e-12);
    prev = loss;
  }
}

TEST_F(TrainFixture, DeterministicAndReportsSingleRelayDiagnostics) {
  const auto a = run(Scheme::proposed, 10);
  const auto b = run(Scheme::proposed, 10);
  EXPECT_EQ(a.final_weights, b.final_weights);
  for (const auto& m : a.rounds) {
    EXPECT_TRUE(std::isfinite(m.nmse_db));
    EXPECT_GT(m.mse_predicted, 0.0);
    EXPECT_TRUE(m.mse_norelay_bound.has_value());
    EXPECT_TRUE(m.cond40.has_value());
  }
}

TEST_F(TrainFixture, VanishingNoiseRecoversTheErrorFreeTrajectory) {
  const auto exact = run(Scheme::error_free, 40);
  double previous = 1e300;
  for (double sigma2 : {1e-11, 1e-14, 1e-17}) {
    const auto noisy = run(Scheme::proposed, 80, sigma2);
    ASSERT_EQ(exact.rounds.size(), noisy.rounds.size());
    double diff = 0.0, ref = 0.0;
    for (std::size_t i = 0; i < exact.final_weights.size(); ++i) {
      diff += std::pow(noisy.final_weights[i] - exact.final_weights[i], 2);
      ref += std::pow(exact.final_weights[i], 2);
    }
    const double dev = std::sqrt(diff / ref);
    EXPECT_LT(dev, previous) << "sigma2 " << sigma2;
    previous = dev;
  }
  EXPECT_LT(previous, 1e-3);
}

TEST_F(TrainFixture, RejectsMismatchedLayout) {
  TrainOptions o;
  RandomStream rng(1);
  EXPECT_THROW(train(task, partition, draw_line(5, 1, 1), o, rng), DomainError);
  o.total_blocks = 0;
  EXPECT_THROW(train(task, partition, layout, o, rng), DomainError);
}

TEST(Aggregate, IdenticalUpdatesShortCircuit) {
  const std::vector<std::vector<double>> deltas(3, std::vector<double>(4, 0.25));
  TrainOptions o;
  RandomStream c(1), n(2), s(3);
  const auto before = c.engine()();
  RandomStream c2(1);
  const auto out = aggregate_updates(deltas, DeviceWeights::uniform(3), draw_line(3, 1, 4), o, c2, n, s);
  EXPECT_EQ(out.estimate, std::vector<double>(4, 0.25));
  EXPECT_EQ(c2.engine()(), before); // no channel draw was consumed
}

TEST(Aggregate, ErrorFreeIsTheWeightedSum) {
  const std::vector<std::vector<double>> deltas{{1.0, 2.0}, {3.0, -2.0}};
  TrainOptions o;
  o.scheme = Scheme::error_free;
  RandomStream c(1), n(2), s(3);
  const auto out = aggregate_updates(deltas, DeviceWeights({0.25, 0.75}), draw_line(2, 0, 4), o, c, n, s);
  EXPECT_DOUBLE_EQ(out.estimate[0], 2.5);
  EXPECT_DOUBLE_EQ(out.estimate[1], -1.0);
}

TEST(Aggregate, ImperfectCsiRaisesTheTrueError) {
  RandomStream rng(5);
  std::vector<std::vector<double>> deltas(10, std::vector<double>(50));
  for (auto& d : deltas)
    for (auto& v : d) v = rng.normal(0.0, 1.0);
  const auto layout = draw_line(10, 1, 6);
  double perfect = 0.0, rough = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    TrainOptions o;
    RandomStream c1(100 + rep), n1(200 + rep), s1(300 + rep);
    perfect += aggregate_updates(deltas, DeviceWeights::uniform(10), layout, o, c1, n1, s1).mse_predicted;
    o.csi_kappa = 0.5;
    RandomStream c2(100 + rep), n2(200 + rep), s2(300 + rep);
    rough += aggregate_updates(deltas, DeviceWeights::uniform(10), layout, o, c2, n2, s2).mse_predicted;
  }
  EXPECT_GT(rough, perfect);
}

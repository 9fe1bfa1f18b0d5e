#include <gtest/gtest.h>

#include <set>

#include "embprobe/probe.hpp"
#include "embprobe/synth.hpp"

using namespace embprobe;

namespace {

struct Blobs {
  Eigen::MatrixXd x;
  std::vector<std::size_t> y;
};

// Two Gaussian blobs centred at -3 and +3 in every coordinate.
Blobs blobs(std::size_t n, std::size_t d, double sigma, std::uint64_t seed) {
  Rng rng(seed);
  Blobs b;
  b.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % 2;
    b.y.push_back(label);
    for (std::size_t j = 0; j < d; ++j) {
      b.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          (label ? 3.0 : -3.0) + rng.normal(0.0, sigma);
    }
  }
  return b;
}

double accuracy(const std::vector<std::size_t>& pred, std::span<const std::size_t> truth) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == truth[i] ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(pred.size());
}

}  // namespace

TEST(MakeFolds, ExactDivision) {
  const auto bins = make_folds(10, 10, 1);
  ASSERT_EQ(bins.size(), 10u);
  for (const auto& b : bins) EXPECT_EQ(b.size(), 1u);
}

TEST(MakeFolds, RemainderSizes) {
  const auto bins = make_folds(10005, 10, 3);
  std::multiset<std::size_t> sizes;
  for (const auto& b : bins) sizes.insert(b.size());
  EXPECT_EQ(sizes.count(1001), 5u);
  EXPECT_EQ(sizes.count(1000), 5u);
}

TEST(MakeFolds, PartitionAndDeterminism) {
  const auto bins = make_folds(997, 7, 42);
  std::vector<int> seen(997, 0);
  for (const auto& b : bins)
    for (auto i : b) ++seen[i];
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_EQ(bins, make_folds(997, 7, 42));
  EXPECT_NE(bins, make_folds(997, 7, 43));
  EXPECT_THROW(make_folds(3, 5, 1), Error);
}

TEST(ProbeConfig, RejectsSingleFold) {
  ProbeConfig cfg;
  cfg.folds = 1;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(TrainMlp, SeparableBlobsAreLearned) {
  const auto b = blobs(200, 8, 0.5, 7);
  // Nearest-centroid oracle: the blobs really are separable.
  Eigen::VectorXd c0 = Eigen::VectorXd::Zero(8), c1 = Eigen::VectorXd::Zero(8);
  for (std::size_t i = 0; i < 200; ++i) (b.y[i] ? c1 : c0) += b.x.row(static_cast<Eigen::Index>(i)).transpose();
  c0 /= 100.0;
  c1 /= 100.0;
  std::vector<std::size_t> nc;
  for (std::size_t i = 0; i < 200; ++i) {
    const Eigen::VectorXd r = b.x.row(static_cast<Eigen::Index>(i)).transpose();
    nc.push_back((r - c1).norm() < (r - c0).norm() ? 1 : 0);
  }
  ASSERT_EQ(accuracy(nc, b.y), 1.0);

  const auto model = train_mlp(b.x, b.y, 2, ProbeConfig{}, 1);
  EXPECT_GE(accuracy(mlp_predict(model.params, b.x), b.y), 0.99);
  EXPECT_LT(model.epoch_loss.back(), model.epoch_loss.front());
}

TEST(TrainMlp, ShuffledLabelsGeneraliseAtChance) {
  const auto b = blobs(200, 8, 0.5, 8);
  const auto y = shuffled_labels(b.y, 5);
  const Eigen::MatrixXd train = b.x.topRows(160);
  const Eigen::MatrixXd test = b.x.bottomRows(40);
  const std::vector<std::size_t> ytrain(y.begin(), y.begin() + 160);
  const std::vector<std::size_t> ytest(y.begin() + 160, y.end());
  const auto model = train_mlp(train, ytrain, 2, ProbeConfig{}, 2);
  const double acc = accuracy(mlp_predict(model.params, test), ytest);
  EXPECT_GE(acc, 0.4);
  EXPECT_LE(acc, 0.7);
}

TEST(TrainMlp, GradientMatchesFiniteDifferences) {
  Rng rng(11);
  const auto p = MlpParams::init(4, 6, 3, rng);
  Eigen::MatrixXd x(5, 4);
  for (Eigen::Index i = 0; i < 5; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) x(i, j) = rng.normal();
  const std::vector<std::size_t> y = {0, 2, 1, 1, 0};

  MlpParams grad;
  mlp_loss_grad(p, x, y, &grad);
  const double h = 1e-5;
  double worst = 0.0;
  auto check = [&](auto member, const auto& analytic) {
    for (Eigen::Index i = 0; i < analytic.size(); ++i) {
      MlpParams plus = p, minus = p;
      (plus.*member).data()[i] += h;
      (minus.*member).data()[i] -= h;
      const double numeric =
          (mlp_loss_grad(plus, x, y, nullptr) - mlp_loss_grad(minus, x, y, nullptr)) / (2 * h);
      const double a = analytic.data()[i];
      const double scale = std::max({std::abs(a), std::abs(numeric), 1e-7});
      worst = std::max(worst, std::abs(a - numeric) / scale);
    }
  };
  check(&MlpParams::w1, grad.w1);
  check(&MlpParams::b1, grad.b1);
  check(&MlpParams::w2, grad.w2);
  check(&MlpParams::b2, grad.b2);
  EXPECT_LT(worst, 1e-4);
}

TEST(TrainMlp, RejectsNonFiniteInput) {
  auto b = blobs(20, 2, 0.5, 1);
  b.x(3, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(train_mlp(b.x, b.y, 2, ProbeConfig{}, 1), Error);
}

TEST(Crossvalidate, TwoFoldsFourSamples) {
  Eigen::MatrixXd x(4, 2);
  x << -5, -5, -4, -6, 5, 5, 6, 4;
  const std::vector<std::size_t> y = {0, 0, 1, 1};
  ProbeConfig cfg;
  cfg.folds = 2;
  cfg.epochs = 200;
  // Pick a seed whose random split leaves both classes in every training half;
  // otherwise the example is unsolvable by any classifier.
  for (cfg.seed = 1;; ++cfg.seed) {
    const auto bins = make_folds(4, 2, cfg.seed);
    if (y[bins[0][0]] != y[bins[0][1]]) break;
  }
  const auto report = crossvalidate(x, y, {"a", "b"}, cfg);
  EXPECT_EQ(report.mean, 1.0);
  EXPECT_EQ(report.two_sigma, 0.0);
  EXPECT_EQ(report.summary(), "100.00 % (+/- 0.00 %)");
}

TEST(Crossvalidate, EveryRowEvaluatedOnce) {
  const auto b = blobs(300, 4, 1.0, 3);
  ProbeConfig cfg;
  cfg.epochs = 5;
  const auto report = crossvalidate(b.x, b.y, {"a", "b"}, cfg);
  std::size_t total = 0;
  for (auto s : report.fold_sizes) total += s;
  EXPECT_EQ(total, 300u);
  std::size_t confusion_total = 0;
  for (const auto& row : report.confusion)
    for (auto c : row) confusion_total += c;
  EXPECT_EQ(confusion_total, 300u);
}

TEST(Crossvalidate, BitReproducibleAndThreadIndependent) {
  const auto b = blobs(400, 6, 2.0, 4);
  ProbeConfig cfg;
  cfg.epochs = 8;
  const auto one = crossvalidate(b.x, b.y, {"a", "b"}, cfg);
  const auto again = crossvalidate(b.x, b.y, {"a", "b"}, cfg);
  cfg.threads = 4;
  const auto threaded = crossvalidate(b.x, b.y, {"a", "b"}, cfg);
  EXPECT_EQ(one.fold_accuracies, again.fold_accuracies);
  EXPECT_EQ(one.final_losses, again.final_losses);
  EXPECT_EQ(one.fold_accuracies, threaded.fold_accuracies);
  EXPECT_EQ(one.final_losses, threaded.final_losses);
  EXPECT_EQ(one.confusion, threaded.confusion);
}

TEST(Report, StatisticsMatchIndependentOracle) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> acc(10);
    for (auto& a : acc) a = rng.uniform(0.8, 1.0);
    // Welford's update, a different route to the same sample statistics.
    long double mean = 0, m2 = 0;
    for (std::size_t i = 0; i < acc.size(); ++i) {
      const long double delta = acc[i] - mean;
      mean += delta / static_cast<long double>(i + 1);
      m2 += delta * (acc[i] - mean);
    }
    const double oracle_two_sigma = 2.0 * std::sqrt(static_cast<double>(m2 / 9.0L));
    const auto s = mean_two_sigma(acc);
    EXPECT_NEAR(s.mean, static_cast<double>(mean), 1e-12);
    EXPECT_NEAR(s.two_sigma, oracle_two_sigma, 1e-12);
  }
}

TEST(Report, TableStyleFormat) {
  EXPECT_EQ(format_accuracy(0.9777, 0.0116), "97.77 % (+/- 1.16 %)");
  std::vector<double> folds;
  for (int i = 0; i < 5; ++i) {
    folds.push_back(0.9777 + 0.0055);
    folds.push_back(0.9777 - 0.0055);
  }
  EXPECT_EQ(format_accuracy(folds), "97.77 % (+/- 1.16 %)");
}

TEST(Report, JsonCarriesConfigAndSummary) {
  CrossValReport r;
  r.tags = {"N", "V"};
  r.fold_accuracies = {0.5, 1.0};
  r.mean = 0.75;
  r.two_sigma = 0.70710678118654757;
  nlohmann::json j = r;
  EXPECT_EQ(j["schema"], "embprobe.crossval/1");
  EXPECT_EQ(j["summary"], "75.00 % (+/- 70.71 %)");
  EXPECT_EQ(j["config"]["hidden_units"], 100);
  EXPECT_EQ(j["config"]["folds"], 10);
}

TEST(Crossvalidate, RelabeledDataApproachesMajorityFrequency) {
  const auto f = synth::pos_planted({}, 1);
  const Eigen::MatrixXd x = f.embeddings.vectors();
  const auto y = shuffled_labels(f.labels, 99);
  const auto report = crossvalidate(x, y, f.tags, ProbeConfig{});
  EXPECT_NEAR(report.mean, majority_frequency(y), 0.05) << report.summary();
}

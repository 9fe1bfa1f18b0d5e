#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <future>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "embprobe/embedding.hpp"
#include "embprobe/error.hpp"
#include "embprobe/lexicon.hpp"
#include "embprobe/rng.hpp"

namespace embprobe {

/// Hyperparameters of the probing classifier and its cross-validation.
/// Only the hidden width and fold count are fixed by the method; the rest
/// are plain defaults.
struct ProbeConfig {
  std::size_t hidden_units = 100;
  std::size_t folds = 10;
  std::size_t epochs = 50;
  std::size_t batch_size = 64;
  double learning_rate = 0.01;
  std::uint64_t seed = 1;
  std::size_t threads = 1;  // folds trained concurrently; results do not depend on it

  void validate() const {
    if (folds < 2) throw Error("folds must be at least 2");
    if (hidden_units < 1) throw Error("hidden_units must be at least 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw Error("learning_rate must be positive");
    }
    if (batch_size < 1) throw Error("batch_size must be at least 1");
    if (epochs < 1) throw Error("epochs must be at least 1");
  }
};

inline void to_json(nlohmann::json& j, const ProbeConfig& c) {
  j = {{"hidden_units", c.hidden_units}, {"folds", c.folds},
       {"epochs", c.epochs},             {"batch_size", c.batch_size},
       {"learning_rate", c.learning_rate}, {"seed", c.seed},
       {"activation", "relu"},           {"optimizer", "minibatch-sgd"},
       {"init", "uniform(+-1/sqrt(fan_in))"}};
}

/// Random partition of [0, n) into `folds` bins whose sizes differ by at
/// most one. Each bin is sorted.
inline std::vector<std::vector<std::size_t>> make_folds(std::size_t n, std::size_t folds,
                                                        std::uint64_t seed) {
  if (folds < 1) throw Error("folds must be at least 1");
  if (n < folds) {
    throw Error("cannot split " + std::to_string(n) + " samples into " + std::to_string(folds) +
                " folds");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(perm));
  std::vector<std::vector<std::size_t>> bins(folds);
  for (std::size_t i = 0; i < n; ++i) bins[i % folds].push_back(perm[i]);
  for (auto& b : bins) std::sort(b.begin(), b.end());
  return bins;
}

/// Input -> hidden (ReLU) -> softmax network.
struct MlpParams {
  Eigen::MatrixXd w1;  // H x D
  Eigen::VectorXd b1;  // H
  Eigen::MatrixXd w2;  // C x H
  Eigen::VectorXd b2;  // C

  std::size_t inputs() const { return static_cast<std::size_t>(w1.cols()); }
  std::size_t hidden() const { return static_cast<std::size_t>(w1.rows()); }
  std::size_t classes() const { return static_cast<std::size_t>(w2.rows()); }

  static MlpParams init(std::size_t inputs, std::size_t hidden, std::size_t classes, Rng& rng) {
    MlpParams p;
    const auto h = static_cast<Eigen::Index>(hidden);
    const auto d = static_cast<Eigen::Index>(inputs);
    const auto c = static_cast<Eigen::Index>(classes);
    const double a1 = 1.0 / std::sqrt(static_cast<double>(inputs));
    const double a2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    p.w1.resize(h, d);
    p.w2.resize(c, h);
    for (Eigen::Index i = 0; i < h; ++i)
      for (Eigen::Index j = 0; j < d; ++j) p.w1(i, j) = rng.uniform(-a1, a1);
    for (Eigen::Index i = 0; i < c; ++i)
      for (Eigen::Index j = 0; j < h; ++j) p.w2(i, j) = rng.uniform(-a2, a2);
    p.b1 = Eigen::VectorXd::Zero(h);
    p.b2 = Eigen::VectorXd::Zero(c);
    return p;
  }
};

/// Class probabilities, one row per input row.
inline Eigen::MatrixXd mlp_forward(const MlpParams& p, const Eigen::MatrixXd& x,
                                   Eigen::MatrixXd* hidden_out = nullptr) {
  Eigen::MatrixXd hidden = ((x * p.w1.transpose()).rowwise() + p.b1.transpose()).cwiseMax(0.0);
  Eigen::MatrixXd logits = (hidden * p.w2.transpose()).rowwise() + p.b2.transpose();
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double top = logits.row(r).maxCoeff();
    logits.row(r) = (logits.row(r).array() - top).exp();
    logits.row(r) /= logits.row(r).sum();
  }
  if (hidden_out) *hidden_out = std::move(hidden);
  return logits;
}

/// Mean cross-entropy of the batch and its gradient with respect to every
/// parameter.
inline double mlp_loss_grad(const MlpParams& p, const Eigen::MatrixXd& x,
                            std::span<const std::size_t> y, MlpParams* grad) {
  Eigen::MatrixXd hidden;
  Eigen::MatrixXd probs = mlp_forward(p, x, &hidden);
  const auto b = static_cast<double>(x.rows());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    loss -= std::log(std::max(probs(r, static_cast<Eigen::Index>(y[static_cast<std::size_t>(r)])),
                              1e-300));
  }
  loss /= b;
  if (grad == nullptr) return loss;

  Eigen::MatrixXd dlogits = probs;
  for (Eigen::Index r = 0; r < dlogits.rows(); ++r) {
    dlogits(r, static_cast<Eigen::Index>(y[static_cast<std::size_t>(r)])) -= 1.0;
  }
  dlogits /= b;
  grad->w2 = dlogits.transpose() * hidden;
  grad->b2 = dlogits.colwise().sum().transpose();
  Eigen::MatrixXd dhidden = dlogits * p.w2;
  dhidden = (hidden.array() > 0.0).select(dhidden, 0.0);
  grad->w1 = dhidden.transpose() * x;
  grad->b1 = dhidden.colwise().sum().transpose();
  return loss;
}

inline std::vector<std::size_t> mlp_predict(const MlpParams& p, const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd probs = mlp_forward(p, x);
  std::vector<std::size_t> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    Eigen::Index best = 0;
    probs.row(r).maxCoeff(&best);
    out[static_cast<std::size_t>(r)] = static_cast<std::size_t>(best);
  }
  return out;
}

struct TrainedMlp {
  MlpParams params;
  std::vector<double> epoch_loss;  // mean training loss per epoch
  double final_loss() const { return epoch_loss.empty() ? 0.0 : epoch_loss.back(); }
};

/// Mini-batch SGD on cross-entropy. `classes` fixes the output width so that
/// classes missing from this training set still get a (never-trained) logit.
inline TrainedMlp train_mlp(const Eigen::MatrixXd& x, std::span<const std::size_t> y,
                            std::size_t classes, const ProbeConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(x.rows());
  if (n == 0 || y.size() != n) throw Error("train_mlp: need one label per row");
  if (!x.allFinite()) throw Error("train_mlp: non-finite input");
  for (auto label : y) {
    if (label >= classes) throw Error("train_mlp: label out of range");
  }

  Rng rng(seed);
  TrainedMlp out{MlpParams::init(static_cast<std::size_t>(x.cols()), cfg.hidden_units, classes,
                                 rng),
                 {}};
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  MlpParams grad;
  Eigen::MatrixXd batch;
  std::vector<std::size_t> batch_y;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      batch.resize(static_cast<Eigen::Index>(stop - start), x.cols());
      batch_y.resize(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        batch.row(static_cast<Eigen::Index>(i - start)) = x.row(static_cast<Eigen::Index>(order[i]));
        batch_y[i - start] = y[order[i]];
      }
      const double loss = mlp_loss_grad(out.params, batch, batch_y, &grad);
      if (!std::isfinite(loss)) {
        throw Error("train_mlp: loss diverged at epoch " + std::to_string(epoch));
      }
      total += loss * static_cast<double>(stop - start);
      out.params.w1 -= cfg.learning_rate * grad.w1;
      out.params.b1 -= cfg.learning_rate * grad.b1;
      out.params.w2 -= cfg.learning_rate * grad.w2;
      out.params.b2 -= cfg.learning_rate * grad.b2;
    }
    out.epoch_loss.push_back(total / static_cast<double>(n));
  }
  return out;
}

struct MeanSpread {
  double mean = 0.0;
  double two_sigma = 0.0;  // twice the sample standard deviation
};

inline MeanSpread mean_two_sigma(std::span<const double> values) {
  if (values.empty()) throw Error("mean of an empty sample");
  MeanSpread out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.two_sigma = 2.0 * std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

/// "97.77 % (+/- 1.16 %)"
inline std::string format_accuracy(double mean, double two_sigma) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f %% (+/- %.2f %%)", 100.0 * mean, 100.0 * two_sigma);
  return buf;
}

inline std::string format_accuracy(std::span<const double> fold_accuracies) {
  const auto s = mean_two_sigma(fold_accuracies);
  return format_accuracy(s.mean, s.two_sigma);
}

struct CrossValReport {
  std::vector<std::string> tags;
  std::vector<double> fold_accuracies;
  std::vector<std::size_t> fold_sizes;
  std::vector<double> final_losses;
  double mean = 0.0;
  double two_sigma = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
  ProbeConfig config;

  std::string summary() const { return format_accuracy(mean, two_sigma); }
};

inline void to_json(nlohmann::json& j, const CrossValReport& r) {
  j = {{"schema", "embprobe.crossval/1"},
       {"tags", r.tags},
       {"fold_accuracies", r.fold_accuracies},
       {"fold_sizes", r.fold_sizes},
       {"final_training_losses", r.final_losses},
       {"mean", r.mean},
       {"two_sigma", r.two_sigma},
       {"summary", r.summary()},
       {"confusion", r.confusion},
       {"config", r.config},
       {"note", "optimizer, epochs, learning rate and initialization are defaults, not "
                "values fixed by the probing method"}};
}

/// k-fold cross-validation of the probe on labelled rows. Every row is
/// evaluated exactly once. Labels index into `tags`.
inline CrossValReport crossvalidate(const Eigen::MatrixXd& x, std::span<const std::size_t> labels,
                                    std::vector<std::string> tags, const ProbeConfig& cfg) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(x.rows());
  if (labels.size() != n) throw Error("crossvalidate: need one label per row");
  if (n < cfg.folds) {
    throw Error("crossvalidate: " + std::to_string(n) + " aligned tokens but " +
                std::to_string(cfg.folds) + " folds");
  }
  const std::size_t classes = tags.size();
  std::vector<std::size_t> class_size(classes, 0);
  for (auto l : labels) {
    if (l >= classes) throw Error("crossvalidate: label out of range");
    ++class_size[l];
  }
  if (std::count_if(class_size.begin(), class_size.end(), [](auto c) { return c > 0; }) < 2) {
    throw Error("crossvalidate: need at least 2 classes");
  }

  const auto bins = make_folds(n, cfg.folds, cfg.seed);

  struct FoldResult {
    double accuracy = 0.0;
    double final_loss = 0.0;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (true, predicted)
  };

  auto run_fold = [&](std::size_t f) {
    std::vector<bool> held(n, false);
    for (auto i : bins[f]) held[i] = true;
    const std::size_t n_train = n - bins[f].size();
    Eigen::MatrixXd xt(static_cast<Eigen::Index>(n_train), x.cols());
    std::vector<std::size_t> yt;
    yt.reserve(n_train);
    for (std::size_t i = 0, r = 0; i < n; ++i) {
      if (held[i]) continue;
      xt.row(static_cast<Eigen::Index>(r++)) = x.row(static_cast<Eigen::Index>(i));
      yt.push_back(labels[i]);
    }
    auto model = train_mlp(xt, yt, classes, cfg, derive_seed(cfg.seed, f + 1));

    Eigen::MatrixXd xe(static_cast<Eigen::Index>(bins[f].size()), x.cols());
    for (std::size_t r = 0; r < bins[f].size(); ++r) {
      xe.row(static_cast<Eigen::Index>(r)) = x.row(static_cast<Eigen::Index>(bins[f][r]));
    }
    const auto pred = mlp_predict(model.params, xe);
    FoldResult res;
    std::size_t correct = 0;
    for (std::size_t r = 0; r < pred.size(); ++r) {
      const auto truth = labels[bins[f][r]];
      correct += pred[r] == truth ? 1 : 0;
      res.pairs.emplace_back(truth, pred[r]);
    }
    res.accuracy = static_cast<double>(correct) / static_cast<double>(pred.size());
    res.final_loss = model.final_loss();
    return res;
  };

  std::vector<FoldResult> results(cfg.folds);
  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.threads, cfg.folds));
  if (workers == 1) {
    for (std::size_t f = 0; f < cfg.folds; ++f) results[f] = run_fold(f);
  } else {
    for (std::size_t start = 0; start < cfg.folds; start += workers) {
      std::vector<std::future<FoldResult>> pending;
      for (std::size_t f = start; f < std::min(cfg.folds, start + workers); ++f) {
        pending.push_back(std::async(std::launch::async, run_fold, f));
      }
      for (std::size_t i = 0; i < pending.size(); ++i) results[start + i] = pending[i].get();
    }
  }

  CrossValReport report;
  report.tags = std::move(tags);
  report.config = cfg;
  report.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t f = 0; f < cfg.folds; ++f) {
    report.fold_accuracies.push_back(results[f].accuracy);
    report.fold_sizes.push_back(bins[f].size());
    report.final_losses.push_back(results[f].final_loss);
    for (auto [t, p] : results[f].pairs) ++report.confusion[t][p];
  }
  const auto stats = mean_two_sigma(report.fold_accuracies);
  report.mean = stats.mean;
  report.two_sigma = stats.two_sigma;
  return report;
}

/// Aligns `m` with a univalent lexicon, then cross-validates the probe.
inline CrossValReport crossvalidate(const EmbeddingMatrix& m, const Lexicon& lex,
                                    const ProbeConfig& cfg) {
  auto aligned = align(m, lex);
  const Eigen::MatrixXd x = aligned.embeddings.vectors();
  return crossvalidate(x, aligned.labels, aligned.tags, cfg);
}

/// Labels permuted uniformly at random; the class sizes are unchanged.
inline std::vector<std::size_t> shuffled_labels(std::span<const std::size_t> labels,
                                                std::uint64_t seed) {
  std::vector<std::size_t> out(labels.begin(), labels.end());
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(out));
  return out;
}

inline double majority_frequency(std::span<const std::size_t> labels) {
  if (labels.empty()) return 0.0;
  std::vector<std::size_t> counts(*std::max_element(labels.begin(), labels.end()) + 1, 0);
  for (auto l : labels) ++counts[l];
  return static_cast<double>(*std::max_element(counts.begin(), counts.end())) /
         static_cast<double>(labels.size());
}

}  // namespace embprobe

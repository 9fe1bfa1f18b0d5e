#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "embprobe/embedding.hpp"
#include "embprobe/error.hpp"
#include "embprobe/rng.hpp"

namespace embprobe {

enum class WindowSemantics {
  Side,  // window = maximum offset on each side
  Span,  // window = total span, i.e. offset (window - 1) / 2
};

inline WindowSemantics parse_window_semantics(std::string_view s) {
  if (s == "side") return WindowSemantics::Side;
  if (s == "span") return WindowSemantics::Span;
  throw Error("unknown window semantics '" + std::string(s) + "' (expected side|span)");
}

struct SgnsConfig {
  std::size_t dim = 512;
  std::size_t window = 11;
  WindowSemantics window_semantics = WindowSemantics::Side;
  std::size_t negatives = 10;
  std::size_t epochs = 5;
  double learning_rate = 0.025;  // decays linearly to 1e-4 of this value
  std::size_t min_count = 5;
  double subsample_threshold = 1e-4;  // 0 disables subsampling
  double negative_power = 0.75;
  std::uint64_t seed = 1;
  bool deterministic = true;
  std::size_t threads = 1;  // used only when deterministic is false

  std::size_t max_offset() const {
    return window_semantics == WindowSemantics::Side ? window
                                                     : std::max<std::size_t>(1, (window - 1) / 2);
  }

  void validate() const {
    if (dim < 1) throw Error("dim must be at least 1");
    if (window < 1) throw Error("window must be at least 1");
    if (negatives < 1) throw Error("negatives must be at least 1");
    if (min_count < 1) throw Error("min_count must be at least 1");
    if (epochs < 1) throw Error("epochs must be at least 1");
    if (!(learning_rate > 0.0)) throw Error("learning_rate must be positive");
    if (subsample_threshold < 0.0) throw Error("subsample_threshold must be non-negative");
  }
};

/// Tokenized sentences over a frequency-filtered vocabulary.
struct Corpus {
  std::vector<std::string> vocab;                // sorted by count desc, then bytes
  std::vector<std::uint64_t> counts;             // parallel to vocab
  std::vector<std::vector<std::uint32_t>> sentences;
  std::uint64_t total_tokens = 0;                // tokens kept after min_count

  std::size_t size() const noexcept { return vocab.size(); }
};

/// One sentence per line, tokens separated by spaces or tabs.
inline Corpus build_vocab(std::istream& in, std::size_t min_count) {
  if (min_count < 1) throw Error("min_count must be at least 1");
  std::vector<std::vector<std::string>> raw;
  std::unordered_map<std::string, std::uint64_t> freq;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::vector<std::string> words;
    std::string w;
    while (ss >> w) {
      ++freq[w];
      words.push_back(std::move(w));
    }
    if (!words.empty()) raw.push_back(std::move(words));
  }
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (auto& [w, c] : freq) {
    if (c >= min_count) kept.emplace_back(w, c);
  }
  if (kept.empty()) throw Error("corpus is empty after applying min_count");
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });

  Corpus corpus;
  std::unordered_map<std::string, std::uint32_t> id;
  for (auto& [w, c] : kept) {
    id.emplace(w, static_cast<std::uint32_t>(corpus.vocab.size()));
    corpus.vocab.push_back(w);
    corpus.counts.push_back(c);
    corpus.total_tokens += c;
  }
  for (const auto& words : raw) {
    std::vector<std::uint32_t> ids;
    for (const auto& w : words) {
      auto it = id.find(w);
      if (it != id.end()) ids.push_back(it->second);
    }
    if (!ids.empty()) corpus.sentences.push_back(std::move(ids));
  }
  return corpus;
}

inline Corpus build_vocab(const std::filesystem::path& path, std::size_t min_count) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus '" + path.string() + "'");
  return build_vocab(in, min_count);
}

/// Draws token ids with probability proportional to count^power.
class NegativeSampler {
 public:
  NegativeSampler(std::span<const std::uint64_t> counts, double power = 0.75) {
    if (counts.empty()) throw Error("negative sampler needs a non-empty vocabulary");
    probs_.reserve(counts.size());
    double total = 0.0;
    for (auto c : counts) {
      const double w = std::pow(static_cast<double>(c), power);
      probs_.push_back(w);
      total += w;
    }
    if (!(total > 0.0)) throw Error("negative sampler: all counts are zero");
    double acc = 0.0;
    cdf_.reserve(counts.size());
    for (auto& p : probs_) {
      p /= total;
      acc += p;
      cdf_.push_back(acc);
    }
    cdf_.back() = 1.0;
  }

  std::uint32_t sample(Rng& rng) const {
    const double u = rng.uniform();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) --it;
    return static_cast<std::uint32_t>(it - cdf_.begin());
  }

  double probability(std::size_t id) const { return probs_.at(id); }
  std::size_t size() const noexcept { return probs_.size(); }

 private:
  std::vector<double> probs_;
  std::vector<double> cdf_;
};

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

/// Loss of one (center, context, negatives) tuple:
///   -log s(v.u_ctx) - sum_n log s(-v.u_n)
/// and its gradient with respect to every vector involved.
struct SgnsGradient {
  double loss = 0.0;
  Vector d_center;
  Vector d_context;
  std::vector<Vector> d_negatives;
};

inline double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

inline SgnsGradient sgns_loss_grad(const Vector& center, const Vector& context,
                                   std::span<const Vector> negatives) {
  SgnsGradient g;
  const double fp = center.dot(context);
  g.loss = -log_sigmoid(fp);
  const double cp = sigmoid(fp) - 1.0;
  g.d_center = cp * context;
  g.d_context = cp * center;
  for (const auto& u : negatives) {
    const double fn = center.dot(u);
    g.loss -= log_sigmoid(-fn);
    const double cn = sigmoid(fn);
    g.d_center += cn * u;
    g.d_negatives.push_back(cn * center);
  }
  return g;
}

struct SgnsResult {
  EmbeddingMatrix embeddings;      // input (center) vectors
  std::vector<double> epoch_loss;  // mean tuple loss per epoch
};

namespace detail {

struct SgnsState {
  RowMatrix input;
  RowMatrix output;
};

// One SGD step on a (center, context, negatives) tuple; returns its loss.
inline double sgns_step(SgnsState& s, std::uint32_t center, std::uint32_t context,
                        const NegativeSampler& sampler, std::size_t negatives, double lr,
                        Rng& rng, Vector& accum) {
  const auto dim = s.input.cols();
  auto v = s.input.row(center);
  accum.setZero(dim);
  double loss = 0.0;
  for (std::size_t d = 0; d <= negatives; ++d) {
    std::uint32_t target = context;
    double label = 1.0;
    if (d > 0) {
      label = 0.0;
      int tries = 0;
      do {
        target = sampler.sample(rng);
      } while (target == context && ++tries < 64);
      if (target == context) continue;
    }
    auto u = s.output.row(target);
    const double f = v.dot(u);
    loss -= label > 0.0 ? log_sigmoid(f) : log_sigmoid(-f);
    const double g = (label - sigmoid(f)) * lr;
    accum.noalias() += g * u.transpose();
    u.noalias() += g * v;
  }
  v.noalias() += accum.transpose();
  return loss;
}

}  // namespace detail

/// Skip-gram with negative sampling. Each center token predicts every
/// context token inside a window whose radius is drawn uniformly from
/// [1, max_offset] per position; windows never cross sentence boundaries.
inline SgnsResult train_sgns(const Corpus& corpus, const SgnsConfig& cfg) {
  cfg.validate();
  const std::size_t vsize = corpus.size();
  if (vsize < 2) throw Error("SGNS needs a vocabulary of at least 2 tokens");

  Rng init_rng(derive_seed(cfg.seed, 0));
  detail::SgnsState state;
  const auto v = static_cast<Eigen::Index>(vsize);
  const auto dim = static_cast<Eigen::Index>(cfg.dim);
  state.input.resize(v, dim);
  for (Eigen::Index i = 0; i < v; ++i) {
    for (Eigen::Index j = 0; j < dim; ++j) {
      state.input(i, j) = (init_rng.uniform() - 0.5) / static_cast<double>(cfg.dim);
    }
  }
  state.output = RowMatrix::Zero(v, dim);

  const NegativeSampler sampler(corpus.counts, cfg.negative_power);
  std::vector<double> keep_prob(vsize, 1.0);
  if (cfg.subsample_threshold > 0.0) {
    const double t = cfg.subsample_threshold * static_cast<double>(corpus.total_tokens);
    for (std::size_t i = 0; i < vsize; ++i) {
      const double c = static_cast<double>(corpus.counts[i]);
      keep_prob[i] = std::min(1.0, (std::sqrt(c / t) + 1.0) * t / c);
    }
  }

  const double total_work = static_cast<double>(cfg.epochs) *
                            static_cast<double>(corpus.total_tokens) + 1.0;
  const std::size_t max_offset = cfg.max_offset();
  std::atomic<std::uint64_t> processed{0};

  // Processes sentences [index % stride == lane] of one epoch.
  auto run_lane = [&](std::size_t epoch, std::size_t lane, std::size_t stride, double& loss_sum,
                      std::uint64_t& tuples) {
    Rng rng(derive_seed(cfg.seed, (epoch + 1) * 1000003ULL + lane));
    Vector accum(dim);
    std::vector<std::uint32_t> kept;
    for (std::size_t s = lane; s < corpus.sentences.size(); s += stride) {
      const auto& sentence = corpus.sentences[s];
      kept.clear();
      for (auto id : sentence) {
        if (keep_prob[id] >= 1.0 || rng.uniform() < keep_prob[id]) kept.push_back(id);
      }
      const double lr = cfg.learning_rate *
                        std::max(1e-4, 1.0 - static_cast<double>(processed.load()) / total_work);
      for (std::size_t i = 0; i < kept.size(); ++i) {
        const std::size_t radius = max_offset - static_cast<std::size_t>(rng.below(max_offset));
        const std::size_t lo = i >= radius ? i - radius : 0;
        const std::size_t hi = std::min(kept.size() - 1, i + radius);
        for (std::size_t j = lo; j <= hi; ++j) {
          if (j == i) continue;
          loss_sum += detail::sgns_step(state, kept[i], kept[j], sampler, cfg.negatives, lr, rng,
                                        accum);
          ++tuples;
        }
      }
      processed.fetch_add(sentence.size());
      if (!std::isfinite(loss_sum) || !state.input.row(kept.empty() ? 0 : kept[0]).allFinite()) {
        throw Error("SGNS diverged at epoch " + std::to_string(epoch + 1) + ", sentence " +
                    std::to_string(s + 1));
      }
    }
  };

  std::vector<double> epoch_loss;
  const std::size_t workers = cfg.deterministic ? 1 : std::max<std::size_t>(1, cfg.threads);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<double> loss(workers, 0.0);
    std::vector<std::uint64_t> tuples(workers, 0);
    if (workers == 1) {
      run_lane(epoch, 0, 1, loss[0], tuples[0]);
    } else {
      // Lock-free shared updates; results depend on thread interleaving.
      std::vector<std::thread> pool;
      std::vector<std::exception_ptr> errors(workers);
      for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
          try {
            run_lane(epoch, w, workers, loss[w], tuples[w]);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      for (auto& t : pool) t.join();
      for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
    }
    double l = 0.0;
    std::uint64_t c = 0;
    for (std::size_t w = 0; w < workers; ++w) {
      l += loss[w];
      c += tuples[w];
    }
    epoch_loss.push_back(c ? l / static_cast<double>(c) : 0.0);
  }
  if (!state.input.allFinite()) throw Error("SGNS produced non-finite vectors");

  std::ostringstream tag;
  tag << "sgns dim=" << cfg.dim << " window=" << cfg.window << " semantics="
      << (cfg.window_semantics == WindowSemantics::Side ? "side" : "span")
      << " negatives=" << cfg.negatives << " epochs=" << cfg.epochs << " seed=" << cfg.seed;
  return {EmbeddingMatrix(corpus.vocab, std::move(state.input), tag.str()),
          std::move(epoch_loss)};
}

}  // namespace embprobe

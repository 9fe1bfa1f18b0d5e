#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "embprobe/embedding.hpp"
#include "embprobe/error.hpp"

namespace embprobe {

// Czech POS codes (first position of a positional morphological tag).
inline constexpr std::array<std::string_view, 10> kCzechPosTags = {
    "A", "C", "D", "I", "J", "N", "P", "V", "R", "T"};

/// Token -> set of category tags. A token with more than one tag is
/// multivalent. Tags compare by exact bytes.
class Lexicon {
 public:
  void add(const std::string& token, const std::string& tag) {
    if (token.empty()) throw Error("lexicon token must not be empty");
    if (tag.empty()) throw Error("lexicon tag must not be empty");
    auto [it, inserted] = entries_.try_emplace(token);
    if (inserted) order_.push_back(token);
    auto& tags = it->second;
    if (std::find(tags.begin(), tags.end(), tag) == tags.end()) tags.push_back(tag);
    if (std::find(tagset_.begin(), tagset_.end(), tag) == tagset_.end()) tagset_.push_back(tag);
  }

  /// Appends `tag` to the tagset without adding an entry.
  void declare_tag(const std::string& tag) {
    if (tag.empty()) throw Error("lexicon tag must not be empty");
    if (std::find(tagset_.begin(), tagset_.end(), tag) == tagset_.end()) tagset_.push_back(tag);
  }

  /// Tags of `token` in first-seen order, or nullptr when absent.
  const std::vector<std::string>* tags_of(std::string_view token) const {
    auto it = entries_.find(std::string(token));
    return it == entries_.end() ? nullptr : &it->second;
  }

  bool contains(std::string_view token) const { return tags_of(token) != nullptr; }

  bool multivalent(std::string_view token) const {
    const auto* tags = tags_of(token);
    return tags != nullptr && tags->size() > 1;
  }

  /// Tokens in first-seen order.
  const std::vector<std::string>& tokens() const noexcept { return order_; }
  const std::vector<std::string>& tagset() const noexcept { return tagset_; }
  std::size_t size() const noexcept { return order_.size(); }
  bool empty() const noexcept { return order_.empty(); }

  std::size_t multivalent_count() const {
    return static_cast<std::size_t>(std::count_if(
        order_.begin(), order_.end(), [this](const auto& t) { return multivalent(t); }));
  }

 private:
  std::unordered_map<std::string, std::vector<std::string>> entries_;
  std::vector<std::string> order_;
  std::vector<std::string> tagset_;
};

/// UTF-8 TSV, one "token<TAB>tag" pair per line. Repeated tokens accumulate tags.
inline Lexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open lexicon '" + path.string() + "'");
  const std::string source = path.string();
  Lexicon lex;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw ParseError(source, lineno, "expected exactly 2 tab-separated fields");
    }
    std::string token = line.substr(0, tab);
    std::string tag = line.substr(tab + 1);
    if (token.empty()) throw ParseError(source, lineno, "empty token");
    if (tag.empty()) throw ParseError(source, lineno, "empty tag");
    lex.add(token, tag);
  }
  return lex;
}

inline void write_lexicon(const Lexicon& lex, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  for (const auto& token : lex.tokens()) {
    for (const auto& tag : *lex.tags_of(token)) out << token << '\t' << tag << '\n';
  }
  if (!out) throw Error("I/O failure writing '" + path.string() + "'");
}

/// Drops every multivalent form. Tags left without entries leave the tagset.
inline Lexicon filter_univalent(const Lexicon& lex) {
  std::unordered_set<std::string> used;
  for (const auto& token : lex.tokens()) {
    const auto& tags = *lex.tags_of(token);
    if (tags.size() == 1) used.insert(tags.front());
  }
  Lexicon out;
  for (const auto& tag : lex.tagset()) {
    if (used.contains(tag)) out.declare_tag(tag);
  }
  for (const auto& token : lex.tokens()) {
    const auto& tags = *lex.tags_of(token);
    if (tags.size() == 1) out.add(token, tags.front());
  }
  return out;
}

struct IndicatorVector {
  std::string tag;
  Eigen::VectorXd values;  // 0/1 per aligned vocabulary position
  std::size_t positives = 0;
  bool constant = false;   // all ones; useless for correlation
};

/// One indicator per tag with at least one positive over `vocab`, in tagset
/// order. Every vocab token must be in the lexicon. Unless
/// `allow_multivalent` is set, each token must also carry exactly one tag;
/// with it, a multivalent token is positive in every one of its tags.
inline std::vector<IndicatorVector> indicators(const Lexicon& lex,
                                               std::span<const std::string> vocab,
                                               bool allow_multivalent = false) {
  const auto& tagset = lex.tagset();
  std::unordered_map<std::string, std::size_t> tag_index;
  for (std::size_t t = 0; t < tagset.size(); ++t) tag_index.emplace(tagset[t], t);

  std::vector<IndicatorVector> all(tagset.size());
  for (std::size_t t = 0; t < tagset.size(); ++t) {
    all[t].tag = tagset[t];
    all[t].values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(vocab.size()));
  }
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const auto* tags = lex.tags_of(vocab[i]);
    if (tags == nullptr) {
      throw Error("token '" + vocab[i] + "' is not in the lexicon; intersect vocabularies first");
    }
    if (tags->size() != 1 && !allow_multivalent) {
      throw Error("token '" + vocab[i] + "' is multivalent; filter the lexicon first");
    }
    for (const auto& tag : *tags) {
      auto& ind = all[tag_index.at(tag)];
      ind.values[static_cast<Eigen::Index>(i)] = 1.0;
      ++ind.positives;
    }
  }
  std::vector<IndicatorVector> out;
  for (auto& ind : all) {
    if (ind.positives == 0) continue;
    ind.constant = ind.positives == vocab.size();
    out.push_back(std::move(ind));
  }
  return out;
}

/// Embedding rows restricted to lexicon tokens, with a class label per row.
struct LabeledEmbeddings {
  EmbeddingMatrix embeddings;
  std::vector<std::string> tags;    // tags present, in tagset order
  std::vector<std::size_t> labels;  // index into `tags`, one per row
};

/// Tokens of `vocab` present in the lexicon, in `vocab` order.
inline std::vector<std::string> shared_tokens(std::span<const std::string> vocab,
                                              const Lexicon& lex) {
  std::vector<std::string> out;
  for (const auto& t : vocab) {
    if (lex.contains(t)) out.push_back(t);
  }
  return out;
}

/// Intersects `m` with a univalent lexicon and labels each surviving row.
inline LabeledEmbeddings align(const EmbeddingMatrix& m, const Lexicon& lex) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto* tags = lex.tags_of(m.tokens()[i]);
    if (tags == nullptr) continue;
    if (tags->size() != 1) {
      throw Error("token '" + m.tokens()[i] + "' is multivalent; filter the lexicon first");
    }
    rows.push_back(i);
  }
  if (rows.empty()) throw Error("no embedding token appears in the lexicon");
  auto sub = m.select(rows);

  std::vector<bool> present(lex.tagset().size(), false);
  std::unordered_map<std::string, std::size_t> tag_index;
  for (std::size_t t = 0; t < lex.tagset().size(); ++t) tag_index.emplace(lex.tagset()[t], t);
  for (const auto& token : sub.tokens()) present[tag_index.at(lex.tags_of(token)->front())] = true;

  std::vector<std::string> tags;
  std::vector<std::size_t> remap(present.size(), 0);
  for (std::size_t t = 0; t < present.size(); ++t) {
    if (!present[t]) continue;
    remap[t] = tags.size();
    tags.push_back(lex.tagset()[t]);
  }
  std::vector<std::size_t> labels;
  labels.reserve(sub.size());
  for (const auto& token : sub.tokens()) {
    labels.push_back(remap[tag_index.at(lex.tags_of(token)->front())]);
  }
  return {std::move(sub), std::move(tags), std::move(labels)};
}

}  // namespace embprobe

#include <gtest/gtest.h>

#include <map>

#include "embprobe/lexicon.hpp"
#include "embprobe/rng.hpp"
#include "support.hpp"

using namespace embprobe;
using testing_support::ScratchDir;
using testing_support::write_file;

namespace {

// 1000 tokens, Czech tag codes, roughly a fifth of them multivalent.
Lexicon fuzz_lexicon(std::uint64_t seed) {
  Rng rng(seed);
  Lexicon lex;
  for (int i = 0; i < 1000; ++i) {
    const std::string token = "f" + std::to_string(i);
    const std::size_t ntags = rng.uniform() < 0.2 ? 2 + rng.below(2) : 1;
    for (std::size_t k = 0; k < ntags; ++k) {
      lex.add(token, std::string(kCzechPosTags[rng.below(kCzechPosTags.size())]));
    }
  }
  return lex;
}

}  // namespace

TEST(LoadLexicon, ParsesPairs) {
  ScratchDir dir("lex");
  write_file(dir / "l.tsv", "pes\tN\nběžet\tV\n");
  const auto lex = load_lexicon(dir / "l.tsv");
  EXPECT_EQ(lex.size(), 2u);
  EXPECT_EQ(*lex.tags_of("pes"), std::vector<std::string>{"N"});
  EXPECT_EQ(*lex.tags_of("běžet"), std::vector<std::string>{"V"});
  EXPECT_FALSE(lex.multivalent("pes"));
}

TEST(LoadLexicon, AccumulatesTags) {
  ScratchDir dir("lex");
  write_file(dir / "l.tsv", "stát\tN\nstát\tV\n");
  const auto lex = load_lexicon(dir / "l.tsv");
  EXPECT_EQ(lex.size(), 1u);
  EXPECT_EQ(*lex.tags_of("stát"), (std::vector<std::string>{"N", "V"}));
  EXPECT_TRUE(lex.multivalent("stát"));
  EXPECT_EQ(lex.multivalent_count(), 1u);
}

TEST(LoadLexicon, ErrorsCarryLineNumbers) {
  ScratchDir dir("lex");
  write_file(dir / "l.tsv", "pes\tN\nx\n");
  try {
    load_lexicon(dir / "l.tsv");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
  write_file(dir / "e.tsv", "pes\t\n");
  EXPECT_THROW(load_lexicon(dir / "e.tsv"), ParseError);
  write_file(dir / "t.tsv", "a\tb\tc\n");
  EXPECT_THROW(load_lexicon(dir / "t.tsv"), ParseError);
}

TEST(LoadLexicon, TagsAreCaseSensitive) {
  Lexicon lex;
  lex.add("a", "N");
  lex.add("a", "n");
  EXPECT_TRUE(lex.multivalent("a"));
  EXPECT_EQ(lex.tagset().size(), 2u);
}

TEST(Lexicon, WriteThenLoadPreservesEntries) {
  ScratchDir dir("lex");
  const auto lex = fuzz_lexicon(3);
  write_lexicon(lex, dir / "l.tsv");
  const auto back = load_lexicon(dir / "l.tsv");
  ASSERT_EQ(back.tokens(), lex.tokens());
  for (const auto& t : lex.tokens()) EXPECT_EQ(*back.tags_of(t), *lex.tags_of(t));
}

TEST(FilterUnivalent, Examples) {
  Lexicon lex;
  lex.add("pes", "N");
  lex.add("stát", "N");
  lex.add("stát", "V");
  const auto f = filter_univalent(lex);
  EXPECT_EQ(f.tokens(), std::vector<std::string>{"pes"});
  EXPECT_EQ(f.tagset(), std::vector<std::string>{"N"});

  Lexicon uni;
  uni.add("a", "N");
  uni.add("b", "V");
  const auto same = filter_univalent(uni);
  EXPECT_EQ(same.tokens(), uni.tokens());
  EXPECT_EQ(same.tagset(), uni.tagset());

  Lexicon multi;
  multi.add("a", "N");
  multi.add("a", "V");
  EXPECT_TRUE(filter_univalent(multi).empty());
}

TEST(FilterUnivalent, Idempotent) {
  const auto once = filter_univalent(fuzz_lexicon(7));
  const auto twice = filter_univalent(once);
  EXPECT_EQ(once.tokens(), twice.tokens());
  EXPECT_EQ(once.tagset(), twice.tagset());
  EXPECT_EQ(once.multivalent_count(), 0u);
}

TEST(Indicators, Definition) {
  Lexicon lex;
  lex.add("pes", "N");
  lex.add("běžet", "V");
  lex.add("a", "J");
  const std::vector<std::string> vocab = {"pes", "běžet", "a"};
  const auto inds = indicators(lex, vocab);
  ASSERT_EQ(inds.size(), 3u);
  EXPECT_EQ(inds[0].tag, "N");
  EXPECT_EQ(inds[0].values, Eigen::Vector3d(1, 0, 0));
  EXPECT_EQ(inds[1].values, Eigen::Vector3d(0, 1, 0));
  EXPECT_EQ(inds[2].values, Eigen::Vector3d(0, 0, 1));
  for (const auto& i : inds) {
    EXPECT_EQ(i.positives, 1u);
    EXPECT_FALSE(i.constant);
  }
}

TEST(Indicators, SingleTagIsConstant) {
  Lexicon lex;
  lex.add("a", "N");
  lex.add("b", "N");
  const std::vector<std::string> vocab = {"a", "b"};
  const auto inds = indicators(lex, vocab);
  ASSERT_EQ(inds.size(), 1u);
  EXPECT_TRUE(inds[0].constant);
  EXPECT_EQ(inds[0].values, Eigen::Vector2d(1, 1));
}

TEST(Indicators, RejectsUnknownAndMultivalentTokens) {
  Lexicon lex;
  lex.add("a", "N");
  lex.add("s", "N");
  lex.add("s", "V");
  const std::vector<std::string> unknown = {"a", "zz"};
  EXPECT_THROW(indicators(lex, unknown), Error);
  const std::vector<std::string> multi = {"a", "s"};
  EXPECT_THROW(indicators(lex, multi), Error);
  const auto kept = indicators(lex, multi, true);
  ASSERT_EQ(kept.size(), 2u);
  EXPECT_EQ(kept[0].values, Eigen::Vector2d(1, 1));
  EXPECT_EQ(kept[1].values, Eigen::Vector2d(0, 1));
}

TEST(Indicators, PartitionAndPositivesMatchDirectScan) {
  const auto lex = filter_univalent(fuzz_lexicon(11));
  const auto vocab = lex.tokens();
  const auto inds = indicators(lex, vocab);

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(vocab.size()));
  for (const auto& ind : inds) {
    EXPECT_TRUE((ind.values.array() == 0.0 || ind.values.array() == 1.0).all());
    EXPECT_EQ(static_cast<double>(ind.positives), ind.values.sum());
    sum += ind.values;
  }
  EXPECT_TRUE((sum.array() == 1.0).all());

  // Independent count straight from the lexicon entries.
  std::map<std::string, std::size_t> oracle;
  for (const auto& t : vocab) ++oracle[lex.tags_of(t)->front()];
  ASSERT_EQ(inds.size(), oracle.size());
  for (const auto& ind : inds) EXPECT_EQ(ind.positives, oracle.at(ind.tag)) << ind.tag;
}

TEST(Indicators, PositivesInvariantUnderVocabPermutation) {
  const auto lex = filter_univalent(fuzz_lexicon(13));
  auto vocab = lex.tokens();
  const auto before = indicators(lex, vocab);
  Rng rng(2);
  rng.shuffle(std::span<std::string>(vocab));
  const auto after = indicators(lex, vocab);
  ASSERT_EQ(before.size(), after.size());
  for (std::size_t t = 0; t < before.size(); ++t) {
    EXPECT_EQ(before[t].tag, after[t].tag);
    EXPECT_EQ(before[t].positives, after[t].positives);
  }
}

TEST(Align, LabelsMatchLexicon) {
  RowMatrix v(4, 2);
  v << 1, 2, 3, 4, 5, 6, 7, 8;
  const EmbeddingMatrix m({"a", "b", "c", "d"}, v);
  Lexicon lex;
  lex.add("d", "V");
  lex.add("b", "N");
  lex.add("x", "A");
  const auto al = align(m, lex);
  EXPECT_EQ(al.embeddings.tokens(), (std::vector<std::string>{"b", "d"}));
  EXPECT_EQ(al.tags, (std::vector<std::string>{"V", "N"}));
  EXPECT_EQ(al.labels, (std::vector<std::size_t>{1, 0}));
}

#include <gtest/gtest.h>

#include "embprobe/embedding.hpp"
#include "embprobe/lexicon.hpp"
#include "embprobe/synth.hpp"
#include "fixture_checks.hpp"
#include "support.hpp"

using namespace embprobe;
using testing_support::read_file;

TEST(Synth, SameSeedWritesIdenticalFiles) {
  testing_support::ScratchDir dir("synth");
  const nlohmann::json small = {{"tokens", 300}};
  synth::write_fixture(synth::generate("pos-planted", small, 5), dir / "a", 5);
  synth::write_fixture(synth::generate("pos-planted", small, 5), dir / "b", 5);
  synth::write_fixture(synth::generate("pos-planted", small, 6), dir / "c", 6);
  for (const char* name : {"emb.vec", "lexicon.tsv", "truth.tsv", "synth.json"}) {
    EXPECT_EQ(read_file(dir / "a" / name), read_file(dir / "b" / name)) << name;
  }
  EXPECT_NE(read_file(dir / "a" / "emb.vec"), read_file(dir / "c" / "emb.vec"));
}

TEST(Synth, PosPlantedDefaultsLoadBack) {
  testing_support::ScratchDir dir("synth");
  const auto f = synth::pos_planted({}, 1);
  EXPECT_EQ(f.embeddings.size(), 5000u);
  EXPECT_EQ(f.embeddings.dim(), 64u);
  EXPECT_EQ(f.tags.size(), 4u);
  synth::write_fixture(f, dir.path(), 1);

  const auto emb = load_embeddings(dir / "emb.vec");
  EXPECT_EQ(emb.tokens(), f.embeddings.tokens());
  EXPECT_TRUE((emb.vectors().array() == f.embeddings.vectors().array()).all());

  const auto lex = load_lexicon(dir / "lexicon.tsv");
  std::vector<std::size_t> per_class(4, 0);
  for (std::size_t i = 0; i < f.labels.size(); ++i) {
    ++per_class[f.labels[i]];
    const auto* tags = lex.tags_of(f.embeddings.tokens()[i]);
    ASSERT_NE(tags, nullptr);
    ASSERT_EQ(tags->size(), 1u);
    EXPECT_EQ(tags->front(), f.tags[f.labels[i]]);
  }
  for (auto n : per_class) EXPECT_GT(n, 0u);
}

TEST(Synth, OverridesAndUnknownKinds) {
  const auto f = synth::generate("two-cluster-noun", {{"tokens", 500}, {"dim", 8}}, 3);
  EXPECT_EQ(f.embeddings.size(), 500u);
  EXPECT_EQ(f.embeddings.dim(), 8u);
  EXPECT_EQ(f.params.at("tokens"), 500);
  EXPECT_THROW(synth::generate("no-such-kind", {}, 1), Error);
  EXPECT_THROW(synth::generate("pos-planted", {{"classes", 1}}, 1), Error);
  EXPECT_EQ(synth::kinds().size(), 3u);
}

TEST(Synth, TwoClusterSubcategoryIsNounOnly) {
  const auto f = synth::two_cluster_noun({}, 1);
  std::size_t minor = 0, nouns = 0;
  for (std::size_t i = 0; i < f.labels.size(); ++i) {
    if (f.subcategory[i]) {
      EXPECT_EQ(f.labels[i], 0u);
      ++minor;
    }
    nouns += f.labels[i] == 0;
  }
  EXPECT_GT(minor, 0u);
  EXPECT_LT(minor, nouns);
}

TEST(Synth, TriangleLatentsRespectTheConstraint) {
  const auto f = synth::valence_intensity_triangle({}, 1);
  for (std::size_t i = 0; i < f.valence.size(); ++i) {
    ASSERT_GE(f.intensity[i], 0.0);
    ASSERT_LE(std::abs(f.valence[i]), f.intensity[i]);
  }
}

TEST(Synth, TriangleSurvivesPca) {
  const auto f = synth::valence_intensity_triangle({}, 1);
  const auto r = fixture_checks::check_triangle(f);
  EXPECT_GE(r.fraction, 0.99);
}

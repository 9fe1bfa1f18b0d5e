#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "embprobe/report.hpp"
#include "fixture_checks.hpp"
#include "support.hpp"

using namespace embprobe;

namespace {

Projection projection_of(const RowMatrix& coords) {
  Projection p;
  for (Eigen::Index i = 0; i < coords.rows(); ++i) p.tokens.push_back("w" + std::to_string(i));
  p.coords = coords;
  return p;
}

IndicatorVector indicator(const std::string& tag, std::vector<double> values) {
  IndicatorVector ind;
  ind.tag = tag;
  ind.values = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  ind.positives = static_cast<std::size_t>(ind.values.sum());
  return ind;
}

Projection random_projection(std::size_t n, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  RowMatrix c(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < c.rows(); ++i)
    for (Eigen::Index j = 0; j < c.cols(); ++j) c(i, j) = std::clamp(rng.normal(), -5.0, 5.0);
  return projection_of(c);
}

}  // namespace

TEST(Histogram, HalfOpenBinsWithClosedLastBin) {
  RowMatrix c(3, 1);
  c << -1, 0, 1;
  const std::vector<IndicatorVector> inds = {indicator("N", {1, 1, 1})};
  const std::vector<std::size_t> classes = {0};
  const auto h = histogram(projection_of(c), inds, 0, 2, classes);
  EXPECT_EQ(h.edges, (std::vector<double>{-1, 0, 1}));
  EXPECT_EQ(h.counts[0], (std::vector<std::size_t>{1, 2}));
}

TEST(Histogram, SeparatedTagsLandInSeparateBins) {
  RowMatrix c(6, 1);
  c << -3, -2, -1, 1, 2, 3;
  const std::vector<IndicatorVector> inds = {indicator("neg", {1, 1, 1, 0, 0, 0}),
                                             indicator("pos", {0, 0, 0, 1, 1, 1})};
  const auto h = histogram(projection_of(c), inds, 0, 2);
  ASSERT_EQ(h.tags.size(), 2u);
  EXPECT_EQ(h.counts[0], (std::vector<std::size_t>{3, 0}));
  EXPECT_EQ(h.counts[1], (std::vector<std::size_t>{0, 3}));
}

TEST(Histogram, CountsAreConserved) {
  const auto proj = random_projection(500, 3, 1);
  Rng rng(2);
  std::vector<double> a(500), b(500), c(500);
  for (std::size_t i = 0; i < 500; ++i) {
    const auto k = rng.below(3);
    a[i] = k == 0;
    b[i] = k == 1;
    c[i] = k == 2;
  }
  const std::vector<IndicatorVector> inds = {indicator("a", a), indicator("b", b),
                                             indicator("c", c)};
  for (std::size_t comp = 0; comp < 3; ++comp) {
    const auto h = histogram(proj, inds, comp, 17);
    for (std::size_t t = 0; t < h.tags.size(); ++t) {
      std::size_t total = 0;
      for (auto n : h.counts[t]) total += n;
      const auto& ind = *std::find_if(inds.begin(), inds.end(),
                                      [&](const auto& i) { return i.tag == h.tags[t]; });
      EXPECT_EQ(total, ind.positives);
    }
  }
}

TEST(Histogram, TopFourClassesBySize) {
  const std::vector<IndicatorVector> inds = {
      indicator("a", {1, 0, 0, 0, 0, 0, 0, 0, 0, 0}), indicator("b", {0, 1, 1, 1, 0, 0, 0, 0, 0, 0}),
      indicator("c", {0, 0, 0, 0, 1, 1, 0, 0, 0, 0}), indicator("d", {0, 0, 0, 0, 0, 0, 1, 1, 0, 0}),
      indicator("e", {0, 0, 0, 0, 0, 0, 0, 0, 1, 1})};
  EXPECT_EQ(largest_classes(inds, 4), (std::vector<std::size_t>{1, 2, 3, 4}));
}

TEST(Histogram, PlantedNounSplitIsBimodal) {
  const auto f = synth::two_cluster_noun({}, 1);
  const auto r = fixture_checks::check_two_cluster(f);
  EXPECT_GE(std::abs(r.r), 0.5);
  EXPECT_GE(r.main_ratio, 3.0) << "valley bin " << r.valley;
  EXPECT_GE(r.minor_ratio, 3.0) << "valley bin " << r.valley;
}

TEST(Histogram, CsvLayout) {
  testing_support::ScratchDir dir("hist");
  RowMatrix c(3, 1);
  c << -1, 0, 1;
  const std::vector<IndicatorVector> inds = {indicator("N", {1, 1, 1})};
  const auto h = histogram(projection_of(c), inds, 0, 2);
  write_histogram_csv(h, dir / "h.csv");
  EXPECT_EQ(testing_support::read_file(dir / "h.csv"), "bin_lo,bin_hi,N\n-1.000000,0.000000,1\n0.000000,1.000000,2\n");
}

TEST(Scatter, SmallClassIsNotSubsampled) {
  const auto proj = random_projection(10, 2, 3);
  const auto pts = scatter_points(proj, {}, {}, 0, 1, 100, 1);
  ASSERT_EQ(pts.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(pts[i].token, proj.tokens[i]);
}

TEST(Scatter, SubsampleIsSeeded) {
  const auto proj = random_projection(1000, 3, 4);
  std::vector<double> ones(1000, 1.0);
  const std::vector<IndicatorVector> inds = {indicator("all", ones)};
  const std::vector<std::size_t> classes = {0};
  const auto a = scatter_points(proj, inds, classes, 0, 2, 50, 7);
  const auto b = scatter_points(proj, inds, classes, 0, 2, 50, 7);
  const auto c = scatter_points(proj, inds, classes, 0, 2, 50, 8);
  ASSERT_EQ(a.size(), 50u);
  std::vector<std::string> ta, tb, tc;
  for (std::size_t i = 0; i < 50; ++i) {
    ta.push_back(a[i].token);
    tb.push_back(b[i].token);
    tc.push_back(c[i].token);
  }
  EXPECT_EQ(ta, tb);
  EXPECT_NE(ta, tc);
}

TEST(Scatter, CsvMatchesCoordinatesToSixDecimals) {
  testing_support::ScratchDir dir("scatter");
  const auto proj = random_projection(20, 2, 5);
  const auto pts = scatter_export(proj, {}, {}, 0, 1, dir / "s", 100, 1);
  std::istringstream in(testing_support::read_file(dir / "s.csv"));
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "token,tag,x,y");
  std::size_t row = 0;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string token, tag, x, y;
    std::getline(ss, token, ',');
    std::getline(ss, tag, ',');
    std::getline(ss, x, ',');
    std::getline(ss, y, ',');
    const auto i = static_cast<Eigen::Index>(row);
    EXPECT_EQ(token, proj.tokens[row]);
    EXPECT_NEAR(std::stod(x), proj.coords(i, 0), 5e-7);
    EXPECT_NEAR(std::stod(y), proj.coords(i, 1), 5e-7);
    ++row;
  }
  EXPECT_EQ(row, 20u);
  EXPECT_TRUE(std::filesystem::exists(dir / "s.svg"));
}

TEST(SampleRegion, WholeSpaceReturnsFullVocabulary) {
  const auto proj = random_projection(40, 2, 6);
  RegionQuery q;
  q.constraints = {{0, -1e9, 1e9}, {1, -1e9, 1e9}};
  q.sample_size = 40;
  const auto s = sample_region(proj, q);
  EXPECT_EQ(s.status, RegionStatus::Ok);
  EXPECT_EQ(s.matches, 40u);
  auto tokens = s.tokens;
  std::sort(tokens.begin(), tokens.end());
  auto all = proj.tokens;
  std::sort(all.begin(), all.end());
  EXPECT_EQ(tokens, all);
}

TEST(SampleRegion, EmptyRegion) {
  const auto proj = random_projection(500, 2, 7);
  RegionQuery q;
  q.constraints = {{0, 10, 11}};
  const auto s = sample_region(proj, q);
  EXPECT_EQ(s.status, RegionStatus::EmptyRegion);
  EXPECT_EQ(s.matches, 0u);
  EXPECT_TRUE(s.tokens.empty());
}

TEST(SampleRegion, SampleSatisfiesConstraints) {
  const auto proj = random_projection(2000, 3, 8);
  RegionQuery q;
  q.constraints = {{0, 0.0, 1.0}, {2, -0.5, 2.0}};
  q.sample_size = 25;
  const auto s = sample_region(proj, q);
  ASSERT_EQ(s.tokens.size(), 25u);
  std::set<std::size_t> unique(s.rows.begin(), s.rows.end());
  EXPECT_EQ(unique.size(), 25u);
  for (auto r : s.rows) {
    const auto i = static_cast<Eigen::Index>(r);
    EXPECT_GE(proj.coords(i, 0), 0.0);
    EXPECT_LE(proj.coords(i, 0), 1.0);
    EXPECT_GE(proj.coords(i, 2), -0.5);
    EXPECT_LE(proj.coords(i, 2), 2.0);
  }
  EXPECT_EQ(sample_region(proj, q).tokens, s.tokens);
}

TEST(SampleRegion, MinorModeIsMostlySubcategory) {
  const auto f = synth::two_cluster_noun({}, 2);
  const auto r = fixture_checks::check_two_cluster(f);
  EXPECT_EQ(r.region.status, RegionStatus::Ok);
  EXPECT_GE(r.purity, 0.9) << r.region.matches << " matches";
}

TEST(SampleRegion, ParseInterval) {
  const auto iv = parse_interval("2:-0.5:1.25");
  EXPECT_EQ(iv.component, 1u);
  EXPECT_EQ(iv.lo, -0.5);
  EXPECT_EQ(iv.hi, 1.25);
  EXPECT_THROW(parse_interval("0:1:2"), Error);
  EXPECT_THROW(parse_interval("1:2"), Error);
  EXPECT_THROW(parse_interval("1:a:2"), Error);
  const auto proj = random_projection(5, 2, 1);
  RegionQuery q;
  q.constraints = {{0, 2.0, 1.0}};
  EXPECT_THROW(sample_region(proj, q), Error);
  q.constraints = {{5, 0.0, 1.0}};
  EXPECT_THROW(sample_region(proj, q), Error);
}

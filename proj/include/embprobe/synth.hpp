#pragma once

#include <Eigen/Dense>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "embprobe/embedding.hpp"
#include "embprobe/error.hpp"
#include "embprobe/lexicon.hpp"
#include "embprobe/rng.hpp"

namespace embprobe::synth {

// Planted-structure fixtures. Each generator builds latent coordinates with a
// known categorical geometry, applies a random rotation, and keeps the ground
// truth next to the embeddings so recovery can be scored exactly.

struct PosPlantedParams {
  std::size_t classes = 4;
  std::size_t tokens = 5000;
  std::size_t dim = 64;
  double offset = 2.0;  // class c sits at offset * e_c in latent space
  double noise = 0.5;   // isotropic Gaussian sigma
};

struct TwoClusterParams {
  std::size_t tokens = 4000;
  std::size_t dim = 32;
  double class_offset = 3.0;
  double noise = 0.5;
  double subcategory_share = 0.25;  // fraction of nouns in the minor cluster
  double separation = 4.0;          // minor-cluster distance from the main one, in noise sigmas
  double subcategory_spread = 0.25; // minor-cluster sigma along its axis, in noise sigmas
};

struct TriangleParams {
  std::size_t tokens = 20000;
  std::size_t dim = 32;
  double noise = 0.01;
  double neutral_band = 0.1;  // |valence| below this is tagged neutral
};

struct Fixture {
  std::string kind;
  EmbeddingMatrix embeddings;
  Lexicon lexicon;
  std::vector<std::string> tags;
  std::vector<std::size_t> labels;      // class per token
  std::vector<bool> subcategory;        // planted minor cluster (two-cluster-noun)
  std::vector<double> valence;          // latent valence (triangle)
  std::vector<double> intensity;        // latent intensity (triangle)
  Vector apex;                          // embedding of the triangle apex
  nlohmann::json params;
};

/// Tag names in the order used for class 0, 1, ...: the four largest POS
/// classes first, then the remaining Czech POS codes.
inline std::string class_tag(std::size_t c) {
  static constexpr const char* names[] = {"N", "V", "A", "D", "P", "C", "R", "J", "T", "I"};
  if (c < 10) return names[c];
  return "K" + std::to_string(c + 1);
}

inline std::string token_name(std::size_t i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "w%05zu", i);
  return buf;
}

/// Haar-random orthogonal matrix (QR of a Gaussian matrix with sign fix).
inline Eigen::MatrixXd random_rotation(std::size_t dim, Rng& rng) {
  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd g(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

/// Class sizes proportional to (C, C-1, ..., 1), i.e. 40/30/20/10 % for four
/// classes; rounding remainder goes to the largest class.
inline std::vector<std::size_t> class_sizes(std::size_t classes, std::size_t tokens) {
  const double total = static_cast<double>(classes * (classes + 1)) / 2.0;
  std::vector<std::size_t> sizes(classes);
  std::size_t used = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    sizes[c] = static_cast<std::size_t>(std::floor(static_cast<double>(tokens) *
                                                   static_cast<double>(classes - c) / total));
    used += sizes[c];
  }
  sizes[0] += tokens - used;
  return sizes;
}

inline std::vector<double> class_priors(std::size_t classes) {
  const double total = static_cast<double>(classes * (classes + 1)) / 2.0;
  std::vector<double> p(classes);
  for (std::size_t c = 0; c < classes; ++c) p[c] = static_cast<double>(classes - c) / total;
  return p;
}

namespace detail {

inline std::vector<std::size_t> shuffled_labels(std::size_t classes, std::size_t tokens, Rng& rng) {
  const auto sizes = class_sizes(classes, tokens);
  std::vector<std::size_t> labels;
  labels.reserve(tokens);
  for (std::size_t c = 0; c < classes; ++c) labels.insert(labels.end(), sizes[c], c);
  rng.shuffle(std::span<std::size_t>(labels));
  return labels;
}

inline Fixture finish(std::string kind, RowMatrix latent, const Eigen::MatrixXd& rotation,
                      const Vector& shift, std::vector<std::string> tags,
                      std::vector<std::size_t> labels, nlohmann::json params) {
  RowMatrix x = latent * rotation.transpose();
  x.rowwise() += shift.transpose();
  std::vector<std::string> tokens;
  Lexicon lex;
  for (const auto& t : tags) lex.declare_tag(t);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    tokens.push_back(token_name(i));
    lex.add(tokens.back(), tags[labels[i]]);
  }
  Fixture f{std::move(kind),
            EmbeddingMatrix(std::move(tokens), std::move(x), "synth"),
            std::move(lex),
            std::move(tags),
            std::move(labels),
            {},
            {},
            {},
            shift,
            std::move(params)};
  return f;
}

}  // namespace detail

/// Class c is offset along latent axis c; everything else is isotropic noise.
inline Fixture pos_planted(const PosPlantedParams& p, std::uint64_t seed) {
  if (p.classes < 2) throw Error("pos-planted needs at least 2 classes");
  if (p.dim < p.classes) throw Error("pos-planted needs dim >= classes");
  if (p.tokens < p.classes) throw Error("pos-planted needs at least one token per class");
  Rng rng(seed);
  auto labels = detail::shuffled_labels(p.classes, p.tokens, rng);
  const auto d = static_cast<Eigen::Index>(p.dim);
  RowMatrix latent(static_cast<Eigen::Index>(p.tokens), d);
  for (std::size_t i = 0; i < p.tokens; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < d; ++j) latent(r, j) = rng.normal(0.0, p.noise);
    latent(r, static_cast<Eigen::Index>(labels[i])) += p.offset;
  }
  const auto rotation = random_rotation(p.dim, rng);
  std::vector<std::string> tags;
  for (std::size_t c = 0; c < p.classes; ++c) tags.push_back(class_tag(c));
  nlohmann::json params = {{"classes", p.classes}, {"tokens", p.tokens}, {"dim", p.dim},
                           {"offset", p.offset},   {"noise", p.noise},
                           {"class_priors", class_priors(p.classes)}};
  return detail::finish("pos-planted", std::move(latent), rotation, Vector::Zero(d),
                        std::move(tags), std::move(labels), std::move(params));
}

/// Four classes on their own latent axes; the noun class additionally splits
/// along a fifth axis into a main cluster and a tight minor cluster placed
/// `separation` noise sigmas away (the planted "named-entity" group). The
/// split is centred so that the noun mean on that axis matches the other
/// classes, keeping the axis uncorrelated with the class structure.
inline Fixture two_cluster_noun(const TwoClusterParams& p, std::uint64_t seed) {
  constexpr std::size_t kClasses = 4;
  if (p.dim < kClasses + 1) throw Error("two-cluster-noun needs dim >= 5");
  if (!(p.subcategory_share > 0.0 && p.subcategory_share < 1.0)) {
    throw Error("subcategory_share must be in (0, 1)");
  }
  Rng rng(seed);
  auto labels = detail::shuffled_labels(kClasses, p.tokens, rng);
  const auto d = static_cast<Eigen::Index>(p.dim);
  const double gap = p.separation * p.noise;
  const double main_pos = -p.subcategory_share * gap;
  const double minor_pos = (1.0 - p.subcategory_share) * gap;
  RowMatrix latent(static_cast<Eigen::Index>(p.tokens), d);
  std::vector<bool> minor(p.tokens, false);
  for (std::size_t i = 0; i < p.tokens; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < d; ++j) latent(r, j) = rng.normal(0.0, p.noise);
    latent(r, static_cast<Eigen::Index>(labels[i])) += p.class_offset;
    if (labels[i] == 0) {
      minor[i] = rng.uniform() < p.subcategory_share;
      latent(r, kClasses) = minor[i] ? rng.normal(minor_pos, p.noise * p.subcategory_spread)
                                     : rng.normal(main_pos, p.noise);
    }
  }
  const auto rotation = random_rotation(p.dim, rng);
  std::vector<std::string> tags;
  for (std::size_t c = 0; c < kClasses; ++c) tags.push_back(class_tag(c));
  nlohmann::json params = {{"tokens", p.tokens},
                           {"dim", p.dim},
                           {"class_offset", p.class_offset},
                           {"noise", p.noise},
                           {"subcategory_share", p.subcategory_share},
                           {"separation_sigmas", p.separation},
                           {"subcategory_spread_sigmas", p.subcategory_spread},
                           {"main_position", main_pos},
                           {"minor_position", minor_pos}};
  auto f = detail::finish("two-cluster-noun", std::move(latent), rotation, Vector::Zero(d),
                          std::move(tags), std::move(labels), std::move(params));
  f.subcategory = std::move(minor);
  return f;
}

/// Intensity t ~ U(0, 1) and valence v = u * t with |u| <= 1, so |v| <= t and
/// the support is a triangle with its apex at t = 0. |u| has density 2|u|
/// (polar words dominate), which keeps the valence variance (1/6) well apart
/// from the intensity variance (1/12). The plane is rotated into `dim`
/// dimensions and shifted by a random offset.
inline Fixture valence_intensity_triangle(const TriangleParams& p, std::uint64_t seed) {
  if (p.dim < 2) throw Error("valence-intensity-triangle needs dim >= 2");
  Rng rng(seed);
  const auto d = static_cast<Eigen::Index>(p.dim);
  RowMatrix latent(static_cast<Eigen::Index>(p.tokens), d);
  std::vector<double> valence(p.tokens);
  std::vector<double> intensity(p.tokens);
  std::vector<std::size_t> labels(p.tokens);
  for (std::size_t i = 0; i < p.tokens; ++i) {
    const double t = rng.uniform();
    const double magnitude = std::sqrt(rng.uniform());
    const double u = rng.uniform() < 0.5 ? -magnitude : magnitude;
    valence[i] = u * t;
    intensity[i] = t;
    const auto r = static_cast<Eigen::Index>(i);
    for (Eigen::Index j = 0; j < d; ++j) latent(r, j) = rng.normal(0.0, p.noise);
    latent(r, 0) += valence[i];
    latent(r, 1) += intensity[i];
    labels[i] = std::abs(valence[i]) < p.neutral_band ? 2 : (valence[i] > 0.0 ? 0 : 1);
  }
  const auto rotation = random_rotation(p.dim, rng);
  Vector shift(d);
  for (Eigen::Index j = 0; j < d; ++j) shift[j] = rng.normal();
  nlohmann::json params = {{"tokens", p.tokens},
                           {"dim", p.dim},
                           {"noise", p.noise},
                           {"neutral_band", p.neutral_band}};
  auto f = detail::finish("valence-intensity-triangle", std::move(latent), rotation, shift,
                          {"positive", "negative", "neutral"}, std::move(labels),
                          std::move(params));
  f.valence = std::move(valence);
  f.intensity = std::move(intensity);
  return f;
}

inline const std::vector<std::string>& kinds() {
  static const std::vector<std::string> k = {"pos-planted", "two-cluster-noun",
                                             "valence-intensity-triangle"};
  return k;
}

/// Generator by name with default parameters, optionally overridden from JSON.
inline Fixture generate(const std::string& kind, const nlohmann::json& overrides,
                        std::uint64_t seed) {
  auto get = [&](const char* key, auto fallback) {
    return overrides.contains(key) ? overrides.at(key).get<decltype(fallback)>() : fallback;
  };
  if (kind == "pos-planted") {
    PosPlantedParams p;
    p.classes = get("classes", p.classes);
    p.tokens = get("tokens", p.tokens);
    p.dim = get("dim", p.dim);
    p.offset = get("offset", p.offset);
    p.noise = get("noise", p.noise);
    return pos_planted(p, seed);
  }
  if (kind == "two-cluster-noun") {
    TwoClusterParams p;
    p.tokens = get("tokens", p.tokens);
    p.dim = get("dim", p.dim);
    p.class_offset = get("class_offset", p.class_offset);
    p.noise = get("noise", p.noise);
    p.subcategory_share = get("subcategory_share", p.subcategory_share);
    p.separation = get("separation", p.separation);
    p.subcategory_spread = get("subcategory_spread", p.subcategory_spread);
    return two_cluster_noun(p, seed);
  }
  if (kind == "valence-intensity-triangle") {
    TriangleParams p;
    p.tokens = get("tokens", p.tokens);
    p.dim = get("dim", p.dim);
    p.noise = get("noise", p.noise);
    p.neutral_band = get("neutral_band", p.neutral_band);
    return valence_intensity_triangle(p, seed);
  }
  throw Error("unknown synth kind '" + kind + "'");
}

/// Writes emb.vec, lexicon.tsv, truth.tsv and synth.json into `dir`.
inline void write_fixture(const Fixture& f, const std::filesystem::path& dir,
                          std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  write_text(f.embeddings, dir / "emb.vec", 17);
  write_lexicon(f.lexicon, dir / "lexicon.tsv");
  std::ofstream truth(dir / "truth.tsv");
  if (!truth) throw Error("cannot write truth.tsv in '" + dir.string() + "'");
  truth << "token\tclass\tsubcategory\tvalence\tintensity\n";
  char buf[64];
  for (std::size_t i = 0; i < f.labels.size(); ++i) {
    truth << f.embeddings.tokens()[i] << '\t' << f.tags[f.labels[i]] << '\t'
          << (f.subcategory.empty() ? "" : (f.subcategory[i] ? "NE" : "-")) << '\t';
    if (!f.valence.empty()) {
      std::snprintf(buf, sizeof buf, "%.17g\t%.17g", f.valence[i], f.intensity[i]);
      truth << buf;
    } else {
      truth << '\t';
    }
    truth << '\n';
  }
  nlohmann::json meta = {{"kind", f.kind},
                         {"seed", seed},
                         {"rng", kRngName},
                         {"params", f.params},
                         {"apex", std::vector<double>(f.apex.data(), f.apex.data() + f.apex.size())}};
  std::ofstream(dir / "synth.json") << meta.dump(2) << '\n';
}

}  // namespace embprobe::synth

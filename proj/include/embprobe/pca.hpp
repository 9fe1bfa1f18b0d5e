#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "embprobe/embedding.hpp"
#include "embprobe/error.hpp"

namespace embprobe {

/// Mean, orthonormal components ordered by explained variance, and the
/// variance spectrum of a fitted PCA.
///
/// Every component row is sign-canonical: its largest-magnitude coordinate
/// (lowest index on ties) is positive.
struct PcaModel {
  Vector mean;                 // length D
  RowMatrix components;        // K x D, orthonormal rows
  Vector explained_variance;   // length K, non-increasing
  Vector spectrum;             // all D variances (trailing zeros when V <= D)
  std::vector<bool> flipped;   // row was negated during canonicalization
  bool degenerate = false;     // repeated variances among the retained ones

  std::size_t k() const noexcept { return static_cast<std::size_t>(components.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(components.cols()); }
};

/// Component scores of a set of tokens.
struct Projection {
  std::vector<std::string> tokens;
  RowMatrix coords;            // V x K
  std::string model_ref;

  std::size_t size() const noexcept { return tokens.size(); }
  std::size_t k() const noexcept { return static_cast<std::size_t>(coords.cols()); }
};

namespace detail {

// Index of the largest |x|, first one wins on ties.
inline Eigen::Index dominant_index(const Eigen::Ref<const Vector>& row) {
  Eigen::Index best = 0;
  double best_abs = -1.0;
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    const double a = std::abs(row[j]);
    if (a > best_abs) {
      best_abs = a;
      best = j;
    }
  }
  return best;
}

inline bool has_repeated(const Vector& values, Eigen::Index upto, double rel_tol) {
  for (Eigen::Index i = 0; i + 1 < upto; ++i) {
    const double scale = std::max(std::abs(values[i]), std::abs(values[i + 1]));
    if (scale > 0.0 && std::abs(values[i] - values[i + 1]) <= rel_tol * scale) return true;
  }
  return false;
}

}  // namespace detail

/// Flips each component row so that its dominant coordinate is positive.
inline PcaModel canonicalize_signs(PcaModel model) {
  if (model.flipped.size() != model.k()) model.flipped.assign(model.k(), false);
  for (Eigen::Index r = 0; r < model.components.rows(); ++r) {
    const Vector row = model.components.row(r).transpose();
    if (row[detail::dominant_index(row)] < 0.0) {
      model.components.row(r) *= -1.0;
      model.flipped[static_cast<std::size_t>(r)] = !model.flipped[static_cast<std::size_t>(r)];
    }
  }
  return model;
}

/// Fits `k` principal components by SVD of the mean-centred data.
///
/// Rows are put in lexicographic order before any arithmetic, which makes the
/// result bit-identical for every permutation of the input rows.
/// explained_variance[j] = sigma_j^2 / (V - 1).
inline PcaModel fit_pca(const RowMatrix& data, std::size_t k) {
  const auto v = static_cast<std::size_t>(data.rows());
  const auto d = static_cast<std::size_t>(data.cols());
  if (v < 2) throw Error("PCA needs at least 2 rows");
  if (k < 1 || k > std::min(v - 1, d)) {
    throw Error("requested " + std::to_string(k) + " components, valid range is [1, " +
                std::to_string(std::min(v - 1, d)) + "]");
  }
  if (!data.allFinite()) throw Error("PCA input contains non-finite values");

  std::vector<Eigen::Index> order(v);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const double* ra = data.row(a).data();
    const double* rb = data.row(b).data();
    return std::lexicographical_compare(ra, ra + d, rb, rb + d);
  });

  Vector mean = Vector::Zero(static_cast<Eigen::Index>(d));
  for (auto r : order) mean += data.row(r).transpose();
  mean /= static_cast<double>(v);

  Eigen::MatrixXd centered(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < v; ++i) {
    centered.row(static_cast<Eigen::Index>(i)) = data.row(order[i]) - mean.transpose();
  }

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Vector& sigma = svd.singularValues();
  const auto rank_slots = sigma.size();

  PcaModel model;
  model.mean = std::move(mean);
  model.spectrum = Vector::Zero(static_cast<Eigen::Index>(d));
  for (Eigen::Index j = 0; j < rank_slots; ++j) {
    model.spectrum[j] = sigma[j] * sigma[j] / static_cast<double>(v - 1);
  }
  const auto kk = static_cast<Eigen::Index>(k);
  model.components = svd.matrixV().leftCols(kk).transpose();
  model.explained_variance = model.spectrum.head(kk);
  model.flipped.assign(k, false);
  model.degenerate = detail::has_repeated(model.spectrum, std::min(kk + 1, rank_slots), 1e-10);
  return canonicalize_signs(std::move(model));
}

inline PcaModel fit_pca(const EmbeddingMatrix& m, std::size_t k) {
  return fit_pca(m.vectors(), k);
}

/// coords = (vectors - mean) * components^T
inline Projection project(const PcaModel& model, const EmbeddingMatrix& m,
                          std::string model_ref = {}) {
  if (m.dim() != model.dim()) {
    throw Error("dimension mismatch: model expects " + std::to_string(model.dim()) +
                ", embeddings have " + std::to_string(m.dim()));
  }
  RowMatrix centered = m.vectors().rowwise() - model.mean.transpose();
  Projection p;
  p.tokens = m.tokens();
  p.coords = centered * model.components.transpose();
  p.model_ref = std::move(model_ref);
  return p;
}

inline RowMatrix reconstruct(const PcaModel& model, const RowMatrix& coords) {
  if (static_cast<std::size_t>(coords.cols()) != model.k()) {
    throw Error("reconstruct: coordinate count does not match the model");
  }
  RowMatrix out = coords * model.components;
  out.rowwise() += model.mean.transpose();
  return out;
}

/// Projection rows restricted to `tokens` (in that order).
inline Projection select_tokens(const Projection& p, std::span<const std::string> tokens) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < p.tokens.size(); ++i) index.emplace(p.tokens[i], i);
  Projection out;
  out.model_ref = p.model_ref;
  out.coords.resize(static_cast<Eigen::Index>(tokens.size()), p.coords.cols());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto it = index.find(tokens[i]);
    if (it == index.end()) throw Error("token '" + tokens[i] + "' missing from projection");
    out.tokens.push_back(tokens[i]);
    out.coords.row(static_cast<Eigen::Index>(i)) = p.coords.row(static_cast<Eigen::Index>(it->second));
  }
  return out;
}

// Projections travel as ordinary embedding files (one row of scores per token).
inline EmbeddingMatrix as_embeddings(const Projection& p) {
  return EmbeddingMatrix(p.tokens, p.coords, p.model_ref);
}

inline Projection from_embeddings(const EmbeddingMatrix& m) {
  return Projection{m.tokens(), m.vectors(), m.source_tag()};
}

namespace detail {

inline void write_shortest(std::ostream& out, double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  out.write(buf, res.ptr - buf);
}

inline void write_row(std::ostream& out, const Eigen::Ref<const Vector>& row) {
  for (Eigen::Index j = 0; j < row.size(); ++j) {
    if (j > 0) out << ' ';
    write_shortest(out, row[j]);
  }
  out << '\n';
}

inline Vector read_row(std::istream& in, std::size_t n, const std::string& source,
                       std::size_t lineno) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, lineno, "unexpected end of file");
  auto fields = split_spaces(line);
  if (fields.size() != n) {
    throw ParseError(source, lineno,
                     "expected " + std::to_string(n) + " values, found " +
                         std::to_string(fields.size()));
  }
  Vector row(static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    double x = 0.0;
    if (!parse_number(fields[j], x) || !std::isfinite(x)) {
      throw ParseError(source, lineno, "bad value '" + std::string(fields[j]) + "'");
    }
    row[static_cast<Eigen::Index>(j)] = x;
  }
  return row;
}

}  // namespace detail

/// Text artifact: "K D", the mean, K component rows, then the K variances.
/// Values are written in shortest round-trip form.
inline void save_pca(const PcaModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << model.k() << ' ' << model.dim() << '\n';
  detail::write_row(out, model.mean);
  for (Eigen::Index r = 0; r < model.components.rows(); ++r) {
    detail::write_row(out, model.components.row(r).transpose());
  }
  detail::write_row(out, model.explained_variance);
  if (!out) throw Error("I/O failure writing '" + path.string() + "'");
}

inline PcaModel load_pca(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  const std::string source = path.string();
  std::string header;
  if (!std::getline(in, header)) throw ParseError(source, 1, "missing header");
  const auto [k, d] = detail::parse_header(header, source);
  if (k == 0) throw ParseError(source, 1, "model has no components");
  PcaModel model;
  model.mean = detail::read_row(in, d, source, 2);
  model.components.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d));
  for (std::size_t r = 0; r < k; ++r) {
    model.components.row(static_cast<Eigen::Index>(r)) =
        detail::read_row(in, d, source, 3 + r).transpose();
  }
  model.explained_variance = detail::read_row(in, k, source, 3 + k);
  model.spectrum = model.explained_variance;
  model.flipped.assign(k, false);
  model.degenerate = detail::has_repeated(model.explained_variance,
                                          model.explained_variance.size(), 1e-10);
  return model;
}

}  // namespace embprobe

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "embprobe/error.hpp"
#include "embprobe/lexicon.hpp"
#include "embprobe/pca.hpp"
#include "embprobe/rng.hpp"

namespace embprobe {

/// Sample Pearson correlation. With a 0/1 `y` this is the point-biserial
/// coefficient. Returns nullopt when either input is constant: the
/// coefficient is undefined there, which is not the same claim as r = 0.
inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error("pearson: length mismatch (" + std::to_string(x.size()) + " vs " +
                std::to_string(y.size()) + ")");
  }
  const std::size_t n = x.size();
  if (n < 3) throw Error("pearson: need at least 3 samples, got " + std::to_string(n));

  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);

  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline std::optional<double> pearson(const Eigen::Ref<const Eigen::VectorXd>& x,
                                     const Eigen::Ref<const Eigen::VectorXd>& y) {
  return pearson(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())),
                 std::span<const double>(y.data(), static_cast<std::size_t>(y.size())));
}

/// Categories x components grid of correlation coefficients. Cells where the
/// coefficient is undefined are empty.
class CorrelationMatrix {
 public:
  CorrelationMatrix(std::vector<std::string> tags, std::size_t k, std::size_t n)
      : tags_(std::move(tags)), k_(k), n_(n), cells_(tags_.size() * k) {
    if (n_ < 3) throw Error("correlation needs at least 3 samples");
  }

  const std::vector<std::string>& tags() const noexcept { return tags_; }
  std::size_t k() const noexcept { return k_; }
  std::size_t n() const noexcept { return n_; }

  const std::optional<double>& at(std::size_t tag, std::size_t comp) const {
    return cells_.at(tag * k_ + comp);
  }

  void set(std::size_t tag, std::size_t comp, std::optional<double> r) {
    if (r && std::abs(*r) > 1.0 + 1e-12) throw Error("correlation outside [-1, 1]");
    cells_.at(tag * k_ + comp) = r;
  }

  struct Peak {
    std::size_t tag = 0;
    std::size_t component = 0;
    double r = 0.0;
  };

  /// Cell with the largest |r|; nullopt when every cell is undefined.
  std::optional<Peak> max_abs() const {
    std::optional<Peak> best;
    for (std::size_t t = 0; t < tags_.size(); ++t) {
      for (std::size_t j = 0; j < k_; ++j) {
        const auto& r = at(t, j);
        if (r && (!best || std::abs(*r) > std::abs(best->r))) best = Peak{t, j, *r};
      }
    }
    return best;
  }

  /// Negates column `comp`, mirroring a sign flip of that component.
  void flip_component(std::size_t comp) {
    for (std::size_t t = 0; t < tags_.size(); ++t) {
      auto& r = cells_.at(t * k_ + comp);
      if (r) *r = -*r;
    }
  }

 private:
  std::vector<std::string> tags_;
  std::size_t k_;
  std::size_t n_;
  std::vector<std::optional<double>> cells_;
};

/// r[t][j] = pearson(score column j, indicator t).
inline CorrelationMatrix correlate(const Projection& proj,
                                   std::span<const IndicatorVector> inds) {
  const auto n = proj.size();
  std::vector<std::string> tags;
  for (const auto& ind : inds) {
    if (static_cast<std::size_t>(ind.values.size()) != n) {
      throw Error("indicator '" + ind.tag + "' has length " + std::to_string(ind.values.size()) +
                  ", projection has " + std::to_string(n) + " rows");
    }
    tags.push_back(ind.tag);
  }
  CorrelationMatrix cm(std::move(tags), proj.k(), n);
  for (std::size_t j = 0; j < proj.k(); ++j) {
    const Eigen::VectorXd column = proj.coords.col(static_cast<Eigen::Index>(j));
    for (std::size_t t = 0; t < inds.size(); ++t) cm.set(t, j, pearson(column, inds[t].values));
  }
  return cm;
}

/// |r| values of `x` against random permutations of `y`, sorted ascending.
/// Quantiles of this sample give a permutation-null reference for |r|.
inline std::vector<double> permutation_null(std::span<const double> x, std::span<const double> y,
                                            std::size_t resamples, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> shuffled(y.begin(), y.end());
  std::vector<double> out;
  out.reserve(resamples);
  for (std::size_t s = 0; s < resamples; ++s) {
    rng.shuffle(std::span<double>(shuffled));
    if (auto r = pearson(x, shuffled)) out.push_back(std::abs(*r));
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Empirical quantile by nearest rank; `q` in [0, 1].
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw Error("quantile of an empty sample");
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[std::min(sorted.size() - 1, rank == 0 ? 0 : rank - 1)];
}

namespace detail {

inline std::string fixed6(double x) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  std::string s(buf);
  if (s == "-0.000000") s = "0.000000";
  return s;
}

// Diverging palette: blue (-1) -> white (0) -> red (+1).
inline std::string diverging_color(double r) {
  const double t = std::clamp(std::abs(r), 0.0, 1.0);
  const int fade = static_cast<int>(std::lround(255.0 * (1.0 - t)));
  char buf[8];
  if (r >= 0.0) {
    std::snprintf(buf, sizeof buf, "#ff%02x%02x", fade, fade);
  } else {
    std::snprintf(buf, sizeof buf, "#%02x%02xff", fade, fade);
  }
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

/// CSV with header "tag,PC1,...,PCk"; values to 6 decimals, undefined cells empty.
inline void write_correlation_csv(const CorrelationMatrix& cm, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "tag";
  for (std::size_t j = 0; j < cm.k(); ++j) out << ",PC" << (j + 1);
  out << '\n';
  for (std::size_t t = 0; t < cm.tags().size(); ++t) {
    out << detail::csv_field(cm.tags()[t]);
    for (std::size_t j = 0; j < cm.k(); ++j) {
      out << ',';
      if (const auto& r = cm.at(t, j)) out << detail::fixed6(*r);
    }
    out << '\n';
  }
  if (!out) throw Error("I/O failure writing '" + path.string() + "'");
}

struct HeatmapStyle {
  int cell = 36;
  int margin_left = 60;
  int margin_top = 40;
};

inline void write_correlation_svg(const CorrelationMatrix& cm, const std::filesystem::path& path,
                                  const HeatmapStyle& style = {}) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  const int width = style.margin_left + style.cell * static_cast<int>(cm.k()) + 10;
  const int height = style.margin_top + style.cell * static_cast<int>(cm.tags().size()) + 10;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t j = 0; j < cm.k(); ++j) {
    out << "<text x=\"" << style.margin_left + style.cell * static_cast<int>(j) + style.cell / 2
        << "\" y=\"" << style.margin_top - 8 << "\" text-anchor=\"middle\">PC" << (j + 1)
        << "</text>\n";
  }
  for (std::size_t t = 0; t < cm.tags().size(); ++t) {
    const int y = style.margin_top + style.cell * static_cast<int>(t);
    out << "<text x=\"" << style.margin_left - 6 << "\" y=\"" << y + style.cell / 2 + 4
        << "\" text-anchor=\"end\">" << detail::xml_escape(cm.tags()[t]) << "</text>\n";
    for (std::size_t j = 0; j < cm.k(); ++j) {
      const int x = style.margin_left + style.cell * static_cast<int>(j);
      const auto& r = cm.at(t, j);
      const std::string fill = r ? detail::diverging_color(*r) : "#bdbdbd";
      out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << style.cell
          << "\" height=\"" << style.cell << "\" fill=\"" << fill << "\" stroke=\"#ffffff\">"
          << "<title>" << detail::xml_escape(cm.tags()[t]) << " PC" << (j + 1) << ": "
          << (r ? detail::fixed6(*r) : std::string("undefined")) << "</title></rect>\n";
      if (r) {
        char label[16];
        std::snprintf(label, sizeof label, "%.2f", *r);
        out << "<text x=\"" << x + style.cell / 2 << "\" y=\"" << y + style.cell / 2 + 4
            << "\" text-anchor=\"middle\" font-size=\"9\">" << label << "</text>\n";
      }
    }
  }
  out << "</svg>\n";
  if (!out) throw Error("I/O failure writing '" + path.string() + "'");
}

/// Writes `<stem>.csv` and `<stem>.svg` side by side.
inline void heatmap_export(const CorrelationMatrix& cm, const std::filesystem::path& stem) {
  auto csv = stem;
  auto svg = stem;
  write_correlation_csv(cm, csv.replace_extension(".csv"));
  write_correlation_svg(cm, svg.replace_extension(".svg"));
}

/// Reads back a CSV produced by write_correlation_csv.
inline CorrelationMatrix read_correlation_csv(const std::filesystem::path& path, std::size_t n) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  const std::string source = path.string();
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, 1, "missing header");
  std::size_t k = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  std::vector<std::string> tags;
  std::vector<std::vector<std::optional<double>>> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    if (fields.size() != k + 1) throw ParseError(source, lineno, "wrong number of columns");
    tags.push_back(fields[0]);
    std::vector<std::optional<double>> row;
    for (std::size_t j = 1; j <= k; ++j) {
      if (fields[j].empty()) {
        row.emplace_back();
        continue;
      }
      double x = 0.0;
      if (!detail::parse_number(fields[j], x)) {
        throw ParseError(source, lineno, "bad value '" + fields[j] + "'");
      }
      row.emplace_back(x);
    }
    rows.push_back(std::move(row));
  }
  CorrelationMatrix cm(std::move(tags), k, n);
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (std::size_t j = 0; j < k; ++j) cm.set(t, j, rows[t][j]);
  }
  return cm;
}

}  // namespace embprobe

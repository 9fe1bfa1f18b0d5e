#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "embprobe/correlation.hpp"
#include "embprobe/error.hpp"
#include "embprobe/lexicon.hpp"
#include "embprobe/pca.hpp"
#include "embprobe/rng.hpp"

namespace embprobe {

/// Indices into `inds` of the `count` largest classes (ties keep input order).
inline std::vector<std::size_t> largest_classes(std::span<const IndicatorVector> inds,
                                                std::size_t count = 4) {
  std::vector<std::size_t> order(inds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    return inds[a].positives > inds[b].positives;
  });
  order.resize(std::min(count, order.size()));
  return order;
}

inline std::vector<std::size_t> classes_by_name(std::span<const IndicatorVector> inds,
                                                std::span<const std::string> tags) {
  std::vector<std::size_t> out;
  for (const auto& tag : tags) {
    auto it = std::find_if(inds.begin(), inds.end(), [&](const auto& i) { return i.tag == tag; });
    if (it == inds.end()) throw Error("unknown tag '" + tag + "'");
    out.push_back(static_cast<std::size_t>(it - inds.begin()));
  }
  return out;
}

/// Per-class counts of component scores over shared bins.
///
/// Bins are [e_i, e_{i+1}) except the last, which is closed. Edges span the
/// observed range of the plotted tokens (those in any selected class).
struct ClassHistogram {
  std::size_t component = 0;
  std::vector<double> edges;                     // n_bins + 1, strictly ascending
  std::vector<std::string> tags;
  std::vector<std::vector<std::size_t>> counts;  // [tag][bin]

  std::size_t bins() const { return edges.empty() ? 0 : edges.size() - 1; }
};

inline std::size_t bin_of(std::span<const double> edges, double x) {
  const std::size_t n = edges.size() - 1;
  const double lo = edges.front();
  const double width = (edges.back() - lo) / static_cast<double>(n);
  auto i = static_cast<std::ptrdiff_t>(std::floor((x - lo) / width));
  i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n) - 1);
  auto b = static_cast<std::size_t>(i);
  while (b > 0 && x < edges[b]) --b;
  while (b + 1 < n && x >= edges[b + 1]) ++b;
  return b;
}

inline ClassHistogram histogram(const Projection& proj, std::span<const IndicatorVector> inds,
                                std::size_t component, std::size_t n_bins,
                                std::span<const std::size_t> classes) {
  if (component >= proj.k()) {
    throw Error("component " + std::to_string(component + 1) + " out of range (k = " +
                std::to_string(proj.k()) + ")");
  }
  if (n_bins < 1) throw Error("n_bins must be at least 1");
  for (const auto& ind : inds) {
    if (static_cast<std::size_t>(ind.values.size()) != proj.size()) {
      throw Error("indicator '" + ind.tag + "' does not match the projection length");
    }
  }
  const auto col = proj.coords.col(static_cast<Eigen::Index>(component));
  double lo = INFINITY;
  double hi = -INFINITY;
  for (std::size_t i = 0; i < proj.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const bool plotted = std::any_of(classes.begin(), classes.end(),
                                     [&](auto c) { return inds[c].values[r] > 0.5; });
    if (!plotted) continue;
    lo = std::min(lo, col[r]);
    hi = std::max(hi, col[r]);
  }
  ClassHistogram h;
  h.component = component;
  if (!(lo <= hi)) {
    lo = 0.0;
    hi = 1.0;
  } else if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  h.edges.resize(n_bins + 1);
  for (std::size_t b = 0; b <= n_bins; ++b) {
    h.edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(n_bins);
  }
  h.edges.back() = hi;
  for (auto c : classes) {
    h.tags.push_back(inds[c].tag);
    std::vector<std::size_t> counts(n_bins, 0);
    for (std::size_t i = 0; i < proj.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      if (inds[c].values[r] > 0.5) ++counts[bin_of(h.edges, col[r])];
    }
    h.counts.push_back(std::move(counts));
  }
  return h;
}

/// Same, over the four largest classes.
inline ClassHistogram histogram(const Projection& proj, std::span<const IndicatorVector> inds,
                                std::size_t component, std::size_t n_bins = 50) {
  const auto classes = largest_classes(inds, 4);
  return histogram(proj, inds, component, n_bins, classes);
}

/// CSV: "bin_lo,bin_hi,<tag>,..." with one row per bin.
inline void write_histogram_csv(const ClassHistogram& h, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "bin_lo,bin_hi";
  for (const auto& t : h.tags) out << ',' << detail::csv_field(t);
  out << '\n';
  for (std::size_t b = 0; b < h.bins(); ++b) {
    out << detail::fixed6(h.edges[b]) << ',' << detail::fixed6(h.edges[b + 1]);
    for (const auto& c : h.counts) out << ',' << c[b];
    out << '\n';
  }
  if (!out) throw Error("I/O failure writing '" + path.string() + "'");
}

namespace detail {

inline const char* palette(std::size_t i) {
  static constexpr const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                           "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  return colors[i % 8];
}

}  // namespace detail

inline void write_histogram_svg(const ClassHistogram& h, const std::filesystem::path& path,
                                int width = 640, int height = 320) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  std::size_t peak = 1;
  for (const auto& c : h.counts) peak = std::max(peak, *std::max_element(c.begin(), c.end()));
  const double bw = static_cast<double>(width - 20) / static_cast<double>(h.bins());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t t = 0; t < h.counts.size(); ++t) {
    out << "<polyline fill=\"none\" stroke=\"" << detail::palette(t) << "\" points=\"";
    for (std::size_t b = 0; b < h.bins(); ++b) {
      const double x = 10.0 + bw * (static_cast<double>(b) + 0.5);
      const double y = static_cast<double>(height - 20) -
                       static_cast<double>(height - 40) * static_cast<double>(h.counts[t][b]) /
                           static_cast<double>(peak);
      out << x << ',' << y << ' ';
    }
    out << "\"/>\n<text x=\"" << 14 + 40 * t << "\" y=\"14\" fill=\"" << detail::palette(t)
        << "\">" << detail::xml_escape(h.tags[t]) << "</text>\n";
  }
  out << "<text x=\"" << width / 2 << "\" y=\"" << height - 4 << "\" text-anchor=\"middle\">PC"
      << h.component + 1 << "</text>\n</svg>\n";
  if (!out) throw Error("I/O failure writing '" + path.string() + "'");
}

struct ScatterPoint {
  std::string token;
  std::string tag;
  double x = 0.0;
  double y = 0.0;
};

/// Up to `max_points` tokens per class, drawn uniformly without replacement
/// and listed in vocabulary order. With no classes, every token belongs to
/// one class called "all".
inline std::vector<ScatterPoint> scatter_points(const Projection& proj,
                                                std::span<const IndicatorVector> inds,
                                                std::span<const std::size_t> classes,
                                                std::size_t comp_x, std::size_t comp_y,
                                                std::size_t max_points, std::uint64_t seed) {
  if (comp_x >= proj.k() || comp_y >= proj.k()) throw Error("scatter: component out of range");
  if (comp_x == comp_y) throw Error("scatter: components must be distinct");
  Rng rng(seed);
  std::vector<ScatterPoint> out;
  auto emit = [&](std::vector<std::size_t> members, const std::string& tag) {
    if (members.size() > max_points) {
      rng.shuffle(std::span<std::size_t>(members));
      members.resize(max_points);
      std::sort(members.begin(), members.end());
    }
    for (auto i : members) {
      const auto r = static_cast<Eigen::Index>(i);
      out.push_back({proj.tokens[i], tag, proj.coords(r, static_cast<Eigen::Index>(comp_x)),
                     proj.coords(r, static_cast<Eigen::Index>(comp_y))});
    }
  };
  if (classes.empty()) {
    std::vector<std::size_t> all(proj.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    emit(std::move(all), "all");
    return out;
  }
  for (auto c : classes) {
    if (static_cast<std::size_t>(inds[c].values.size()) != proj.size()) {
      throw Error("indicator '" + inds[c].tag + "' does not match the projection length");
    }
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < proj.size(); ++i) {
      if (inds[c].values[static_cast<Eigen::Index>(i)] > 0.5) members.push_back(i);
    }
    emit(std::move(members), inds[c].tag);
  }
  return out;
}

/// CSV "token,tag,x,y" with coordinates to 6 decimals.
inline void write_scatter_csv(std::span<const ScatterPoint> points,
                              const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "token,tag,x,y\n";
  for (const auto& p : points) {
    out << detail::csv_field(p.token) << ',' << detail::csv_field(p.tag) << ','
        << detail::fixed6(p.x) << ',' << detail::fixed6(p.y) << '\n';
  }
  if (!out) throw Error("I/O failure writing '" + path.string() + "'");
}

inline void write_scatter_svg(std::span<const ScatterPoint> points, std::size_t comp_x,
                              std::size_t comp_y, const std::filesystem::path& path,
                              int size = 480) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  std::vector<std::string> tags;
  for (const auto& p : points) {
    xlo = std::min(xlo, p.x);
    xhi = std::max(xhi, p.x);
    ylo = std::min(ylo, p.y);
    yhi = std::max(yhi, p.y);
    if (std::find(tags.begin(), tags.end(), p.tag) == tags.end()) tags.push_back(p.tag);
  }
  if (!(xhi > xlo)) xhi = xlo + 1.0;
  if (!(yhi > ylo)) yhi = ylo + 1.0;
  const double pad = 24.0;
  const double span = static_cast<double>(size) - 2.0 * pad;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (const auto& p : points) {
    const auto t = static_cast<std::size_t>(std::find(tags.begin(), tags.end(), p.tag) - tags.begin());
    const double x = pad + span * (p.x - xlo) / (xhi - xlo);
    const double y = pad + span * (1.0 - (p.y - ylo) / (yhi - ylo));
    // Glyph alternates between circles and squares per class.
    if (t % 2 == 0) {
      out << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"2\" fill=\"" << detail::palette(t)
          << "\"/>\n";
    } else {
      out << "<rect x=\"" << x - 2 << "\" y=\"" << y - 2 << "\" width=\"4\" height=\"4\" fill=\""
          << detail::palette(t) << "\"/>\n";
    }
  }
  for (std::size_t t = 0; t < tags.size(); ++t) {
    out << "<text x=\"" << 6 + 40 * t << "\" y=\"14\" fill=\"" << detail::palette(t) << "\">"
        << detail::xml_escape(tags[t]) << "</text>\n";
  }
  out << "<text x=\"" << size / 2 << "\" y=\"" << size - 4 << "\" text-anchor=\"middle\">PC"
      << comp_x + 1 << "</text>\n<text x=\"10\" y=\"" << size / 2 << "\">PC" << comp_y + 1
      << "</text>\n</svg>\n";
  if (!out) throw Error("I/O failure writing '" + path.string() + "'");
}

/// Writes `<stem>.csv` and `<stem>.svg`; returns the exported points.
inline std::vector<ScatterPoint> scatter_export(const Projection& proj,
                                                std::span<const IndicatorVector> inds,
                                                std::span<const std::size_t> classes,
                                                std::size_t comp_x, std::size_t comp_y,
                                                const std::filesystem::path& stem,
                                                std::size_t max_points, std::uint64_t seed) {
  auto points = scatter_points(proj, inds, classes, comp_x, comp_y, max_points, seed);
  auto csv = stem;
  auto svg = stem;
  write_scatter_csv(points, csv.replace_extension(".csv"));
  write_scatter_svg(points, comp_x, comp_y, svg.replace_extension(".svg"));
  return points;
}

struct Interval {
  std::size_t component = 0;
  double lo = 0.0;
  double hi = 0.0;
};

struct RegionQuery {
  std::vector<Interval> constraints;
  std::size_t sample_size = 20;
  std::uint64_t seed = 1;

  void validate(std::size_t k) const {
    if (sample_size < 1) throw Error("sample size must be at least 1");
    for (const auto& c : constraints) {
      if (c.component >= k) {
        throw Error("region constraint on component " + std::to_string(c.component + 1) +
                    " but k = " + std::to_string(k));
      }
      if (!(c.lo <= c.hi)) throw Error("region constraint has lo > hi");
    }
  }

  bool contains(const Projection& proj, std::size_t row) const {
    for (const auto& c : constraints) {
      const double s = proj.coords(static_cast<Eigen::Index>(row),
                                   static_cast<Eigen::Index>(c.component));
      if (s < c.lo || s > c.hi) return false;
    }
    return true;
  }
};

enum class RegionStatus { Ok, EmptyRegion };

struct RegionSample {
  RegionStatus status = RegionStatus::Ok;
  std::size_t matches = 0;          // tokens inside the region
  std::vector<std::string> tokens;  // sampled tokens, in draw order
  std::vector<std::size_t> rows;
};

/// Uniform sample without replacement of tokens whose scores satisfy every
/// interval; all matches when there are fewer than the sample size.
inline RegionSample sample_region(const Projection& proj, const RegionQuery& q) {
  q.validate(proj.k());
  std::vector<std::size_t> hits;
  for (std::size_t i = 0; i < proj.size(); ++i) {
    if (q.contains(proj, i)) hits.push_back(i);
  }
  RegionSample out;
  out.matches = hits.size();
  if (hits.empty()) {
    out.status = RegionStatus::EmptyRegion;
    return out;
  }
  Rng rng(q.seed);
  rng.shuffle(std::span<std::size_t>(hits));
  hits.resize(std::min(hits.size(), q.sample_size));
  for (auto i : hits) out.tokens.push_back(proj.tokens[i]);
  out.rows = std::move(hits);
  return out;
}

/// Parses "component:lo:hi" with a 1-based component index.
inline Interval parse_interval(const std::string& spec) {
  const auto a = spec.find(':');
  const auto b = a == std::string::npos ? a : spec.find(':', a + 1);
  if (b == std::string::npos) throw Error("bad region '" + spec + "', expected PC:lo:hi");
  std::size_t comp = 0;
  Interval iv;
  if (!detail::parse_number(std::string_view(spec).substr(0, a), comp) || comp < 1 ||
      !detail::parse_number(std::string_view(spec).substr(a + 1, b - a - 1), iv.lo) ||
      !detail::parse_number(std::string_view(spec).substr(b + 1), iv.hi)) {
    throw Error("bad region '" + spec + "', expected PC:lo:hi");
  }
  iv.component = comp - 1;
  return iv;
}

}  // namespace embprobe

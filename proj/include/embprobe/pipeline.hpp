#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "embprobe/correlation.hpp"
#include "embprobe/embedding.hpp"
#include "embprobe/lexicon.hpp"
#include "embprobe/manifest.hpp"
#include "embprobe/pca.hpp"
#include "embprobe/report.hpp"

namespace embprobe {

/// Default number of components when none is requested: min(10, D, V - 1).
inline std::size_t default_components(std::size_t rows, std::size_t dim) {
  return std::min<std::size_t>({10, dim, rows > 1 ? rows - 1 : 1});
}

/// Fits PCA on the full matrix, or on the rows shared with the lexicon when
/// `restrict_to_lexicon` is set. k = 0 picks the default.
inline PcaModel fit_for_analysis(const EmbeddingMatrix& emb, const Lexicon& lex, std::size_t k,
                                 bool restrict_to_lexicon) {
  if (!restrict_to_lexicon) {
    return fit_pca(emb, k == 0 ? default_components(emb.size(), emb.dim()) : k);
  }
  const auto shared = shared_tokens(emb.tokens(), lex);
  if (shared.empty()) throw Error("no embedding token appears in the lexicon");
  const auto sub = intersect(emb, std::span<const std::string>(shared));
  return fit_pca(sub, k == 0 ? default_components(sub.size(), sub.dim()) : k);
}

/// Scores and indicator vectors over the tokens shared by a projection and
/// a lexicon. Constant indicators are set aside.
struct StructureInputs {
  Projection projection;
  std::vector<IndicatorVector> indicators;
  std::vector<std::string> constant_tags;
};

inline StructureInputs prepare_structure(const Projection& full, const Lexicon& raw,
                                         bool keep_multivalent) {
  const Lexicon lex = keep_multivalent ? raw : filter_univalent(raw);
  const auto vocab = shared_tokens(full.tokens, lex);
  if (vocab.size() < 3) {
    throw Error("only " + std::to_string(vocab.size()) +
                " projected tokens appear in the lexicon; need at least 3");
  }
  StructureInputs out;
  out.projection = select_tokens(full, vocab);
  for (auto& ind : indicators(lex, vocab, keep_multivalent)) {
    if (ind.constant) {
      out.constant_tags.push_back(ind.tag);
    } else {
      out.indicators.push_back(std::move(ind));
    }
  }
  if (out.indicators.empty()) throw Error("every category indicator is constant");
  return out;
}

struct AnalyzeOptions {
  std::filesystem::path embeddings;
  std::filesystem::path lexicon;
  VectorFormat format = VectorFormat::Auto;
  std::size_t k = 0;  // 0 = default
  std::size_t bins = 50;
  std::size_t histogram_components = 3;
  std::size_t max_points = 2000;
  bool keep_multivalent = false;
  bool restrict_pca = false;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

inline std::string format_name(VectorFormat f) {
  switch (f) {
    case VectorFormat::Text: return "text";
    case VectorFormat::Binary: return "binary";
    default: return "auto";
  }
}

inline nlohmann::json to_json(const AnalyzeOptions& o) {
  return {{"emb", o.embeddings.string()},
          {"lexicon", o.lexicon.string()},
          {"format", format_name(o.format)},
          {"k", o.k},
          {"bins", o.bins},
          {"histogram_components", o.histogram_components},
          {"max_points", o.max_points},
          {"keep_multivalent", o.keep_multivalent},
          {"restrict_pca", o.restrict_pca},
          {"seed", o.seed},
          {"threads", o.threads}};
}

inline AnalyzeOptions analyze_options_from_json(const nlohmann::json& j) {
  AnalyzeOptions o;
  o.embeddings = j.at("emb").get<std::string>();
  o.lexicon = j.at("lexicon").get<std::string>();
  o.format = parse_format(j.value("format", "auto"));
  o.k = j.value("k", o.k);
  o.bins = j.value("bins", o.bins);
  o.histogram_components = j.value("histogram_components", o.histogram_components);
  o.max_points = j.value("max_points", o.max_points);
  o.keep_multivalent = j.value("keep_multivalent", o.keep_multivalent);
  o.restrict_pca = j.value("restrict_pca", o.restrict_pca);
  o.seed = j.value("seed", o.seed);
  o.threads = j.value("threads", o.threads);
  return o;
}

struct AnalyzeResult {
  PcaModel model;
  StructureInputs structure;
  CorrelationMatrix correlation;
  std::vector<std::filesystem::path> outputs;
};

/// PCA, correlation heatmap, per-class histograms along the leading
/// components, and a scatter of the first two components, all written into
/// `out_dir` together with manifest.json.
inline AnalyzeResult analyze(const AnalyzeOptions& opt, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  RunManifest manifest("analyze", opt.seed);
  manifest.config() = to_json(opt);
  manifest.add_input("emb", opt.embeddings);
  manifest.add_input("lexicon", opt.lexicon);

  const auto emb = load_embeddings(opt.embeddings, opt.format);
  const auto lex = load_lexicon(opt.lexicon);
  auto model = fit_for_analysis(emb, lex, opt.k, opt.restrict_pca);
  const auto full = project(model, emb, opt.embeddings.string());
  auto structure = prepare_structure(full, lex, opt.keep_multivalent);
  auto cm = correlate(structure.projection, structure.indicators);

  std::vector<std::filesystem::path> outputs;
  auto emit = [&](const std::filesystem::path& p) {
    outputs.push_back(p);
    manifest.add_output(p.filename());
  };

  save_pca(model, out_dir / "model.pca");
  emit(out_dir / "model.pca");
  write_correlation_csv(cm, out_dir / "corr.csv");
  emit(out_dir / "corr.csv");
  write_correlation_svg(cm, out_dir / "corr.svg");
  emit(out_dir / "corr.svg");

  const auto classes = largest_classes(structure.indicators, 4);
  const std::size_t hist_count = std::min(opt.histogram_components, model.k());
  for (std::size_t c = 0; c < hist_count; ++c) {
    const auto h = histogram(structure.projection, structure.indicators, c, opt.bins, classes);
    const auto stem = "hist_pc" + std::to_string(c + 1);
    write_histogram_csv(h, out_dir / (stem + ".csv"));
    emit(out_dir / (stem + ".csv"));
    write_histogram_svg(h, out_dir / (stem + ".svg"));
    emit(out_dir / (stem + ".svg"));
  }
  if (model.k() >= 2) {
    scatter_export(structure.projection, structure.indicators, classes, 0, 1,
                   out_dir / "scatter_pc1_pc2", opt.max_points, opt.seed);
    emit(out_dir / "scatter_pc1_pc2.csv");
    emit(out_dir / "scatter_pc1_pc2.svg");
  }

  nlohmann::json notes = {{"aligned_tokens", structure.projection.size()},
                          {"components", model.k()},
                          {"constant_tags", structure.constant_tags},
                          {"degenerate_spectrum", model.degenerate},
                          {"explained_variance",
                           std::vector<double>(model.explained_variance.data(),
                                               model.explained_variance.data() +
                                                   model.explained_variance.size())}};
  if (const auto peak = cm.max_abs()) {
    notes["max_abs_r"] = {{"tag", cm.tags()[peak->tag]},
                          {"component", peak->component + 1},
                          {"r", peak->r}};
  }
  manifest.note("analyze", notes);
  manifest.write(out_dir / "manifest.json");
  outputs.push_back(out_dir / "manifest.json");
  return {std::move(model), std::move(structure), std::move(cm), std::move(outputs)};
}

}  // namespace embprobe

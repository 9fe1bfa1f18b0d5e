// embprobe: probing and principal-component analysis of categorical
// structure in word embeddings.

#include <CLI11.hpp>

#include <Eigen/Core>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "embprobe/embprobe.hpp"

namespace fs = std::filesystem;
using namespace embprobe;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::string format = "auto";
};

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

fs::path manifest_for(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

// Indicators over the projection; an empty lexicon path means "no classes".
// Score files are always sniffed by extension, --format applies to embeddings.
StructureInputs load_structure(const fs::path& proj_path, const fs::path& lexicon_path,
                               bool keep_multivalent) {
  const auto full = from_embeddings(load_embeddings(proj_path));
  if (lexicon_path.empty()) return {full, {}, {}};
  return prepare_structure(full, load_lexicon(lexicon_path), keep_multivalent);
}

std::vector<std::size_t> pick_classes(const StructureInputs& s,
                                      const std::vector<std::string>& tags) {
  if (s.indicators.empty()) return {};
  if (tags.empty()) return largest_classes(s.indicators, 4);
  return classes_by_name(s.indicators, tags);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probe and visualize categorical structure in word embeddings"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(EMBPROBE_VERSION));

  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random decision")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads; results do not depend on it")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--format", g.format, "Embedding file format")
      ->check(CLI::IsMember({"auto", "text", "binary"}))
      ->capture_default_str();

  // train-sgns
  auto* sgns_cmd = app.add_subcommand("train-sgns", "Train skip-gram embeddings on a corpus");
  fs::path corpus_path;
  fs::path sgns_out;
  SgnsConfig scfg;
  std::string semantics = "side";
  bool nondeterministic = false;
  sgns_cmd->add_option("--corpus", corpus_path, "One sentence per line, space-tokenized")
      ->required()
      ->check(CLI::ExistingFile);
  sgns_cmd->add_option("--out", sgns_out, "Output vectors (.vec/.txt text, .bin binary)")
      ->required();
  sgns_cmd->add_option("--dim", scfg.dim)->check(CLI::PositiveNumber)->capture_default_str();
  sgns_cmd->add_option("--window", scfg.window)->check(CLI::PositiveNumber)->capture_default_str();
  sgns_cmd->add_option("--window-semantics", semantics, "side: +-window; span: total width")
      ->check(CLI::IsMember({"side", "span"}))
      ->capture_default_str();
  sgns_cmd->add_option("--negatives", scfg.negatives)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sgns_cmd->add_option("--epochs", scfg.epochs)->check(CLI::PositiveNumber)->capture_default_str();
  sgns_cmd->add_option("--lr", scfg.learning_rate)->capture_default_str();
  sgns_cmd->add_option("--min-count", scfg.min_count)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sgns_cmd->add_option("--subsample", scfg.subsample_threshold)->capture_default_str();
  sgns_cmd->add_flag("--nondeterministic", nondeterministic,
                     "Hogwild updates over --threads workers (run-dependent output)");

  // pca
  auto* pca_cmd = app.add_subcommand("pca", "Fit principal components of an embedding matrix");
  fs::path pca_input;
  fs::path pca_out;
  fs::path pca_proj_out;
  fs::path pca_lexicon;
  std::size_t pca_k = 0;
  bool pca_restrict = false;
  pca_cmd->add_option("--input", pca_input)->required()->check(CLI::ExistingFile);
  pca_cmd->add_option("--k", pca_k, "Components (default min(10, D))");
  pca_cmd->add_option("--out", pca_out, "Model file")->required();
  pca_cmd->add_option("--proj-out", pca_proj_out, "Also write component scores of every token");
  pca_cmd->add_option("--lexicon", pca_lexicon, "Lexicon, used with --restrict-pca")
      ->check(CLI::ExistingFile);
  pca_cmd->add_flag("--restrict-pca", pca_restrict, "Fit only on tokens present in --lexicon");

  // correlate
  auto* corr_cmd = app.add_subcommand("correlate", "Correlate component scores with categories");
  fs::path corr_proj;
  fs::path corr_lexicon;
  fs::path corr_out;
  bool corr_keep = false;
  std::size_t corr_perm = 0;
  corr_cmd->add_option("--proj", corr_proj, "Component scores (from pca --proj-out)")
      ->required()
      ->check(CLI::ExistingFile);
  corr_cmd->add_option("--lexicon", corr_lexicon)->required()->check(CLI::ExistingFile);
  corr_cmd->add_option("--out", corr_out, "CSV; an SVG heatmap is written alongside")->required();
  corr_cmd->add_flag("--keep-multivalent", corr_keep, "Do not drop multivalent forms");
  corr_cmd->add_option("--permutations", corr_perm,
                       "Permutation-null resamples for the strongest cell (0 = off)");

  // probe
  auto* probe_cmd = app.add_subcommand("probe", "Cross-validated MLP probing classifier");
  fs::path probe_emb;
  fs::path probe_lexicon;
  fs::path probe_report;
  ProbeConfig pcfg;
  probe_cmd->add_option("--emb", probe_emb)->required()->check(CLI::ExistingFile);
  probe_cmd->add_option("--lexicon", probe_lexicon)->required()->check(CLI::ExistingFile);
  probe_cmd->add_option("--report", probe_report, "JSON report")->required();
  probe_cmd->add_option("--folds", pcfg.folds)->check(CLI::Range(2, 1000000))->capture_default_str();
  probe_cmd->add_option("--hidden", pcfg.hidden_units)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  probe_cmd->add_option("--epochs", pcfg.epochs)->check(CLI::PositiveNumber)->capture_default_str();
  probe_cmd->add_option("--batch", pcfg.batch_size)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  probe_cmd->add_option("--lr", pcfg.learning_rate)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  // histogram
  auto* hist_cmd = app.add_subcommand("histogram", "Per-class histogram along one component");
  fs::path hist_proj;
  fs::path hist_lexicon;
  fs::path hist_out;
  std::size_t hist_comp = 1;
  std::size_t hist_bins = 50;
  std::vector<std::string> hist_tags;
  bool hist_keep = false;
  hist_cmd->add_option("--proj", hist_proj)->required()->check(CLI::ExistingFile);
  hist_cmd->add_option("--lexicon", hist_lexicon)->required()->check(CLI::ExistingFile);
  hist_cmd->add_option("--out", hist_out, "CSV; an SVG is written alongside")->required();
  hist_cmd->add_option("--component", hist_comp, "1-based")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  hist_cmd->add_option("--bins", hist_bins)->check(CLI::PositiveNumber)->capture_default_str();
  hist_cmd->add_option("--tags", hist_tags, "Classes to plot (default: four largest)");
  hist_cmd->add_flag("--keep-multivalent", hist_keep);

  // scatter
  auto* scatter_cmd = app.add_subcommand("scatter", "2D class distribution over two components");
  fs::path sc_proj;
  fs::path sc_lexicon;
  fs::path sc_out;
  std::size_t sc_x = 1;
  std::size_t sc_y = 2;
  std::size_t sc_max = 2000;
  std::vector<std::string> sc_tags;
  bool sc_keep = false;
  scatter_cmd->add_option("--proj", sc_proj)->required()->check(CLI::ExistingFile);
  scatter_cmd->add_option("--lexicon", sc_lexicon, "Optional; without it all tokens are one class")
      ->check(CLI::ExistingFile);
  scatter_cmd->add_option("--out", sc_out, "CSV; an SVG is written alongside")->required();
  scatter_cmd->add_option("--x", sc_x, "1-based")->check(CLI::PositiveNumber)->capture_default_str();
  scatter_cmd->add_option("--y", sc_y, "1-based")->check(CLI::PositiveNumber)->capture_default_str();
  scatter_cmd->add_option("--max-points", sc_max, "Per class")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  scatter_cmd->add_option("--tags", sc_tags, "Classes to plot (default: four largest)");
  scatter_cmd->add_flag("--keep-multivalent", sc_keep);

  // sample-region
  auto* region_cmd = app.add_subcommand("sample-region", "Sample tokens from a score region");
  fs::path rg_proj;
  fs::path rg_out;
  std::vector<std::string> rg_regions;
  std::size_t rg_n = 20;
  region_cmd->add_option("--proj", rg_proj)->required()->check(CLI::ExistingFile);
  region_cmd->add_option("--region", rg_regions, "PC:lo:hi with 1-based PC, repeatable")
      ->required();
  region_cmd->add_option("--n", rg_n, "Sample size")->check(CLI::PositiveNumber)->capture_default_str();
  region_cmd->add_option("--out", rg_out, "Token list (default: stdout)");

  // analyze
  auto* an_cmd = app.add_subcommand("analyze", "PCA + correlation + histograms + scatter");
  AnalyzeOptions aopt;
  fs::path an_out;
  fs::path an_manifest;
  an_cmd->add_option("--emb", aopt.embeddings)->check(CLI::ExistingFile);
  an_cmd->add_option("--lexicon", aopt.lexicon)->check(CLI::ExistingFile);
  an_cmd->add_option("--k", aopt.k, "Components (default min(10, D))");
  an_cmd->add_option("--bins", aopt.bins)->check(CLI::PositiveNumber)->capture_default_str();
  an_cmd->add_option("--max-points", aopt.max_points)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  an_cmd->add_flag("--keep-multivalent", aopt.keep_multivalent);
  an_cmd->add_flag("--restrict-pca", aopt.restrict_pca, "Fit PCA on lexicon tokens only");
  an_cmd->add_option("--out", an_out, "Output directory")->required();
  an_cmd->add_option("--from-manifest", an_manifest, "Re-run with the config of a manifest")
      ->check(CLI::ExistingFile);

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Write a planted-structure fixture");
  std::string synth_kind;
  fs::path synth_out;
  std::vector<std::string> synth_params;
  synth_cmd->add_option("--kind", synth_kind)->required()->check(CLI::IsMember(synth::kinds()));
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();
  synth_cmd->add_option("--param", synth_params, "key=value generator override, repeatable");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: usage: %s\n", one_line(e.what()).c_str());
    return 2;
  }

  try {
    const VectorFormat fmt = parse_format(g.format);
    Eigen::setNbThreads(static_cast<int>(g.threads));

    if (*sgns_cmd) {
      scfg.window_semantics = parse_window_semantics(semantics);
      scfg.seed = g.seed;
      scfg.deterministic = !nondeterministic;
      scfg.threads = g.threads;
      RunManifest manifest("train-sgns", g.seed);
      manifest.add_input("corpus", corpus_path);
      const auto corpus = build_vocab(corpus_path, scfg.min_count);
      const auto result = train_sgns(corpus, scfg);
      ensure_parent(sgns_out);
      write_embeddings(result.embeddings, sgns_out, fmt, 9);
      manifest.config() = {{"corpus", corpus_path.string()},
                           {"dim", scfg.dim},
                           {"window", scfg.window},
                           {"window_semantics", semantics},
                           {"negatives", scfg.negatives},
                           {"epochs", scfg.epochs},
                           {"learning_rate", scfg.learning_rate},
                           {"min_count", scfg.min_count},
                           {"subsample", scfg.subsample_threshold},
                           {"negative_power", scfg.negative_power},
                           {"deterministic", scfg.deterministic},
                           {"format", format_name(fmt)}};
      manifest.note("epoch_loss", result.epoch_loss);
      manifest.note("vocabulary", corpus.size());
      manifest.add_output(sgns_out);
      manifest.write(manifest_for(sgns_out));
      return 0;
    }

    if (*pca_cmd) {
      const auto emb = load_embeddings(pca_input, fmt);
      RunManifest manifest("pca", g.seed);
      manifest.add_input("input", pca_input);
      PcaModel model;
      if (pca_restrict) {
        if (pca_lexicon.empty()) throw Error("--restrict-pca requires --lexicon");
        manifest.add_input("lexicon", pca_lexicon);
        model = fit_for_analysis(emb, load_lexicon(pca_lexicon), pca_k, true);
      } else {
        model = fit_for_analysis(emb, Lexicon{}, pca_k, false);
      }
      ensure_parent(pca_out);
      save_pca(model, pca_out);
      manifest.add_output(pca_out);
      if (!pca_proj_out.empty()) {
        ensure_parent(pca_proj_out);
        write_embeddings(as_embeddings(project(model, emb, pca_input.string())), pca_proj_out,
                         VectorFormat::Auto, 17);
        manifest.add_output(pca_proj_out);
      }
      manifest.config() = {{"input", pca_input.string()},
                           {"k", model.k()},
                           {"restrict_pca", pca_restrict},
                           {"format", format_name(fmt)}};
      manifest.note("explained_variance", to_std(model.explained_variance));
      manifest.note("degenerate_spectrum", model.degenerate);
      manifest.write(manifest_for(pca_out));
      return 0;
    }

    if (*corr_cmd) {
      RunManifest manifest("correlate", g.seed);
      manifest.add_input("proj", corr_proj);
      manifest.add_input("lexicon", corr_lexicon);
      const auto s = load_structure(corr_proj, corr_lexicon, corr_keep);
      const auto cm = correlate(s.projection, s.indicators);
      ensure_parent(corr_out);
      write_correlation_csv(cm, corr_out);
      auto svg = corr_out;
      write_correlation_svg(cm, svg.replace_extension(".svg"));
      manifest.add_output(corr_out);
      manifest.add_output(svg);
      manifest.config() = {{"proj", corr_proj.string()},
                           {"lexicon", corr_lexicon.string()},
                           {"keep_multivalent", corr_keep},
                           {"permutations", corr_perm}};
      manifest.note("constant_tags", s.constant_tags);
      if (const auto peak = cm.max_abs()) {
        nlohmann::json peak_json = {{"tag", cm.tags()[peak->tag]},
                                    {"component", peak->component + 1},
                                    {"r", peak->r}};
        if (corr_perm > 0) {
          const Eigen::VectorXd col =
              s.projection.coords.col(static_cast<Eigen::Index>(peak->component));
          const auto& ind = s.indicators[peak->tag].values;
          const auto null = permutation_null(
              std::span<const double>(col.data(), static_cast<std::size_t>(col.size())),
              std::span<const double>(ind.data(), static_cast<std::size_t>(ind.size())),
              corr_perm, g.seed);
          peak_json["null_q95"] = quantile_sorted(null, 0.95);
        }
        manifest.note("max_abs_r", peak_json);
      }
      manifest.write(manifest_for(corr_out));
      return 0;
    }

    if (*probe_cmd) {
      pcfg.seed = g.seed;
      pcfg.threads = g.threads;
      RunManifest manifest("probe", g.seed);
      manifest.add_input("emb", probe_emb);
      manifest.add_input("lexicon", probe_lexicon);
      const auto emb = load_embeddings(probe_emb, fmt);
      const auto lex = filter_univalent(load_lexicon(probe_lexicon));
      const auto report = crossvalidate(emb, lex, pcfg);
      ensure_parent(probe_report);
      std::ofstream(probe_report) << nlohmann::json(report).dump(2) << '\n';
      manifest.config() = {{"emb", probe_emb.string()},
                           {"lexicon", probe_lexicon.string()},
                           {"probe", pcfg},
                           {"format", format_name(fmt)}};
      manifest.add_output(probe_report);
      manifest.write(manifest_for(probe_report));
      std::printf("%s\n", report.summary().c_str());
      return 0;
    }

    if (*hist_cmd) {
      RunManifest manifest("histogram", g.seed);
      manifest.add_input("proj", hist_proj);
      manifest.add_input("lexicon", hist_lexicon);
      const auto s = load_structure(hist_proj, hist_lexicon, hist_keep);
      const auto classes = pick_classes(s, hist_tags);
      const auto h = histogram(s.projection, s.indicators, hist_comp - 1, hist_bins, classes);
      ensure_parent(hist_out);
      write_histogram_csv(h, hist_out);
      auto svg = hist_out;
      write_histogram_svg(h, svg.replace_extension(".svg"));
      manifest.config() = {{"proj", hist_proj.string()}, {"lexicon", hist_lexicon.string()},
                           {"component", hist_comp},     {"bins", hist_bins},
                           {"tags", h.tags},             {"keep_multivalent", hist_keep}};
      manifest.add_output(hist_out);
      manifest.add_output(svg);
      manifest.write(manifest_for(hist_out));
      return 0;
    }

    if (*scatter_cmd) {
      RunManifest manifest("scatter", g.seed);
      manifest.add_input("proj", sc_proj);
      if (!sc_lexicon.empty()) manifest.add_input("lexicon", sc_lexicon);
      const auto s = load_structure(sc_proj, sc_lexicon, sc_keep);
      const auto classes = pick_classes(s, sc_tags);
      ensure_parent(sc_out);
      auto stem = sc_out;
      stem.replace_extension();
      scatter_export(s.projection, s.indicators, classes, sc_x - 1, sc_y - 1, stem, sc_max,
                     g.seed);
      manifest.config() = {{"proj", sc_proj.string()},     {"lexicon", sc_lexicon.string()},
                           {"x", sc_x},                    {"y", sc_y},
                           {"max_points", sc_max},         {"keep_multivalent", sc_keep}};
      manifest.add_output(stem.string() + ".csv");
      manifest.add_output(stem.string() + ".svg");
      manifest.write(manifest_for(sc_out));
      return 0;
    }

    if (*region_cmd) {
      const auto proj = from_embeddings(load_embeddings(rg_proj));
      RegionQuery q;
      for (const auto& r : rg_regions) q.constraints.push_back(parse_interval(r));
      q.sample_size = rg_n;
      q.seed = g.seed;
      const auto sample = sample_region(proj, q);
      if (rg_out.empty()) {
        for (const auto& t : sample.tokens) std::printf("%s\n", t.c_str());
      } else {
        ensure_parent(rg_out);
        std::ofstream out(rg_out);
        for (const auto& t : sample.tokens) out << t << '\n';
        RunManifest manifest("sample-region", g.seed);
        manifest.add_input("proj", rg_proj);
        manifest.config() = {{"proj", rg_proj.string()}, {"regions", rg_regions}, {"n", rg_n}};
        manifest.note("matches", sample.matches);
        manifest.add_output(rg_out);
        manifest.write(manifest_for(rg_out));
      }
      std::fprintf(stderr, "status=%s matches=%zu sampled=%zu\n",
                   sample.status == RegionStatus::Ok ? "ok" : "empty-region", sample.matches,
                   sample.tokens.size());
      return 0;
    }

    if (*an_cmd) {
      if (!an_manifest.empty()) {
        const auto doc = read_manifest(an_manifest);
        if (doc.at("command") != "analyze") throw Error("manifest is not from analyze");
        aopt = analyze_options_from_json(doc.at("config"));
      } else {
        if (aopt.embeddings.empty() || aopt.lexicon.empty()) {
          std::fprintf(stderr, "error: usage: analyze needs --emb and --lexicon or --from-manifest\n");
          return 2;
        }
        aopt.seed = g.seed;
        aopt.threads = g.threads;
        aopt.format = fmt;
      }
      Eigen::setNbThreads(static_cast<int>(aopt.threads));
      const auto result = analyze(aopt, an_out);
      if (const auto peak = result.correlation.max_abs()) {
        std::printf("max |r| = %.6f (%s, PC%zu)\n", std::abs(peak->r),
                    result.correlation.tags()[peak->tag].c_str(), peak->component + 1);
      }
      return 0;
    }

    if (*synth_cmd) {
      nlohmann::json overrides = nlohmann::json::object();
      for (const auto& kv : synth_params) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw Error("--param expects key=value, got '" + kv + "'");
        const auto key = kv.substr(0, eq);
        const auto value = kv.substr(eq + 1);
        try {
          overrides[key] = nlohmann::json::parse(value);
        } catch (const nlohmann::json::exception&) {
          throw Error("--param " + key + ": value '" + value + "' is not a number");
        }
      }
      const auto fixture = synth::generate(synth_kind, overrides, g.seed);
      synth::write_fixture(fixture, synth_out, g.seed);
      RunManifest manifest("synth", g.seed);
      manifest.config() = {{"kind", synth_kind}, {"params", fixture.params}};
      for (const char* f : {"emb.vec", "lexicon.tsv", "truth.tsv", "synth.json"}) {
        manifest.add_output(f);
      }
      manifest.write(synth_out / "manifest.json");
      return 0;
    }
  } catch (const embprobe::Error& e) {
    std::fprintf(stderr, "error: %s\n", one_line(e.what()).c_str());
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: json: %s\n", one_line(e.what()).c_str());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: internal: %s\n", one_line(e.what()).c_str());
    return 1;
  }
  return 0;
}

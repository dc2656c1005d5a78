// Command-line front end for rendering, slicing, noising, segmentation,
// training, decoding and evaluation.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "visrep/config.hpp"
#include "visrep/eval.hpp"
#include "visrep/model.hpp"
#include "visrep/noise.hpp"
#include "visrep/pipeline.hpp"
#include "visrep/render.hpp"
#include "visrep/segmentation.hpp"
#include "visrep/slicer.hpp"
#include "visrep/synthetic.hpp"

namespace fs = std::filesystem;
using namespace visrep;
using nlohmann::json;

namespace {

struct Globals {
  std::optional<uint64_t> seed;
  std::string config;
  std::string out_dir;
};

std::vector<std::string> stdin_lines() {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(std::cin, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> input_lines(const std::string& text, const std::string& input) {
  if (!text.empty()) return {text};
  if (!input.empty()) return read_lines(input);
  return stdin_lines();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path out_dir_or(const Globals& g, const fs::path& fallback) { return g.out_dir.empty() ? fallback : fs::path(g.out_dir); }

struct FontOptions {
  std::string font;
  int size = 10;
  int padding = 0;

  void add(CLI::App* app) {
    app->add_option("--font", font, "TrueType font file (default: bundled DejaVu Sans)");
    app->add_option("--font-size", size, "Font size in points (1pt = 1px)");
    app->add_option("--padding", padding, "Extra pixels between characters");
  }
  RenderConfig config() const {
    RenderConfig rc;
    rc.font_path = font.empty() ? default_font_path() : fs::path(font);
    rc.font_size = size;
    rc.inter_char_padding = padding;
    return rc;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"visrep: visual text representations for translation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Seed override");
  app.add_option("--config", g.config, "Run configuration (JSON)");
  app.add_option("--out-dir", g.out_dir, "Output directory");

  // render
  auto* render_cmd = app.add_subcommand("render", "Rasterize lines of text to PGM images");
  FontOptions render_font;
  render_font.add(render_cmd);
  std::string render_text, render_input, render_out;
  render_cmd->add_option("--text", render_text, "Text to render (default: stdin lines)");
  render_cmd->add_option("--input", render_input, "File with one sentence per line");
  render_cmd->add_option("-o,--out", render_out, "Output PGM for a single line");

  // slice
  auto* slice_cmd = app.add_subcommand("slice", "Render text and cut it into overlapping windows");
  FontOptions slice_font;
  slice_font.add(slice_cmd);
  SliceConfig slice_cfg;
  std::string slice_text;
  slice_cmd->add_option("--text", slice_text, "Text to slice (default: first stdin line)");
  slice_cmd->add_option("--window", slice_cfg.window, "Window width in pixels");
  slice_cmd->add_option("--stride", slice_cfg.stride, "Stride in pixels");

  // noise
  auto* noise_cmd = app.add_subcommand("noise", "Inject token-level noise into stdin lines");
  std::string noise_kind = "swap", noise_table, noise_marks = "default";
  double noise_p = 0.0, noise_char_p = 1.0;
  uint64_t noise_seed = 0;
  noise_cmd->add_option("--kind", noise_kind, "swap | cambridge | mapchars | marks");
  noise_cmd->add_option("--p", noise_p, "Per-token probability");
  noise_cmd->add_option("--seed", noise_seed, "Noise seed");
  noise_cmd->add_option("--table", noise_table, "FROM<TAB>TO table for mapchars");
  noise_cmd->add_option("--marks", noise_marks, "Combining marks: default | arabic");
  noise_cmd->add_option("--char-p", noise_char_p, "Per-character probability inside a selected token");

  // bpe
  auto* bpe_cmd = app.add_subcommand("bpe", "Learn or apply a BPE model");
  bpe_cmd->require_subcommand(1);
  auto* bpe_train_cmd = bpe_cmd->add_subcommand("train", "Learn merges from stdin");
  int bpe_merges = 500;
  std::string bpe_out, bpe_model_path;
  bpe_train_cmd->add_option("--merges", bpe_merges, "Number of merges");
  bpe_train_cmd->add_option("-o,--out", bpe_out, "Model file (default: stdout)");
  auto* bpe_apply_cmd = bpe_cmd->add_subcommand("apply", "Segment stdin lines");
  double bpe_dropout = 0.0;
  uint64_t bpe_seed = 0;
  bpe_apply_cmd->add_option("--model", bpe_model_path, "Model file")->required();
  bpe_apply_cmd->add_option("--dropout", bpe_dropout, "Merge dropout probability");
  bpe_apply_cmd->add_option("--seed", bpe_seed, "Dropout seed");

  // gen-corpus
  auto* gen_cmd = app.add_subcommand("gen-corpus", "Write a synthetic parallel corpus");
  std::string gen_task = "copy";
  int gen_train = 2000, gen_dev = 200, gen_test = 200, gen_lexicon = 200;
  uint64_t gen_seed = 1;
  gen_cmd->add_option("--task", gen_task, "copy | reverse | mapped-lexicon");
  gen_cmd->add_option("--size", gen_train, "Training pairs");
  gen_cmd->add_option("--dev-size", gen_dev, "Dev pairs");
  gen_cmd->add_option("--test-size", gen_test, "Test pairs");
  gen_cmd->add_option("--lexicon-size", gen_lexicon, "Words in the mapped lexicon");
  gen_cmd->add_option("--seed", gen_seed, "Generator seed");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model from a run configuration");

  // translate
  auto* translate_cmd = app.add_subcommand("translate", "Greedy-decode stdin lines");
  std::string model_dir;
  translate_cmd->add_option("--model", model_dir, "Checkpoint directory")->required();

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Score hypotheses, or sweep a model over noise levels");
  std::string eval_hyp, eval_ref, eval_src, eval_model, eval_kind, eval_table;
  std::vector<double> eval_ps;
  std::vector<uint64_t> eval_seeds{1, 2, 3};
  eval_cmd->add_option("--hyp", eval_hyp, "Hypothesis file");
  eval_cmd->add_option("--ref", eval_ref, "Reference file")->required();
  eval_cmd->add_option("--src", eval_src, "Source file (decode with --model)");
  eval_cmd->add_option("--model", eval_model, "Checkpoint directory");
  eval_cmd->add_option("--kind", eval_kind, "Noise kind for a degradation sweep");
  eval_cmd->add_option("--table", eval_table, "Table for mapchars noise");
  eval_cmd->add_option("--p-values", eval_ps, "Noise grid (default 0.0..1.0 by 0.1)");
  eval_cmd->add_option("--seeds", eval_seeds, "Noise seeds");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a hyperparameter grid");
  std::string grid_path;
  sweep_cmd->add_option("--grid", grid_path, "Grid JSON: {\"axes\": {\"window\": [...], ...}}")->required();

  // pixel-stats
  auto* stats_cmd = app.add_subcommand("pixel-stats", "Mean ink density of rendered stdin lines");
  FontOptions stats_font;
  stats_font.add(stats_cmd);

  // run
  auto* run_cmd = app.add_subcommand("run", "Train and evaluate from a run configuration");

  CLI11_PARSE(app, argc, argv);

  auto load_run_config = [&]() {
    if (g.config.empty()) throw ConfigError("--config is required");
    const std::string text = read_file(g.config);
    RunConfig cfg;
    try {
      cfg = run_config_from_json(json::parse(text));
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    if (g.seed) {
      // The stored copy must describe the run that actually happens.
      cfg.model.seed = *g.seed;
      cfg.train.seed = *g.seed;
      return std::make_pair(cfg, dump_json(to_json(cfg)));
    }
    return std::make_pair(cfg, text);
  };
  auto config_dir = [&]() { return fs::absolute(g.config).parent_path(); };

  try {
    if (*render_cmd) {
      const RenderConfig rc = render_font.config();
      const Font font = Font::load(rc.font_path, rc.font_size);
      const auto lines = input_lines(render_text, render_input);
      if (!render_out.empty() && lines.size() == 1) {
        const LineImage img = render_line(lines[0], font, rc);
        write_pgm(render_out, img);
        std::cout << img.height << 'x' << img.width << '\n';
      } else {
        const fs::path dir = out_dir_or(g, ".");
        fs::create_directories(dir);
        for (size_t i = 0; i < lines.size(); ++i) {
          const LineImage img = render_line(lines[i], font, rc);
          write_pgm(dir / ("line-" + std::to_string(i) + ".pgm"), img);
          std::cout << i << '\t' << img.height << 'x' << img.width << '\n';
        }
      }
    } else if (*slice_cmd) {
      slice_cfg.validate();
      RenderConfig rc = slice_font.config();
      rc.min_width = slice_cfg.window;
      const Font font = Font::load(rc.font_path, rc.font_size);
      std::string text = slice_text;
      if (text.empty()) {
        const auto lines = stdin_lines();
        if (!lines.empty()) text = lines[0];
      }
      const SliceSequence seq = slice_image(render_line(text, font, rc), slice_cfg);
      std::cout << "slices " << seq.count << " height " << seq.height << " window " << seq.window << " width "
                << seq.source_width << '\n';
      if (!g.out_dir.empty()) {
        fs::create_directories(g.out_dir);
        for (int i = 0; i < seq.count; ++i) {
          std::ofstream out(fs::path(g.out_dir) / ("slice-" + std::to_string(i) + ".pgm"), std::ios::binary);
          write_pgm(out, seq.height, seq.window, seq.slice(i));
        }
      }
    } else if (*noise_cmd) {
      NoiseEntry entry;
      entry.kind = parse_noise_kind(noise_kind);
      entry.table = noise_table;
      entry.marks = noise_marks;
      entry.char_p = noise_char_p;
      NoiseSpec spec = entry.to_spec();
      spec.p = noise_p;
      spec.seed = g.seed.value_or(noise_seed);
      spec.validate();
      NoiseReport total;
      uint64_t index = 0;
      for (const auto& line : stdin_lines()) {
        const NoisedText r = inject(line, spec, index++);
        std::cout << r.text << '\n';
        total += r.report;
      }
      std::cerr << json{{"tokens_total", total.tokens_total},
                        {"tokens_eligible", total.tokens_eligible},
                        {"tokens_noised", total.tokens_noised},
                        {"effective_rate", total.effective_rate()}}
                       .dump()
                << '\n';
    } else if (*bpe_train_cmd) {
      const BpeModel model = BpeModel::train(stdin_lines(), bpe_merges);
      if (bpe_out.empty()) {
        model.write(std::cout);
      } else {
        model.save(bpe_out);
      }
    } else if (*bpe_apply_cmd) {
      const BpeModel model = BpeModel::load(bpe_model_path);
      uint64_t index = 0;
      for (const auto& line : stdin_lines()) {
        Rng line_rng(derive_seed(g.seed.value_or(bpe_seed), index++));
        const TokenSequence seq = bpe_dropout > 0 ? model.apply_dropout(line, bpe_dropout, line_rng) : model.apply(line);
        for (size_t i = 0; i < seq.size(); ++i) std::cout << (i ? " " : "") << seq.symbol(i);
        std::cout << '\n';
      }
    } else if (*gen_cmd) {
      SyntheticOptions opts = default_synthetic_options(parse_synthetic_task(gen_task));
      opts.lexicon_size = gen_lexicon;
      const auto corpus = generate_synthetic(opts, gen_train, gen_dev, gen_test, g.seed.value_or(gen_seed));
      const fs::path dir = out_dir_or(g, ".");
      write_synthetic(corpus, dir);
      std::cout << "wrote " << corpus.train.size() << '/' << corpus.dev.size() << '/' << corpus.test.size()
                << " pairs to " << dir.string() << '\n';
    } else if (*train_cmd) {
      auto [cfg, text] = load_run_config();
      if (!g.out_dir.empty()) cfg.run_dir = g.out_dir;
      if (cfg.run_dir.empty()) throw ConfigError("no run directory: set run_dir or --out-dir");
      cfg.noise.clear();
      fs::path run_dir = cfg.run_dir;
      if (g.out_dir.empty() && run_dir.is_relative()) run_dir = config_dir() / run_dir;
      const RunSummary s = run(cfg, text, run_dir, config_dir(), &std::cerr);
      std::cout << "final dev BLEU " << s.final_dev_bleu << " after " << s.steps << " steps; checkpoint in "
                << (s.run_dir / "checkpoint").string() << '\n';
    } else if (*translate_cmd) {
      auto model = Translator::load(model_dir);
      for (const auto& line : stdin_lines()) std::cout << model->translate(line).text << '\n';
    } else if (*eval_cmd) {
      const auto refs = read_lines(eval_ref);
      if (!eval_kind.empty()) {
        if (eval_model.empty() || eval_src.empty()) throw std::invalid_argument("a sweep needs --model and --src");
        auto model = Translator::load(eval_model);
        NoiseEntry entry;
        entry.kind = parse_noise_kind(eval_kind);
        entry.table = eval_table;
        const NoiseSpec spec = entry.to_spec();
        const auto ps = eval_ps.empty() ? default_p_grid() : eval_ps;
        const auto curve = degradation_sweep(*model, read_lines(eval_src), refs, spec, ps, eval_seeds,
                                             nn::to_string(model->config().frontend));
        write_curve_csv(std::cout, {curve});
        if (!g.out_dir.empty()) {
          fs::create_directories(g.out_dir);
          write_curve_csv(fs::path(g.out_dir) / (to_string(entry.kind) + ".csv"), {curve});
          write_curve_svg(fs::path(g.out_dir) / (to_string(entry.kind) + ".svg"), {curve},
                          "BLEU vs p (" + to_string(entry.kind) + ")");
        }
      } else {
        std::vector<std::string> hyps;
        if (!eval_hyp.empty()) {
          hyps = read_lines(eval_hyp);
        } else if (!eval_model.empty() && !eval_src.empty()) {
          hyps = Translator::load(eval_model)->translate_all(read_lines(eval_src));
        } else {
          hyps = stdin_lines();
        }
        const BleuScore s = corpus_bleu(hyps, refs);
        std::cout << json{{"bleu", s.bleu},
                          {"precisions", s.precisions},
                          {"brevity_penalty", s.brevity_penalty},
                          {"hyp_length", s.hyp_length},
                          {"ref_length", s.ref_length}}
                         .dump()
                  << '\n';
      }
    } else if (*sweep_cmd) {
      auto [cfg, text] = load_run_config();
      const SweepGrid grid = sweep_grid_from_json(read_json_file(grid_path));
      const fs::path dir = out_dir_or(g, cfg.run_dir.empty() ? fs::path("sweep") : fs::path(cfg.run_dir));
      const auto cells = sweep(grid, cfg, dir, config_dir(), &std::cerr);
      std::cout << read_file(dir / "sweep.csv");
      (void)cells;
    } else if (*stats_cmd) {
      const RenderConfig rc = stats_font.config();
      const Font font = Font::load(rc.font_path, rc.font_size);
      std::vector<LineImage> images;
      for (const auto& line : stdin_lines()) images.push_back(render_line(line, font, rc));
      const PixelStats s = pixel_stats(images);
      std::cout << json{{"avg_density", s.avg_density}, {"nonwhite_fraction", s.nonwhite_fraction}, {"lines", images.size()}}
                       .dump()
                << '\n';
    } else if (*run_cmd) {
      auto [cfg, text] = load_run_config();
      if (!g.out_dir.empty()) cfg.run_dir = g.out_dir;
      if (cfg.run_dir.empty()) throw ConfigError("no run directory: set run_dir or --out-dir");
      fs::path run_dir = cfg.run_dir;
      if (g.out_dir.empty() && run_dir.is_relative()) run_dir = config_dir() / run_dir;
      const RunSummary s = run(cfg, text, run_dir, config_dir(), &std::cerr);
      std::cout << "run complete: " << s.run_dir.string() << " (dev BLEU " << s.final_dev_bleu << ", test BLEU "
                << s.clean_test_bleu << ")\n";
    }
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: [config] " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

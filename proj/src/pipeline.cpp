#include "visrep/pipeline.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

#include "visrep/model.hpp"
#include "visrep/synthetic.hpp"

namespace visrep {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

template <typename F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string format_value(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

}  // namespace

RunSummary run(const RunConfig& cfg, const std::string& config_text, const fs::path& run_dir, const fs::path& base_dir,
               std::ostream* log) {
  RunSummary summary;
  summary.run_dir = run_dir;
  stage("config", [&] {
    cfg.validate();
    if (!run_dir.parent_path().empty()) fs::create_directories(run_dir.parent_path());
    if (!fs::create_directory(run_dir)) throw std::runtime_error("run directory already exists: " + run_dir.string());
    write_file(run_dir / "config.json", config_text);
    return 0;
  });

  ParallelCorpus train_pairs, dev, test;
  stage("data", [&] {
    if (cfg.generate) {
      const auto& g = *cfg.generate;
      const auto corpus = generate_synthetic(default_synthetic_options(parse_synthetic_task(g.task)), g.train_size,
                                             g.dev_size, g.test_size, g.seed);
      write_synthetic(corpus, run_dir / "data");
      train_pairs = corpus.train;
      dev = corpus.dev;
      test = corpus.test;
    } else {
      const auto& c = *cfg.corpus;
      train_pairs = ParallelCorpus::load(resolve(base_dir, c.train_src), resolve(base_dir, c.train_tgt));
      dev = ParallelCorpus::load(resolve(base_dir, c.dev_src), resolve(base_dir, c.dev_tgt));
      test = ParallelCorpus::load(resolve(base_dir, c.test_src), resolve(base_dir, c.test_tgt));
    }
    if (train_pairs.size() == 0) throw std::runtime_error("training corpus is empty");
    if (cfg.eval.test_limit > 0 && test.size() > static_cast<size_t>(cfg.eval.test_limit)) {
      test.src.resize(static_cast<size_t>(cfg.eval.test_limit));
      test.tgt.resize(static_cast<size_t>(cfg.eval.test_limit));
    }
    return 0;
  });

  ModelConfig model_cfg = cfg.model;
  if (!model_cfg.render.font_path.empty()) model_cfg.render.font_path = resolve(base_dir, model_cfg.render.font_path.string());
  std::unique_ptr<Translator> model = stage("model", [&] { return Translator::create(model_cfg, train_pairs); });
  if (log) *log << "model: " << nn::to_string(model_cfg.frontend) << ", " << model->parameter_count() << " parameters\n";

  stage("train", [&] {
    std::ofstream metrics(run_dir / "metrics.jsonl", std::ios::binary);
    if (!metrics) throw std::runtime_error("cannot write metrics.jsonl");
    const TrainResult r = train(*model, train_pairs, dev, cfg.train, [&](const MetricRow& row) {
      metrics << nlohmann::ordered_json{{"step", row.step}, {"train_loss", row.train_loss}, {"dev_bleu", row.dev_bleu}}.dump() << '\n';
      metrics.flush();
      if (log) {
        *log << "step " << row.step << "  loss " << std::fixed << std::setprecision(4) << row.train_loss << "  dev BLEU "
             << std::setprecision(2) << row.dev_bleu << std::defaultfloat << '\n';
      }
    });
    summary.final_dev_bleu = r.final_dev_bleu;
    summary.steps = r.steps;
    return 0;
  });

  stage("checkpoint", [&] {
    model->save(run_dir / "checkpoint");
    return 0;
  });

  stage("evaluate", [&] {
    summary.clean_test_bleu = corpus_bleu(model->translate_all(test.src), test.tgt).bleu;
    if (!cfg.noise.empty()) fs::create_directories(run_dir / "curves");
    std::set<std::string> used;
    for (const auto& entry : cfg.noise) {
      const NoiseSpec spec = entry.to_spec(base_dir);
      DegradationCurve curve = degradation_sweep(*model, test.src, test.tgt, spec, cfg.eval.p_values, cfg.eval.seeds,
                                                 nn::to_string(model_cfg.frontend));
      std::string name = to_string(entry.kind);
      for (int k = 2; used.count(name); ++k) name = to_string(entry.kind) + "-" + std::to_string(k);
      used.insert(name);
      write_curve_csv(run_dir / "curves" / (name + ".csv"), {curve});
      write_curve_svg(run_dir / "curves" / (name + ".svg"), {curve}, "BLEU vs p (" + name + ")");
      if (log) {
        *log << "curve " << name << std::fixed << std::setprecision(2) << ": clean " << curve.points.front().bleu
             << ", p=" << curve.points.back().p << " " << curve.points.back().bleu << std::defaultfloat << '\n';
      }
      summary.curves.push_back(std::move(curve));
    }
    json s{{"final_dev_bleu", summary.final_dev_bleu},
           {"clean_test_bleu", summary.clean_test_bleu},
           {"steps", summary.steps},
           {"parameters", model->parameter_count()}};
    write_file(run_dir / "summary.json", dump_json(s));
    return 0;
  });
  return summary;
}

std::vector<SweepCell> sweep(const SweepGrid& grid, const RunConfig& base, const fs::path& out_dir,
                             const fs::path& base_dir, std::ostream* log) {
  const auto points = grid.expand();
  fs::create_directories(out_dir);
  std::vector<SweepCell> cells;
  for (size_t k = 0; k < points.size(); ++k) {
    SweepCell cell;
    cell.point = points[k];
    try {
      RunConfig cfg = base;
      apply_sweep_point(cfg, cell.point);
      cfg.run_dir.clear();
      const RunSummary s = run(cfg, dump_json(to_json(cfg)), out_dir / ("point-" + std::to_string(k)), base_dir, nullptr);
      cell.dev_bleu = s.final_dev_bleu;
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
    if (log) {
      *log << "point " << k;
      for (const auto& [name, v] : cell.point) *log << ' ' << name << '=' << v;
      *log << (cell.dev_bleu ? " dev BLEU " + format_value(*cell.dev_bleu) : " failed: " + cell.error) << '\n';
    }
    cells.push_back(std::move(cell));
  }

  std::ostringstream csv;
  for (const auto& [name, values] : grid.axes) csv << name << ',';
  csv << "dev_bleu\n";
  for (const auto& c : cells) {
    for (const auto& [name, v] : c.point) csv << format_value(v) << ',';
    if (c.dev_bleu) csv << std::fixed << std::setprecision(2) << *c.dev_bleu << std::defaultfloat;
    csv << '\n';
  }
  write_file(out_dir / "sweep.csv", csv.str());

  if (grid.axes.size() == 2 && grid.axes.count("window") && grid.axes.count("stride")) {
    const auto& windows = grid.axes.at("window");
    const auto& strides = grid.axes.at("stride");
    std::ostringstream g;
    g << "window\\stride";
    for (double s : strides) g << ',' << format_value(s);
    g << '\n';
    for (double w : windows) {
      g << format_value(w);
      for (double s : strides) {
        g << ',';
        for (const auto& c : cells) {
          if (c.point.at("window") == w && c.point.at("stride") == s && c.dev_bleu) {
            g << std::fixed << std::setprecision(2) << *c.dev_bleu << std::defaultfloat;
          }
        }
      }
      g << '\n';
    }
    write_file(out_dir / "grid.csv", g.str());
  }
  return cells;
}

}  // namespace visrep

#include "visrep/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace visrep {

using nlohmann::json;

namespace {

/// Pulls typed fields out of one JSON object and rejects leftovers.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) fail("", "must be an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  void get(const char* key, int& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer()) fail(key, "must be an integer");
      out = v->get<int>();
    }
  }
  void get(const char* key, uint64_t& out) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() && v->get<long long>() < 0))
        fail(key, "must be a non-negative integer");
      out = v->get<uint64_t>();
    }
  }
  void get(const char* key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) fail(key, "must be a number");
      out = v->get<double>();
    }
  }
  void get(const char* key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) fail(key, "must be a string");
      out = v->get<std::string>();
    }
  }
  const json* object(const char* key) {
    const json* v = take(key);
    if (v && !v->is_object()) fail(key, "must be an object");
    return v;
  }
  const json* array(const char* key) {
    const json* v = take(key);
    if (v && !v->is_array()) fail(key, "must be an array");
    return v;
  }

  std::string path(const char* key) const { return where_.empty() ? key : where_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(it.key().c_str(), "is not a recognized key");
    }
  }

  [[noreturn]] void fail(const char* key, const std::string& what) const {
    const std::string name = *key ? path(key) : (where_.empty() ? "document" : where_);
    throw ConfigError("config: '" + name + "' " + what);
  }

 private:
  const json* take(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <typename F>
auto checked(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError("config: " + where + ": " + e.what());
  }
}

}  // namespace

json to_json(const ModelConfig& c) {
  return json{
      {"frontend", nn::to_string(c.frontend)},
      {"layers", c.layers},
      {"heads", c.heads},
      {"d_model", c.d_model},
      {"d_ff", c.d_ff},
      {"label_smoothing", c.label_smoothing},
      {"max_len", c.max_len},
      {"seed", c.seed},
      {"render",
       {{"font", c.render.font_path.string()},
        {"font_size", c.render.font_size},
        {"inter_char_padding", c.render.inter_char_padding}}},
      {"slice", {{"window", c.slice.window}, {"stride", c.slice.stride}}},
      {"embedder", {{"blocks", c.embedder.blocks}, {"kernel", c.embedder.kernel}, {"channels", c.embedder.channels}}},
      {"source",
       {{"segmentation", to_string(c.source.mode)},
        {"merges", c.source.merges},
        {"ngram", c.source.ngram},
        {"ngram_stride", c.source.ngram_stride},
        {"bpe_dropout", c.source.bpe_dropout}}},
      {"target", {{"segmentation", to_string(c.target.mode)}, {"merges", c.target.merges}}},
  };
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  Reader r(j, "model");
  std::string s = nn::to_string(c.frontend);
  r.get("frontend", s);
  c.frontend = checked("model.frontend", [&] { return nn::parse_frontend(s); });
  r.get("layers", c.layers);
  r.get("heads", c.heads);
  r.get("d_model", c.d_model);
  r.get("d_ff", c.d_ff);
  r.get("label_smoothing", c.label_smoothing);
  r.get("max_len", c.max_len);
  r.get("seed", c.seed);
  if (const json* o = r.object("render")) {
    Reader rr(*o, "model.render");
    std::string font;
    rr.get("font", font);
    c.render.font_path = font;
    rr.get("font_size", c.render.font_size);
    rr.get("inter_char_padding", c.render.inter_char_padding);
    rr.finish();
  }
  if (const json* o = r.object("slice")) {
    Reader rs(*o, "model.slice");
    rs.get("window", c.slice.window);
    rs.get("stride", c.slice.stride);
    rs.finish();
  }
  if (const json* o = r.object("embedder")) {
    Reader re(*o, "model.embedder");
    re.get("blocks", c.embedder.blocks);
    re.get("kernel", c.embedder.kernel);
    re.get("channels", c.embedder.channels);
    re.finish();
  }
  if (const json* o = r.object("source")) {
    Reader rs(*o, "model.source");
    std::string mode = to_string(c.source.mode);
    rs.get("segmentation", mode);
    c.source.mode = checked("model.source.segmentation", [&] { return parse_seg_mode(mode); });
    rs.get("merges", c.source.merges);
    rs.get("ngram", c.source.ngram);
    rs.get("ngram_stride", c.source.ngram_stride);
    rs.get("bpe_dropout", c.source.bpe_dropout);
    rs.finish();
  }
  if (const json* o = r.object("target")) {
    Reader rt(*o, "model.target");
    std::string mode = to_string(c.target.mode);
    rt.get("segmentation", mode);
    c.target.mode = checked("model.target.segmentation", [&] { return parse_seg_mode(mode); });
    rt.get("merges", c.target.merges);
    rt.finish();
  }
  r.finish();
  checked("model", [&] {
    c.validate();
    return 0;
  });
  return c;
}

json to_json(const TrainConfig& c) {
  return json{{"batch_size", c.batch_size},   {"lr", c.lr},
              {"max_steps", c.max_steps},     {"eval_every", c.eval_every},
              {"seed", c.seed},               {"clip_norm", c.clip_norm},
              {"warmup_steps", c.warmup_steps}, {"stop_at_bleu", c.stop_at_bleu},
              {"dev_limit", c.dev_limit}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  Reader r(j, "train");
  r.get("batch_size", c.batch_size);
  r.get("lr", c.lr);
  r.get("max_steps", c.max_steps);
  r.get("eval_every", c.eval_every);
  r.get("seed", c.seed);
  r.get("clip_norm", c.clip_norm);
  r.get("warmup_steps", c.warmup_steps);
  r.get("stop_at_bleu", c.stop_at_bleu);
  r.get("dev_limit", c.dev_limit);
  r.finish();
  checked("train", [&] {
    c.validate();
    return 0;
  });
  return c;
}

NoiseSpec NoiseEntry::to_spec(const std::filesystem::path& base_dir) const {
  NoiseSpec spec;
  spec.kind = kind;
  spec.char_p = char_p;
  if (kind == NoiseKind::MapChars) {
    std::filesystem::path p = table;
    if (p.is_relative() && !base_dir.empty() && !std::filesystem::exists(p)) p = base_dir / p;
    spec.table = CharTable::load(p);
  }
  if (kind == NoiseKind::Marks) spec.marks = marks == "arabic" ? arabic_marks() : default_marks();
  return spec;
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (corpus.has_value() == generate.has_value())
    throw ConfigError("config: exactly one of 'corpus' and 'generate' must be given");
  if (generate) {
    const auto& g = *generate;
    if (g.task != "copy" && g.task != "reverse" && g.task != "mapped-lexicon")
      throw ConfigError("config: 'generate.task' must be copy, reverse or mapped-lexicon");
    if (g.train_size < 1 || g.dev_size < 1 || g.test_size < 1)
      throw ConfigError("config: 'generate' sizes must be >= 1");
  }
  if (corpus) {
    const auto& c = *corpus;
    for (const std::string* p : {&c.train_src, &c.train_tgt, &c.dev_src, &c.dev_tgt, &c.test_src, &c.test_tgt}) {
      if (p->empty()) throw ConfigError("config: every 'corpus' path must be given");
    }
  }
  for (const auto& n : noise) {
    if (n.kind == NoiseKind::MapChars && n.table.empty())
      throw ConfigError("config: map-chars noise needs a 'table'");
    if (n.marks != "default" && n.marks != "arabic") throw ConfigError("config: 'marks' must be default or arabic");
    if (!(n.char_p >= 0.0 && n.char_p <= 1.0)) throw ConfigError("config: 'char_p' must lie in [0,1]");
  }
  for (size_t i = 0; i < eval.p_values.size(); ++i) {
    const double p = eval.p_values[i];
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("config: 'eval.p_values' must lie in [0,1]");
    if (i > 0 && !(p > eval.p_values[i - 1])) throw ConfigError("config: 'eval.p_values' must be strictly increasing");
  }
  if (!noise.empty() && eval.seeds.empty()) throw ConfigError("config: 'eval.seeds' must not be empty");
  if (eval.test_limit < 0) throw ConfigError("config: 'eval.test_limit' must be >= 0");
}

json to_json(const RunConfig& c) {
  json j;
  j["model"] = to_json(c.model);
  j["train"] = to_json(c.train);
  json noise = json::array();
  for (const auto& n : c.noise) {
    json e{{"kind", to_string(n.kind)}, {"char_p", n.char_p}};
    if (!n.table.empty()) e["table"] = n.table;
    if (n.kind == NoiseKind::Marks) e["marks"] = n.marks;
    noise.push_back(e);
  }
  j["noise"] = noise;
  j["eval"] = json{{"p_values", c.eval.p_values}, {"seeds", c.eval.seeds}, {"test_limit", c.eval.test_limit}};
  if (c.corpus) {
    const auto& p = *c.corpus;
    j["corpus"] = json{{"train_src", p.train_src}, {"train_tgt", p.train_tgt}, {"dev_src", p.dev_src},
                       {"dev_tgt", p.dev_tgt},     {"test_src", p.test_src},   {"test_tgt", p.test_tgt}};
  }
  if (c.generate) {
    const auto& g = *c.generate;
    j["generate"] = json{{"task", g.task},
                         {"train_size", g.train_size},
                         {"dev_size", g.dev_size},
                         {"test_size", g.test_size},
                         {"seed", g.seed}};
  }
  if (!c.run_dir.empty()) j["run_dir"] = c.run_dir;
  return j;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  Reader r(j, "");
  if (const json* m = r.object("model")) c.model = model_config_from_json(*m);
  if (const json* t = r.object("train")) c.train = train_config_from_json(*t);
  if (const json* arr = r.array("noise")) {
    for (size_t i = 0; i < arr->size(); ++i) {
      Reader rn((*arr)[i], "noise[" + std::to_string(i) + "]");
      NoiseEntry e;
      std::string kind;
      rn.get("kind", kind);
      if (kind.empty()) rn.fail("kind", "is required");
      e.kind = checked(rn.path("kind"), [&] { return parse_noise_kind(kind); });
      rn.get("table", e.table);
      rn.get("marks", e.marks);
      rn.get("char_p", e.char_p);
      rn.finish();
      c.noise.push_back(e);
    }
  }
  if (const json* ev = r.object("eval")) {
    Reader re(*ev, "eval");
    if (const json* ps = re.array("p_values")) {
      for (const auto& v : *ps) {
        if (!v.is_number()) re.fail("p_values", "must contain numbers");
        c.eval.p_values.push_back(v.get<double>());
      }
    }
    if (const json* ss = re.array("seeds")) {
      c.eval.seeds.clear();
      for (const auto& v : *ss) {
        if (!v.is_number_unsigned()) re.fail("seeds", "must contain non-negative integers");
        c.eval.seeds.push_back(v.get<uint64_t>());
      }
    }
    re.get("test_limit", c.eval.test_limit);
    re.finish();
  }
  if (const json* o = r.object("corpus")) {
    Reader rc(*o, "corpus");
    CorpusPaths p;
    rc.get("train_src", p.train_src);
    rc.get("train_tgt", p.train_tgt);
    rc.get("dev_src", p.dev_src);
    rc.get("dev_tgt", p.dev_tgt);
    rc.get("test_src", p.test_src);
    rc.get("test_tgt", p.test_tgt);
    rc.finish();
    c.corpus = p;
  }
  if (const json* o = r.object("generate")) {
    Reader rg(*o, "generate");
    SyntheticSpec g;
    rg.get("task", g.task);
    rg.get("train_size", g.train_size);
    rg.get("dev_size", g.dev_size);
    rg.get("test_size", g.test_size);
    rg.get("seed", g.seed);
    rg.finish();
    c.generate = g;
  }
  r.get("run_dir", c.run_dir);
  r.finish();
  if (c.eval.p_values.empty()) c.eval.p_values = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  checked("run", [&] {
    c.validate();
    return 0;
  });
  return c;
}

std::vector<std::map<std::string, double>> SweepGrid::expand() const {
  std::vector<std::map<std::string, double>> points{{}};
  for (const auto& [name, values] : axes) {
    if (values.empty()) throw ConfigError("config: sweep axis '" + name + "' is empty");
    std::vector<std::map<std::string, double>> next;
    for (const auto& base : points) {
      for (double v : values) {
        auto p = base;
        p[name] = v;
        next.push_back(std::move(p));
      }
    }
    points = std::move(next);
  }
  std::vector<std::map<std::string, double>> kept;
  for (auto& p : points) {
    auto w = p.find("window");
    auto s = p.find("stride");
    if (w != p.end() && s != p.end() && w->second < s->second) continue;
    kept.push_back(std::move(p));
  }
  if (kept.empty() || axes.empty()) throw ConfigError("config: sweep grid is empty after applying window >= stride");
  return kept;
}

json to_json(const SweepGrid& grid) {
  json axes = json::object();
  for (const auto& [name, values] : grid.axes) axes[name] = values;
  return json{{"axes", axes}};
}

SweepGrid sweep_grid_from_json(const json& j) {
  static const std::set<std::string> known{"window", "stride", "blocks", "font_size", "lr",
                                           "batch_size", "d_model", "layers", "merges"};
  SweepGrid g;
  Reader r(j, "sweep");
  const json* axes = r.object("axes");
  if (!axes) r.fail("axes", "is required");
  for (auto it = axes->begin(); it != axes->end(); ++it) {
    if (!known.count(it.key())) r.fail(("axes." + it.key()).c_str(), "is not a sweepable setting");
    if (!it->is_array()) r.fail(("axes." + it.key()).c_str(), "must be an array");
    std::vector<double> values;
    for (const auto& v : *it) {
      if (!v.is_number()) r.fail(("axes." + it.key()).c_str(), "must contain numbers");
      values.push_back(v.get<double>());
    }
    g.axes[it.key()] = values;
  }
  r.finish();
  return g;
}

void apply_sweep_point(RunConfig& cfg, const std::map<std::string, double>& point) {
  for (const auto& [name, v] : point) {
    const int iv = static_cast<int>(std::lround(v));
    if (name == "window") cfg.model.slice.window = iv;
    else if (name == "stride") cfg.model.slice.stride = iv;
    else if (name == "blocks") cfg.model.embedder.blocks = iv;
    else if (name == "font_size") cfg.model.render.font_size = iv;
    else if (name == "lr") cfg.train.lr = v;
    else if (name == "batch_size") cfg.train.batch_size = iv;
    else if (name == "d_model") cfg.model.d_model = iv;
    else if (name == "layers") cfg.model.layers = iv;
    else if (name == "merges") cfg.model.source.merges = iv;
    else throw ConfigError("config: unknown sweep axis '" + name + "'");
  }
}

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

}  // namespace visrep

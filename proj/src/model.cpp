#include "visrep/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "visrep/config.hpp"
#include "visrep/eval.hpp"
#include "visrep/nn/optim.hpp"

namespace visrep {

namespace fs = std::filesystem;

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

ParallelCorpus ParallelCorpus::load(const fs::path& src_path, const fs::path& tgt_path) {
  ParallelCorpus c;
  c.src = read_lines(src_path);
  c.tgt = read_lines(tgt_path);
  if (c.src.size() != c.tgt.size()) {
    throw std::runtime_error("corpus line counts differ: " + src_path.string() + " has " +
                             std::to_string(c.src.size()) + ", " + tgt_path.string() + " has " +
                             std::to_string(c.tgt.size()));
  }
  return c;
}

void ParallelCorpus::save(const fs::path& src_path, const fs::path& tgt_path) const {
  write_lines(src_path, src);
  write_lines(tgt_path, tgt);
}

fs::path default_font_path() { return fs::path(VISREP_DATA_DIR) / "fonts" / "DejaVuSans.ttf"; }

void ModelConfig::validate() const {
  if (layers < 0) throw std::invalid_argument("layers must be >= 0");
  if (heads < 1 || d_model < 1 || d_model % heads != 0) throw std::invalid_argument("d_model must be divisible by heads");
  if (d_ff < 1) throw std::invalid_argument("d_ff must be >= 1");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0))
    throw std::invalid_argument("label_smoothing must lie in [0,1)");
  if (max_len < 2) throw std::invalid_argument("max_len must be >= 2");
  slice.validate();
  if (frontend == nn::Frontend::Visual) {
    if (render.font_size < kMinFontSize) throw std::invalid_argument("font size below minimum");
    if (render.inter_char_padding < 0) throw std::invalid_argument("inter_char_padding must be >= 0");
    EmbedderConfig e = embedder;
    e.d_model = d_model;
    e.slice_height = 1;
    e.slice_width = slice.window;
    e.validate();
  } else {
    if (source.merges < 0) throw std::invalid_argument("source merges must be >= 0");
    if (source.mode == SegMode::Ngram && (source.ngram < 1 || source.ngram_stride < 1 || source.ngram_stride > source.ngram))
      throw std::invalid_argument("n-gram segmentation needs 1 <= stride <= n");
    if (!(source.bpe_dropout >= 0.0 && source.bpe_dropout <= 1.0))
      throw std::invalid_argument("bpe_dropout must lie in [0,1]");
  }
  if (target.mode == SegMode::Ngram) throw std::invalid_argument("target segmentation cannot be ngram");
  if (target.merges < 0) throw std::invalid_argument("target merges must be >= 0");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(lr > 0)) throw std::invalid_argument("lr must be > 0");
  if (max_steps < 0) throw std::invalid_argument("max_steps must be >= 0");
  if (eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
  if (warmup_steps < 0) throw std::invalid_argument("warmup_steps must be >= 0");
  if (dev_limit < 0) throw std::invalid_argument("dev_limit must be >= 0");
}

namespace {

Vocab collect_vocab(const std::vector<std::string>& lines, const SegmentOptions& opts) {
  Vocab v;
  SegmentOptions o = opts;
  o.add_specials = false;
  o.vocab = nullptr;
  for (const auto& line : lines) {
    const TokenSequence seq = segment(line, o);
    for (size_t i = 0; i < seq.size(); ++i) v.add(seq.symbol(i));
  }
  return v;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_f32(const fs::path& path, const nn::Matrix<float>& m) {
  std::vector<uint32_t> words(static_cast<size_t>(m.size()));
  std::memcpy(words.data(), m.data(), words.size() * sizeof(float));
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& w : words) w = __builtin_bswap32(w);
  }
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void read_f32(const fs::path& path, nn::Matrix<float>& m) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw std::runtime_error("checkpoint: missing " + path.string());
  const auto bytes = static_cast<size_t>(in.tellg());
  if (bytes != static_cast<size_t>(m.size()) * 4) throw std::runtime_error("checkpoint: size mismatch in " + path.string());
  in.seekg(0);
  std::vector<uint32_t> words(static_cast<size_t>(m.size()));
  in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(bytes));
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& w : words) w = __builtin_bswap32(w);
  }
  std::memcpy(m.data(), words.data(), bytes);
}

}  // namespace

std::unique_ptr<Translator> Translator::create(const ModelConfig& cfg, const ParallelCorpus& train) {
  cfg.validate();
  if (train.size() == 0) throw std::invalid_argument("training corpus is empty");
  std::unique_ptr<Translator> t(new Translator());
  t->cfg_ = cfg;
  if (cfg.frontend == nn::Frontend::Visual) {
    const fs::path font = cfg.render.font_path.empty() ? default_font_path() : cfg.render.font_path;
    t->font_ = Font::load(font, cfg.render.font_size);
  } else if (cfg.source.mode == SegMode::Bpe) {
    t->src_bpe_ = BpeModel::train(train.src, cfg.source.merges);
    t->src_vocab_ = t->src_bpe_->vocab();
  } else {
    SegmentOptions o;
    o.mode = cfg.source.mode;
    o.ngram = cfg.source.ngram;
    o.ngram_stride = cfg.source.ngram_stride;
    t->src_vocab_ = collect_vocab(train.src, o);
  }
  if (cfg.target.mode == SegMode::Bpe) {
    t->tgt_bpe_ = BpeModel::train(train.tgt, cfg.target.merges);
    t->tgt_vocab_ = t->tgt_bpe_->vocab();
  } else {
    SegmentOptions o;
    o.mode = cfg.target.mode;
    t->tgt_vocab_ = collect_vocab(train.tgt, o);
  }
  t->build_network();
  return t;
}

nn::NetworkConfig Translator::network_config() const {
  nn::NetworkConfig n;
  n.frontend = cfg_.frontend;
  n.layers = cfg_.layers;
  n.heads = cfg_.heads;
  n.d_model = cfg_.d_model;
  n.d_ff = cfg_.d_ff;
  n.tgt_vocab = tgt_vocab_.size();
  n.label_smoothing = cfg_.label_smoothing;
  n.max_len = cfg_.max_len;
  n.seed = cfg_.seed;
  if (cfg_.frontend == nn::Frontend::Visual) {
    n.embedder = cfg_.embedder;
    n.embedder.d_model = cfg_.d_model;
    n.embedder.slice_height = font_->line_height();
    n.embedder.slice_width = cfg_.slice.window;
  } else {
    n.src_vocab = src_vocab_.size();
  }
  return n;
}

void Translator::build_network() { net_ = std::make_unique<nn::Seq2Seq<float>>(network_config()); }

TokenSequence Translator::source_tokens(std::string_view text, Rng* dropout_rng) const {
  if (cfg_.frontend != nn::Frontend::Token) throw std::logic_error("source_tokens: model has a visual front-end");
  SegmentOptions o;
  o.mode = cfg_.source.mode;
  o.bpe = src_bpe_ ? &*src_bpe_ : nullptr;
  o.ngram = cfg_.source.ngram;
  o.ngram_stride = cfg_.source.ngram_stride;
  o.dropout = dropout_rng ? cfg_.source.bpe_dropout : 0.0;
  o.rng = dropout_rng;
  o.add_specials = false;
  TokenSequence body = segment(text, o);
  src_vocab_.assign_ids(body);
  TokenSequence seq;
  seq.mode = body.mode;
  seq.ngram_stride = body.ngram_stride;
  seq.push(std::string(kBosSymbol), false, kBosId);
  for (size_t i = 0; i < body.size(); ++i) seq.push(body.surface[i], body.word_end[i], body.ids[i]);
  seq.push(std::string(kEosSymbol), false, kEosId);
  return seq;
}

nn::SourceInput<float> Translator::source_input(std::string_view text, Rng* dropout_rng) const {
  nn::SourceInput<float> in;
  if (cfg_.frontend == nn::Frontend::Visual) {
    RenderConfig rc = cfg_.render;
    rc.min_width = cfg_.slice.window;
    const LineImage img = render_line(text, *font_, rc);
    in.slices = VisualEmbedder<float>::from_slices(slice_image(img, cfg_.slice));
  } else {
    in.ids = source_tokens(text, dropout_rng).ids;
  }
  return in;
}

std::vector<int> Translator::target_ids(std::string_view text) const {
  SegmentOptions o;
  o.mode = cfg_.target.mode;
  o.bpe = tgt_bpe_ ? &*tgt_bpe_ : nullptr;
  o.add_specials = false;
  TokenSequence body = segment(text, o);
  tgt_vocab_.assign_ids(body);
  std::vector<int> ids{kBosId};
  ids.insert(ids.end(), body.ids.begin(), body.ids.end());
  ids.push_back(kEosId);
  return ids;
}

std::string Translator::target_text(const std::vector<int>& ids) const {
  std::vector<std::string> symbols;
  symbols.reserve(ids.size());
  for (int id : ids) symbols.push_back(tgt_vocab_.symbol(id));
  return detokenize_symbols(symbols, cfg_.target.mode);
}

Translator::Translation Translator::translate(std::string_view text) {
  const auto decoded = net_->greedy_decode(source_input(text));
  return {target_text(decoded.ids), decoded.truncated};
}

std::vector<std::string> Translator::translate_all(const std::vector<std::string>& lines) {
  std::vector<std::string> out;
  out.reserve(lines.size());
  for (const auto& l : lines) out.push_back(translate(l).text);
  return out;
}

void Translator::save(const fs::path& dir) const {
  fs::create_directories(dir / "params");
  write_text(dir / "config.json", dump_json(to_json(cfg_)));
  std::ostringstream manifest;
  manifest << "visrep-checkpoint 1\n";
  for (const auto& p : net_->params().all()) {
    manifest << p->name << " float32 " << p->value.rows() << ' ' << p->value.cols() << '\n';
    write_f32(dir / "params" / (p->name + ".f32"), p->value);
  }
  write_text(dir / "manifest.txt", manifest.str());
  {
    std::ostringstream v;
    tgt_vocab_.write(v);
    write_text(dir / "tgt.vocab", v.str());
  }
  if (tgt_bpe_) tgt_bpe_->save(dir / "tgt.bpe");
  if (cfg_.frontend == nn::Frontend::Token) {
    std::ostringstream v;
    src_vocab_.write(v);
    write_text(dir / "src.vocab", v.str());
    if (src_bpe_) src_bpe_->save(dir / "src.bpe");
  }
}

std::unique_ptr<Translator> Translator::load(const fs::path& dir) {
  std::unique_ptr<Translator> t(new Translator());
  t->cfg_ = model_config_from_json(read_json_file(dir / "config.json"));
  const ModelConfig& cfg = t->cfg_;
  if (cfg.frontend == nn::Frontend::Visual) {
    const fs::path font = cfg.render.font_path.empty() ? default_font_path() : cfg.render.font_path;
    t->font_ = Font::load(font, cfg.render.font_size);
  } else {
    t->src_vocab_ = Vocab::load(dir / "src.vocab");
    if (cfg.source.mode == SegMode::Bpe) t->src_bpe_ = BpeModel::load(dir / "src.bpe");
  }
  t->tgt_vocab_ = Vocab::load(dir / "tgt.vocab");
  if (cfg.target.mode == SegMode::Bpe) t->tgt_bpe_ = BpeModel::load(dir / "tgt.bpe");
  t->build_network();

  std::istringstream manifest(read_text(dir / "manifest.txt"));
  std::string line;
  if (!std::getline(manifest, line) || line != "visrep-checkpoint 1")
    throw std::runtime_error("checkpoint: bad manifest header in " + dir.string());
  size_t seen = 0;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name, dtype;
    long rows = -1, cols = -1;
    ls >> name >> dtype >> rows >> cols;
    auto* p = t->net_->params().find(name);
    if (!p) throw std::runtime_error("checkpoint: unknown parameter " + name);
    if (dtype != "float32" || rows != p->value.rows() || cols != p->value.cols())
      throw std::runtime_error("checkpoint: shape or dtype mismatch for " + name);
    read_f32(dir / "params" / (name + ".f32"), p->value);
    ++seen;
  }
  if (seen != t->net_->params().all().size()) throw std::runtime_error("checkpoint: manifest is missing parameters");
  return t;
}

TrainResult train(Translator& model, const ParallelCorpus& train_pairs, const ParallelCorpus& dev,
                  const TrainConfig& tcfg, const std::function<void(const MetricRow&)>& on_metric) {
  tcfg.validate();
  if (train_pairs.size() == 0) throw std::invalid_argument("training corpus is empty");
  auto& net = model.network();
  const bool visual = model.config().frontend == nn::Frontend::Visual;
  const bool dropout = !visual && model.config().source.bpe_dropout > 0.0;

  std::vector<std::vector<int>> targets;
  targets.reserve(train_pairs.size());
  for (const auto& t : train_pairs.tgt) targets.push_back(model.target_ids(t));
  std::vector<nn::SourceInput<float>> token_sources;
  if (!visual && !dropout) {
    for (const auto& s : train_pairs.src) token_sources.push_back(model.source_input(s));
  }

  std::vector<std::string> dev_src = dev.src, dev_ref = dev.tgt;
  if (tcfg.dev_limit > 0 && dev_src.size() > static_cast<size_t>(tcfg.dev_limit)) {
    dev_src.resize(static_cast<size_t>(tcfg.dev_limit));
    dev_ref.resize(static_cast<size_t>(tcfg.dev_limit));
  }

  nn::Adam<float> opt(net.params(), tcfg.lr);
  std::vector<size_t> order(train_pairs.size());
  size_t cursor = order.size();
  uint64_t epoch = 0;

  TrainResult result;
  double loss_sum = 0;
  long loss_tokens = 0;
  for (long step = 1; step <= tcfg.max_steps; ++step) {
    std::vector<size_t> batch;
    long batch_tokens = 0;
    while (batch_tokens < tcfg.batch_size) {
      if (cursor == order.size()) {
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng shuffle_rng(derive_seed(tcfg.seed, hash_name("epoch"), epoch++));
        shuffle_rng.shuffle(order.begin(), order.end());
        cursor = 0;
      }
      const size_t i = order[cursor++];
      batch.push_back(i);
      batch_tokens += static_cast<long>(targets[i].size()) - 1;
    }

    net.params().zero_grad();
    for (size_t i : batch) {
      nn::LossResult loss;
      if (visual) {
        loss = net.forward_loss(model.source_input(train_pairs.src[i]), targets[i]);
      } else if (dropout) {
        Rng drop_rng(derive_seed(tcfg.seed, static_cast<uint64_t>(step), i));
        loss = net.forward_loss(model.source_input(train_pairs.src[i], &drop_rng), targets[i]);
      } else {
        loss = net.forward_loss(token_sources[i], targets[i]);
      }
      if (!std::isfinite(loss.loss)) {
        throw TrainingDiverged("training diverged: non-finite loss at step " + std::to_string(step) +
                               " (sentence " + std::to_string(i) + ")");
      }
      loss_sum += loss.loss * loss.tokens;
      loss_tokens += loss.tokens;
      net.backward(1.0 / static_cast<double>(batch_tokens));
    }
    const double norm = nn::clip_grad_norm(net.params(), tcfg.clip_norm);
    if (!std::isfinite(norm)) throw TrainingDiverged("training diverged: non-finite gradient at step " + std::to_string(step));
    const double warm = tcfg.warmup_steps > 0 ? std::min(1.0, static_cast<double>(step) / tcfg.warmup_steps) : 1.0;
    opt.set_lr(tcfg.lr * warm);
    opt.step();
    result.steps = step;

    if (step % tcfg.eval_every == 0 || step == tcfg.max_steps) {
      MetricRow row;
      row.step = step;
      row.train_loss = loss_tokens > 0 ? loss_sum / static_cast<double>(loss_tokens) : 0.0;
      row.dev_bleu = dev_src.empty() ? 0.0 : corpus_bleu(model.translate_all(dev_src), dev_ref).bleu;
      loss_sum = 0;
      loss_tokens = 0;
      result.metrics.push_back(row);
      result.final_dev_bleu = row.dev_bleu;
      if (on_metric) on_metric(row);
      if (tcfg.stop_at_bleu > 0 && row.dev_bleu >= tcfg.stop_at_bleu) {
        result.stopped_early = true;
        break;
      }
    }
  }
  return result;
}

}  // namespace visrep

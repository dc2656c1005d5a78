#include "visrep/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <unordered_map>

#include "visrep/model.hpp"
#include "visrep/utf8.hpp"

namespace visrep {

namespace {

constexpr double kZeroMatch = 1e-9;

using NgramCounts = std::map<std::vector<std::string_view>, int>;

NgramCounts count_ngrams(const std::vector<std::string_view>& toks, size_t n) {
  NgramCounts counts;
  for (size_t i = 0; i + n <= toks.size(); ++i) {
    ++counts[std::vector<std::string_view>(toks.begin() + static_cast<long>(i), toks.begin() + static_cast<long>(i + n))];
  }
  return counts;
}

std::vector<std::string_view> tokens(const std::string& line) {
  std::vector<std::string_view> out;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.emplace_back(line.data() + start, i - start);
  }
  return out;
}

std::string format_p(double p) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(2) << p;
  return ss.str();
}

std::string format_bleu(double b) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(4) << b;
  return ss.str();
}

}  // namespace

BleuScore corpus_bleu(const std::vector<std::string>& hyps, const std::vector<std::string>& refs) {
  if (hyps.size() != refs.size()) throw std::invalid_argument("bleu: hypothesis and reference counts differ");
  if (hyps.empty()) throw std::invalid_argument("bleu: empty corpus");
  std::array<double, 4> matches{}, totals{};
  BleuScore s;
  for (size_t k = 0; k < hyps.size(); ++k) {
    const auto h = tokens(hyps[k]);
    const auto r = tokens(refs[k]);
    s.hyp_length += h.size();
    s.ref_length += r.size();
    for (size_t n = 1; n <= 4; ++n) {
      const NgramCounts hc = count_ngrams(h, n);
      const NgramCounts rc = count_ngrams(r, n);
      for (const auto& [gram, c] : hc) {
        auto it = rc.find(gram);
        if (it != rc.end()) matches[n - 1] += std::min(c, it->second);
      }
      if (h.size() >= n) totals[n - 1] += static_cast<double>(h.size() - n + 1);
    }
  }
  double log_sum = 0;
  for (size_t n = 0; n < 4; ++n) {
    s.precisions[n] = totals[n] > 0 ? matches[n] / totals[n] : 0.0;
    const double m = matches[n] > 0 ? matches[n] : kZeroMatch;
    log_sum += std::log(m / std::max(totals[n], 1.0));
  }
  if (s.hyp_length == 0) {
    s.brevity_penalty = 0.0;
    s.bleu = 0.0;
    return s;
  }
  const double c = static_cast<double>(s.hyp_length), r = static_cast<double>(s.ref_length);
  s.brevity_penalty = c > r ? 1.0 : std::exp(1.0 - r / c);
  s.bleu = 100.0 * s.brevity_penalty * std::exp(log_sum / 4.0);
  return s;
}

double DegradationCurve::clean_bleu() const {
  if (points.empty() || points.front().p != 0.0) throw std::logic_error("curve has no p=0 point");
  return points.front().bleu;
}

const CurvePoint& DegradationCurve::at(double p) const {
  for (const auto& pt : points) {
    if (std::abs(pt.p - p) < 1e-9) return pt;
  }
  throw std::out_of_range("curve has no point at p=" + format_p(p));
}

double DegradationCurve::relative_degradation(double p) const {
  const double clean = clean_bleu();
  return clean > 0 ? (clean - at(p).bleu) / clean : 0.0;
}

std::vector<double> default_p_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 10; ++i) g.push_back(i / 10.0);
  return g;
}

uint64_t sweep_noise_seed(uint64_t seed, double p) {
  return derive_seed(seed, static_cast<uint64_t>(std::llround(p * 1e6)));
}

DegradationCurve degradation_sweep(Translator& model, const std::vector<std::string>& src,
                                   const std::vector<std::string>& refs, const NoiseSpec& base,
                                   const std::vector<double>& p_values, const std::vector<uint64_t>& seeds,
                                   const std::string& model_id) {
  if (src.size() != refs.size()) throw std::invalid_argument("sweep: source and reference counts differ");
  if (seeds.empty()) throw std::invalid_argument("sweep: no seeds");
  for (size_t i = 1; i < p_values.size(); ++i) {
    if (!(p_values[i] > p_values[i - 1])) throw std::invalid_argument("sweep: p values must be strictly increasing");
  }
  DegradationCurve curve;
  curve.model_id = model_id;
  curve.kind = base.kind;
  curve.seeds = seeds;
  // Decoding is deterministic, so identical noised inputs share one decode.
  std::unordered_map<std::string, std::string> cache;
  for (double p : p_values) {
    CurvePoint pt;
    pt.p = p;
    for (uint64_t seed : seeds) {
      NoiseSpec spec = base;
      spec.p = p;
      spec.seed = sweep_noise_seed(seed, p);
      spec.validate();
      std::vector<std::string> hyps;
      hyps.reserve(src.size());
      for (size_t i = 0; i < src.size(); ++i) {
        const std::string noised = inject(src[i], spec, i).text;
        auto it = cache.find(noised);
        if (it == cache.end()) it = cache.emplace(noised, model.translate(noised).text).first;
        hyps.push_back(it->second);
      }
      pt.seed_bleu.push_back(corpus_bleu(hyps, refs).bleu);
    }
    double sum = 0;
    for (double b : pt.seed_bleu) sum += b;
    pt.bleu = sum / static_cast<double>(pt.seed_bleu.size());
    curve.points.push_back(std::move(pt));
  }
  return curve;
}

std::vector<DeltaRow> delta_table(const DegradationCurve& a, const DegradationCurve& b) {
  if (a.points.size() != b.points.size()) throw std::invalid_argument("delta: curves have different p grids");
  std::vector<DeltaRow> rows;
  for (size_t i = 0; i < a.points.size(); ++i) {
    if (std::abs(a.points[i].p - b.points[i].p) > 1e-9) throw std::invalid_argument("delta: curves have different p grids");
    rows.push_back({a.points[i].p, a.points[i].bleu - b.points[i].bleu});
  }
  return rows;
}

void write_curve_csv(std::ostream& out, const std::vector<DegradationCurve>& curves) {
  out << "p,bleu,model,kind,seed\n";
  for (const auto& c : curves) {
    for (const auto& pt : c.points) {
      for (size_t s = 0; s < pt.seed_bleu.size() && s < c.seeds.size(); ++s) {
        out << format_p(pt.p) << ',' << format_bleu(pt.seed_bleu[s]) << ',' << c.model_id << ',' << to_string(c.kind)
            << ',' << c.seeds[s] << '\n';
      }
      out << format_p(pt.p) << ',' << format_bleu(pt.bleu) << ',' << c.model_id << ',' << to_string(c.kind)
          << ",mean\n";
    }
  }
}

void write_delta_csv(std::ostream& out, const std::vector<DeltaRow>& rows) {
  out << "p,delta\n";
  for (const auto& r : rows) out << format_p(r.p) << ',' << format_bleu(r.delta) << '\n';
}

void write_curve_svg(std::ostream& out, const std::vector<DegradationCurve>& curves, const std::string& title) {
  constexpr int kW = 480, kH = 320, kL = 50, kR = 130, kT = 30, kB = 40;
  const double pw = kW - kL - kR, ph = kH - kT - kB;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  auto x = [&](double p) { return kL + p * pw; };
  auto y = [&](double b) { return kT + (1.0 - b / 100.0) * ph; };
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << kW / 2 << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">" << title << "</text>\n";
  out << "<line x1=\"" << kL << "\" y1=\"" << kT + ph << "\" x2=\"" << kL + pw << "\" y2=\"" << kT + ph
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kL << "\" y1=\"" << kT << "\" x2=\"" << kL << "\" y2=\"" << kT + ph << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 10; i += 2) {
    out << "<text x=\"" << x(i / 10.0) << "\" y=\"" << kT + ph + 15 << "\" text-anchor=\"middle\" font-size=\"10\">"
        << format_p(i / 10.0) << "</text>\n";
  }
  for (int b = 0; b <= 100; b += 20) {
    out << "<text x=\"" << kL - 6 << "\" y=\"" << y(b) + 3 << "\" text-anchor=\"end\" font-size=\"10\">" << b
        << "</text>\n";
  }
  out << "<text x=\"" << kL + pw / 2 << "\" y=\"" << kH - 8 << "\" text-anchor=\"middle\" font-size=\"11\">p</text>\n";
  out << "<text x=\"14\" y=\"" << kT + ph / 2 << "\" font-size=\"11\" transform=\"rotate(-90 14 " << kT + ph / 2
      << ")\" text-anchor=\"middle\">BLEU</text>\n";
  for (size_t c = 0; c < curves.size(); ++c) {
    const char* color = colors[c % 6];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& pt : curves[c].points) out << x(pt.p) << ',' << y(pt.bleu) << ' ';
    out << "\"/>\n";
    const double ly = kT + 14.0 * static_cast<double>(c) + 6;
    out << "<line x1=\"" << kL + pw + 10 << "\" y1=\"" << ly << "\" x2=\"" << kL + pw + 28 << "\" y2=\"" << ly
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << kL + pw + 32 << "\" y=\"" << ly + 4 << "\" font-size=\"10\">" << curves[c].model_id << " ("
        << to_string(curves[c].kind) << ")</text>\n";
  }
  out << "</svg>\n";
}

namespace {
template <typename F>
void write_file(const std::filesystem::path& path, F&& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  f(out);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}
}  // namespace

void write_curve_csv(const std::filesystem::path& path, const std::vector<DegradationCurve>& curves) {
  write_file(path, [&](std::ostream& o) { write_curve_csv(o, curves); });
}
void write_delta_csv(const std::filesystem::path& path, const std::vector<DeltaRow>& rows) {
  write_file(path, [&](std::ostream& o) { write_delta_csv(o, rows); });
}
void write_curve_svg(const std::filesystem::path& path, const std::vector<DegradationCurve>& curves,
                     const std::string& title) {
  write_file(path, [&](std::ostream& o) { write_curve_svg(o, curves, title); });
}

}  // namespace visrep

#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "visrep/noise.hpp"

namespace visrep {

class Translator;

struct BleuScore {
  double bleu = 0.0;  // percent
  std::array<double, 4> precisions{};
  double brevity_penalty = 1.0;
  size_t hyp_length = 0;
  size_t ref_length = 0;
};

/// Corpus 4-gram BLEU over whitespace tokens with clipped counts and
/// exp(1 - r/c) brevity penalty. A zero match count contributes log(1e-9).
/// Throws std::invalid_argument on empty input or mismatched line counts.
BleuScore corpus_bleu(const std::vector<std::string>& hyps, const std::vector<std::string>& refs);

struct CurvePoint {
  double p = 0.0;
  double bleu = 0.0;                 // mean over seeds
  std::vector<double> seed_bleu;     // one per seed, same order as the sweep seeds
};

struct DegradationCurve {
  std::string model_id;
  NoiseKind kind = NoiseKind::Swap;
  std::vector<uint64_t> seeds;
  std::vector<CurvePoint> points;

  double clean_bleu() const;
  /// (clean - bleu(p)) / clean; 0 when the clean score is 0.
  double relative_degradation(double p) const;
  const CurvePoint& at(double p) const;
};

/// {0.0, 0.1, ..., 1.0}.
std::vector<double> default_p_grid();

/// Noises the test sources at each p with seeds derived from
/// (seed, p, sentence index), decodes and scores against the references.
/// The table/marks/char_p of `base` are used; its p and seed are ignored.
DegradationCurve degradation_sweep(Translator& model, const std::vector<std::string>& src,
                                   const std::vector<std::string>& refs, const NoiseSpec& base,
                                   const std::vector<double>& p_values, const std::vector<uint64_t>& seeds,
                                   const std::string& model_id);

/// Seed actually used for the noise stream at grid value p.
uint64_t sweep_noise_seed(uint64_t seed, double p);

struct DeltaRow {
  double p = 0.0;
  double delta = 0.0;
};

/// bleu_a - bleu_b per p; throws std::invalid_argument if the p grids differ.
std::vector<DeltaRow> delta_table(const DegradationCurve& a, const DegradationCurve& b);

/// "p,bleu,model,kind,seed": one row per seed plus a "mean" row per p.
void write_curve_csv(std::ostream& out, const std::vector<DegradationCurve>& curves);
void write_curve_csv(const std::filesystem::path& path, const std::vector<DegradationCurve>& curves);
/// "p,delta".
void write_delta_csv(std::ostream& out, const std::vector<DeltaRow>& rows);
void write_delta_csv(const std::filesystem::path& path, const std::vector<DeltaRow>& rows);
/// Static line chart of mean BLEU against p, one polyline per curve.
void write_curve_svg(std::ostream& out, const std::vector<DegradationCurve>& curves, const std::string& title);
void write_curve_svg(const std::filesystem::path& path, const std::vector<DegradationCurve>& curves,
                     const std::string& title);

}  // namespace visrep

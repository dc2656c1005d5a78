#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "visrep/model.hpp"
#include "visrep/noise.hpp"

namespace visrep {

/// Raised for malformed or schema-violating configuration documents.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct NoiseEntry {
  NoiseKind kind = NoiseKind::Swap;
  std::string table;             // MapChars: path to a FROM<TAB>TO file
  std::string marks = "default";  // Marks: "default" or "arabic"
  double char_p = 1.0;

  /// Loads the table when needed; p and seed are left at zero.
  NoiseSpec to_spec(const std::filesystem::path& base_dir = {}) const;
  bool operator==(const NoiseEntry&) const = default;
};

struct CorpusPaths {
  std::string train_src, train_tgt;
  std::string dev_src, dev_tgt;
  std::string test_src, test_tgt;

  bool operator==(const CorpusPaths&) const = default;
};

/// Synthetic corpus generated into the run directory.
struct SyntheticSpec {
  std::string task = "copy";  // copy | reverse | mapped-lexicon
  int train_size = 2000;
  int dev_size = 200;
  int test_size = 200;
  uint64_t seed = 1;

  bool operator==(const SyntheticSpec&) const = default;
};

struct EvalConfig {
  std::vector<double> p_values;
  std::vector<uint64_t> seeds{1, 2, 3};
  int test_limit = 0;  // 0 = whole test set

  bool operator==(const EvalConfig&) const = default;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::vector<NoiseEntry> noise;
  EvalConfig eval;
  std::optional<CorpusPaths> corpus;
  std::optional<SyntheticSpec> generate;
  std::string run_dir;

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

/// Axis name -> values; window/stride constraint applied by expand().
struct SweepGrid {
  std::map<std::string, std::vector<double>> axes;

  /// Cross product in axis-name order (last axis fastest), dropping points
  /// with window < stride. Throws ConfigError if nothing survives.
  std::vector<std::map<std::string, double>> expand() const;
};

nlohmann::json to_json(const ModelConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const RunConfig& cfg);
nlohmann::json to_json(const SweepGrid& grid);

/// Strict readers: unknown keys, wrong types and violated invariants throw
/// ConfigError. Missing keys keep their defaults.
ModelConfig model_config_from_json(const nlohmann::json& j);
TrainConfig train_config_from_json(const nlohmann::json& j);
RunConfig run_config_from_json(const nlohmann::json& j);
SweepGrid sweep_grid_from_json(const nlohmann::json& j);

nlohmann::json read_json_file(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline.
std::string dump_json(const nlohmann::json& j);

/// Applies a sweep point ("window", "stride", "blocks", "font_size", "lr",
/// "batch_size", "d_model", "layers", "merges") onto a run config.
void apply_sweep_point(RunConfig& cfg, const std::map<std::string, double>& point);

}  // namespace visrep

#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "visrep/config.hpp"
#include "visrep/eval.hpp"

namespace visrep {

/// Error raised by run(); the message starts with "[stage] ".
class StageError : public std::runtime_error {
 public:
  StageError(const std::string& stage, const std::string& what)
      : std::runtime_error("[" + stage + "] " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct RunSummary {
  std::filesystem::path run_dir;
  double final_dev_bleu = 0.0;
  double clean_test_bleu = 0.0;
  long steps = 0;
  std::vector<DegradationCurve> curves;
};

/// Creates run_dir exclusively, writes config_text there verbatim, prepares
/// the corpus, trains, saves the checkpoint, then runs one degradation sweep
/// per noise entry. Relative paths in the config resolve against base_dir.
///
/// Layout: config.json, data/, checkpoint/, metrics.jsonl, curves/<kind>.csv,
/// curves/<kind>.svg, summary.json.
RunSummary run(const RunConfig& cfg, const std::string& config_text, const std::filesystem::path& run_dir,
               const std::filesystem::path& base_dir, std::ostream* log = nullptr);

struct SweepCell {
  std::map<std::string, double> point;
  std::optional<double> dev_bleu;  // empty when the run failed
  std::string error;
};

/// One run per surviving grid point under out_dir/point-<k>; failures become
/// empty cells. Writes out_dir/sweep.csv and, for a window x stride grid,
/// out_dir/grid.csv (rows = window, columns = stride).
std::vector<SweepCell> sweep(const SweepGrid& grid, const RunConfig& base, const std::filesystem::path& out_dir,
                             const std::filesystem::path& base_dir, std::ostream* log = nullptr);

}  // namespace visrep

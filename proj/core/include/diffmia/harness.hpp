#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "diffmia/config.hpp"
#include "diffmia/eval.hpp"
#include "diffmia/io.hpp"
#include "diffmia/tabular.hpp"

namespace diffmia {

// gsa1/gsa2/blind train a classifier on validation features and run with a
// fixed 0.5 threshold; everything else thresholds a loss statistic.
bool is_classifier_method(const std::string& method);

// Default per-method attack settings for this experiment's schedule, with
// "secmi++" mapped onto the secmi grid with mean aggregation.
AttackConfig attack_config_for(const ExperimentConfig& cfg,
                               const std::string& method);

// Stage 1: generate the benchmark split into a directory (a second run with
// the same config is byte-identical).
void run_gen_data(const ExperimentConfig& cfg, const std::string& out_dir);

// Stage 2: train the denoiser on the split's train set and write the
// checkpoint. Logs one "epoch,loss" line per epoch to `log` if given.
void run_train(const ExperimentConfig& cfg, const std::string& data_dir,
               const std::string& out_ckpt, std::ostream* log = nullptr);

struct AttackArtifacts {
  std::string method;
  std::string val_csv;
  std::string test_csv;
  bool classifier = false;  // CSVs hold features rather than scores
  QueryCount counted;       // accumulated over all scored samples
  QueryCount expected;      // per-sample formula * number of samples
};

// Stage 3: score (or featurize) every val and test sample with one method.
// Writes <out_dir>/<method>_val.csv and <method>_test.csv, verifies the
// instrumented query counters against the cost formula and throws
// ContractViolation on mismatch.
AttackArtifacts run_attack(const ExperimentConfig& cfg,
                           const std::string& ckpt_path,
                           const std::string& data_dir,
                           const std::string& method,
                           const std::string& out_dir);

// Stage 4: two-stage evaluation from the stage-3 CSVs. Classifier methods
// fit boosted trees on the validation features and evaluate r = 1 - p with
// the fixed 0.5 rule; loss methods run threshold optimization.
EvalReport run_eval(const ExperimentConfig& cfg, const std::string& method,
                    const std::string& val_csv, const std::string& test_csv,
                    const std::string& out_json);

// Stage 5: model-free shift diagnostic; writes the report JSON and,
// optionally, the 3-D embedding CSV used for external plotting.
ShiftReport run_shift(const ExperimentConfig& cfg, const std::string& data_dir,
                      const std::string& out_json,
                      bool dump_embeddings = false);

struct BenchmarkRow {
  std::string setup;
  std::string method;
  bool failed = false;
  std::string error;
  EvalReport report;  // valid iff !failed
};

struct BenchmarkTable {
  std::vector<BenchmarkRow> rows;

  int n_failed() const;
};

nlohmann::json table_to_json(const BenchmarkTable& table);
std::string table_to_text(const BenchmarkTable& table);

// Full pipeline per setup (gen, train, shift, then one attack+eval row per
// method). A stage failure marks the affected rows and execution continues.
// Writes per-setup artifacts under <out_dir>/<setup>/ plus table.json and
// table.txt at the root.
BenchmarkTable run_all(const std::vector<ExperimentConfig>& setups,
                       const std::string& out_dir, std::ostream* log = nullptr);

}  // namespace diffmia

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "diffmia/config.hpp"
#include "diffmia/error.hpp"
#include "diffmia/harness.hpp"
#include "diffmia/io.hpp"
#include "helpers.hpp"

using namespace diffmia;
namespace fs = std::filesystem;

namespace {

// Small enough that every stage runs in well under a second.
ExperimentConfig tiny_config(const std::string& name = "tiny") {
  ExperimentConfig cfg;
  cfg.preset = name;
  cfg.T = 10;
  cfg.n_train = 16;
  cfg.n_eval_per_side = 4;
  cfg.train.epochs = 20;
  cfg.train.batch_size = 8;
  cfg.train.learning_rate = 2e-2;
  cfg.methods = {"secmi", "blind"};
  return cfg;
}

// One generated split plus one trained checkpoint, shared by the stage tests.
struct Pipeline {
  testutil::TempDir tmp{"harness"};
  ExperimentConfig cfg = tiny_config();
  std::string data_dir = tmp.str("data");
  std::string ckpt = tmp.str("model.cmkm");

  Pipeline() {
    run_gen_data(cfg, data_dir);
    run_train(cfg, data_dir, ckpt);
  }
};

Pipeline& pipeline() {
  static Pipeline p;
  return p;
}

}  // namespace

TEST_CASE("classifier methods are the feature-based ones") {
  for (const char* m : {"gsa1", "gsa2", "blind"}) {
    CHECK(is_classifier_method(m));
  }
  for (const char* m : {"secmi", "secmi++", "pia", "pfami"}) {
    CHECK(!is_classifier_method(m));
  }
}

TEST_CASE("secmi++ rides on the secmi grid with mean aggregation") {
  const ExperimentConfig cfg = tiny_config();
  const AttackConfig plain = attack_config_for(cfg, "secmi");
  const AttackConfig plus = attack_config_for(cfg, "secmi++");
  CHECK(plain.method == "secmi");
  CHECK(!plain.secmi.plusplus);
  CHECK(plus.method == "secmi++");
  CHECK(plus.secmi.plusplus);
  CHECK(plus.secmi.step_grid == plain.secmi.step_grid);
  CHECK(plus.secmi.t_star == plain.secmi.t_star);

  CHECK_THROWS_AS(attack_config_for(cfg, "lira"), ConfigError);
}

TEST_CASE("data generation is byte-stable across runs") {
  Pipeline& p = pipeline();
  const std::string again = p.tmp.str("data_again");
  run_gen_data(p.cfg, again);
  for (const char* name : {"data.cmkd", "data.json", "manifest.csv"}) {
    CHECK(testutil::read_bytes(p.data_dir + "/" + name) ==
          testutil::read_bytes(again + "/" + name));
  }
}

TEST_CASE("training is reproducible and logs one line per epoch") {
  Pipeline& p = pipeline();
  const std::string again = p.tmp.str("model_again.cmkm");
  std::ostringstream log;
  run_train(p.cfg, p.data_dir, again, &log);
  CHECK(testutil::read_bytes(p.ckpt) == testutil::read_bytes(again));

  int lines = 0;
  std::istringstream in(log.str());
  for (std::string line; std::getline(in, line);) {
    CHECK(line.rfind("epoch ", 0) == 0);
    CHECK(line.find("member loss") != std::string::npos);
    ++lines;
  }
  CHECK(lines == p.cfg.train.epochs);

  const ModelCheckpoint ckpt = load_checkpoint(p.ckpt);
  CHECK(ckpt.meta.epochs == p.cfg.train.epochs);
  CHECK(ckpt.meta.train_set_size == p.cfg.n_train);
  CHECK(ckpt.schedule.T == p.cfg.T);
}

TEST_CASE("attack stage writes one row per evaluated sample and verifies cost") {
  Pipeline& p = pipeline();
  for (const std::string method : {"secmi", "secmi++", "pia", "pfami"}) {
    const AttackArtifacts art =
        run_attack(p.cfg, p.ckpt, p.data_dir, method, p.tmp.str("attacks"));
    CHECK(!art.classifier);
    CHECK(art.counted == art.expected);
    const ScoreSet val = load_scores(art.val_csv, method, "tiny");
    const ScoreSet test = load_scores(art.test_csv, method, "tiny");
    CHECK(val.entries.size() == 2 * 4);
    CHECK(test.entries.size() == 2 * 4);
  }

  for (const std::string method : {"gsa1", "gsa2", "blind"}) {
    const AttackArtifacts art =
        run_attack(p.cfg, p.ckpt, p.data_dir, method, p.tmp.str("attacks"));
    CHECK(art.classifier);
    CHECK(art.counted == art.expected);
    CHECK(load_features(art.val_csv, method).size() == 2 * 4);
    CHECK(load_features(art.test_csv, method).size() == 2 * 4);
  }
}

TEST_CASE("attack stage is byte-stable across runs") {
  Pipeline& p = pipeline();
  const AttackArtifacts a =
      run_attack(p.cfg, p.ckpt, p.data_dir, "pfami", p.tmp.str("a1"));
  const AttackArtifacts b =
      run_attack(p.cfg, p.ckpt, p.data_dir, "pfami", p.tmp.str("a2"));
  CHECK(testutil::read_bytes(a.val_csv) == testutil::read_bytes(b.val_csv));
  CHECK(testutil::read_bytes(a.test_csv) == testutil::read_bytes(b.test_csv));
}

TEST_CASE("attack stage rejects a checkpoint trained on another schedule") {
  Pipeline& p = pipeline();
  ExperimentConfig other = p.cfg;
  other.T = 12;
  CHECK_THROWS_AS(
      run_attack(other, p.ckpt, p.data_dir, "secmi", p.tmp.str("bad")),
      ContractViolation);
}

TEST_CASE("loss-method evaluation writes a report with optimized thresholds") {
  Pipeline& p = pipeline();
  const AttackArtifacts art =
      run_attack(p.cfg, p.ckpt, p.data_dir, "secmi", p.tmp.str("ev"));
  const EvalReport rep = run_eval(p.cfg, "secmi", art.val_csv, art.test_csv,
                                  p.tmp.str("ev/secmi.json"));
  CHECK(rep.method == "secmi");
  CHECK(rep.setup == "tiny");
  CHECK(!rep.has_flag("fixed_threshold"));
  const EvalReport from_disk = load_eval_report(p.tmp.str("ev/secmi.json"));
  CHECK(from_disk.val_auc == rep.val_auc);
  CHECK(from_disk.tau_1pct == rep.tau_1pct);
}

TEST_CASE("classifier evaluation uses the fixed one-half threshold") {
  Pipeline& p = pipeline();
  for (const std::string method : {"gsa1", "blind"}) {
    const AttackArtifacts art =
        run_attack(p.cfg, p.ckpt, p.data_dir, method, p.tmp.str("evc"));
    const EvalReport rep = run_eval(p.cfg, method, art.val_csv, art.test_csv,
                                    p.tmp.str("evc/" + method + ".json"));
    CHECK(rep.has_flag("fixed_threshold"));
    CHECK(rep.tau_1pct == 0.5);
    CHECK(rep.tau_01pct == 0.5);
  }
}

TEST_CASE("shift stage writes its report and optional embeddings") {
  Pipeline& p = pipeline();
  fs::create_directories(p.tmp.str("shift"));
  const ShiftReport rep =
      run_shift(p.cfg, p.data_dir, p.tmp.str("shift/shift.json"), true);
  CHECK(rep.val_tpr + rep.val_fnr == doctest::Approx(1.0).epsilon(1e-9));

  const nlohmann::json j =
      nlohmann::json::parse(read_text_file(p.tmp.str("shift/shift.json")));
  CHECK(j.at("val").at("tpr").get<double>() == rep.val_tpr);
  CHECK(j.at("test").at("fpr").get<double>() == rep.test_fpr);
  CHECK(j.at("eigenvalues").size() == 3);

  std::istringstream csv(read_text_file(p.tmp.str("shift/embeddings.csv")));
  std::string header;
  std::getline(csv, header);
  CHECK(header == "sample_id,split,label,z0,z1,z2");
  int rows = 0;
  for (std::string line; std::getline(csv, line);) ++rows;
  CHECK(rows == 4 * 4);  // four lists of n_eval_per_side samples
}

TEST_CASE("deleted intermediates can be regenerated bit-for-bit") {
  Pipeline& p = pipeline();
  const std::string scratch = p.tmp.str("scratch");
  run_gen_data(p.cfg, scratch);
  const AttackArtifacts before =
      run_attack(p.cfg, p.ckpt, scratch, "pia", p.tmp.str("iso1"));
  fs::remove_all(scratch);
  run_gen_data(p.cfg, scratch);
  const AttackArtifacts after =
      run_attack(p.cfg, p.ckpt, scratch, "pia", p.tmp.str("iso2"));
  CHECK(testutil::read_bytes(before.val_csv) ==
        testutil::read_bytes(after.val_csv));
}

TEST_CASE("run_all produces one row per setup and method") {
  testutil::TempDir tmp("runall");
  std::vector<ExperimentConfig> setups = {tiny_config("tiny-x"),
                                          tiny_config("tiny-y")};
  setups[1].seed = 2;
  setups[1].train.seed = 2;

  std::ostringstream log;
  const BenchmarkTable table = run_all(setups, tmp.str("out"), &log);
  REQUIRE(table.rows.size() == 4);
  CHECK(table.n_failed() == 0);
  CHECK(table.rows[0].setup == "tiny-x");
  CHECK(table.rows[0].method == "secmi");
  CHECK(table.rows[1].method == "blind");
  CHECK(table.rows[2].setup == "tiny-y");
  CHECK(log.str().find("[tiny-x] training") != std::string::npos);

  for (const char* f : {"out/table.json", "out/table.txt",
                        "out/tiny-x/config.json", "out/tiny-x/shift.json",
                        "out/tiny-x/reports/secmi.json",
                        "out/tiny-y/attacks/blind_val.csv"}) {
    CHECK(fs::exists(tmp.str(f)));
  }

  const BenchmarkTable again = run_all(setups, tmp.str("out2"));
  CHECK(testutil::read_bytes(tmp.str("out/table.json")) ==
        testutil::read_bytes(tmp.str("out2/table.json")));
  CHECK(testutil::read_bytes(tmp.str("out/table.txt")) ==
        testutil::read_bytes(tmp.str("out2/table.txt")));
}

TEST_CASE("a failing setup is reported per row and does not stop the run") {
  testutil::TempDir tmp("runallfail");
  std::vector<ExperimentConfig> setups = {tiny_config("broken"),
                                          tiny_config("healthy")};
  setups[0].member_spec.family = "speckle";  // rejected by data generation

  const BenchmarkTable table = run_all(setups, tmp.str("out"));
  REQUIRE(table.rows.size() == 4);
  CHECK(table.n_failed() == 2);
  CHECK(table.rows[0].failed);
  CHECK(!table.rows[0].error.empty());
  CHECK(table.rows[1].failed);
  CHECK(!table.rows[2].failed);
  CHECK(!table.rows[3].failed);

  const std::string text = read_text_file(tmp.str("out/table.txt"));
  CHECK(text.find("FAILED") != std::string::npos);
  const nlohmann::json j =
      nlohmann::json::parse(read_text_file(tmp.str("out/table.json")));
  CHECK(j.at("rows").size() == 4);
  CHECK(j.at("rows").at(0).at("failed").get<bool>());
  CHECK(j.at("rows").at(2).at("report").contains("val"));
}

#include "diffmia/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "diffmia/error.hpp"
#include "diffmia/schedule.hpp"

namespace diffmia {

namespace fs = std::filesystem;
using nlohmann::json;

bool is_classifier_method(const std::string& method) {
  return method == "gsa1" || method == "gsa2" || method == "blind";
}

AttackConfig attack_config_for(const ExperimentConfig& cfg,
                               const std::string& method) {
  const bool plusplus = (method == "secmi++");
  AttackConfig acfg =
      default_attack_config(plusplus ? "secmi" : method, cfg.T, cfg.seed);
  acfg.method = method;
  acfg.secmi.plusplus = plusplus;
  return acfg;
}

void run_gen_data(const ExperimentConfig& cfg, const std::string& out_dir) {
  const BenchmarkSplit split =
      make_setup(cfg.member_spec, cfg.nonmember_spec, cfg.n_train,
                 cfg.n_eval_per_side, cfg.seed, cfg.H, cfg.W);
  save_split(out_dir, split);
}

void run_train(const ExperimentConfig& cfg, const std::string& data_dir,
               const std::string& out_ckpt, std::ostream* log) {
  const BenchmarkSplit split = load_split(data_dir);
  NetConfig net_cfg;
  net_cfg.pixels = cfg.H * cfg.W;
  DenoiserNet net = make_net(net_cfg, cfg.seed);
  const NoiseSchedule schedule =
      build_linear_schedule(cfg.T, cfg.beta_start, cfg.beta_end);

  EpochCallback on_epoch;
  if (log) {
    on_epoch = [log](int epoch, double loss, const DenoiserNet&) {
      (*log) << "epoch " << epoch << ", member loss " << loss << "\n";
    };
  }
  const ModelCheckpoint ckpt = train(std::move(net), to_matrix(split.train_set),
                                     cfg.train, schedule, on_epoch);
  save_checkpoint(out_ckpt, ckpt);
}

namespace {

struct SplitLists {
  const std::vector<ImageSample>* members;
  const std::vector<ImageSample>* nonmembers;
};

// One scored/featurized CSV per split; every sample passes through the same
// per-sample seeded streams regardless of evaluation order.
void score_one_split(const ExperimentConfig& cfg, const ModelCheckpoint* ckpt,
                     const AttackConfig& acfg, const SplitLists& lists,
                     const std::string& setup, const std::string& csv_path,
                     QueryCount& qc) {
  const auto score_sample = [&](const ImageSample& s, int label) -> MiaScore {
    if (acfg.method == "secmi" || acfg.method == "secmi++") {
      return secmi_score(*ckpt, s, label, acfg.secmi, &qc);
    }
    if (acfg.method == "pia") {
      return pia_score(*ckpt, s, label, acfg.pia, &qc);
    }
    if (acfg.method == "pfami") {
      return pfami_score(*ckpt, s, label, acfg.pfami, acfg.seed, &qc);
    }
    throw ConfigError("unknown loss method: " + acfg.method);
  };
  const auto feature_sample = [&](const ImageSample& s,
                                  int label) -> FeatureVector {
    if (acfg.method == "gsa1") {
      return gsa1_features(*ckpt, s, label, acfg.gsa, acfg.seed, &qc);
    }
    if (acfg.method == "gsa2") {
      return gsa2_features(*ckpt, s, label, acfg.gsa, acfg.seed, &qc);
    }
    if (acfg.method == "blind") {
      return blind_features(s, label, cfg.H, cfg.W);
    }
    throw ConfigError("unknown classifier method: " + acfg.method);
  };

  if (is_classifier_method(acfg.method)) {
    std::vector<FeatureVector> feats;
    for (const ImageSample& s : *lists.members) {
      feats.push_back(feature_sample(s, 1));
    }
    for (const ImageSample& s : *lists.nonmembers) {
      feats.push_back(feature_sample(s, 0));
    }
    save_features(csv_path, feats);
  } else {
    ScoreSet scores;
    scores.method = acfg.method;
    scores.setup = setup;
    for (const ImageSample& s : *lists.members) {
      scores.entries.push_back(score_sample(s, 1));
    }
    for (const ImageSample& s : *lists.nonmembers) {
      scores.entries.push_back(score_sample(s, 0));
    }
    save_scores(csv_path, scores);
  }
}

}  // namespace

AttackArtifacts run_attack(const ExperimentConfig& cfg,
                           const std::string& ckpt_path,
                           const std::string& data_dir,
                           const std::string& method,
                           const std::string& out_dir) {
  const AttackConfig acfg = attack_config_for(cfg, method);
  const BenchmarkSplit split = load_split(data_dir);

  ModelCheckpoint ckpt;
  const ModelCheckpoint* ckpt_ptr = nullptr;
  if (method != "blind") {
    ckpt = load_checkpoint(ckpt_path);
    require(ckpt.schedule.T == cfg.T,
            "attack: checkpoint schedule does not match config");
    ckpt_ptr = &ckpt;
  }

  fs::create_directories(out_dir);
  AttackArtifacts art;
  art.method = method;
  art.classifier = is_classifier_method(method);
  art.val_csv = (fs::path(out_dir) / (method + "_val.csv")).string();
  art.test_csv = (fs::path(out_dir) / (method + "_test.csv")).string();

  QueryCount qc;
  score_one_split(cfg, ckpt_ptr, acfg,
                  {&split.members_val, &split.nonmembers_val}, cfg.preset,
                  art.val_csv, qc);
  score_one_split(cfg, ckpt_ptr, acfg,
                  {&split.members_test, &split.nonmembers_test}, cfg.preset,
                  art.test_csv, qc);

  const QueryCount per_sample = attack_query_count(acfg);
  const long n_scored =
      2 * static_cast<long>(split.members_val.size() +
                            split.members_test.size());
  art.counted = qc;
  art.expected = {per_sample.forward_passes * n_scored,
                  per_sample.backward_passes * n_scored};
  if (!(art.counted == art.expected)) {
    throw ContractViolation(
        "attack: instrumented query count does not match the cost formula "
        "for " +
        method);
  }
  return art;
}

EvalReport run_eval(const ExperimentConfig& cfg, const std::string& method,
                    const std::string& val_csv, const std::string& test_csv,
                    const std::string& out_json) {
  FullEvalOptions opts;
  opts.budget_hi = cfg.budget_hi_pct;
  opts.budget_lo = cfg.budget_lo_pct;
  opts.grid_size = cfg.grid_size;
  opts.classifier_based = is_classifier_method(method);

  ScoreSet val, test;
  if (opts.classifier_based) {
    const auto fv = load_features(val_csv, method);
    const auto ft = load_features(test_csv, method);
    require(!fv.empty() && !ft.empty(), "eval: empty feature CSV");

    Eigen::MatrixXd Xv(fv.size(), fv.front().values.size());
    std::vector<int> yv(fv.size());
    for (std::size_t i = 0; i < fv.size(); ++i) {
      for (std::size_t j = 0; j < fv[i].values.size(); ++j) {
        Xv(i, j) = fv[i].values[j];
      }
      yv[i] = fv[i].label;
    }
    const Standardizer std_fit = fit_standardizer(Xv);
    const BoostedTrees model =
        fit_boosted_trees(std_fit.transform(Xv), yv, BoostConfig{});

    const auto to_scores = [&](const std::vector<FeatureVector>& feats,
                               ScoreSet& out) {
      out.method = method;
      out.setup = cfg.preset;
      for (const FeatureVector& f : feats) {
        Eigen::VectorXd x(f.values.size());
        for (std::size_t j = 0; j < f.values.size(); ++j) x[j] = f.values[j];
        const double p = model.predict_proba(std_fit.transform(x));
        out.entries.push_back({f.sample_id, 1.0 - p, f.label});
      }
    };
    to_scores(fv, val);
    to_scores(ft, test);
  } else {
    val = load_scores(val_csv, method, cfg.preset);
    test = load_scores(test_csv, method, cfg.preset);
  }

  const EvalReport rep = full_eval(val, test, opts);
  if (!out_json.empty()) save_eval_report(out_json, rep);
  return rep;
}

ShiftReport run_shift(const ExperimentConfig& cfg, const std::string& data_dir,
                      const std::string& out_json, bool dump_embeddings) {
  const BenchmarkSplit split = load_split(data_dir);
  const FeatureExtractor extractor = [&cfg](const ImageSample& s, int label) {
    return blind_features(s, label, cfg.H, cfg.W);
  };
  const ShiftReport rep = shift_report(split, extractor);

  json j;
  j["val"] = {{"tpr", rep.val_tpr},
              {"fpr", rep.val_fpr},
              {"tnr", rep.val_tnr},
              {"fnr", rep.val_fnr}};
  j["test"] = {{"tpr", rep.test_tpr},
               {"fpr", rep.test_fpr},
               {"tnr", rep.test_tnr},
               {"fnr", rep.test_fnr}};
  j["eigenvalues"] = {rep.eigenvalues[0], rep.eigenvalues[1],
                      rep.eigenvalues[2]};
  j["degenerate"] = rep.degenerate;
  if (!out_json.empty()) write_text_file(out_json, j.dump(2) + "\n");

  if (dump_embeddings && !out_json.empty()) {
    std::string csv = "sample_id,split,label,z0,z1,z2\n";
    const auto dump_list = [&](const std::vector<ImageSample>& list,
                               const char* split_name, int label) {
      for (const ImageSample& s : list) {
        const FeatureVector f = extractor(s, label);
        Eigen::VectorXd x(f.values.size());
        for (std::size_t k = 0; k < f.values.size(); ++k) x[k] = f.values[k];
        const Eigen::Vector3d z =
            rep.projector.project(rep.standardizer.transform(x));
        csv += std::to_string(s.id);
        csv += ',';
        csv += split_name;
        csv += ',';
        csv += std::to_string(label);
        for (int k = 0; k < 3; ++k) {
          csv += ',';
          csv += format_double(z[k]);
        }
        csv += '\n';
      }
    };
    dump_list(split.members_val, "val", 1);
    dump_list(split.nonmembers_val, "val", 0);
    dump_list(split.members_test, "test", 1);
    dump_list(split.nonmembers_test, "test", 0);
    const fs::path p = fs::path(out_json).parent_path() / "embeddings.csv";
    write_text_file(p.string(), csv);
  }
  return rep;
}

int BenchmarkTable::n_failed() const {
  return static_cast<int>(
      std::count_if(rows.begin(), rows.end(),
                    [](const BenchmarkRow& r) { return r.failed; }));
}

json table_to_json(const BenchmarkTable& table) {
  json rows = json::array();
  for (const BenchmarkRow& r : table.rows) {
    json row;
    row["setup"] = r.setup;
    row["method"] = r.method;
    row["failed"] = r.failed;
    if (r.failed) {
      row["error"] = r.error;
    } else {
      row["report"] = eval_report_to_json(r.report);
      row["over_budget_1pct"] = r.report.has_flag("test_fpr_over_budget_1pct");
      row["over_budget_01pct"] =
          r.report.has_flag("test_fpr_over_budget_01pct");
    }
    rows.push_back(row);
  }
  return json{{"rows", rows}};
}

std::string table_to_text(const BenchmarkTable& table) {
  std::ostringstream out;
  out << std::left << std::setw(10) << "setup" << std::setw(9) << "method"
      << std::right << std::setw(9) << "val_auc" << std::setw(10) << "val_tpr1"
      << std::setw(11) << "val_tpr01" << std::setw(10) << "test_tpr1"
      << std::setw(10) << "test_fpr1" << std::setw(7) << "flag" << "\n";
  for (const BenchmarkRow& r : table.rows) {
    out << std::left << std::setw(10) << r.setup << std::setw(9) << r.method;
    if (r.failed) {
      out << "  FAILED: " << r.error << "\n";
      continue;
    }
    const auto num = [&](double v) {
      std::ostringstream s;
      s << std::fixed << std::setprecision(4) << v;
      return s.str();
    };
    out << std::right << std::setw(9) << num(r.report.val_auc) << std::setw(10)
        << num(r.report.val_tpr_at_1pct) << std::setw(11)
        << num(r.report.val_tpr_at_01pct) << std::setw(10)
        << num(r.report.test_tpr_1pct) << std::setw(10)
        << num(r.report.test_fpr_1pct) << std::setw(7)
        << (r.report.has_flag("test_fpr_over_budget_1pct") ? "*" : "") << "\n";
  }
  return out.str();
}

BenchmarkTable run_all(const std::vector<ExperimentConfig>& setups,
                       const std::string& out_dir, std::ostream* log) {
  fs::create_directories(out_dir);
  BenchmarkTable table;

  for (std::size_t si = 0; si < setups.size(); ++si) {
    const ExperimentConfig& cfg = setups[si];
    const std::string setup_name =
        cfg.preset.empty() ? "setup-" + std::to_string(si) : cfg.preset;
    const fs::path dir = fs::path(out_dir) / setup_name;
    const std::string data_dir = (dir / "data").string();
    const std::string ckpt_path = (dir / "model.cmkm").string();

    bool setup_ok = true;
    std::string setup_error;
    try {
      fs::create_directories(dir);
      save_config((dir / "config.json").string(), cfg);
      if (log) (*log) << "[" << setup_name << "] generating data\n";
      run_gen_data(cfg, data_dir);
      if (log) (*log) << "[" << setup_name << "] training\n";
      run_train(cfg, data_dir, ckpt_path, nullptr);
      run_shift(cfg, data_dir, (dir / "shift.json").string());
    } catch (const std::exception& e) {
      setup_ok = false;
      setup_error = e.what();
      if (log) (*log) << "[" << setup_name << "] FAILED: " << e.what() << "\n";
    }

    for (const std::string& method : cfg.methods) {
      BenchmarkRow row;
      row.setup = setup_name;
      row.method = method;
      if (!setup_ok) {
        row.failed = true;
        row.error = setup_error;
        table.rows.push_back(std::move(row));
        continue;
      }
      try {
        if (log) (*log) << "[" << setup_name << "] attack " << method << "\n";
        const AttackArtifacts art = run_attack(
            cfg, ckpt_path, data_dir, method, (dir / "attacks").string());
        fs::create_directories(dir / "reports");
        row.report =
            run_eval(cfg, method, art.val_csv, art.test_csv,
                     (dir / "reports" / (method + ".json")).string());
      } catch (const std::exception& e) {
        row.failed = true;
        row.error = e.what();
        if (log) {
          (*log) << "[" << setup_name << "] " << method
                 << " FAILED: " << e.what() << "\n";
        }
      }
      table.rows.push_back(std::move(row));
    }
  }

  write_text_file((fs::path(out_dir) / "table.json").string(),
                  table_to_json(table).dump(2) + "\n");
  write_text_file((fs::path(out_dir) / "table.txt").string(),
                  table_to_text(table));
  return table;
}

}  // namespace diffmia

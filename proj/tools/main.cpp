// Command-line front end: gen-data, train, attack, eval, shift, run-all.
// Exit codes: 0 success, 1 usage/config, 2 data, 3 numeric/contract.
#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "diffmia/error.hpp"
#include "diffmia/harness.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string preset;
  std::uint64_t seed = 1;
  bool seed_given = false;
};

diffmia::ExperimentConfig resolve_config(const CommonArgs& args) {
  diffmia::ExperimentConfig cfg;
  if (!args.config_path.empty()) {
    cfg = diffmia::load_config(args.config_path);
    if (!args.preset.empty() && args.preset != cfg.preset) {
      cfg = diffmia::preset_config(args.preset, cfg.seed);
    }
  } else if (!args.preset.empty()) {
    cfg = diffmia::preset_config(args.preset, args.seed);
  } else {
    throw diffmia::ConfigError("pass --config <path> or --preset <id>");
  }
  if (args.seed_given) {
    cfg.seed = args.seed;
    cfg.train.seed = args.seed;
  }
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "experiment config JSON");
  cmd->add_option("--preset", args.preset,
                  "preset id (analog-a .. analog-e)");
  cmd->add_option("--seed", args.seed, "global seed (default 1)")
      ->each([&args](const std::string&) { args.seed_given = true; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"toy diffusion membership-inference benchmark"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string out, data_dir, ckpt, method, val_csv, test_csv;
  bool dump_embeddings = false;

  CLI::App* gen = app.add_subcommand("gen-data", "generate a benchmark split");
  add_common(gen, args);
  gen->add_option("--out", out, "output directory")->required();

  CLI::App* train = app.add_subcommand("train", "train the denoiser");
  add_common(train, args);
  train->add_option("--data", data_dir, "split directory")->required();
  train->add_option("--out", out, "checkpoint path")->required();

  CLI::App* attack = app.add_subcommand("attack", "score val+test samples");
  add_common(attack, args);
  attack->add_option("--checkpoint", ckpt, "model checkpoint");
  attack->add_option("--data", data_dir, "split directory")->required();
  attack->add_option("--method", method, "attack method id")->required();
  attack->add_option("--out", out, "output directory for CSVs")->required();

  CLI::App* eval = app.add_subcommand("eval", "two-stage evaluation");
  add_common(eval, args);
  eval->add_option("--method", method, "attack method id")->required();
  eval->add_option("--val", val_csv, "validation CSV")->required();
  eval->add_option("--test", test_csv, "test CSV")->required();
  eval->add_option("--out", out, "report JSON path")->required();

  CLI::App* shift = app.add_subcommand("shift", "distribution-shift report");
  add_common(shift, args);
  shift->add_option("--data", data_dir, "split directory")->required();
  shift->add_option("--out", out, "report JSON path")->required();
  shift->add_flag("--dump-embeddings", dump_embeddings,
                  "also write the 3-D projection CSV");

  CLI::App* runall = app.add_subcommand("run-all", "full benchmark table");
  add_common(runall, args);
  runall->add_option("--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      diffmia::run_gen_data(resolve_config(args), out);
      std::cout << "wrote split to " << out << "\n";
    } else if (train->parsed()) {
      diffmia::run_train(resolve_config(args), data_dir, out, &std::cout);
      std::cout << "wrote checkpoint to " << out << "\n";
    } else if (attack->parsed()) {
      const auto cfg = resolve_config(args);
      if (ckpt.empty() && method != "blind") {
        throw diffmia::ConfigError("--checkpoint required for " + method);
      }
      const auto art = diffmia::run_attack(cfg, ckpt, data_dir, method, out);
      std::cout << "queries: forward=" << art.counted.forward_passes
                << " backward=" << art.counted.backward_passes
                << " (matches cost formula)\n"
                << "wrote " << art.val_csv << " and " << art.test_csv << "\n";
    } else if (eval->parsed()) {
      diffmia::ExperimentConfig cfg;  // defaults carry the standard budgets
      if (!args.config_path.empty() || !args.preset.empty()) {
        cfg = resolve_config(args);
      }
      const auto rep = diffmia::run_eval(cfg, method, val_csv, test_csv, out);
      std::cout << "val auc " << rep.val_auc << ", tpr@1% "
                << rep.val_tpr_at_1pct << "; wrote " << out << "\n";
    } else if (shift->parsed()) {
      const auto rep = diffmia::run_shift(resolve_config(args), data_dir, out,
                                          dump_embeddings);
      std::cout << "val tpr " << rep.val_tpr << ", tnr " << rep.val_tnr
                << "; wrote " << out << "\n";
    } else if (runall->parsed()) {
      std::uint64_t seed = args.seed_given ? args.seed : 1;
      std::vector<std::string> methods;
      double hi = 1.0, lo = 0.1;
      int grid = 10000;
      if (!args.config_path.empty()) {
        const auto base = diffmia::load_config(args.config_path);
        if (!args.seed_given) seed = base.seed;
        methods = base.methods;
        hi = base.budget_hi_pct;
        lo = base.budget_lo_pct;
        grid = base.grid_size;
      }
      std::vector<diffmia::ExperimentConfig> setups;
      for (const std::string& name : diffmia::preset_names()) {
        auto cfg = diffmia::preset_config(name, seed);
        if (!methods.empty()) cfg.methods = methods;
        cfg.budget_hi_pct = hi;
        cfg.budget_lo_pct = lo;
        cfg.grid_size = grid;
        setups.push_back(std::move(cfg));
      }
      const auto table = diffmia::run_all(setups, out, &std::cout);
      std::cout << diffmia::table_to_text(table);
      if (table.n_failed() > 0) {
        std::cerr << table.n_failed() << " row(s) failed\n";
        return 3;
      }
    }
    return 0;
  } catch (const diffmia::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const diffmia::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

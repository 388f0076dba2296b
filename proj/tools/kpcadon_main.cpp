// Command line front end: gen-data, train, eval, sweep, bench-time, repro.
// All verbs are thin wrappers over kpcadon::cli; exit codes are 0 (success /
// graceful skip), 2 (usage or configuration errors) and 1 (runtime failures
// or failed reproduction checks).

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "kpcadon/kpcadon.hpp"

namespace {

using kpcadon::RunConfig;

struct ConfigFlags {
  std::string config_file;
  std::string problem;
  std::string variant;
  std::size_t p = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> overrides;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& flags,
                      bool with_model_flags = true) {
  cmd->add_option("--config", flags.config_file,
                  "JSON config file (overrides the preset)");
  cmd->add_option("--problem", flags.problem,
                  "built-in preset: 1d-nonlinear, synthetic-2d, cavity-flow, "
                  "navier-stokes");
  if (with_model_flags) {
    cmd->add_option("--variant", flags.variant, "kpca or pod");
    cmd->add_option("--p", flags.p, "latent dimension");
    cmd->add_option("--seeds", flags.seeds, "training seeds")
        ->delimiter(',');
  }
  cmd->add_option("--set", flags.overrides,
                  "config override, e.g. --set branch.epochs=2000")
      ->take_all();
}

RunConfig resolve_config(const ConfigFlags& flags) {
  RunConfig config;
  if (!flags.config_file.empty()) {
    config = RunConfig::load(flags.config_file);
    if (!flags.problem.empty()) config.problem = flags.problem;
  } else if (!flags.problem.empty()) {
    config = RunConfig::preset(flags.problem);
  } else {
    throw std::invalid_argument("give either --config or --problem");
  }
  if (!flags.variant.empty()) config.variant = flags.variant;
  if (flags.p > 0) config.p = flags.p;
  if (!flags.seeds.empty()) config.seeds = flags.seeds;
  for (const std::string& o : flags.overrides) config.apply_override(o);
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KPCA-DeepONet: operator learning with kernel PCA output "
               "compression and kernel ridge reconstruction"};
  app.require_subcommand(1);

  // gen-data ---------------------------------------------------------------
  ConfigFlags gen_flags;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-data",
                                 "generate a built-in benchmark dataset");
  add_config_flags(gen, gen_flags, /*with_model_flags=*/false);
  gen->add_option("--out", gen_out, "output directory")->required();

  // train ------------------------------------------------------------------
  ConfigFlags train_flags;
  std::string train_data, train_out;
  auto* train = app.add_subcommand("train",
                                   "train one model per seed at a fixed p");
  add_config_flags(train, train_flags);
  train->add_option("--data", train_data, "directory with .train/.test files")
      ->required();
  train->add_option("--out", train_out, "output directory")->required();

  // eval -------------------------------------------------------------------
  kpcadon::cli::EvalArgs eval_args;
  std::size_t eval_trials = 0;
  auto* eval = app.add_subcommand("eval", "score saved models on a dataset");
  eval->add_option("--model", eval_args.model_files, "model file(s)")
      ->required()
      ->take_all();
  eval->add_option("--data", eval_args.data_file, "dataset file")->required();
  eval->add_option("--out", eval_args.out_dir, "output directory")->required();
  eval->add_option("--trials", eval_trials,
                   "use only the first K model files");
  eval->add_flag("--oracle-latents", eval_args.oracle_latents,
                 "decode true latent coordinates instead of branch output");

  // sweep ------------------------------------------------------------------
  ConfigFlags sweep_flags;
  kpcadon::cli::SweepArgs sweep_args;
  auto* sweep = app.add_subcommand(
      "sweep", "factorial run over variants, latent dims and seeds");
  add_config_flags(sweep, sweep_flags);
  sweep->add_option("--data", sweep_args.data_dir,
                    "directory with .train/.test files")
      ->required();
  sweep->add_option("--out", sweep_args.out_dir, "output directory")
      ->required();
  sweep->add_option("--trials", sweep_args.trials,
                    "use only the first K seeds");
  sweep->add_flag("--save-models", sweep_args.save_models,
                  "write every trained model to the output directory");

  // bench-time -------------------------------------------------------------
  ConfigFlags bench_flags;
  kpcadon::cli::BenchArgs bench_args;
  auto* bench = app.add_subcommand(
      "bench-time", "timing of fit and per-sample prediction vs data size");
  add_config_flags(bench, bench_flags);
  bench->add_option("--n-list", bench_args.n_list, "training set sizes")
      ->delimiter(',');
  bench->add_option("--out", bench_args.out_dir, "output directory")
      ->required();
  bench->add_option("--batch", bench_args.batch, "prediction batch size");
  bench->add_option("--reps", bench_args.reps, "timed repetitions");
  bench->add_option("--warmup", bench_args.warmup, "untimed repetitions");

  // repro ------------------------------------------------------------------
  kpcadon::cli::ReproArgs repro_args;
  std::string repro_name;
  std::string manifest_dir = "experiments";
  auto* repro = app.add_subcommand(
      "repro", "run a reproduction manifest end to end");
  repro->add_option("name", repro_name,
                    "manifest name (e.g. repro-1d) or path to a .json file")
      ->required();
  repro->add_option("--manifest-dir", manifest_dir,
                    "directory with manifest files");
  repro->add_option("--data-root", repro_args.data_root,
                    "root directory for external datasets");
  repro->add_option("--out", repro_args.out_dir, "output directory")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help is success, parse errors are usage
  }

  try {
    if (*gen) {
      kpcadon::cli::GenDataArgs args;
      args.config = resolve_config(gen_flags);
      args.out_dir = gen_out;
      return kpcadon::cli::cmd_gen_data(args, std::cout);
    }
    if (*train) {
      kpcadon::cli::TrainArgs args;
      args.config = resolve_config(train_flags);
      args.data_dir = train_data;
      args.out_dir = train_out;
      return kpcadon::cli::cmd_train(args, std::cout);
    }
    if (*eval) {
      if (eval_trials > 0 && eval_trials < eval_args.model_files.size()) {
        eval_args.model_files.resize(eval_trials);
      }
      return kpcadon::cli::cmd_eval(eval_args, std::cout);
    }
    if (*sweep) {
      // --variant both (the default) sweeps kpca and pod side by side.
      const std::string v = sweep_flags.variant;
      sweep_flags.variant.clear();
      sweep_args.config = resolve_config(sweep_flags);
      if (v.empty() || v == "both") {
        sweep_args.variants = {"kpca", "pod"};
      } else {
        sweep_args.variants = {v};
      }
      return kpcadon::cli::cmd_sweep(sweep_args, std::cout);
    }
    if (*bench) {
      bench_args.config = resolve_config(bench_flags);
      // Timing runs only need a token branch fit unless overridden.
      if (bench_flags.config_file.empty()) {
        bench_args.config.epochs = 100;
        bench_args.config.batch_size = 256;
        bench_args.config.decay_steps = 0;
        bench_args.config.log_every = 100;
        for (const std::string& o : bench_flags.overrides) {
          bench_args.config.apply_override(o);
        }
      }
      return kpcadon::cli::cmd_bench(bench_args, std::cout);
    }
    if (*repro) {
      namespace fs = std::filesystem;
      fs::path path(repro_name);
      if (!fs::exists(path)) {
        path = fs::path(manifest_dir) / (repro_name + ".json");
      }
      repro_args.manifest_file = path.string();
      return kpcadon::cli::cmd_repro(repro_args, std::cout);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

#include "kpcadon/cli.hpp"

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "kpcadon/config.hpp"
#include "kpcadon/data.hpp"
#include "kpcadon/errors.hpp"
#include "kpcadon/operator.hpp"

namespace fs = std::filesystem;
namespace cli = kpcadon::cli;

using kpcadon::Dataset;
using kpcadon::load_dataset;
using kpcadon::load_model;
using kpcadon::RunConfig;

namespace {

std::string tmp_dir(const std::string& name) {
  const std::string dir = ::testing::TempDir() + "kpcadon_cli_" + name;
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is),
                     std::istreambuf_iterator<char>());
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream is(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(is, line)) lines.push_back(line);
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t end = line.find(',', pos);
    if (end == std::string::npos) end = line.size();
    fields.push_back(line.substr(pos, end - pos));
    pos = end + 1;
    if (end == line.size()) break;
  }
  return fields;
}

/// The trial CSVs carry a wall-clock column; drop it before comparing runs.
std::string without_timing_column(const std::string& path) {
  std::string out;
  for (const std::string& line : read_lines(path)) {
    std::vector<std::string> fields = split_csv(line);
    if (fields.size() > 6) fields.erase(fields.begin() + 6);
    for (std::size_t i = 0; i < fields.size(); ++i) {
      out += fields[i];
      out += i + 1 < fields.size() ? "," : "\n";
    }
  }
  return out;
}

/// Small, fast configuration used by the in-process command tests.
RunConfig tiny_config() {
  RunConfig c;
  c.problem = "1d-nonlinear";
  c.n_train = 6;
  c.n_test = 4;
  c.grid_size = 12;
  c.p = 3;
  c.p_list = {2, 3};
  c.hidden = {8, 8};
  c.lambda = 1e-6;
  c.epochs = 200;
  c.decay_steps = 50;
  c.log_every = 100;
  c.seeds = {1, 2};
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(KPCADON_CLI_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

int run_cli_env(const std::string& env, const std::string& args) {
  const std::string cmd = env + " " + std::string(KPCADON_CLI_BIN) + " " +
                          args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

// ---------------------------------------------------------------------------
// Infrastructure helpers
// ---------------------------------------------------------------------------

TEST(WorkerThreads, EnvironmentVariableWinsWhenValid) {
  ASSERT_EQ(setenv("KPCADON_THREADS", "3", 1), 0);
  EXPECT_EQ(cli::worker_threads(), 3u);
  ASSERT_EQ(setenv("KPCADON_THREADS", "1", 1), 0);
  EXPECT_EQ(cli::worker_threads(), 1u);
  unsetenv("KPCADON_THREADS");
  EXPECT_GE(cli::worker_threads(), 1u);
}

TEST(WorkerThreads, RejectsNonPositiveOrGarbageValues) {
  for (const char* bad : {"0", "-2", "abc", "2x", ""}) {
    ASSERT_EQ(setenv("KPCADON_THREADS", bad, 1), 0);
    EXPECT_THROW(cli::worker_threads(), std::invalid_argument) << bad;
  }
  unsetenv("KPCADON_THREADS");
}

TEST(ParallelForIndex, VisitsEveryIndexExactlyOnce) {
  std::vector<std::atomic<int>> hits(23);
  cli::parallel_for_index(23, 4, [&](std::size_t i) { ++hits[i]; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
}

TEST(ParallelForIndex, PropagatesWorkerExceptions) {
  EXPECT_THROW(cli::parallel_for_index(8, 3,
                                       [](std::size_t i) {
                                         if (i == 5) {
                                           throw std::runtime_error("boom");
                                         }
                                       }),
               std::runtime_error);
  // Zero work is a no-op regardless of thread count.
  cli::parallel_for_index(0, 4, [](std::size_t) { FAIL(); });
}

TEST(CliPaths, FollowTheDocumentedNamingScheme) {
  EXPECT_EQ(cli::dataset_path("out", "1d-nonlinear", true),
            "out/1d-nonlinear.train.dat");
  EXPECT_EQ(cli::dataset_path("out", "1d-nonlinear", false),
            "out/1d-nonlinear.test.dat");
  EXPECT_EQ(cli::model_path("runs", "kpca", 10, 3), "runs/kpca-p10-seed3.model");
}

// ---------------------------------------------------------------------------
// In-process commands
// ---------------------------------------------------------------------------

TEST(Commands, GenDataWritesLoadableDatasets) {
  const std::string out = tmp_dir("gendata");
  cli::GenDataArgs args;
  args.config = tiny_config();
  args.out_dir = out;
  std::ostringstream log;
  EXPECT_EQ(cli::cmd_gen_data(args, log), 0);

  const Dataset train = load_dataset(out + "/1d-nonlinear.train.dat");
  const Dataset test = load_dataset(out + "/1d-nonlinear.test.dat");
  EXPECT_EQ(train.sample_count(), 6u);
  EXPECT_EQ(test.sample_count(), 4u);
  EXPECT_EQ(train.grid_points(), 12u);
  EXPECT_NE(log.str().find("1d-nonlinear.train.dat"), std::string::npos);
}

TEST(Commands, TrainProducesModelsAndReport) {
  const std::string data = tmp_dir("train_data");
  const std::string out = tmp_dir("train_out");
  cli::GenDataArgs gen{tiny_config(), data};
  std::ostringstream log;
  ASSERT_EQ(cli::cmd_gen_data(gen, log), 0);

  cli::TrainArgs args;
  args.config = tiny_config();
  args.data_dir = data;
  args.out_dir = out;
  EXPECT_EQ(cli::cmd_train(args, log), 0);

  const auto lines = read_lines(out + "/train.csv");
  ASSERT_EQ(lines.size(), 3u);  // header + one row per seed
  EXPECT_EQ(split_csv(lines[0]).size(), 8u);
  EXPECT_EQ(split_csv(lines[1])[1], "kpca");

  // Both per-seed models were written and load back.
  for (std::uint64_t seed : {1, 2}) {
    const auto model = load_model(cli::model_path(out, "kpca", 3, seed));
    EXPECT_EQ(model.seed, seed);
    EXPECT_EQ(model.p, 3u);
  }
  EXPECT_NE(log.str().find("rel L2"), std::string::npos);
}

TEST(Commands, EvalScoresSavedModelsAndOracleLatents) {
  const std::string data = tmp_dir("eval_data");
  const std::string out = tmp_dir("eval_out");
  std::ostringstream log;
  cli::GenDataArgs gen{tiny_config(), data};
  ASSERT_EQ(cli::cmd_gen_data(gen, log), 0);
  cli::TrainArgs train{tiny_config(), data, out};
  ASSERT_EQ(cli::cmd_train(train, log), 0);

  cli::EvalArgs eval;
  eval.model_files = {cli::model_path(out, "kpca", 3, 1),
                      cli::model_path(out, "kpca", 3, 2)};
  eval.data_file = data + "/1d-nonlinear.test.dat";
  eval.out_dir = out;
  ASSERT_EQ(cli::cmd_eval(eval, log), 0);
  const auto branch_lines = read_lines(out + "/eval.csv");
  ASSERT_EQ(branch_lines.size(), 3u);
  const double branch_err = std::stod(split_csv(branch_lines[1])[5]);

  eval.oracle_latents = true;
  ASSERT_EQ(cli::cmd_eval(eval, log), 0);
  const auto oracle_lines = read_lines(out + "/eval.csv");
  EXPECT_EQ(split_csv(oracle_lines[1])[4], "1");  // oracle flag column
  const double oracle_err = std::stod(split_csv(oracle_lines[1])[5]);

  // Decoding the true latents strips the branch network error away, so the
  // oracle score must be the better of the two. (With only 6 training
  // snapshots the truncation floor itself is still around 30%.)
  EXPECT_LT(oracle_err, branch_err);
  EXPECT_LT(oracle_err, 0.5);
}

TEST(Commands, SweepCoversTheFactorialAndIsDeterministic) {
  const std::string data = tmp_dir("sweep_data");
  std::ostringstream log;
  cli::GenDataArgs gen{tiny_config(), data};
  ASSERT_EQ(cli::cmd_gen_data(gen, log), 0);

  auto run_once = [&](const std::string& out) {
    cli::SweepArgs args;
    args.config = tiny_config();
    args.variants = {"kpca", "pod"};
    args.data_dir = data;
    args.out_dir = out;
    return cli::cmd_sweep(args, log);
  };
  const std::string out_a = tmp_dir("sweep_a");
  const std::string out_b = tmp_dir("sweep_b");
  ASSERT_EQ(run_once(out_a), 0);
  ASSERT_EQ(run_once(out_b), 0);

  // 2 variants x 2 latent dims x 2 seeds trials, 4 summary rows.
  EXPECT_EQ(read_lines(out_a + "/sweep.csv").size(), 9u);
  EXPECT_EQ(read_lines(out_a + "/summary.csv").size(), 5u);
  EXPECT_NE(log.str().find("best kpca"), std::string::npos);

  // Identical runs agree byte for byte once wall-clock times are dropped.
  EXPECT_EQ(without_timing_column(out_a + "/sweep.csv"),
            without_timing_column(out_b + "/sweep.csv"));
  EXPECT_EQ(read_file(out_a + "/summary.csv"), read_file(out_b + "/summary.csv"));
}

TEST(Commands, SweepTrialsFlagLimitsSeeds) {
  const auto pair = tiny_config().generate();
  cli::SweepArgs args;
  args.config = tiny_config();
  args.variants = {"pod"};
  args.trials = 1;
  const cli::SweepOutcome out = cli::run_sweep(pair.train, pair.test, args);
  EXPECT_EQ(out.trials.size(), 2u);  // 2 latent dims x 1 seed
  for (const cli::TrialSummary& s : out.summaries) {
    EXPECT_EQ(s.trials, 1u);
    EXPECT_EQ(s.rel_l2.std_dev, 0.0);  // single trial: no spread
  }
}

TEST(Commands, BenchTimesBothVariantsPerSize) {
  cli::BenchArgs args;
  args.config = tiny_config();
  args.config.epochs = 50;
  args.n_list = {12, 20};
  args.out_dir = tmp_dir("bench");
  args.batch = 6;
  args.reps = 3;
  args.warmup = 1;
  std::ostringstream log;
  EXPECT_EQ(cli::cmd_bench(args, log), 0);

  const auto lines = read_lines(args.out_dir + "/bench.csv");
  ASSERT_EQ(lines.size(), 5u);  // header + 2 sizes x 2 variants
  std::map<std::string, std::vector<double>> bytes_by_variant;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split_csv(lines[i]);
    ASSERT_EQ(fields.size(), 6u);
    EXPECT_GT(std::stod(fields[3]), 0.0);  // fit time
    EXPECT_GT(std::stod(fields[4]), 0.0);  // predict time per sample
    EXPECT_GT(std::stod(fields[5]), 0.0);  // resident bytes
    bytes_by_variant[fields[0]].push_back(std::stod(fields[5]));
  }
  // The kpca footprint keeps the training snapshots, so it grows with the
  // training set; the pod basis depends only on grid size and p.
  EXPECT_LT(bytes_by_variant["kpca"][0], bytes_by_variant["kpca"][1]);
  EXPECT_EQ(bytes_by_variant["pod"][0], bytes_by_variant["pod"][1]);
}

// ---------------------------------------------------------------------------
// Binary smoke tests (exit codes through the real executable)
// ---------------------------------------------------------------------------

TEST(CliBinary, HelpSucceedsAndMissingSubcommandIsUsageError) {
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
}

TEST(CliBinary, UsageErrorsExitTwo) {
  EXPECT_EQ(run_cli("gen-data --problem 1d-nonlinear"), 2);  // missing --out
  EXPECT_EQ(run_cli("gen-data --problem bogus --out /tmp/x"), 2);
  EXPECT_EQ(run_cli("train --data /nowhere --out /tmp/x"), 2);  // no config
  EXPECT_EQ(run_cli("sweep --problem 1d-nonlinear --data /nowhere --out "
                    "/tmp/x --set bogus.key=1"),
            2);
}

TEST(CliBinary, RuntimeFailuresExitOne) {
  const std::string out = tmp_dir("bin_runtime");
  // Valid usage, but the dataset files do not exist.
  EXPECT_EQ(run_cli("train --problem 1d-nonlinear --data /nowhere --out " +
                    out),
            1);
  EXPECT_EQ(run_cli("eval --model /nowhere/x.model --data /nowhere/y.dat "
                    "--out " +
                    out),
            1);
}

TEST(CliBinary, BadThreadEnvironmentExitsTwo) {
  const std::string dir = tmp_dir("bin_env");
  ASSERT_EQ(run_cli("gen-data --problem 1d-nonlinear --set "
                    "generator.n_train=4 --set generator.n_test=3 --set "
                    "generator.grid_size=10 --out " +
                    dir),
            0);
  EXPECT_EQ(
      run_cli_env("KPCADON_THREADS=abc",
                  "train --problem 1d-nonlinear --p 2 --seeds 1 --set "
                  "branch.epochs=10 --set branch.hidden=[4] --data " +
                      dir + " --out " + dir),
      2);
}

TEST(CliBinary, FullPipelineRunsCleanly) {
  const std::string dir = tmp_dir("bin_pipeline");
  const std::string tiny =
      " --set generator.n_train=6 --set generator.n_test=4 --set "
      "generator.grid_size=12 --set branch.epochs=100 --set "
      "branch.hidden=[8,8] --set branch.log_every=50 --set "
      "kernels.lambda=1e-6";

  ASSERT_EQ(run_cli("gen-data --problem 1d-nonlinear" + tiny + " --out " + dir),
            0);
  ASSERT_EQ(run_cli("train --problem 1d-nonlinear --variant kpca --p 3 "
                    "--seeds 1,2" +
                    tiny + " --data " + dir + " --out " + dir),
            0);
  EXPECT_TRUE(fs::exists(dir + "/train.csv"));
  EXPECT_TRUE(fs::exists(dir + "/kpca-p3-seed2.model"));

  ASSERT_EQ(run_cli("eval --model " + dir + "/kpca-p3-seed1.model --data " +
                    dir + "/1d-nonlinear.test.dat --oracle-latents --out " +
                    dir),
            0);
  EXPECT_TRUE(fs::exists(dir + "/eval.csv"));

  ASSERT_EQ(run_cli("sweep --problem 1d-nonlinear --seeds 1 --set "
                    "'latent.p_list=[2,3]'" +
                    tiny + " --data " + dir + " --out " + dir),
            0);
  EXPECT_TRUE(fs::exists(dir + "/sweep.csv"));
  EXPECT_TRUE(fs::exists(dir + "/summary.csv"));

  ASSERT_EQ(run_cli("bench-time --problem 1d-nonlinear --n-list 12,20 "
                    "--batch 6 --reps 2 --warmup 1 --out " +
                    dir),
            0);
  EXPECT_TRUE(fs::exists(dir + "/bench.csv"));
}

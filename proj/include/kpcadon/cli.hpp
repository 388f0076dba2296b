#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "kpcadon/config.hpp"
#include "kpcadon/data.hpp"
#include "kpcadon/errors.hpp"
#include "kpcadon/metrics.hpp"
#include "kpcadon/operator.hpp"
#include "kpcadon/serialize.hpp"

namespace kpcadon::cli {

namespace fs = std::filesystem;

/// Worker-thread cap: KPCADON_THREADS if set (>= 1), otherwise hardware
/// concurrency. Trials are independent and deterministic, so results do not
/// depend on the thread count.
inline std::size_t worker_threads() {
  if (const char* env = std::getenv("KPCADON_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw std::invalid_argument(
          "KPCADON_THREADS must be a positive integer, got '" +
          std::string(env) + "'");
    }
    return static_cast<std::size_t>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Run fn(0..count-1) on up to `threads` workers; exceptions are rethrown on
/// the caller thread. Work items are claimed from a shared counter, so any
/// interleaving yields the same per-index results.
template <typename Fn>
void parallel_for_index(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::min(std::max<std::size_t>(threads, 1), count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::mutex mu;
  std::size_t next = 0;
  std::exception_ptr error;
  auto worker = [&]() {
    for (;;) {
      std::size_t i;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (error || next >= count) return;
        i = next++;
      }
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Shortest reproducible text form of a double for reports.
inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

inline std::string dataset_path(const std::string& dir,
                                const std::string& problem, bool train) {
  return (fs::path(dir) / (problem + (train ? ".train.dat" : ".test.dat")))
      .string();
}

inline std::string model_path(const std::string& dir,
                              const std::string& variant, std::size_t p,
                              std::uint64_t seed) {
  char name[128];
  std::snprintf(name, sizeof(name), "%s-p%zu-seed%llu.model", variant.c_str(),
                p, static_cast<unsigned long long>(seed));
  return (fs::path(dir) / name).string();
}

// ---------------------------------------------------------------------------
// Trials.
// ---------------------------------------------------------------------------

struct TrialResult {
  std::string variant;
  std::size_t p = 0;
  std::uint64_t seed = 0;
  double rel_l2_mean = 0.0;
  double rel_l2_flat = 0.0;
  double train_seconds = 0.0;
  std::string model_file;  // empty when models are not saved
};

struct TrialSummary {
  std::string variant;
  std::size_t p = 0;
  std::size_t trials = 0;
  MeanStd rel_l2;
  MeanStd rel_l2_flat;
};

/// Train one model per seed (in parallel up to the worker cap) and score it
/// on the test set. Models are saved to `out_dir` unless it is empty.
inline std::vector<TrialResult> run_trials(
    const Dataset& train, const Dataset& test, const RunConfig& config,
    const std::string& variant, std::size_t p,
    const std::vector<std::uint64_t>& seeds, const std::string& out_dir) {
  RunConfig rc = config;
  rc.variant = variant;
  rc.p = p;
  const OperatorConfig oc = rc.to_operator_config();

  std::vector<TrialResult> results(seeds.size());
  parallel_for_index(seeds.size(), worker_threads(), [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    const OperatorModel model = train_operator(train, oc, seeds[i]);
    TrialResult r;
    r.variant = variant;
    r.p = p;
    r.seed = seeds[i];
    r.train_seconds = seconds_since(t0);
    const Matrix pred = model.predict(test.inputs);
    r.rel_l2_mean = mean_relative_l2(pred, test.outputs);
    r.rel_l2_flat = flattened_relative_l2(pred, test.outputs);
    if (!out_dir.empty()) {
      r.model_file = model_path(out_dir, variant, p, seeds[i]);
      save_model(model, r.model_file);
    }
    results[i] = std::move(r);
  });
  return results;
}

inline TrialSummary summarize(const std::vector<TrialResult>& trials) {
  if (trials.empty()) throw std::invalid_argument("summarize: no trials");
  TrialSummary s;
  s.variant = trials.front().variant;
  s.p = trials.front().p;
  s.trials = trials.size();
  std::vector<double> mean_errs, flat_errs;
  for (const TrialResult& t : trials) {
    mean_errs.push_back(t.rel_l2_mean);
    flat_errs.push_back(t.rel_l2_flat);
  }
  s.rel_l2 = mean_std(mean_errs);
  s.rel_l2_flat = mean_std(flat_errs);
  return s;
}

inline void write_trials_csv(const std::string& path,
                             const std::string& problem,
                             const std::vector<TrialResult>& trials) {
  io::AtomicFile file(path);
  std::ostream& os = file.stream();
  os << "problem,variant,p,seed,rel_l2_mean,rel_l2_flat,train_seconds,model\n";
  for (const TrialResult& t : trials) {
    os << problem << ',' << t.variant << ',' << t.p << ',' << t.seed << ','
       << fmt(t.rel_l2_mean) << ',' << fmt(t.rel_l2_flat) << ','
       << fmt(t.train_seconds) << ',' << t.model_file << "\n";
  }
  file.commit();
}

inline void write_summary_csv(const std::string& path,
                              const std::string& problem,
                              const std::vector<TrialSummary>& summaries) {
  io::AtomicFile file(path);
  std::ostream& os = file.stream();
  os << "problem,variant,p,trials,rel_l2_mean,rel_l2_std,rel_l2_flat_mean,"
        "rel_l2_flat_std\n";
  for (const TrialSummary& s : summaries) {
    os << problem << ',' << s.variant << ',' << s.p << ',' << s.trials << ','
       << fmt(s.rel_l2.mean) << ',' << fmt(s.rel_l2.std_dev) << ','
       << fmt(s.rel_l2_flat.mean) << ',' << fmt(s.rel_l2_flat.std_dev)
       << "\n";
  }
  file.commit();
}

// ---------------------------------------------------------------------------
// Commands. Each returns a process exit code and reports through `log`.
// ---------------------------------------------------------------------------

/// gen-data: write the train/test datasets of a built-in problem.
struct GenDataArgs {
  RunConfig config;       // problem + generator sizes
  std::string out_dir;
};

inline int cmd_gen_data(const GenDataArgs& args, std::ostream& log) {
  fs::create_directories(args.out_dir);
  const DatasetPair pair = args.config.generate();
  const std::string train_path =
      dataset_path(args.out_dir, args.config.problem, true);
  const std::string test_path =
      dataset_path(args.out_dir, args.config.problem, false);
  save_dataset(pair.train, train_path);
  save_dataset(pair.test, test_path);
  log << "wrote " << train_path << " (" << pair.train.sample_count()
      << " samples, " << pair.train.grid_points() << " grid points)\n";
  log << "wrote " << test_path << " (" << pair.test.sample_count()
      << " samples)\n";
  return 0;
}

/// train: fit one model per seed at a single latent dimension.
struct TrainArgs {
  RunConfig config;
  std::string data_dir;   // expects <problem>.train.dat / .test.dat
  std::string out_dir;
};

inline int cmd_train(const TrainArgs& args, std::ostream& log) {
  fs::create_directories(args.out_dir);
  const Dataset train =
      load_dataset(dataset_path(args.data_dir, args.config.problem, true));
  const Dataset test =
      load_dataset(dataset_path(args.data_dir, args.config.problem, false));
  const std::vector<TrialResult> trials =
      run_trials(train, test, args.config, args.config.variant, args.config.p,
                 args.config.seeds, args.out_dir);
  write_trials_csv((fs::path(args.out_dir) / "train.csv").string(),
                   args.config.problem, trials);
  const TrialSummary s = summarize(trials);
  log << args.config.variant << " p=" << s.p << ": rel L2 "
      << fmt(s.rel_l2.mean) << " +/- " << fmt(s.rel_l2.std_dev) << " over "
      << s.trials << " seeds\n";
  for (const TrialResult& t : trials) {
    log << "  seed " << t.seed << ": " << fmt(t.rel_l2_mean) << " ("
        << fmt(t.train_seconds) << " s) -> " << t.model_file << "\n";
  }
  return 0;
}

/// eval: score saved models against a dataset file.
struct EvalArgs {
  std::vector<std::string> model_files;
  std::string data_file;
  std::string out_dir;
  bool oracle_latents = false;  // decode the true latents instead of the
                                // branch prediction (decoder-only error)
};

inline int cmd_eval(const EvalArgs& args, std::ostream& log) {
  if (args.model_files.empty()) {
    throw std::invalid_argument("eval: no model files given");
  }
  fs::create_directories(args.out_dir);
  const Dataset data = load_dataset(args.data_file);

  io::AtomicFile report((fs::path(args.out_dir) / "eval.csv").string());
  std::ostream& os = report.stream();
  os << "model,variant,p,seed,oracle_latents,rel_l2_mean,rel_l2_flat\n";

  std::vector<double> means;
  for (const std::string& file : args.model_files) {
    const OperatorModel model = load_model(file);
    Matrix pred;
    if (args.oracle_latents) {
      pred = model.decode(model.encode(data.outputs));
    } else {
      pred = model.predict(data.inputs);
    }
    const double rel = mean_relative_l2(pred, data.outputs);
    const double flat = flattened_relative_l2(pred, data.outputs);
    means.push_back(rel);
    os << file << ',' << to_string(model.variant) << ',' << model.p << ','
       << model.seed << ',' << (args.oracle_latents ? 1 : 0) << ','
       << fmt(rel) << ',' << fmt(flat) << "\n";
    log << file << ": rel L2 " << fmt(rel) << " (flattened " << fmt(flat)
        << ")" << (args.oracle_latents ? " [oracle latents]" : "") << "\n";
  }
  const MeanStd agg = mean_std(means);
  log << "mean over " << means.size() << " model(s): " << fmt(agg.mean)
      << " +/- " << fmt(agg.std_dev) << "\n";
  report.commit();
  return 0;
}

/// sweep: full factorial over variants, latent dimensions and seeds.
struct SweepArgs {
  RunConfig config;
  std::vector<std::string> variants;  // subset of {kpca, pod}
  std::string data_dir;
  std::string out_dir;
  std::size_t trials = 0;  // 0: all seeds; otherwise first `trials` seeds
  bool save_models = false;
};

struct SweepOutcome {
  std::vector<TrialResult> trials;
  std::vector<TrialSummary> summaries;
};

inline SweepOutcome run_sweep(const Dataset& train, const Dataset& test,
                              const SweepArgs& args) {
  std::vector<std::uint64_t> seeds = args.config.seeds;
  if (args.trials > 0 && args.trials < seeds.size()) {
    seeds.resize(args.trials);
  }
  if (seeds.empty()) throw std::invalid_argument("sweep: no seeds configured");

  SweepOutcome out;
  for (const std::string& variant : args.variants) {
    for (std::size_t p : args.config.p_list) {
      const std::vector<TrialResult> trials =
          run_trials(train, test, args.config, variant, p, seeds,
                     args.save_models ? args.out_dir : std::string());
      out.summaries.push_back(summarize(trials));
      out.trials.insert(out.trials.end(), trials.begin(), trials.end());
    }
  }
  return out;
}

inline int cmd_sweep(const SweepArgs& args, std::ostream& log) {
  if (args.variants.empty()) {
    throw std::invalid_argument("sweep: no variants selected");
  }
  fs::create_directories(args.out_dir);
  const Dataset train =
      load_dataset(dataset_path(args.data_dir, args.config.problem, true));
  const Dataset test =
      load_dataset(dataset_path(args.data_dir, args.config.problem, false));

  const SweepOutcome out = run_sweep(train, test, args);
  write_trials_csv((fs::path(args.out_dir) / "sweep.csv").string(),
                   args.config.problem, out.trials);
  write_summary_csv((fs::path(args.out_dir) / "summary.csv").string(),
                    args.config.problem, out.summaries);

  for (const TrialSummary& s : out.summaries) {
    log << s.variant << " p=" << s.p << ": rel L2 " << fmt(s.rel_l2.mean)
        << " +/- " << fmt(s.rel_l2.std_dev) << " (" << s.trials
        << " seeds)\n";
  }
  for (const std::string& variant : args.variants) {
    const TrialSummary* best = nullptr;
    for (const TrialSummary& s : out.summaries) {
      if (s.variant == variant && (!best || s.rel_l2.mean < best->rel_l2.mean)) {
        best = &s;
      }
    }
    if (best) {
      log << "best " << variant << ": p=" << best->p << " with rel L2 "
          << fmt(best->rel_l2.mean) << " +/- " << fmt(best->rel_l2.std_dev)
          << "\n";
    }
  }
  return 0;
}

/// bench-time: fit both variants at a fixed p for growing training set sizes
/// and measure per-sample prediction time.
struct BenchArgs {
  RunConfig config;              // problem must have a generator
  std::vector<std::size_t> n_list{100, 400, 1600};
  std::string out_dir;
  std::size_t batch = 100;  // prediction batch size
  std::size_t reps = 20;    // timed repetitions (median reported)
  std::size_t warmup = 3;
};

struct BenchRow {
  std::string variant;
  std::size_t n_train = 0;
  std::size_t p = 0;
  double fit_seconds = 0.0;
  double predict_seconds_per_sample = 0.0;
  std::size_t model_bytes = 0;
};

inline std::vector<BenchRow> run_bench(const BenchArgs& args,
                                       std::ostream& log) {
  std::vector<BenchRow> rows;
  for (std::size_t n : args.n_list) {
    RunConfig rc = args.config;
    rc.n_train = n;
    const DatasetPair pair = rc.generate();

    // The decoder dominates prediction cost; keep branch training token.
    for (const std::string variant : {std::string("kpca"), std::string("pod")}) {
      rc.variant = variant;
      const OperatorConfig oc = rc.to_operator_config();
      const auto t0 = std::chrono::steady_clock::now();
      const OperatorModel model = train_operator(pair.train, oc, rc.seeds.at(0));
      BenchRow row;
      row.variant = variant;
      row.n_train = n;
      row.p = rc.p;
      row.fit_seconds = seconds_since(t0);

      Matrix queries(std::min(args.batch, pair.test.sample_count()),
                     pair.test.input_dim());
      for (std::size_t i = 0; i < queries.rows(); ++i) {
        std::copy_n(&pair.test.inputs(i % pair.test.sample_count(), 0),
                    queries.cols(), &queries(i, 0));
      }
      for (std::size_t w = 0; w < args.warmup; ++w) {
        (void)model.predict(queries);
      }
      std::vector<double> times;
      for (std::size_t rep = 0; rep < args.reps; ++rep) {
        const auto p0 = std::chrono::steady_clock::now();
        const Matrix pred = model.predict(queries);
        times.push_back(seconds_since(p0));
      }
      std::sort(times.begin(), times.end());
      const double median = times[times.size() / 2];
      row.predict_seconds_per_sample =
          median / static_cast<double>(queries.rows());
      const ModelFootprint foot = resident_bytes(model);
      row.model_bytes = foot.total();
      rows.push_back(row);
      log << variant << " n=" << n << " p=" << rc.p << ": fit "
          << fmt(row.fit_seconds) << " s, predict "
          << fmt(row.predict_seconds_per_sample) << " s/sample, model "
          << row.model_bytes << " B (branch " << foot.branch_bytes
          << ", reduction " << foot.reduction_bytes << ", decoder "
          << foot.decoder_bytes << ")\n";
    }
  }
  return rows;
}

inline int cmd_bench(const BenchArgs& args, std::ostream& log) {
  fs::create_directories(args.out_dir);
  const std::vector<BenchRow> rows = run_bench(args, log);
  io::AtomicFile file((fs::path(args.out_dir) / "bench.csv").string());
  std::ostream& os = file.stream();
  os << "variant,n_train,p,fit_seconds,predict_seconds_per_sample,"
        "model_bytes\n";
  for (const BenchRow& r : rows) {
    os << r.variant << ',' << r.n_train << ',' << r.p << ','
       << fmt(r.fit_seconds) << ',' << fmt(r.predict_seconds_per_sample)
       << ',' << r.model_bytes << "\n";
  }
  file.commit();
  return 0;
}

}  // namespace kpcadon::cli

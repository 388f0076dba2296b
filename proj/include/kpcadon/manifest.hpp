#pragma once

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "kpcadon/cli.hpp"
#include "kpcadon/config.hpp"
#include "kpcadon/errors.hpp"

namespace kpcadon::cli {

/// A reproduction manifest: one experiment pipeline (data source, sweep
/// settings, pass criteria) stored as JSON under experiments/. Running it
/// generates or imports the data, sweeps both reduction variants, and
/// evaluates the declared checks against the sweep summary.
struct Manifest {
  std::string name;
  std::string description;
  std::string preset;
  nlohmann::json config_patch;    // merged onto the preset config
  std::string source_type = "generate";  // "generate" | "csv"
  std::string source_dir;         // csv: subdirectory under the data root
  std::string source_note;        // csv: how to obtain the files
  std::vector<std::string> variants{"kpca", "pod"};
  std::size_t trials = 0;
  nlohmann::json checks = nlohmann::json::array();
};

inline Manifest load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw io_error("cannot open manifest '" + path + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw io_error("manifest '" + path + "': parse error: " + e.what());
  }
  Manifest m;
  try {
    m.name = j.at("name").get<std::string>();
    m.description = j.value("description", std::string());
    m.preset = j.at("preset").get<std::string>();
    m.config_patch = j.value("config", nlohmann::json::object());
    if (j.contains("source")) {
      const auto& s = j.at("source");
      m.source_type = s.value("type", std::string("generate"));
      m.source_dir = s.value("dir", std::string());
      m.source_note = s.value("note", std::string());
    }
    m.variants = j.value("variants", m.variants);
    m.trials = j.value("trials", m.trials);
    m.checks = j.value("checks", m.checks);
  } catch (const nlohmann::json::exception& e) {
    throw io_error("manifest '" + path + "': " + e.what());
  }
  if (m.source_type != "generate" && m.source_type != "csv") {
    throw io_error("manifest '" + path + "': unknown source type '" +
                   m.source_type + "'");
  }
  return m;
}

/// Evaluate one manifest check against the sweep summaries. Returns pass.
inline bool evaluate_check(const nlohmann::json& check,
                           const std::vector<TrialSummary>& summaries,
                           std::ostream& log) {
  const std::string type = check.at("type").get<std::string>();
  if (type == "best_rel_l2_max") {
    const std::string variant = check.at("variant").get<std::string>();
    const double bound = check.at("value").get<double>();
    const TrialSummary* best = nullptr;
    for (const TrialSummary& s : summaries) {
      if (s.variant == variant && (!best || s.rel_l2.mean < best->rel_l2.mean)) {
        best = &s;
      }
    }
    if (!best) {
      log << "[CHECK] " << type << " " << variant
          << ": FAIL (no matching sweep rows)\n";
      return false;
    }
    const bool pass = best->rel_l2.mean <= bound;
    log << "[CHECK] best " << variant << " rel L2 " << fmt(best->rel_l2.mean)
        << " (p=" << best->p << ") <= " << fmt(bound) << ": "
        << (pass ? "PASS" : "FAIL") << "\n";
    return pass;
  }
  if (type == "kpca_not_worse_fraction") {
    const double min_frac = check.at("value").get<double>();
    const std::size_t min_p =
        check.value("min_p", static_cast<std::size_t>(0));
    std::size_t compared = 0;
    std::size_t not_worse = 0;
    for (const TrialSummary& k : summaries) {
      if (k.variant != "kpca" || k.p < min_p) continue;
      for (const TrialSummary& s : summaries) {
        if (s.variant != "pod" || s.p != k.p) continue;
        ++compared;
        if (k.rel_l2.mean <= s.rel_l2.mean) ++not_worse;
      }
    }
    if (compared == 0) {
      log << "[CHECK] " << type << ": FAIL (no comparable latent dims)\n";
      return false;
    }
    const double frac =
        static_cast<double>(not_worse) / static_cast<double>(compared);
    const bool pass = frac >= min_frac;
    log << "[CHECK] kpca not worse than pod at " << not_worse << "/"
        << compared << " latent dims (need fraction >= " << fmt(min_frac)
        << "): " << (pass ? "PASS" : "FAIL") << "\n";
    return pass;
  }
  throw io_error("unknown manifest check type '" + type + "'");
}

struct ReproArgs {
  std::string manifest_file;
  std::string data_root = "data";  // where csv sources are looked up
  std::string out_dir;
};

/// Execute a manifest end to end. Missing external data is a graceful skip
/// (exit 0 with instructions), failed checks exit 1.
inline int cmd_repro(const ReproArgs& args, std::ostream& log) {
  const Manifest m = load_manifest(args.manifest_file);
  log << "manifest " << m.name;
  if (!m.description.empty()) log << ": " << m.description;
  log << "\n";

  RunConfig config = RunConfig::preset(m.preset);
  if (!m.config_patch.empty()) {
    nlohmann::json doc = config.to_json();
    doc.merge_patch(m.config_patch);
    config = RunConfig::from_json(doc);
  }

  Dataset train, test;
  if (m.source_type == "generate") {
    const DatasetPair pair = config.generate();
    train = pair.train;
    test = pair.test;
  } else {
    const fs::path dir = fs::path(args.data_root) / m.source_dir;
    const std::vector<std::string> needed = {
        "inputs_train.csv", "outputs_train.csv", "inputs_test.csv",
        "outputs_test.csv", "coords.csv"};
    std::vector<std::string> missing;
    for (const std::string& f : needed) {
      if (!fs::exists(dir / f)) missing.push_back(f);
    }
    if (!missing.empty()) {
      log << "SKIPPED " << m.name << ": external dataset not found under "
          << dir.string() << "\n";
      log << "  missing:";
      for (const std::string& f : missing) log << " " << f;
      log << "\n";
      if (!m.source_note.empty()) log << "  " << m.source_note << "\n";
      return 0;
    }
    train = import_csv_dataset((dir / "inputs_train.csv").string(),
                               (dir / "outputs_train.csv").string(),
                               (dir / "coords.csv").string(),
                               config.field_count);
    test = import_csv_dataset((dir / "inputs_test.csv").string(),
                              (dir / "outputs_test.csv").string(),
                              (dir / "coords.csv").string(),
                              config.field_count);
    train.problem = test.problem = config.problem;
  }

  fs::create_directories(args.out_dir);
  if (m.source_type == "generate") {
    const fs::path data_dir = fs::path(args.out_dir) / "data";
    fs::create_directories(data_dir);
    save_dataset(train, dataset_path(data_dir.string(), config.problem, true));
    save_dataset(test, dataset_path(data_dir.string(), config.problem, false));
  }

  SweepArgs sweep;
  sweep.config = config;
  sweep.variants = m.variants;
  sweep.out_dir = args.out_dir;
  sweep.trials = m.trials;
  const SweepOutcome outcome = run_sweep(train, test, sweep);
  write_trials_csv((fs::path(args.out_dir) / "sweep.csv").string(),
                   config.problem, outcome.trials);
  write_summary_csv((fs::path(args.out_dir) / "summary.csv").string(),
                    config.problem, outcome.summaries);
  for (const TrialSummary& s : outcome.summaries) {
    log << s.variant << " p=" << s.p << ": rel L2 " << fmt(s.rel_l2.mean)
        << " +/- " << fmt(s.rel_l2.std_dev) << "\n";
  }

  bool all_pass = true;
  for (const auto& check : m.checks) {
    try {
      all_pass = evaluate_check(check, outcome.summaries, log) && all_pass;
    } catch (const nlohmann::json::exception& e) {
      throw io_error("manifest '" + m.name +
                     "': malformed check: " + e.what());
    }
  }
  log << (all_pass ? "repro PASS" : "repro FAIL") << "\n";
  return all_pass ? 0 : 1;
}

}  // namespace kpcadon::cli

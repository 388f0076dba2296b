#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "kpcadon/data.hpp"
#include "kpcadon/errors.hpp"
#include "kpcadon/operator.hpp"

namespace kpcadon {

/// Everything one experiment run needs: problem identity, kernel and latent
/// settings, branch training hyperparameters, seeds and generator sizes.
/// Serializes to a structured JSON document; see docs/formats.md for keys.
struct RunConfig {
  std::string problem = "1d-nonlinear";
  std::string variant = "kpca";

  // kernels + ridge
  double gamma_v = 1.0;
  double offset_v = 0.0;
  int degree_v = 1;
  double gamma_z = 1.0;
  double offset_z = 0.0;
  int degree_z = 2;
  double lambda = 1e-3;

  // latent dimension: `p` for single runs, `p_list` for sweeps
  std::size_t p = 10;
  std::vector<std::size_t> p_list{4, 8, 10, 14};

  // branch network + optimization
  std::vector<std::size_t> hidden{64, 64, 64, 64};
  std::string optimizer = "adam";
  double base_lr = 1e-3;
  double decay_rate = 0.5;
  std::size_t decay_steps = 0;  // 0: one tenth of the step budget
  double weight_decay = 0.0;
  std::size_t epochs = 10000;
  std::size_t batch_size = 0;  // 0: min(32, N)
  std::size_t log_every = 1000;
  std::string input_scaling = "standardize";  // or "none"
  std::string latent_scaling = "global";      // none | global | per_column

  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};

  // generator sizes (used by gen-data and the repro pipelines)
  std::size_t n_train = 51;
  std::size_t n_test = 51;
  std::size_t grid_size = 100;  // 1d
  std::size_t nx = 24;          // 2d
  std::size_t ny = 24;
  std::size_t field_count = 1;
  std::uint64_t gen_seed = 7;

  OperatorConfig to_operator_config() const {
    OperatorConfig c;
    c.variant = variant_from_string(variant);
    c.p = p;
    c.kernel_v = PolynomialKernel(gamma_v, offset_v, degree_v);
    c.kernel_z = PolynomialKernel(gamma_z, offset_z, degree_z);
    c.lambda = lambda;
    c.hidden = hidden;
    if (input_scaling == "standardize") {
      c.standardize_inputs = true;
    } else if (input_scaling == "none") {
      c.standardize_inputs = false;
    } else {
      throw std::invalid_argument("unknown input scaling '" + input_scaling +
                                  "' (expected standardize or none)");
    }
    c.latent_scaling = latent_scaling_from_string(latent_scaling);
    c.training.optimizer = optimizer_from_string(optimizer);
    c.training.base_lr = base_lr;
    c.training.decay_rate = decay_rate;
    c.training.decay_steps = decay_steps;
    c.training.weight_decay = weight_decay;
    c.training.epochs = epochs;
    c.training.batch_size = batch_size;
    c.training.log_every = log_every;
    if (epochs == 0) throw std::invalid_argument("epochs must be positive");
    if (!(base_lr > 0.0)) {
      throw std::invalid_argument("base_lr must be positive");
    }
    if (decay_rate < 0.0) {
      throw std::invalid_argument("decay_rate must be non-negative");
    }
    return c;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["problem"] = problem;
    j["variant"] = variant;
    j["kernels"] = {{"gamma_v", gamma_v},   {"offset_v", offset_v},
                    {"degree_v", degree_v}, {"gamma_z", gamma_z},
                    {"offset_z", offset_z}, {"degree_z", degree_z},
                    {"lambda", lambda}};
    j["latent"] = {{"p", p}, {"p_list", p_list}};
    j["branch"] = {{"hidden", hidden},
                   {"optimizer", optimizer},
                   {"base_lr", base_lr},
                   {"decay_rate", decay_rate},
                   {"decay_steps", decay_steps},
                   {"weight_decay", weight_decay},
                   {"epochs", epochs},
                   {"batch_size", batch_size},
                   {"log_every", log_every},
                   {"input_scaling", input_scaling},
                   {"latent_scaling", latent_scaling}};
    j["seeds"] = seeds;
    j["generator"] = {{"n_train", n_train}, {"n_test", n_test},
                      {"grid_size", grid_size}, {"nx", nx},
                      {"ny", ny},           {"field_count", field_count},
                      {"seed", gen_seed}};
    return j;
  }

  static RunConfig from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
      c.problem = j.value("problem", c.problem);
      c.variant = j.value("variant", c.variant);
      if (j.contains("kernels")) {
        const auto& k = j.at("kernels");
        c.gamma_v = k.value("gamma_v", c.gamma_v);
        c.offset_v = k.value("offset_v", c.offset_v);
        c.degree_v = k.value("degree_v", c.degree_v);
        c.gamma_z = k.value("gamma_z", c.gamma_z);
        c.offset_z = k.value("offset_z", c.offset_z);
        c.degree_z = k.value("degree_z", c.degree_z);
        c.lambda = k.value("lambda", c.lambda);
      }
      if (j.contains("latent")) {
        const auto& l = j.at("latent");
        c.p = l.value("p", c.p);
        c.p_list = l.value("p_list", c.p_list);
      }
      if (j.contains("branch")) {
        const auto& b = j.at("branch");
        c.hidden = b.value("hidden", c.hidden);
        c.optimizer = b.value("optimizer", c.optimizer);
        c.base_lr = b.value("base_lr", c.base_lr);
        c.decay_rate = b.value("decay_rate", c.decay_rate);
        c.decay_steps = b.value("decay_steps", c.decay_steps);
        c.weight_decay = b.value("weight_decay", c.weight_decay);
        c.epochs = b.value("epochs", c.epochs);
        c.batch_size = b.value("batch_size", c.batch_size);
        c.log_every = b.value("log_every", c.log_every);
        c.input_scaling = b.value("input_scaling", c.input_scaling);
        c.latent_scaling = b.value("latent_scaling", c.latent_scaling);
      }
      c.seeds = j.value("seeds", c.seeds);
      if (j.contains("generator")) {
        const auto& g = j.at("generator");
        c.n_train = g.value("n_train", c.n_train);
        c.n_test = g.value("n_test", c.n_test);
        c.grid_size = g.value("grid_size", c.grid_size);
        c.nx = g.value("nx", c.nx);
        c.ny = g.value("ny", c.ny);
        c.field_count = g.value("field_count", c.field_count);
        c.gen_seed = g.value("seed", c.gen_seed);
      }
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument(std::string("invalid config: ") + e.what());
    }
    return c;
  }

  static RunConfig load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw io_error("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& e) {
      throw io_error("config '" + path + "': parse error: " + e.what());
    }
    return from_json(j);
  }

  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw io_error("cannot open config '" + path + "' for writing");
    os << to_json().dump(2) << "\n";
  }

  /// `--set section.key=value` override. The value is parsed as JSON when
  /// possible (numbers, booleans, arrays) and as a plain string otherwise.
  void apply_override(const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw std::invalid_argument("override '" + assignment +
                                  "' is not of the form key=value");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(raw);
    } catch (const nlohmann::json::exception&) {
      value = raw;  // unquoted string
    }

    nlohmann::json doc = to_json();
    nlohmann::json* node = &doc;
    std::size_t pos = 0;
    std::vector<std::string> parts;
    while (pos <= key.size()) {
      std::size_t dot = key.find('.', pos);
      if (dot == std::string::npos) dot = key.size();
      parts.push_back(key.substr(pos, dot - pos));
      pos = dot + 1;
      if (dot == key.size()) break;
    }
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      if (!node->contains(parts[i])) {
        throw std::invalid_argument("override key '" + key +
                                    "' does not name a config field");
      }
      node = &(*node)[parts[i]];
    }
    if (!node->is_object() || !node->contains(parts.back())) {
      throw std::invalid_argument("override key '" + key +
                                  "' does not name a config field");
    }
    (*node)[parts.back()] = value;
    *this = from_json(doc);
  }

  /// Built-in experiment presets. Unknown names list the available ones.
  static RunConfig preset(const std::string& name) {
    RunConfig c;
    c.problem = name;
    if (name == "1d-nonlinear") {
      c.gamma_v = 1.0;
      c.offset_v = 0.0;
      c.degree_v = 1;
      c.gamma_z = 1.0;
      c.offset_z = 0.0;
      c.degree_z = 2;
      c.lambda = 1e-3;
      c.p = 10;
      c.p_list = {4, 8, 10, 14};
      c.optimizer = "adam";
      c.epochs = 50000;
      c.decay_steps = 5000;
      c.batch_size = 64;  // clamped to the 51 training samples: full batch
      c.log_every = 5000;
      c.n_train = 51;
      c.n_test = 51;
      c.grid_size = 100;
      c.seeds = {1, 2, 3, 4, 5};
    } else if (name == "synthetic-2d") {
      c.degree_z = 2;
      c.lambda = 1e-3;
      c.p = 8;
      c.p_list = {4, 8, 12};
      c.epochs = 4000;
      c.decay_steps = 400;
      c.batch_size = 64;
      c.log_every = 1000;
      c.n_train = 80;
      c.n_test = 40;
      c.nx = 24;
      c.ny = 24;
      c.field_count = 1;
      c.seeds = {1, 2, 3};
    } else if (name == "cavity-flow") {
      c.gamma_v = 1.0;
      c.offset_v = 1.0;
      c.degree_v = 1;
      c.gamma_z = 0.01;
      c.offset_z = 1.0;
      c.degree_z = 2;
      c.lambda = 1e-6;
      c.p = 16;
      c.p_list = {8, 16, 32};
      c.optimizer = "adam";
      c.epochs = 50000;
      c.decay_steps = 5000;
      c.log_every = 5000;
      c.n_train = 100;
      c.n_test = 10;
      c.field_count = 2;
      c.seeds = {1, 2, 3, 4, 5};
    } else if (name == "navier-stokes") {
      c.gamma_v = 1.0;
      c.offset_v = 0.0;
      c.degree_v = 1;
      c.gamma_z = 1e-3;
      c.offset_z = 0.1;
      c.degree_z = 2;
      c.lambda = 1e-3;
      c.p = 16;
      c.p_list = {8, 16, 32};
      c.optimizer = "adamw";
      c.weight_decay = 1e-4;
      c.epochs = 50000;
      c.decay_steps = 5000;
      c.log_every = 5000;
      c.n_train = 1000;
      c.n_test = 200;
      c.field_count = 1;
      c.seeds = {1, 2, 3, 4, 5};
    } else {
      throw std::invalid_argument(
          "unknown preset '" + name +
          "' (available: 1d-nonlinear, synthetic-2d, cavity-flow, "
          "navier-stokes)");
    }
    return c;
  }

  /// Generate the built-in datasets for this config's problem.
  DatasetPair generate() const {
    if (problem == "1d-nonlinear") {
      Gen1dOptions opt;
      opt.n_train = n_train;
      opt.n_test = n_test;
      opt.grid_size = grid_size;
      return generate_1d_nonlinear(opt);
    }
    if (problem == "synthetic-2d") {
      Gen2dOptions opt;
      opt.n_train = n_train;
      opt.n_test = n_test;
      opt.nx = nx;
      opt.ny = ny;
      opt.field_count = field_count;
      opt.seed = gen_seed;
      return generate_synthetic_2d(opt);
    }
    throw std::invalid_argument(
        "problem '" + problem +
        "' has no built-in generator; import its data from CSV instead");
  }
};

}  // namespace kpcadon

#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "kpcadon/branch.hpp"
#include "kpcadon/data.hpp"
#include "kpcadon/errors.hpp"
#include "kpcadon/grid.hpp"
#include "kpcadon/kernels.hpp"
#include "kpcadon/matrix.hpp"
#include "kpcadon/reconstruction.hpp"
#include "kpcadon/reduction.hpp"
#include "kpcadon/rng.hpp"
#include "kpcadon/serialize.hpp"

namespace kpcadon {

inline constexpr char kModelMagic[] = "KPCADON1";

/// Which decoder the operator uses. Both share the same branch network
/// design; they differ in how output functions are compressed and rebuilt.
enum class Variant { kKpca, kPod };

inline Variant variant_from_string(const std::string& s) {
  if (s == "kpca") return Variant::kKpca;
  if (s == "pod") return Variant::kPod;
  throw std::invalid_argument("unknown variant '" + s +
                              "' (expected kpca or pod)");
}

inline std::string to_string(Variant v) {
  return v == Variant::kKpca ? "kpca" : "pod";
}

/// Hyperparameters for one operator fit. The latent kernel, ridge penalty
/// and snapshot kernel only matter for the kpca variant.
struct OperatorConfig {
  Variant variant = Variant::kKpca;
  std::size_t p = 10;
  PolynomialKernel kernel_v{1.0, 0.0, 1};  // snapshot space (kpca)
  PolynomialKernel kernel_z{1.0, 0.0, 2};  // latent space (kpca)
  double lambda = 1e-3;                    // ridge penalty (kpca)
  std::vector<std::size_t> hidden{64, 64, 64, 64};
  bool standardize_inputs = true;
  LatentScaling latent_scaling = LatentScaling::kGlobal;
  TrainOptions training;
};

/// A trained operator: compression of outputs to p latent coordinates, a
/// branch network from inputs to latents, and a decoder from latents back to
/// output functions on the training grid.
struct OperatorModel {
  Variant variant = Variant::kKpca;
  std::string problem;
  std::uint64_t seed = 0;
  std::size_t p = 0;
  std::size_t field_count = 1;
  Matrix out_coords;  // grid_points x coord_dim
  TensorGrid grid;    // rebuilt from out_coords on load

  KpcaModel kpca;     // kpca variant only
  RidgeModel ridge;   // kpca variant only
  PodBasis pod;       // pod variant only

  InputScaler input_scaler;
  LatentScaler latent_scaler;
  Mlp net;
  TrainResult train_info;
  OperatorConfig config;  // as used for this fit

  std::size_t grid_points() const { return out_coords.rows(); }

  /// Latent coordinates of given output snapshots (the encoder).
  Matrix encode(const Matrix& outputs) const {
    return variant == Variant::kKpca ? kpca_project(kpca, outputs)
                                     : pod_project(pod, outputs);
  }

  /// Output snapshots from latent coordinates (the decoder).
  Matrix decode(const Matrix& latents) const {
    return variant == Variant::kKpca ? ridge_predict(ridge, latents)
                                     : pod_reconstruct(pod, latents);
  }

  /// Branch network latents for given inputs, unscaled back to latent space.
  Matrix branch_latents(const Matrix& inputs) const {
    return latent_scaler.invert(net.forward(input_scaler.apply(inputs)));
  }

  /// Predictions on the training grid, one flattened row per input row.
  Matrix predict(const Matrix& inputs) const {
    return decode(branch_latents(inputs));
  }

  /// Predictions at arbitrary coordinates inside the grid's bounding box:
  /// the on-grid prediction interpolated multilinearly (which commutes with
  /// the decoder's linear combination of stored snapshots). One row per
  /// input row, point-major over `query_coords` rows.
  Matrix predict_at(const Matrix& inputs, const Matrix& query_coords) const {
    const Matrix on_grid = predict(inputs);
    Matrix out(inputs.rows(), query_coords.rows() * field_count);
    Matrix field(grid_points(), field_count);
    for (std::size_t i = 0; i < on_grid.rows(); ++i) {
      std::copy_n(&on_grid(i, 0), on_grid.cols(), field.data().data());
      const Matrix vals = grid.interpolate_many(field, query_coords);
      std::copy_n(vals.data().data(), vals.size(), &out(i, 0));
    }
    return out;
  }
};

/// Bytes of double-precision state a loaded model keeps resident for
/// prediction, by component. The kpca reduction and decoder grow with the
/// number of training snapshots; the pod basis depends only on grid size
/// and p.
struct ModelFootprint {
  std::size_t branch_bytes = 0;     // network weights/biases + scalers
  std::size_t reduction_bytes = 0;  // kpca snapshot arrays or pod basis
  std::size_t decoder_bytes = 0;    // kernel ridge expansion (kpca only)
  std::size_t grid_bytes = 0;       // output coordinates

  std::size_t total() const {
    return branch_bytes + reduction_bytes + decoder_bytes + grid_bytes;
  }
};

inline ModelFootprint resident_bytes(const OperatorModel& model) {
  ModelFootprint f;
  std::size_t branch = 0;
  for (std::size_t l = 0; l < model.net.layer_count(); ++l) {
    branch += model.net.weights()[l].size() + model.net.biases()[l].size();
  }
  branch += model.input_scaler.mean.size() + model.input_scaler.std_dev.size();
  branch += model.latent_scaler.mean.size() + model.latent_scaler.scale.size();
  f.branch_bytes = branch * sizeof(double);

  std::size_t reduction = 0;
  std::size_t decoder = 0;
  if (model.variant == Variant::kKpca) {
    reduction = model.kpca.mean.size() + model.kpca.centered_snapshots.size() +
                model.kpca.gram_row_means.size() + 1 +
                model.kpca.eigenvalues.size() + model.kpca.spectrum.size() +
                model.kpca.alpha.size() + model.kpca.train_latents.size();
    decoder = model.ridge.train_latents.size() +
              model.ridge.coefficients.size() + model.ridge.mean.size();
  } else {
    reduction = model.pod.mean.size() + model.pod.basis.size() +
                model.pod.singular_values.size() + model.pod.spectrum.size();
  }
  f.reduction_bytes = reduction * sizeof(double);
  f.decoder_bytes = decoder * sizeof(double);
  f.grid_bytes = model.out_coords.size() * sizeof(double);
  return f;
}

/// Fit an operator on a training set. The same seed always produces the
/// same model: one deterministic stream drives weight init and batching.
inline OperatorModel train_operator(const Dataset& train,
                                    const OperatorConfig& config,
                                    std::uint64_t seed) {
  train.validate();
  if (config.hidden.empty()) {
    throw std::invalid_argument("train_operator: no hidden layers configured");
  }

  OperatorModel model;
  model.variant = config.variant;
  model.problem = train.problem;
  model.seed = seed;
  model.p = config.p;
  model.field_count = train.field_count;
  model.out_coords = train.out_coords;
  model.grid = TensorGrid::from_coords(train.out_coords);
  model.config = config;

  Matrix latents;
  if (config.variant == Variant::kKpca) {
    model.kpca = fit_kpca(config.kernel_v, train.outputs, config.p);
    latents = model.kpca.train_latents;
    model.ridge =
        fit_ridge(config.kernel_z, latents, train.outputs, config.lambda);
  } else {
    model.pod = fit_pod(train.outputs, config.p);
    latents = pod_project(model.pod, train.outputs);
  }

  model.input_scaler =
      InputScaler::fit(train.inputs, config.standardize_inputs);
  model.latent_scaler = LatentScaler::fit(latents, config.latent_scaling);

  std::vector<std::size_t> sizes;
  sizes.push_back(train.input_dim());
  sizes.insert(sizes.end(), config.hidden.begin(), config.hidden.end());
  sizes.push_back(config.p);

  Rng rng(seed);
  model.net = Mlp(sizes, rng);
  model.train_info =
      train_mlp(model.net, model.input_scaler.apply(train.inputs),
                model.latent_scaler.apply(latents), config.training, rng);
  return model;
}

// ---------------------------------------------------------------------------
// Persistence. Array blocks follow the metadata in a fixed order (see
// docs/formats.md); identical configs and seeds produce byte-identical files.
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json kernel_to_json(const PolynomialKernel& k) {
  return {{"gamma", k.gamma}, {"offset", k.offset}, {"degree", k.degree}};
}

inline PolynomialKernel kernel_from_json(const nlohmann::json& j) {
  return PolynomialKernel(j.at("gamma").get<double>(),
                          j.at("offset").get<double>(),
                          j.at("degree").get<int>());
}

}  // namespace detail

inline void save_model(const OperatorModel& model, const std::string& path) {
  io::AtomicFile file(path);
  std::ostream& os = file.stream();
  io::write_magic(os, kModelMagic);

  const OperatorConfig& c = model.config;
  nlohmann::json meta;
  meta["format_version"] = 1;
  meta["variant"] = to_string(model.variant);
  meta["problem"] = model.problem;
  meta["seed"] = model.seed;
  meta["p"] = model.p;
  meta["field_count"] = model.field_count;
  meta["layer_sizes"] = model.net.layer_sizes();
  meta["config"] = {
      {"kernel_v", detail::kernel_to_json(c.kernel_v)},
      {"kernel_z", detail::kernel_to_json(c.kernel_z)},
      {"lambda", c.lambda},
      {"standardize_inputs", c.standardize_inputs},
      {"latent_scaling", to_string(c.latent_scaling)},
      {"optimizer", to_string(c.training.optimizer)},
      {"base_lr", c.training.base_lr},
      {"decay_rate", c.training.decay_rate},
      {"decay_steps", c.training.decay_steps},
      {"weight_decay", c.training.weight_decay},
      {"epochs", c.training.epochs},
      {"batch_size", c.training.batch_size},
      {"log_every", c.training.log_every},
  };
  meta["training_result"] = {{"final_loss", model.train_info.final_loss},
                             {"steps", model.train_info.steps}};
  io::write_string(os, meta.dump());

  std::uint32_t blocks = 1 /*out_coords*/ + 4 /*scalers*/ +
                         2 * model.net.layer_count() + 1 /*loss history*/;
  blocks += model.variant == Variant::kKpca ? 10 : 4;
  io::write_u32(os, blocks);

  io::write_array(os, model.out_coords);
  io::write_array(os, std::span<const double>(model.input_scaler.mean));
  io::write_array(os, std::span<const double>(model.input_scaler.std_dev));
  io::write_array(os, std::span<const double>(model.latent_scaler.mean));
  io::write_array(os, std::span<const double>(model.latent_scaler.scale));
  for (std::size_t l = 0; l < model.net.layer_count(); ++l) {
    io::write_array(os, model.net.weights()[l]);
    io::write_array(os, std::span<const double>(model.net.biases()[l]));
  }
  io::write_array(os,
                  std::span<const double>(model.train_info.loss_history));

  if (model.variant == Variant::kKpca) {
    io::write_array(os, std::span<const double>(model.kpca.mean));
    io::write_array(os, model.kpca.centered_snapshots);
    io::write_array(os, std::span<const double>(model.kpca.gram_row_means));
    io::write_array(os, model.kpca.gram_total_mean);
    io::write_array(os, std::span<const double>(model.kpca.eigenvalues));
    io::write_array(os, std::span<const double>(model.kpca.spectrum));
    io::write_array(os, model.kpca.alpha);
    io::write_array(os, model.kpca.train_latents);
    io::write_array(os, model.ridge.coefficients);
    io::write_array(os, std::span<const double>(model.ridge.mean));
  } else {
    io::write_array(os, std::span<const double>(model.pod.mean));
    io::write_array(os, model.pod.basis);
    io::write_array(os, std::span<const double>(model.pod.singular_values));
    io::write_array(os, std::span<const double>(model.pod.spectrum));
  }
  file.commit();
}

inline OperatorModel load_model(const std::string& path) {
  std::ifstream is = io::open_input(path);
  io::expect_magic(is, kModelMagic, "model '" + path + "'");

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(io::read_string(is, "model metadata"));
  } catch (const nlohmann::json::exception& e) {
    throw io_error("model '" + path + "': invalid metadata: " + e.what());
  }
  if (meta.value("format_version", 0) != 1) {
    throw io_error("model '" + path + "': unsupported format version");
  }

  OperatorModel model;
  try {
    model.variant = variant_from_string(meta.at("variant").get<std::string>());
    model.problem = meta.value("problem", std::string());
    model.seed = meta.at("seed").get<std::uint64_t>();
    model.p = meta.at("p").get<std::size_t>();
    model.field_count = meta.at("field_count").get<std::size_t>();

    const nlohmann::json& jc = meta.at("config");
    OperatorConfig c;
    c.variant = model.variant;
    c.p = model.p;
    c.kernel_v = detail::kernel_from_json(jc.at("kernel_v"));
    c.kernel_z = detail::kernel_from_json(jc.at("kernel_z"));
    c.lambda = jc.at("lambda").get<double>();
    c.standardize_inputs = jc.at("standardize_inputs").get<bool>();
    c.latent_scaling =
        latent_scaling_from_string(jc.at("latent_scaling").get<std::string>());
    c.training.optimizer =
        optimizer_from_string(jc.at("optimizer").get<std::string>());
    c.training.base_lr = jc.at("base_lr").get<double>();
    c.training.decay_rate = jc.at("decay_rate").get<double>();
    c.training.decay_steps = jc.at("decay_steps").get<std::size_t>();
    c.training.weight_decay = jc.at("weight_decay").get<double>();
    c.training.epochs = jc.at("epochs").get<std::size_t>();
    c.training.batch_size = jc.at("batch_size").get<std::size_t>();
    c.training.log_every = jc.at("log_every").get<std::size_t>();

    const auto sizes = meta.at("layer_sizes").get<std::vector<std::size_t>>();
    if (sizes.size() < 2) {
      throw io_error("model '" + path + "': invalid layer sizes");
    }
    c.hidden.assign(sizes.begin() + 1, sizes.end() - 1);
    model.config = c;

    model.train_info.final_loss =
        meta.at("training_result").at("final_loss").get<double>();
    model.train_info.steps =
        meta.at("training_result").at("steps").get<std::size_t>();

    (void)io::read_u32(is, "model block count");
    model.out_coords = io::read_array_2d(is, "model out_coords");
    model.input_scaler.mean = io::read_array_1d(is, "input scaler mean");
    model.input_scaler.std_dev = io::read_array_1d(is, "input scaler std");
    model.input_scaler.active = c.standardize_inputs;
    model.latent_scaler.mean = io::read_array_1d(is, "latent scaler mean");
    model.latent_scaler.scale = io::read_array_1d(is, "latent scaler scale");
    model.latent_scaler.mode = c.latent_scaling;

    model.net = Mlp(sizes);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      Matrix w = io::read_array_2d(is, "layer weights");
      if (w.rows() != sizes[l] || w.cols() != sizes[l + 1]) {
        throw io_error("model '" + path + "': layer " + std::to_string(l) +
                       " weight shape mismatch");
      }
      model.net.weights()[l] = std::move(w);
      std::vector<double> b = io::read_array_1d(is, "layer biases");
      if (b.size() != sizes[l + 1]) {
        throw io_error("model '" + path + "': layer " + std::to_string(l) +
                       " bias length mismatch");
      }
      model.net.biases()[l] = std::move(b);
    }
    model.train_info.loss_history = io::read_array_1d(is, "loss history");

    if (model.variant == Variant::kKpca) {
      model.kpca.kernel = c.kernel_v;
      model.kpca.mean = io::read_array_1d(is, "kpca mean");
      model.kpca.centered_snapshots =
          io::read_array_2d(is, "kpca centered snapshots");
      model.kpca.gram_row_means = io::read_array_1d(is, "kpca row means");
      model.kpca.gram_total_mean =
          io::read_array_scalar(is, "kpca total mean");
      model.kpca.eigenvalues = io::read_array_1d(is, "kpca eigenvalues");
      model.kpca.spectrum = io::read_array_1d(is, "kpca spectrum");
      model.kpca.alpha = io::read_array_2d(is, "kpca alpha");
      model.kpca.train_latents = io::read_array_2d(is, "kpca train latents");
      model.ridge.kernel = c.kernel_z;
      model.ridge.lambda = c.lambda;
      model.ridge.train_latents = model.kpca.train_latents;
      model.ridge.coefficients = io::read_array_2d(is, "ridge coefficients");
      model.ridge.mean = io::read_array_1d(is, "ridge mean");
    } else {
      model.pod.mean = io::read_array_1d(is, "pod mean");
      model.pod.basis = io::read_array_2d(is, "pod basis");
      model.pod.singular_values = io::read_array_1d(is, "pod singular values");
      model.pod.spectrum = io::read_array_1d(is, "pod spectrum");
    }
  } catch (const nlohmann::json::exception& e) {
    throw io_error("model '" + path + "': metadata field error: " + e.what());
  }

  model.grid = TensorGrid::from_coords(model.out_coords);
  return model;
}

}  // namespace kpcadon

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "kpcadon/errors.hpp"
#include "kpcadon/matrix.hpp"
#include "kpcadon/rng.hpp"
#include "kpcadon/simd.hpp"

namespace kpcadon {

// ---------------------------------------------------------------------------
// Feature scaling.
// ---------------------------------------------------------------------------

/// Per-column standardization of network inputs. Columns with zero spread are
/// left unscaled. Population statistics (divide by N).
struct InputScaler {
  bool active = false;
  std::vector<double> mean;
  std::vector<double> std_dev;

  static InputScaler fit(const Matrix& x, bool standardize) {
    InputScaler s;
    s.active = standardize;
    s.mean.assign(x.cols(), 0.0);
    s.std_dev.assign(x.cols(), 1.0);
    if (!standardize || x.rows() == 0) return s;
    s.mean = column_means(x);
    for (std::size_t j = 0; j < x.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < x.rows(); ++i) {
        const double d = x(i, j) - s.mean[j];
        acc += d * d;
      }
      const double sd = std::sqrt(acc / static_cast<double>(x.rows()));
      s.std_dev[j] = sd > 0.0 ? sd : 1.0;
    }
    return s;
  }

  Matrix apply(const Matrix& x) const {
    if (!active) return x;
    Matrix out = x;
    for (std::size_t i = 0; i < out.rows(); ++i) {
      for (std::size_t j = 0; j < out.cols(); ++j) {
        out(i, j) = (out(i, j) - mean[j]) / std_dev[j];
      }
    }
    return out;
  }
};

/// Scaling of latent regression targets. "global" divides every entry by one
/// shared standard deviation, preserving the relative magnitudes of the
/// latent components; "per_column" standardizes each component separately;
/// "none" is the identity.
enum class LatentScaling { kNone, kGlobal, kPerColumn };

inline LatentScaling latent_scaling_from_string(const std::string& s) {
  if (s == "none") return LatentScaling::kNone;
  if (s == "global") return LatentScaling::kGlobal;
  if (s == "per_column") return LatentScaling::kPerColumn;
  throw std::invalid_argument("unknown latent scaling '" + s +
                              "' (expected none, global or per_column)");
}

inline std::string to_string(LatentScaling s) {
  switch (s) {
    case LatentScaling::kNone: return "none";
    case LatentScaling::kGlobal: return "global";
    case LatentScaling::kPerColumn: return "per_column";
  }
  return "none";
}

struct LatentScaler {
  LatentScaling mode = LatentScaling::kNone;
  std::vector<double> mean;   // per column (zeros for none/global)
  std::vector<double> scale;  // per column (all equal for global)

  static LatentScaler fit(const Matrix& z, LatentScaling mode) {
    LatentScaler s;
    s.mode = mode;
    s.mean.assign(z.cols(), 0.0);
    s.scale.assign(z.cols(), 1.0);
    if (z.rows() == 0 || mode == LatentScaling::kNone) return s;
    if (mode == LatentScaling::kGlobal) {
      double acc = 0.0;
      for (double v : z.data()) acc += v * v;
      double mu = std::accumulate(z.data().begin(), z.data().end(), 0.0) /
                  static_cast<double>(z.size());
      const double var = acc / static_cast<double>(z.size()) - mu * mu;
      const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
      for (double& v : s.scale) v = sd;
      return s;
    }
    s.mean = column_means(z);
    for (std::size_t j = 0; j < z.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < z.rows(); ++i) {
        const double d = z(i, j) - s.mean[j];
        acc += d * d;
      }
      const double sd = std::sqrt(acc / static_cast<double>(z.rows()));
      s.scale[j] = sd > 0.0 ? sd : 1.0;
    }
    return s;
  }

  Matrix apply(const Matrix& z) const {
    Matrix out = z;
    for (std::size_t i = 0; i < out.rows(); ++i) {
      for (std::size_t j = 0; j < out.cols(); ++j) {
        out(i, j) = (out(i, j) - mean[j]) / scale[j];
      }
    }
    return out;
  }

  Matrix invert(const Matrix& z) const {
    Matrix out = z;
    for (std::size_t i = 0; i < out.rows(); ++i) {
      for (std::size_t j = 0; j < out.cols(); ++j) {
        out(i, j) = out(i, j) * scale[j] + mean[j];
      }
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Branch network: a fully connected multilayer perceptron, tanh hidden
// activations, linear output.
// ---------------------------------------------------------------------------

/// Weight matrices are stored input-major (fan_in x fan_out) so the training
/// loops stream contiguously over the output dimension.
class Mlp {
 public:
  Mlp() = default;

  /// All-zero parameters with the given layer sizes (used when loading).
  explicit Mlp(std::vector<std::size_t> layer_sizes)
      : layer_sizes_(std::move(layer_sizes)) {
    check_sizes();
    for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
      weights_.emplace_back(layer_sizes_[l], layer_sizes_[l + 1]);
      biases_.emplace_back(layer_sizes_[l + 1], 0.0);
    }
  }

  /// Glorot-uniform weights drawn layer by layer in storage order; biases
  /// start at zero. `layer_sizes` includes input and output widths.
  Mlp(std::vector<std::size_t> layer_sizes, Rng& rng)
      : Mlp(std::move(layer_sizes)) {
    for (std::size_t l = 0; l + 1 < layer_sizes_.size(); ++l) {
      const std::size_t fan_in = layer_sizes_[l];
      const std::size_t fan_out = layer_sizes_[l + 1];
      const double limit =
          std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (double& v : weights_[l].data()) v = rng.uniform(-limit, limit);
    }
  }

  const std::vector<std::size_t>& layer_sizes() const { return layer_sizes_; }
  std::size_t input_dim() const { return layer_sizes_.front(); }
  std::size_t output_dim() const { return layer_sizes_.back(); }
  std::size_t layer_count() const { return weights_.size(); }

  std::vector<Matrix>& weights() { return weights_; }
  const std::vector<Matrix>& weights() const { return weights_; }
  std::vector<std::vector<double>>& biases() { return biases_; }
  const std::vector<std::vector<double>>& biases() const { return biases_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      n += weights_[l].size() + biases_[l].size();
    }
    return n;
  }

  /// Forward pass for a batch (rows of x, B x input_dim) -> B x output_dim.
  Matrix forward(const Matrix& x) const {
    if (x.cols() != input_dim()) {
      throw std::invalid_argument("Mlp::forward: input dimension " +
                                  std::to_string(x.cols()) + ", expected " +
                                  std::to_string(input_dim()));
    }
    Matrix a = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Matrix z = affine(a, weights_[l], biases_[l]);
      if (l + 1 < weights_.size()) {
        detail::tanh_inplace(z.data().data(), z.size());
      }
      a = std::move(z);
    }
    return a;
  }

  /// Mean over the batch of squared output-error norms.
  double loss(const Matrix& x, const Matrix& y) const {
    const Matrix pred = forward(x);
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double d = pred.data()[i] - y.data()[i];
      acc += d * d;
    }
    return acc / static_cast<double>(x.rows());
  }

 private:
  void check_sizes() const {
    if (layer_sizes_.size() < 2) {
      throw std::invalid_argument("Mlp: need at least input and output layers");
    }
    for (std::size_t s : layer_sizes_) {
      if (s == 0) throw std::invalid_argument("Mlp: zero-width layer");
    }
  }

  // Accumulates four input columns per pass; fewer trips through the output
  // row keep the inner loop throughput-bound instead of store-latency-bound.
  static Matrix affine(const Matrix& a, const Matrix& w,
                       const std::vector<double>& b) {
    const std::size_t batch = a.rows();
    const std::size_t fan_in = w.rows();
    const std::size_t fan_out = w.cols();
    Matrix z(batch, fan_out);
    for (std::size_t i = 0; i < batch; ++i) {
      double* zi = &z(i, 0);
      for (std::size_t o = 0; o < fan_out; ++o) zi[o] = b[o];
      const double* ai = &a(i, 0);
      std::size_t j = 0;
      for (; j + 4 <= fan_in; j += 4) {
        const double a0 = ai[j], a1 = ai[j + 1];
        const double a2 = ai[j + 2], a3 = ai[j + 3];
        const double* w0 = &w(j, 0);
        const double* w1 = &w(j + 1, 0);
        const double* w2 = &w(j + 2, 0);
        const double* w3 = &w(j + 3, 0);
        for (std::size_t o = 0; o < fan_out; ++o) {
          zi[o] += a0 * w0[o] + a1 * w1[o] + a2 * w2[o] + a3 * w3[o];
        }
      }
      for (; j < fan_in; ++j) {
        const double aij = ai[j];
        const double* wj = &w(j, 0);
        for (std::size_t o = 0; o < fan_out; ++o) zi[o] += aij * wj[o];
      }
    }
    return z;
  }

  std::vector<std::size_t> layer_sizes_;
  std::vector<Matrix> weights_;
  std::vector<std::vector<double>> biases_;

  friend class MlpTrainer;
};

// ---------------------------------------------------------------------------
// Training: Adam / AdamW with inverse time decay.
// ---------------------------------------------------------------------------

enum class Optimizer { kAdam, kAdamW };

inline Optimizer optimizer_from_string(const std::string& s) {
  if (s == "adam") return Optimizer::kAdam;
  if (s == "adamw") return Optimizer::kAdamW;
  throw std::invalid_argument("unknown optimizer '" + s +
                              "' (expected adam or adamw)");
}

inline std::string to_string(Optimizer o) {
  return o == Optimizer::kAdam ? "adam" : "adamw";
}

struct TrainOptions {
  Optimizer optimizer = Optimizer::kAdam;
  double base_lr = 1e-3;
  double decay_rate = 0.5;
  /// Inverse time decay: lr(t) = base_lr / (1 + decay_rate * t / decay_steps)
  /// where t counts completed optimizer steps. 0 means one tenth of the total
  /// step budget, which lets the rate fall to base_lr / (1 + 10 decay_rate)
  /// by the end of training regardless of epoch count.
  std::size_t decay_steps = 0;
  double weight_decay = 0.0;  // decoupled; only applied by AdamW
  std::size_t epochs = 10000;
  std::size_t batch_size = 0;  // 0 means min(32, N); clamped to N
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t log_every = 1000;  // record full-data loss every this many epochs
};

struct TrainResult {
  std::vector<double> loss_history;  // sampled every log_every epochs + final
  double final_loss = 0.0;
  std::size_t steps = 0;
};

/// Runs minibatch gradient descent on mean squared error. Batches are drawn
/// from a Fisher-Yates shuffle that is reseeded per epoch from the trainer's
/// Rng; a full batch skips shuffling entirely. Loss turning non-finite aborts
/// with numeric_error naming the epoch.
class MlpTrainer {
 public:
  MlpTrainer(Mlp& net, const TrainOptions& options)
      : net_(net), opt_(options) {
    const auto& sizes = net.layer_sizes();
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      m_w_.emplace_back(sizes[l], sizes[l + 1]);
      v_w_.emplace_back(sizes[l], sizes[l + 1]);
      m_b_.emplace_back(sizes[l + 1], 0.0);
      v_b_.emplace_back(sizes[l + 1], 0.0);
      grad_w_.emplace_back(sizes[l] * sizes[l + 1], 0.0);
      grad_b_.emplace_back(sizes[l + 1], 0.0);
    }
  }

  /// Per-layer gradients in the same storage layout as the Mlp parameters.
  struct Gradients {
    std::vector<Matrix> weights;
    std::vector<std::vector<double>> biases;
  };

  /// Gradient of Mlp::loss over the given data at the current parameters,
  /// computed by the same backward pass the optimizer steps use.
  Gradients loss_gradients(const Matrix& x, const Matrix& y) {
    backward(x, y, x.rows());
    Gradients g;
    for (std::size_t l = 0; l < net_.layer_count(); ++l) {
      Matrix w(net_.weights_[l].rows(), net_.weights_[l].cols());
      std::copy(grad_w_[l].begin(), grad_w_[l].end(), w.data().begin());
      g.weights.push_back(std::move(w));
      g.biases.push_back(grad_b_[l]);
    }
    return g;
  }

  TrainResult train(const Matrix& x, const Matrix& y, Rng& rng) {
    const std::size_t n = x.rows();
    if (n == 0) throw std::invalid_argument("MlpTrainer: no training samples");
    if (y.rows() != n) {
      throw std::invalid_argument("MlpTrainer: " + std::to_string(n) +
                                  " inputs vs " + std::to_string(y.rows()) +
                                  " targets");
    }
    if (x.cols() != net_.input_dim() || y.cols() != net_.output_dim()) {
      throw std::invalid_argument("MlpTrainer: data shaped " +
                                  std::to_string(x.cols()) + "->" +
                                  std::to_string(y.cols()) +
                                  " but network expects " +
                                  std::to_string(net_.input_dim()) + "->" +
                                  std::to_string(net_.output_dim()));
    }

    std::size_t batch = opt_.batch_size == 0
                            ? std::min<std::size_t>(32, n)
                            : std::min(opt_.batch_size, n);
    const std::size_t steps_per_epoch = (n + batch - 1) / batch;
    const std::size_t total_steps = steps_per_epoch * opt_.epochs;
    const std::size_t decay_steps =
        opt_.decay_steps > 0 ? opt_.decay_steps
                             : std::max<std::size_t>(1, total_steps / 10);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult result;
    Matrix xb(batch, x.cols());
    Matrix yb(batch, y.cols());
    std::size_t t = 0;  // completed optimizer steps
    for (std::size_t epoch = 0; epoch < opt_.epochs; ++epoch) {
      if (batch < n) rng.shuffle(order);
      for (std::size_t start = 0; start < n; start += batch) {
        const std::size_t b = std::min(batch, n - start);
        for (std::size_t i = 0; i < b; ++i) {
          const std::size_t src = order[start + i];
          std::copy_n(&x(src, 0), x.cols(), &xb(i, 0));
          std::copy_n(&y(src, 0), y.cols(), &yb(i, 0));
        }
        const double lr =
            opt_.base_lr /
            (1.0 + opt_.decay_rate * static_cast<double>(t) /
                       static_cast<double>(decay_steps));
        step(xb, yb, b, lr);
        ++t;
      }
      if (opt_.log_every > 0 &&
          (epoch % opt_.log_every == 0 || epoch + 1 == opt_.epochs)) {
        const double l = net_.loss(x, y);
        if (!std::isfinite(l)) {
          throw numeric_error("MlpTrainer: loss became non-finite at epoch " +
                              std::to_string(epoch));
        }
        result.loss_history.push_back(l);
      }
    }
    result.final_loss = net_.loss(x, y);
    if (!std::isfinite(result.final_loss)) {
      throw numeric_error("MlpTrainer: final loss is non-finite");
    }
    result.steps = t;
    return result;
  }

 private:
  /// One optimizer step on the first `b` rows of the batch buffers.
  void step(const Matrix& xb, const Matrix& yb, std::size_t b, double lr) {
    backward(xb, yb, b);
    ++adam_step_;
    const double bc1 = 1.0 - std::pow(opt_.beta1, adam_step_);
    const double bc2 = 1.0 - std::pow(opt_.beta2, adam_step_);
    for (std::size_t l = 0; l < net_.layer_count(); ++l) {
      update(l, lr, bc1, bc2);
    }
  }

  /// Fills grad_w_ / grad_b_ with the loss gradient over the first `b` rows.
  void backward(const Matrix& xb, const Matrix& yb, std::size_t b) {
    const std::size_t layers = net_.layer_count();

    // Forward, keeping activations per layer (activations_[0] is the input).
    activations_.resize(layers + 1);
    activations_[0] = Matrix(b, xb.cols());
    std::copy_n(xb.data().data(), b * xb.cols(), activations_[0].data().data());
    for (std::size_t l = 0; l < layers; ++l) {
      Matrix z = Mlp::affine(activations_[l], net_.weights_[l],
                             net_.biases_[l]);
      if (l + 1 < layers) {
        detail::tanh_inplace(z.data().data(), z.size());
      }
      activations_[l + 1] = std::move(z);
    }

    // Output delta: d/dpred of mean over batch of squared error norms.
    Matrix delta = activations_[layers];
    const double inv_b = 2.0 / static_cast<double>(b);
    for (std::size_t i = 0; i < delta.size(); ++i) {
      delta.data()[i] = (delta.data()[i] - yb.data()[i]) * inv_b;
    }

    for (std::size_t l = layers; l-- > 0;) {
      const Matrix& a_in = activations_[l];
      const std::size_t fan_in = net_.weights_[l].rows();
      const std::size_t fan_out = net_.weights_[l].cols();

      // Gradients accumulate four batch rows per pass, mirroring affine().
      grad_w_[l].assign(fan_in * fan_out, 0.0);
      grad_b_[l].assign(fan_out, 0.0);
      std::vector<double>& gwl = grad_w_[l];
      std::vector<double>& gbl = grad_b_[l];
      std::size_t i = 0;
      for (; i + 4 <= b; i += 4) {
        const double* d0 = &delta(i, 0);
        const double* d1 = &delta(i + 1, 0);
        const double* d2 = &delta(i + 2, 0);
        const double* d3 = &delta(i + 3, 0);
        const double* a0 = &a_in(i, 0);
        const double* a1 = &a_in(i + 1, 0);
        const double* a2 = &a_in(i + 2, 0);
        const double* a3 = &a_in(i + 3, 0);
        for (std::size_t o = 0; o < fan_out; ++o) {
          gbl[o] += d0[o] + d1[o] + d2[o] + d3[o];
        }
        for (std::size_t j = 0; j < fan_in; ++j) {
          const double x0 = a0[j], x1 = a1[j], x2 = a2[j], x3 = a3[j];
          double* gw = gwl.data() + j * fan_out;
          for (std::size_t o = 0; o < fan_out; ++o) {
            gw[o] += x0 * d0[o] + x1 * d1[o] + x2 * d2[o] + x3 * d3[o];
          }
        }
      }
      for (; i < b; ++i) {
        const double* di = &delta(i, 0);
        const double* ai = &a_in(i, 0);
        for (std::size_t o = 0; o < fan_out; ++o) gbl[o] += di[o];
        for (std::size_t j = 0; j < fan_in; ++j) {
          const double aij = ai[j];
          double* gw = gwl.data() + j * fan_out;
          for (std::size_t o = 0; o < fan_out; ++o) gw[o] += aij * di[o];
        }
      }

      if (l > 0) {
        // delta for the previous layer: (delta W^T) . (1 - a^2). Runs on the
        // transposed weights so the inner loop is a plain axpy accumulation.
        const Matrix wt = transpose(net_.weights_[l]);
        Matrix prev(b, fan_in);
        for (std::size_t r = 0; r < b; ++r) {
          const double* di = &delta(r, 0);
          const double* ai = &a_in(r, 0);
          double* pi = &prev(r, 0);
          std::size_t o = 0;
          for (; o + 4 <= fan_out; o += 4) {
            const double d0 = di[o], d1 = di[o + 1];
            const double d2 = di[o + 2], d3 = di[o + 3];
            const double* t0 = &wt(o, 0);
            const double* t1 = &wt(o + 1, 0);
            const double* t2 = &wt(o + 2, 0);
            const double* t3 = &wt(o + 3, 0);
            for (std::size_t j = 0; j < fan_in; ++j) {
              pi[j] += d0 * t0[j] + d1 * t1[j] + d2 * t2[j] + d3 * t3[j];
            }
          }
          for (; o < fan_out; ++o) {
            const double dio = di[o];
            const double* to = &wt(o, 0);
            for (std::size_t j = 0; j < fan_in; ++j) pi[j] += dio * to[j];
          }
          for (std::size_t j = 0; j < fan_in; ++j) {
            pi[j] *= 1.0 - ai[j] * ai[j];
          }
        }
        delta = std::move(prev);
      }
    }
  }

  /// Adam / AdamW parameter update for layer l from grad_w_ / grad_b_.
  void update(std::size_t l, double lr, double bc1, double bc2) {
    const bool decoupled = opt_.optimizer == Optimizer::kAdamW;
    auto apply = [&](double* theta, double* m, double* v, const double* g,
                     std::size_t count) {
      KPCADON_SIMD
      for (std::size_t i = 0; i < count; ++i) {
        m[i] = opt_.beta1 * m[i] + (1.0 - opt_.beta1) * g[i];
        v[i] = opt_.beta2 * v[i] + (1.0 - opt_.beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        double upd = lr * mhat / (std::sqrt(vhat) + opt_.epsilon);
        if (decoupled) upd += lr * opt_.weight_decay * theta[i];
        theta[i] -= upd;
      }
    };
    apply(net_.weights_[l].data().data(), m_w_[l].data().data(),
          v_w_[l].data().data(), grad_w_[l].data(), grad_w_[l].size());
    apply(net_.biases_[l].data(), m_b_[l].data(), v_b_[l].data(),
          grad_b_[l].data(), grad_b_[l].size());
  }

  Mlp& net_;
  TrainOptions opt_;
  std::vector<Matrix> m_w_, v_w_;
  std::vector<std::vector<double>> m_b_, v_b_;
  std::vector<Matrix> activations_;
  std::vector<std::vector<double>> grad_w_, grad_b_;
  std::size_t adam_step_ = 0;
};

inline TrainResult train_mlp(Mlp& net, const Matrix& x, const Matrix& y,
                             const TrainOptions& options, Rng& rng) {
  MlpTrainer trainer(net, options);
  return trainer.train(x, y, rng);
}

}  // namespace kpcadon

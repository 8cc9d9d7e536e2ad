// nn.hpp - feedforward network built from scratch: dense layers, batch
// normalization (after each hidden dense, before the activation), ReLU /
// LeakyReLU, softmax cross-entropy, explicit backpropagation, SGD, and a
// reduce-on-plateau learning-rate rule. Templated on the scalar type: float
// for training speed, double for finite-difference verification.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "apadiag/common.hpp"
#include "apadiag/matrix.hpp"
#include "apadiag/rng.hpp"

namespace apadiag {

enum class Activation : std::uint8_t { ReLU = 0, LeakyReLU = 1 };

enum class Mode { Train, Eval };

struct ModelSpec {
    std::vector<int> layer_sizes{10000, 500, 500, 500, 49};
    Activation activation = Activation::ReLU;
    double leaky_slope = 0.01;
    double bn_eps = 1e-3;
    double bn_momentum = 0.1;  // EMA weight of the newest batch statistics

    int n_dense() const { return static_cast<int>(layer_sizes.size()) - 1; }
    int n_hidden() const { return n_dense() - 1; }
    int n_classes() const { return layer_sizes.back(); }
    int input_len() const { return layer_sizes.front(); }

    void validate() const {
        if (layer_sizes.size() < 2) throw ConfigError("ModelSpec.layer_sizes needs at least input and output");
        for (std::size_t i = 0; i < layer_sizes.size(); ++i)
            if (layer_sizes[i] <= 0)
                throw ConfigError("ModelSpec.layer_sizes[" + std::to_string(i) + "] must be positive");
        if (!(bn_eps > 0.0)) throw ConfigError("ModelSpec.bn_eps must be positive");
        if (!(bn_momentum > 0.0 && bn_momentum <= 1.0)) throw ConfigError("ModelSpec.bn_momentum must be in (0, 1]");
        if (leaky_slope < 0.0) throw ConfigError("ModelSpec.leaky_slope must be nonnegative");
    }

    // Analytic trainable-parameter count: every dense layer contributes
    // out*in weights + out biases; every hidden layer adds a scale and a
    // shift per unit for its batch norm.
    std::uint64_t param_count() const {
        std::uint64_t total = 0;
        for (int i = 0; i < n_dense(); ++i) {
            const auto in = static_cast<std::uint64_t>(layer_sizes[static_cast<std::size_t>(i)]);
            const auto out = static_cast<std::uint64_t>(layer_sizes[static_cast<std::size_t>(i) + 1]);
            total += out * in + out;
        }
        for (int h = 0; h < n_hidden(); ++h)
            total += 2ull * static_cast<std::uint64_t>(layer_sizes[static_cast<std::size_t>(h) + 1]);
        return total;
    }
};

template <typename T>
struct ModelParams {
    ModelSpec spec;
    Mode mode = Mode::Train;
    std::vector<Matrix<T>> W;            // per dense layer, out x in
    std::vector<std::vector<T>> B;       // per dense layer
    std::vector<std::vector<T>> gamma;   // per hidden layer
    std::vector<std::vector<T>> beta;
    std::vector<std::vector<T>> run_mean;
    std::vector<std::vector<T>> run_var;
    // checkpoint metadata
    std::uint32_t epochs_trained = 0;
    double final_lr = 0.0;
    std::uint64_t init_seed = 0;
};

// Scaled-uniform initialization, bound sqrt(6 / (fan_in + fan_out)); biases
// zero, batch-norm scale one / shift zero, running stats at the identity.
template <typename T>
ModelParams<T> init_params(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    ModelParams<T> p;
    p.spec = spec;
    p.init_seed = seed;
    Rng rng(seed);
    for (int i = 0; i < spec.n_dense(); ++i) {
        const auto in = static_cast<std::size_t>(spec.layer_sizes[static_cast<std::size_t>(i)]);
        const auto out = static_cast<std::size_t>(spec.layer_sizes[static_cast<std::size_t>(i) + 1]);
        Matrix<T> w(out, in);
        const double bound = std::sqrt(6.0 / (static_cast<double>(in) + static_cast<double>(out)));
        for (auto& v : w.data) v = static_cast<T>(rng.uniform(-bound, bound));
        p.W.push_back(std::move(w));
        p.B.emplace_back(out, T{});
    }
    for (int h = 0; h < spec.n_hidden(); ++h) {
        const auto width = static_cast<std::size_t>(spec.layer_sizes[static_cast<std::size_t>(h) + 1]);
        p.gamma.emplace_back(width, T{1});
        p.beta.emplace_back(width, T{});
        p.run_mean.emplace_back(width, T{});
        p.run_var.emplace_back(width, T{1});
    }
    return p;
}

template <typename T>
struct Gradients {
    std::vector<Matrix<T>> dW;
    std::vector<std::vector<T>> dB, dgamma, dbeta;

    static Gradients allocate(const ModelSpec& spec) {
        Gradients g;
        for (int i = 0; i < spec.n_dense(); ++i) {
            const auto in = static_cast<std::size_t>(spec.layer_sizes[static_cast<std::size_t>(i)]);
            const auto out = static_cast<std::size_t>(spec.layer_sizes[static_cast<std::size_t>(i) + 1]);
            g.dW.emplace_back(out, in);
            g.dB.emplace_back(out, T{});
        }
        for (int h = 0; h < spec.n_hidden(); ++h) {
            const auto width = static_cast<std::size_t>(spec.layer_sizes[static_cast<std::size_t>(h) + 1]);
            g.dgamma.emplace_back(width, T{});
            g.dbeta.emplace_back(width, T{});
        }
        return g;
    }

    void zero() {
        for (auto& m : dW) m.zero();
        for (auto& v : dB) std::fill(v.begin(), v.end(), T{});
        for (auto& v : dgamma) std::fill(v.begin(), v.end(), T{});
        for (auto& v : dbeta) std::fill(v.begin(), v.end(), T{});
    }
};

// Everything backward() needs from the forward pass.
template <typename T>
struct ForwardCache {
    std::vector<Matrix<T>> a;      // a[0] = input batch; a[i+1] = output of dense block i
    std::vector<Matrix<T>> xhat;   // per hidden layer: normalized pre-affine
    std::vector<std::vector<T>> inv_std;  // per hidden layer: 1/sqrt(var+eps)
    Mode mode = Mode::Train;
    bool valid = false;
};

// ---- elementwise pieces ----

template <typename T>
T relu(T x) {
    return x > T{} ? x : T{};
}

template <typename T>
T leaky_relu(T x, T slope) {
    return x > T{} ? x : slope * x;
}

// y = W x + B for a single vector; the batch path uses gemm_nt directly.
template <typename T>
std::vector<T> dense_forward(const Matrix<T>& W, const std::vector<T>& B, const std::vector<T>& x) {
    if (W.cols != x.size() || W.rows != B.size()) throw ShapeError("dense_forward: W/B/x dimensions disagree");
    std::vector<T> y(W.rows);
    for (std::size_t i = 0; i < W.rows; ++i) y[i] = detail::dot_banked(W.row(i), x.data(), W.cols) + B[i];
    return y;
}

// Standalone batch-norm over a batch (rows = samples, cols = features),
// standard placement: x_hat = (x - mean) / sqrt(var + eps), y = gamma *
// x_hat + beta. Train mode uses biased batch statistics and updates the
// running EMA; eval mode reads the running statistics.
template <typename T>
Matrix<T> batchnorm_forward(const std::vector<T>& gamma, const std::vector<T>& beta, double eps, const Matrix<T>& X,
                            Mode mode, std::vector<T>& run_mean, std::vector<T>& run_var, double momentum,
                            Matrix<T>* xhat_out = nullptr, std::vector<T>* inv_std_out = nullptr) {
    const std::size_t m = X.rows, d = X.cols;
    if (gamma.size() != d || beta.size() != d || run_mean.size() != d || run_var.size() != d)
        throw ShapeError("batchnorm_forward: parameter width disagrees with the batch");
    if (mode == Mode::Train && m < 2) throw ShapeError("batchnorm_forward: train mode needs batch size >= 2");
    Matrix<T> Y(m, d);
    std::vector<T> mean(d), inv_std(d);
    if (mode == Mode::Train) {
        std::vector<double> acc(d, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            const T* row = X.row(i);
            for (std::size_t j = 0; j < d; ++j) acc[j] += static_cast<double>(row[j]);
        }
        for (std::size_t j = 0; j < d; ++j) mean[j] = static_cast<T>(acc[j] / static_cast<double>(m));
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            const T* row = X.row(i);
            for (std::size_t j = 0; j < d; ++j) {
                const double dlt = static_cast<double>(row[j]) - static_cast<double>(mean[j]);
                acc[j] += dlt * dlt;
            }
        }
        for (std::size_t j = 0; j < d; ++j) {
            const double var = acc[j] / static_cast<double>(m);
            inv_std[j] = static_cast<T>(1.0 / std::sqrt(var + eps));
            run_mean[j] = static_cast<T>((1.0 - momentum) * static_cast<double>(run_mean[j]) +
                                         momentum * static_cast<double>(mean[j]));
            run_var[j] = static_cast<T>((1.0 - momentum) * static_cast<double>(run_var[j]) + momentum * var);
        }
    } else {
        for (std::size_t j = 0; j < d; ++j) {
            mean[j] = run_mean[j];
            inv_std[j] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(run_var[j]) + eps));
        }
    }
    if (xhat_out && (xhat_out->rows != m || xhat_out->cols != d)) *xhat_out = Matrix<T>(m, d);
    for (std::size_t i = 0; i < m; ++i) {
        const T* x = X.row(i);
        T* y = Y.row(i);
        T* xh = xhat_out ? xhat_out->row(i) : nullptr;
        for (std::size_t j = 0; j < d; ++j) {
            const T v = (x[j] - mean[j]) * inv_std[j];
            if (xh) xh[j] = v;
            y[j] = gamma[j] * v + beta[j];
        }
    }
    if (inv_std_out) *inv_std_out = inv_std;
    return Y;
}

// ---- softmax cross-entropy ----

// Single-sample loss -ln softmax(pi)[k], max-subtracted for stability.
template <typename T>
double softmax_xent(const std::vector<T>& logits, int k) {
    if (logits.empty()) throw ShapeError("softmax_xent: empty logits");
    if (k < 0 || k >= static_cast<int>(logits.size()))
        throw DataError("softmax_xent: label " + std::to_string(k) + " outside [0, " +
                        std::to_string(logits.size()) + ")");
    double mx = -std::numeric_limits<double>::infinity();
    for (const T v : logits) mx = std::max(mx, static_cast<double>(v));
    double denom = 0.0;
    for (const T v : logits) denom += std::exp(static_cast<double>(v) - mx);
    return -(static_cast<double>(logits[static_cast<std::size_t>(k)]) - mx - std::log(denom));
}

// Batch mean loss; optionally emits dL/dlogits = (softmax - onehot) / m.
template <typename T>
double softmax_xent_batch(const Matrix<T>& logits, const std::vector<std::uint16_t>& labels, Matrix<T>* dlogits) {
    const std::size_t m = logits.rows, c = logits.cols;
    if (labels.size() != m) throw ShapeError("softmax_xent_batch: label count disagrees with the batch");
    if (dlogits && (dlogits->rows != m || dlogits->cols != c)) *dlogits = Matrix<T>(m, c);
    KahanSum loss;
    for (std::size_t i = 0; i < m; ++i) {
        if (labels[i] >= c)
            throw DataError("softmax_xent_batch: label " + std::to_string(labels[i]) + " outside [0, " +
                            std::to_string(c) + ")");
        const T* row = logits.row(i);
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < c; ++j) mx = std::max(mx, static_cast<double>(row[j]));
        double denom = 0.0;
        for (std::size_t j = 0; j < c; ++j) denom += std::exp(static_cast<double>(row[j]) - mx);
        loss.add(-(static_cast<double>(row[labels[i]]) - mx - std::log(denom)));
        if (dlogits) {
            T* g = dlogits->row(i);
            for (std::size_t j = 0; j < c; ++j)
                g[j] = static_cast<T>(std::exp(static_cast<double>(row[j]) - mx) / denom / static_cast<double>(m));
            g[labels[i]] -= static_cast<T>(1.0 / static_cast<double>(m));
        }
    }
    return loss.value() / static_cast<double>(m);
}

// ---- full-model forward / backward ----

template <typename T>
Matrix<T> forward(ModelParams<T>& params, const Matrix<T>& X, Mode mode, ForwardCache<T>* cache = nullptr) {
    const ModelSpec& spec = params.spec;
    if (X.cols != static_cast<std::size_t>(spec.input_len()))
        throw ShapeError("forward: input width " + std::to_string(X.cols) + " does not match spec input " +
                         std::to_string(spec.input_len()));
    if (cache) {
        cache->a.assign(static_cast<std::size_t>(spec.n_dense()) + 1, Matrix<T>{});
        cache->xhat.assign(static_cast<std::size_t>(spec.n_hidden()), Matrix<T>{});
        cache->inv_std.assign(static_cast<std::size_t>(spec.n_hidden()), {});
        cache->mode = mode;
        cache->a[0] = X;
    }
    Matrix<T> act = X;
    for (int i = 0; i < spec.n_dense(); ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const auto out = static_cast<std::size_t>(spec.layer_sizes[ui + 1]);
        Matrix<T> Z(act.rows, out);
        gemm_nt(act, params.W[ui], Z);
        for (std::size_t r = 0; r < Z.rows; ++r) {
            T* zr = Z.row(r);
            const T* b = params.B[ui].data();
            for (std::size_t j = 0; j < out; ++j) zr[j] += b[j];
        }
        if (i < spec.n_hidden()) {
            Matrix<T>* xh = cache ? &cache->xhat[ui] : nullptr;
            std::vector<T>* isd = cache ? &cache->inv_std[ui] : nullptr;
            Matrix<T> Y = batchnorm_forward(params.gamma[ui], params.beta[ui], spec.bn_eps, Z, mode,
                                            params.run_mean[ui], params.run_var[ui], spec.bn_momentum, xh, isd);
            const T slope = static_cast<T>(spec.leaky_slope);
            if (spec.activation == Activation::ReLU) {
                for (auto& v : Y.data) v = relu(v);
            } else {
                for (auto& v : Y.data) v = leaky_relu(v, slope);
            }
            act = std::move(Y);
        } else {
            act = std::move(Z);
        }
        if (cache) cache->a[ui + 1] = act;
    }
    if (cache) cache->valid = true;
    return act;
}

// Convenience eval-mode forward that never touches running statistics.
template <typename T>
Matrix<T> predict_logits(const ModelParams<T>& params, const Matrix<T>& X) {
    auto& mutable_params = const_cast<ModelParams<T>&>(params);  // eval mode writes nothing
    return forward(mutable_params, X, Mode::Eval);
}

// Backpropagation through the recorded forward pass. Returns the mean batch
// loss; fills `grads` for every trainable tensor.
template <typename T>
double backward(const ModelParams<T>& params, const ForwardCache<T>& cache, const std::vector<std::uint16_t>& labels,
                Gradients<T>& grads) {
    if (!cache.valid) throw StateError("backward: forward pass has not been recorded");
    if (cache.mode != Mode::Train) throw StateError("backward: cache was recorded in eval mode");
    const ModelSpec& spec = params.spec;
    const Matrix<T>& logits = cache.a.back();
    grads.zero();

    Matrix<T> dZ;
    const double loss = softmax_xent_batch(logits, labels, &dZ);

    for (int i = spec.n_dense() - 1; i >= 0; --i) {
        const auto ui = static_cast<std::size_t>(i);
        const Matrix<T>& a_in = cache.a[ui];
        gemm_tn_acc(dZ, a_in, grads.dW[ui]);
        auto& db = grads.dB[ui];
        for (std::size_t r = 0; r < dZ.rows; ++r) {
            const T* row = dZ.row(r);
            for (std::size_t j = 0; j < dZ.cols; ++j) db[j] += row[j];
        }
        if (i == 0) break;

        Matrix<T> dA(dZ.rows, a_in.cols);
        gemm_nn(dZ, params.W[ui], dA);

        // Activation derivative, read off the stored post-activation values.
        const auto uh = static_cast<std::size_t>(i - 1);
        const T slope = static_cast<T>(spec.leaky_slope);
        if (spec.activation == Activation::ReLU) {
            for (std::size_t t = 0; t < dA.data.size(); ++t)
                if (!(a_in.data[t] > T{})) dA.data[t] = T{};
        } else {
            for (std::size_t t = 0; t < dA.data.size(); ++t)
                if (!(a_in.data[t] > T{})) dA.data[t] *= slope;
        }

        // Batch-norm backward through the batch statistics.
        const Matrix<T>& xhat = cache.xhat[uh];
        const std::vector<T>& inv_std = cache.inv_std[uh];
        const std::size_t m = dA.rows, d = dA.cols;
        std::vector<double> sum_dxhat(d, 0.0), sum_dxhat_xhat(d, 0.0);
        auto& dgamma = grads.dgamma[uh];
        auto& dbeta = grads.dbeta[uh];
        for (std::size_t r = 0; r < m; ++r) {
            const T* dy = dA.row(r);
            const T* xh = xhat.row(r);
            for (std::size_t j = 0; j < d; ++j) {
                dgamma[j] += dy[j] * xh[j];
                dbeta[j] += dy[j];
                const double dxh = static_cast<double>(dy[j]) * static_cast<double>(params.gamma[uh][j]);
                sum_dxhat[j] += dxh;
                sum_dxhat_xhat[j] += dxh * static_cast<double>(xh[j]);
            }
        }
        Matrix<T> dZprev(m, d);
        const double inv_m = 1.0 / static_cast<double>(m);
        for (std::size_t r = 0; r < m; ++r) {
            const T* dy = dA.row(r);
            const T* xh = xhat.row(r);
            T* dz = dZprev.row(r);
            for (std::size_t j = 0; j < d; ++j) {
                const double dxh = static_cast<double>(dy[j]) * static_cast<double>(params.gamma[uh][j]);
                const double v = static_cast<double>(inv_std[j]) *
                                 (dxh - inv_m * sum_dxhat[j] -
                                  static_cast<double>(xh[j]) * inv_m * sum_dxhat_xhat[j]);
                dz[j] = static_cast<T>(v);
            }
        }
        dZ = std::move(dZprev);
    }
    return loss;
}

// w <- w - eta * grad for every trainable tensor.
template <typename T>
void sgd_step(ModelParams<T>& params, const Gradients<T>& grads, double eta) {
    const T e = static_cast<T>(eta);
    for (std::size_t i = 0; i < params.W.size(); ++i) {
        auto& w = params.W[i].data;
        const auto& g = grads.dW[i].data;
        if (w.size() != g.size()) throw ShapeError("sgd_step: weight gradient shape mismatch");
        for (std::size_t t = 0; t < w.size(); ++t) w[t] -= e * g[t];
        auto& b = params.B[i];
        const auto& gb = grads.dB[i];
        for (std::size_t t = 0; t < b.size(); ++t) b[t] -= e * gb[t];
    }
    for (std::size_t h = 0; h < params.gamma.size(); ++h) {
        for (std::size_t t = 0; t < params.gamma[h].size(); ++t) {
            params.gamma[h][t] -= e * grads.dgamma[h][t];
            params.beta[h][t] -= e * grads.dbeta[h][t];
        }
    }
}

// ---- learning-rate schedule ----

struct OptimizerConfig {
    double learning_rate = 0.01;
    int plateau_patience = 3;
    double plateau_factor = 0.1;
    double min_lr = 1e-5;
    int max_epochs = 60;
    int batch_size = 200;
    double val_fraction = 0.1;  // held out from the training split for the schedule
    std::uint64_t seed = 7;

    void validate() const {
        if (!(learning_rate > 0.0)) throw ConfigError("OptimizerConfig.learning_rate must be positive");
        if (plateau_patience < 1) throw ConfigError("OptimizerConfig.plateau_patience must be at least 1");
        if (!(plateau_factor > 0.0 && plateau_factor < 1.0))
            throw ConfigError("OptimizerConfig.plateau_factor must lie in (0, 1)");
        if (!(min_lr > 0.0 && min_lr <= learning_rate))
            throw ConfigError("OptimizerConfig.min_lr must be positive and not above learning_rate");
        if (max_epochs < 1) throw ConfigError("OptimizerConfig.max_epochs must be at least 1");
        if (batch_size < 1) throw ConfigError("OptimizerConfig.batch_size must be at least 1");
        if (!(val_fraction >= 0.0 && val_fraction <= 0.5))
            throw ConfigError("OptimizerConfig.val_fraction must lie in [0, 0.5]");
    }
};

// Reduce-on-plateau: if the best monitored accuracy has not improved for
// `plateau_patience` consecutive epochs, multiply the rate by
// `plateau_factor` (clamped at min_lr) and restart the stagnation count.
class PlateauScheduler {
  public:
    explicit PlateauScheduler(const OptimizerConfig& cfg)
        : lr_(cfg.learning_rate), patience_(cfg.plateau_patience), factor_(cfg.plateau_factor), min_lr_(cfg.min_lr) {}

    // Feeds one epoch accuracy; returns the learning rate to use next.
    double observe(double accuracy) {
        if (accuracy > best_) {
            best_ = accuracy;
            stagnant_ = 0;
            return lr_;
        }
        if (++stagnant_ >= patience_) {
            stagnant_ = 0;
            at_floor_ = lr_ <= min_lr_;
            lr_ = std::max(lr_ * factor_, min_lr_);
            reduced_ = true;
        }
        return lr_;
    }

    double lr() const { return lr_; }
    bool last_reduction_hit_floor() const { return reduced_ && at_floor_; }

  private:
    double lr_;
    int patience_;
    double factor_;
    double min_lr_;
    double best_ = -std::numeric_limits<double>::infinity();
    int stagnant_ = 0;
    bool reduced_ = false;
    bool at_floor_ = false;
};

// Pure replay form: the learning rate after observing the whole history.
inline double plateau_scheduler(const std::vector<double>& history, const OptimizerConfig& cfg) {
    if (history.empty()) throw ConfigError("plateau_scheduler: empty history");
    PlateauScheduler s(cfg);
    double lr = cfg.learning_rate;
    for (const double acc : history) lr = s.observe(acc);
    return lr;
}

// ---- APAM checkpoint ----
//
// Little-endian layout:
//   byte 0..3  magic "APAM"
//   u32        version (1)
//   u8         activation (0 relu, 1 leaky)
//   f64        leaky_slope, bn_eps, bn_momentum
//   u32        n_layers, then u32 layer sizes
//   u32        epochs_trained; f64 final learning rate; u64 init seed
//   f32 tensors in declaration order: per dense layer W then B; per hidden
//   layer gamma, beta, running mean, running var.

inline constexpr std::uint32_t kApamVersion = 1;

namespace detail {

inline void write_f32_span(std::ofstream& os, const float* p, std::size_t n) {
    os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(float)));
}

inline void read_f32_span(std::ifstream& is, float* p, std::size_t n) {
    is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(float)));
}

}  // namespace detail

inline void save_model(const std::string& path, const ModelParams<float>& p) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("save_model: cannot open " + path + " for writing");
    os.write("APAM", 4);
    const std::uint32_t version = kApamVersion;
    os.write(reinterpret_cast<const char*>(&version), 4);
    const auto act = static_cast<std::uint8_t>(p.spec.activation);
    os.write(reinterpret_cast<const char*>(&act), 1);
    const double meta_d[3] = {p.spec.leaky_slope, p.spec.bn_eps, p.spec.bn_momentum};
    os.write(reinterpret_cast<const char*>(meta_d), sizeof(meta_d));
    const auto n_layers = static_cast<std::uint32_t>(p.spec.layer_sizes.size());
    os.write(reinterpret_cast<const char*>(&n_layers), 4);
    for (const int s : p.spec.layer_sizes) {
        const auto u = static_cast<std::uint32_t>(s);
        os.write(reinterpret_cast<const char*>(&u), 4);
    }
    os.write(reinterpret_cast<const char*>(&p.epochs_trained), 4);
    os.write(reinterpret_cast<const char*>(&p.final_lr), 8);
    os.write(reinterpret_cast<const char*>(&p.init_seed), 8);
    for (std::size_t i = 0; i < p.W.size(); ++i) {
        detail::write_f32_span(os, p.W[i].data.data(), p.W[i].data.size());
        detail::write_f32_span(os, p.B[i].data(), p.B[i].size());
    }
    for (std::size_t h = 0; h < p.gamma.size(); ++h) {
        detail::write_f32_span(os, p.gamma[h].data(), p.gamma[h].size());
        detail::write_f32_span(os, p.beta[h].data(), p.beta[h].size());
        detail::write_f32_span(os, p.run_mean[h].data(), p.run_mean[h].size());
        detail::write_f32_span(os, p.run_var[h].data(), p.run_var[h].size());
    }
    if (!os) throw DataError("save_model: write failed for " + path);
}

inline ModelParams<float> load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("load_model: cannot open " + path);
    is.seekg(0, std::ios::end);
    const auto actual_size = static_cast<std::uint64_t>(is.tellg());
    is.seekg(0, std::ios::beg);
    char magic[4] = {};
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "APAM") throw DataError("load_model: format error, bad magic in " + path);
    std::uint32_t version = 0;
    is.read(reinterpret_cast<char*>(&version), 4);
    if (!is || version != kApamVersion)
        throw DataError("load_model: version mismatch, file has " + std::to_string(version) + ", expected " +
                        std::to_string(kApamVersion));
    std::uint8_t act = 0;
    is.read(reinterpret_cast<char*>(&act), 1);
    if (!is || act > 1) throw DataError("load_model: unknown activation code");
    double meta_d[3] = {};
    is.read(reinterpret_cast<char*>(meta_d), sizeof(meta_d));
    std::uint32_t n_layers = 0;
    is.read(reinterpret_cast<char*>(&n_layers), 4);
    if (!is || n_layers < 2 || n_layers > 64) throw DataError("load_model: corrupt header, bad layer count");
    ModelSpec spec;
    spec.activation = static_cast<Activation>(act);
    spec.leaky_slope = meta_d[0];
    spec.bn_eps = meta_d[1];
    spec.bn_momentum = meta_d[2];
    spec.layer_sizes.resize(n_layers);
    for (auto& s : spec.layer_sizes) {
        std::uint32_t u = 0;
        is.read(reinterpret_cast<char*>(&u), 4);
        if (!is) throw DataError("load_model: corrupt header, truncated layer sizes");
        s = static_cast<int>(u);
    }
    spec.validate();
    ModelParams<float> p = init_params<float>(spec, 0);
    is.read(reinterpret_cast<char*>(&p.epochs_trained), 4);
    is.read(reinterpret_cast<char*>(&p.final_lr), 8);
    is.read(reinterpret_cast<char*>(&p.init_seed), 8);
    if (!is) throw DataError("load_model: corrupt header, truncated metadata");

    std::uint64_t tensor_floats = 0;
    for (std::size_t i = 0; i < p.W.size(); ++i) tensor_floats += p.W[i].data.size() + p.B[i].size();
    for (std::size_t h = 0; h < p.gamma.size(); ++h) tensor_floats += 4ull * p.gamma[h].size();
    const std::uint64_t expected_size = 4 + 4 + 1 + 24 + 4 + 4ull * n_layers + 4 + 8 + 8 + 4ull * tensor_floats;
    if (actual_size != expected_size)
        throw DataError("load_model: truncated file, expected " + std::to_string(expected_size) + " bytes, found " +
                        std::to_string(actual_size));

    for (std::size_t i = 0; i < p.W.size(); ++i) {
        detail::read_f32_span(is, p.W[i].data.data(), p.W[i].data.size());
        detail::read_f32_span(is, p.B[i].data(), p.B[i].size());
    }
    for (std::size_t h = 0; h < p.gamma.size(); ++h) {
        detail::read_f32_span(is, p.gamma[h].data(), p.gamma[h].size());
        detail::read_f32_span(is, p.beta[h].data(), p.beta[h].size());
        detail::read_f32_span(is, p.run_mean[h].data(), p.run_mean[h].size());
        detail::read_f32_span(is, p.run_var[h].data(), p.run_var[h].size());
    }
    if (!is) throw DataError("load_model: read failed for " + path);
    p.mode = Mode::Eval;
    return p;
}

}  // namespace apadiag

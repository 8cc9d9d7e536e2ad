// pipeline.hpp - experiment orchestration: training loop, confusion-matrix
// evaluation, SNR robustness sweep, repeated-split statistics, grouped
// multi-element experiment, and inference timing.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <type_traits>
#include <vector>

#include "apadiag/dataset.hpp"
#include "apadiag/nn.hpp"

namespace apadiag {

struct ConfusionMatrix {
    int n_classes = 0;
    std::vector<std::uint64_t> counts;  // row = true class, column = predicted

    explicit ConfusionMatrix(int n = 0)
        : n_classes(n), counts(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0) {}

    std::uint64_t& at(int t, int p) { return counts[static_cast<std::size_t>(t) * n_classes + p]; }
    std::uint64_t at(int t, int p) const { return counts[static_cast<std::size_t>(t) * n_classes + p]; }

    std::uint64_t total() const {
        std::uint64_t s = 0;
        for (const auto c : counts) s += c;
        return s;
    }

    double accuracy() const {
        const auto n = total();
        if (n == 0) return 0.0;
        std::uint64_t diag = 0;
        for (int c = 0; c < n_classes; ++c) diag += at(c, c);
        return static_cast<double>(diag) / static_cast<double>(n);
    }

    // Row-normalized view; rows with zero support are emitted as all-zero
    // and reported through zero_support_rows().
    std::vector<double> row_normalized() const {
        std::vector<double> out(counts.size(), 0.0);
        for (int t = 0; t < n_classes; ++t) {
            std::uint64_t row_sum = 0;
            for (int p = 0; p < n_classes; ++p) row_sum += at(t, p);
            if (row_sum == 0) continue;
            for (int p = 0; p < n_classes; ++p)
                out[static_cast<std::size_t>(t) * n_classes + p] =
                    static_cast<double>(at(t, p)) / static_cast<double>(row_sum);
        }
        return out;
    }

    std::vector<int> zero_support_rows() const {
        std::vector<int> rows;
        for (int t = 0; t < n_classes; ++t) {
            std::uint64_t row_sum = 0;
            for (int p = 0; p < n_classes; ++p) row_sum += at(t, p);
            if (row_sum == 0) rows.push_back(t);
        }
        return rows;
    }

    std::vector<double> per_class_accuracy() const {
        std::vector<double> out(static_cast<std::size_t>(n_classes), 0.0);
        for (int t = 0; t < n_classes; ++t) {
            std::uint64_t row_sum = 0;
            for (int p = 0; p < n_classes; ++p) row_sum += at(t, p);
            out[static_cast<std::size_t>(t)] =
                row_sum == 0 ? 0.0 : static_cast<double>(at(t, t)) / static_cast<double>(row_sum);
        }
        return out;
    }

    // Fraction of all predictions landing on the most-predicted class.
    double modal_prediction_fraction() const {
        const auto n = total();
        if (n == 0) return 0.0;
        std::uint64_t best = 0;
        for (int p = 0; p < n_classes; ++p) {
            std::uint64_t col = 0;
            for (int t = 0; t < n_classes; ++t) col += at(t, p);
            best = std::max(best, col);
        }
        return static_cast<double>(best) / static_cast<double>(n);
    }

    int modal_class() const {
        std::uint64_t best = 0;
        int arg = 0;
        for (int p = 0; p < n_classes; ++p) {
            std::uint64_t col = 0;
            for (int t = 0; t < n_classes; ++t) col += at(t, p);
            if (col > best) {
                best = col;
                arg = p;
            }
        }
        return arg;
    }
};

struct RunReport {
    std::vector<double> epoch_loss;      // mean training batch loss per epoch
    std::vector<double> epoch_val_acc;   // validation accuracy per epoch
    std::vector<double> epoch_lr;        // learning rate used during each epoch
    double final_test_accuracy = 0.0;
    std::vector<double> per_class_accuracy;
    double seconds_per_sample = 0.0;     // single-sample inference latency
    int epochs_run = 0;
    bool stopped_at_min_lr = false;
    std::uint64_t model_seed = 0;
    std::uint64_t shuffle_seed = 0;
    std::uint64_t param_count = 0;
};

struct SweepPoint {
    double snr_db = 0.0;  // +inf encodes the clean baseline
    bool clean = false;
    double accuracy = 0.0;
    double modal_fraction = 0.0;
    int modal_class = 0;
    ConfusionMatrix confusion;
    std::vector<double> per_class_accuracy;
};

struct SweepReport {
    std::vector<SweepPoint> points;  // clean first, then ascending SNR
    double clean_accuracy = 0.0;
};

struct FiveNumber {
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

struct StatReport {
    int n_runs = 0;
    std::vector<double> snr_grid_db;            // +inf encodes clean
    std::vector<FiveNumber> overall;            // per SNR point
    std::vector<std::vector<FiveNumber>> per_class;  // [snr][class]
    std::vector<std::vector<std::vector<double>>> raw;  // [snr][class][run]
};

// ---- evaluation ----

// Argmax with ties broken toward the lowest class index.
template <typename T>
int argmax_row(const T* row, std::size_t n) {
    std::size_t arg = 0;
    for (std::size_t j = 1; j < n; ++j)
        if (row[j] > row[arg]) arg = j;
    return static_cast<int>(arg);
}

template <typename T>
ConfusionMatrix evaluate(const ModelParams<T>& params, const Corpus& corpus,
                         const std::vector<std::uint32_t>& indices, int eval_batch = 512) {
    if (params.spec.n_classes() != static_cast<int>(corpus.n_classes))
        throw ShapeError("evaluate: model has " + std::to_string(params.spec.n_classes()) + " classes, corpus has " +
                         std::to_string(corpus.n_classes));
    ConfusionMatrix cm(corpus.n_classes);
    const std::size_t f = corpus.feature_len;
    Matrix<T> X;
    for (std::size_t start = 0; start < indices.size(); start += static_cast<std::size_t>(eval_batch)) {
        const std::size_t n = std::min(static_cast<std::size_t>(eval_batch), indices.size() - start);
        if (X.rows != n || X.cols != f) X = Matrix<T>(n, f);
        for (std::size_t i = 0; i < n; ++i) {
            const float* src = corpus.features.row(indices[start + i]);
            T* dst = X.row(i);
            for (std::size_t j = 0; j < f; ++j) dst[j] = static_cast<T>(src[j]);
        }
        const Matrix<T> logits = predict_logits(params, X);
        for (std::size_t i = 0; i < n; ++i) {
            const int pred = argmax_row(logits.row(i), logits.cols);
            const int truth = corpus.labels[indices[start + i]];
            ++cm.at(truth, pred);
        }
    }
    return cm;
}

// ---- training ----

// Trains on `train_indices`, holding out val_fraction of them (seeded) to
// drive the plateau schedule. Stops at max_epochs, or early once a plateau
// reduction is requested while the rate already sits at min_lr. Throws
// TrainError naming the epoch if the loss turns non-finite.
template <typename T>
ModelParams<T> train(const Corpus& corpus, const std::vector<std::uint32_t>& train_indices, const ModelSpec& spec,
                     const OptimizerConfig& opt, RunReport& report) {
    spec.validate();
    opt.validate();
    if (train_indices.empty()) throw DataError("train: empty training set");
    if (spec.input_len() != static_cast<int>(corpus.feature_len))
        throw ShapeError("train: spec input " + std::to_string(spec.input_len()) + " does not match feature length " +
                         std::to_string(corpus.feature_len));
    if (spec.n_classes() != static_cast<int>(corpus.n_classes))
        throw ShapeError("train: spec classes do not match corpus classes");

    // Deterministic validation holdout from the training indices.
    std::vector<std::uint32_t> fit = train_indices;
    {
        Rng rng(derive_seed(opt.seed, "val-holdout"));
        for (std::size_t i = fit.size(); i > 1; --i) {
            const auto j = rng.bounded(i);
            std::swap(fit[i - 1], fit[j]);
        }
    }
    const auto n_val = static_cast<std::size_t>(std::llround(opt.val_fraction * static_cast<double>(fit.size())));
    std::vector<std::uint32_t> val(fit.end() - static_cast<std::ptrdiff_t>(n_val), fit.end());
    fit.resize(fit.size() - n_val);
    if (fit.empty()) throw DataError("train: validation holdout consumed the whole training set");

    const std::uint64_t model_seed = derive_seed(opt.seed, "init");
    ModelParams<T> params = init_params<T>(spec, model_seed);
    Gradients<T> grads = Gradients<T>::allocate(spec);
    ForwardCache<T> cache;
    PlateauScheduler scheduler(opt);

    report = RunReport{};
    report.model_seed = model_seed;
    report.shuffle_seed = derive_seed(opt.seed, "shuffle");
    report.param_count = spec.param_count();

    double lr = opt.learning_rate;
    Matrix<float> Xf;
    Matrix<T> X;
    std::vector<std::uint16_t> y;
    for (int epoch = 0; epoch < opt.max_epochs; ++epoch) {
        BatchStream stream(corpus, fit, opt.batch_size, derive_seed(report.shuffle_seed, "epoch",
                                                                    static_cast<std::uint64_t>(epoch)));
        KahanSum loss_sum;
        std::size_t n_batches = 0;
        while (stream.next(Xf, y)) {
            if constexpr (std::is_same_v<T, float>) {
                X = std::move(Xf);
            } else {
                if (X.rows != Xf.rows || X.cols != Xf.cols) X = Matrix<T>(Xf.rows, Xf.cols);
                for (std::size_t t = 0; t < Xf.data.size(); ++t) X.data[t] = static_cast<T>(Xf.data[t]);
            }
            // Per the batch-norm contract a trailing 1-sample batch cannot be
            // trained on; fold it away by skipping (only possible when the
            // fit-set size is ≡ 1 mod batch_size).
            if (X.rows < 2) {
                if constexpr (std::is_same_v<T, float>) Xf = std::move(X);
                continue;
            }
            forward(params, X, Mode::Train, &cache);
            const double loss = backward(params, cache, y, grads);
            if (!std::isfinite(loss))
                throw TrainError("train: loss diverged (non-finite) at epoch " + std::to_string(epoch));
            sgd_step(params, grads, lr);
            loss_sum.add(loss);
            ++n_batches;
            if constexpr (std::is_same_v<T, float>) Xf = std::move(X);
        }
        report.epoch_loss.push_back(loss_sum.value() / static_cast<double>(n_batches));
        report.epoch_lr.push_back(lr);

        const auto& monitor = val.empty() ? fit : val;
        const double val_acc = evaluate(params, corpus, monitor).accuracy();
        report.epoch_val_acc.push_back(val_acc);
        report.epochs_run = epoch + 1;

        lr = scheduler.observe(val_acc);
        if (scheduler.last_reduction_hit_floor()) {
            report.stopped_at_min_lr = true;
            break;
        }
    }
    params.epochs_trained = static_cast<std::uint32_t>(report.epochs_run);
    params.final_lr = lr;
    params.mode = Mode::Eval;
    return params;
}

// ---- SNR sweep ----

// Mean complex-sample power of the listed feature rows (I/Q de-interleaved).
inline double mean_complex_power(const Corpus& corpus, const std::vector<std::uint32_t>& indices) {
    if (indices.empty()) throw DataError("mean_complex_power: empty index set");
    KahanSum acc;
    const std::size_t L = corpus.feature_len / 2;
    for (const auto idx : indices) {
        const float* row = corpus.features.row(idx);
        for (std::size_t t = 0; t < L; ++t)
            acc.add(static_cast<double>(row[t]) * row[t] + static_cast<double>(row[L + t]) * row[L + t]);
    }
    return acc.value() / (static_cast<double>(indices.size()) * static_cast<double>(L));
}

// Evaluates the model on the test rows with circularly-symmetric complex
// noise of the requested SNR added to the de-interleaved I/Q features; the
// reference signal power is the test-set mean complex power. The clean
// sentinel (+inf) reproduces evaluate() exactly.
template <typename T>
SweepReport snr_sweep(const ModelParams<T>& params, const Corpus& corpus, const std::vector<std::uint32_t>& indices,
                      const std::vector<double>& grid_db, std::uint64_t noise_seed) {
    if (grid_db.empty()) throw ConfigError("snr_sweep: empty SNR grid");
    for (std::size_t i = 1; i < grid_db.size(); ++i)
        if (!(grid_db[i] > grid_db[i - 1])) throw ConfigError("snr_sweep: SNR grid must be strictly increasing");

    SweepReport report;
    const double p_ref = mean_complex_power(corpus, indices);
    const std::size_t L = corpus.feature_len / 2;

    std::vector<double> points;
    points.push_back(kSnrClean);
    for (const double s : grid_db) points.push_back(s);

    for (std::size_t pi = 0; pi < points.size(); ++pi) {
        const double snr_db = points[pi];
        SweepPoint point;
        point.snr_db = snr_db;
        point.clean = snr_db == kSnrClean;
        ConfusionMatrix cm(corpus.n_classes);
        if (point.clean) {
            cm = evaluate(params, corpus, indices);
        } else {
            const double noise_power = p_ref / std::pow(10.0, snr_db / 10.0);
            const double sigma_axis = std::sqrt(noise_power / 2.0);
            const std::size_t batch = 512;
            Matrix<T> X;
            for (std::size_t start = 0; start < indices.size(); start += batch) {
                const std::size_t n = std::min(batch, indices.size() - start);
                if (X.rows != n || X.cols != corpus.feature_len) X = Matrix<T>(n, corpus.feature_len);
                for (std::size_t i = 0; i < n; ++i) {
                    const auto idx = indices[start + i];
                    const float* src = corpus.features.row(idx);
                    T* dst = X.row(i);
                    // Per-row noise stream: deterministic regardless of batch
                    // partitioning or thread count.
                    Rng rng(derive_seed(noise_seed, "sweep-row",
                                        (static_cast<std::uint64_t>(pi) << 32) + idx));
                    for (std::size_t t = 0; t < L; ++t) {
                        double z0, z1;
                        rng.normal_pair(z0, z1);
                        dst[t] = static_cast<T>(static_cast<double>(src[t]) + sigma_axis * z0);
                        dst[L + t] = static_cast<T>(static_cast<double>(src[L + t]) + sigma_axis * z1);
                    }
                }
                const Matrix<T> logits = predict_logits(params, X);
                for (std::size_t i = 0; i < n; ++i)
                    ++cm.at(corpus.labels[indices[start + i]], argmax_row(logits.row(i), logits.cols));
            }
        }
        point.accuracy = cm.accuracy();
        point.modal_fraction = cm.modal_prediction_fraction();
        point.modal_class = cm.modal_class();
        point.per_class_accuracy = cm.per_class_accuracy();
        point.confusion = std::move(cm);
        report.points.push_back(std::move(point));
    }
    report.clean_accuracy = report.points.front().accuracy;
    return report;
}

inline std::vector<double> default_snr_grid() {
    std::vector<double> g;
    for (int s = -5; s <= 9; ++s) g.push_back(static_cast<double>(s));
    return g;
}

// ---- repeated-split statistics ----

inline FiveNumber five_number_summary(std::vector<double> values) {
    if (values.empty()) throw DataError("five_number_summary: empty sample");
    std::sort(values.begin(), values.end());
    const auto quantile = [&](double p) {
        const double pos = p * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        const double w = pos - static_cast<double>(lo);
        return values[lo] * (1.0 - w) + values[hi] * w;
    };
    FiveNumber f;
    f.min = values.front();
    f.q1 = quantile(0.25);
    f.median = quantile(0.5);
    f.q3 = quantile(0.75);
    f.max = values.back();
    return f;
}

// n_runs independent re-splits of the same corpus: train, sweep, aggregate
// per-class and overall accuracies into five-number summaries per SNR.
template <typename T>
StatReport stat_runs(const Corpus& corpus, const DatasetManifest& manifest, const ModelSpec& spec,
                     const OptimizerConfig& opt, const std::vector<double>& grid_db, int n_runs) {
    if (n_runs < 2) throw ConfigError("stat_runs: n_runs must be at least 2");
    StatReport report;
    report.n_runs = n_runs;
    report.snr_grid_db.push_back(kSnrClean);
    for (const double s : grid_db) report.snr_grid_db.push_back(s);
    const std::size_t n_points = report.snr_grid_db.size();
    report.raw.assign(n_points, std::vector<std::vector<double>>(static_cast<std::size_t>(corpus.n_classes)));
    std::vector<std::vector<double>> overall(n_points);

    for (int run = 0; run < n_runs; ++run) {
        const std::uint64_t split_seed = derive_seed(manifest.split_seed, "stat-run", static_cast<std::uint64_t>(run));
        const SplitIndices split = split_corpus(corpus, manifest.split_fraction, split_seed);
        OptimizerConfig run_opt = opt;
        run_opt.seed = derive_seed(opt.seed, "stat-run", static_cast<std::uint64_t>(run));
        RunReport run_report;
        const ModelParams<T> params = train<T>(corpus, split.train, spec, run_opt, run_report);
        const SweepReport sweep = snr_sweep(params, corpus, split.test, grid_db,
                                            derive_seed(manifest.split_seed, "stat-noise",
                                                        static_cast<std::uint64_t>(run)));
        for (std::size_t pi = 0; pi < n_points; ++pi) {
            overall[pi].push_back(sweep.points[pi].accuracy);
            for (int c = 0; c < corpus.n_classes; ++c)
                report.raw[pi][static_cast<std::size_t>(c)].push_back(
                    sweep.points[pi].per_class_accuracy[static_cast<std::size_t>(c)]);
        }
    }

    report.overall.resize(n_points);
    report.per_class.assign(n_points, std::vector<FiveNumber>(static_cast<std::size_t>(corpus.n_classes)));
    for (std::size_t pi = 0; pi < n_points; ++pi) {
        report.overall[pi] = five_number_summary(overall[pi]);
        for (int c = 0; c < corpus.n_classes; ++c)
            report.per_class[pi][static_cast<std::size_t>(c)] =
                five_number_summary(report.raw[pi][static_cast<std::size_t>(c)]);
    }
    return report;
}

// ---- grouped multi-element experiment ----

template <typename T>
struct MultiExperimentResult {
    ModelParams<T> params;
    RunReport report;
    ConfusionMatrix confusion{0};
};

// Builds the MultiGroup corpus from the manifest, trains the same model
// architecture on it, and evaluates the grouped confusion matrix.
template <typename T>
MultiExperimentResult<T> multi_element_experiment(const DatasetManifest& manifest, const ModelSpec& spec,
                                                  const OptimizerConfig& opt) {
    if (manifest.scheme != LabelScheme::MultiGroup)
        throw ConfigError("multi_element_experiment: manifest must use the MultiGroup scheme");
    const Corpus corpus = build_corpus(manifest);
    const SplitIndices split = split_corpus(corpus, manifest.split_fraction, manifest.split_seed);
    MultiExperimentResult<T> result;
    result.params = train<T>(corpus, split.train, spec, opt, result.report);
    result.confusion = evaluate(result.params, corpus, split.test);
    result.report.final_test_accuracy = result.confusion.accuracy();
    result.report.per_class_accuracy = result.confusion.per_class_accuracy();
    return result;
}

// ---- inference timing ----

// Median wall-clock seconds per single-sample forward pass (eval mode),
// over at least `n_timed` passes after a short warm-up.
template <typename T>
double time_inference(const ModelParams<T>& params, const Corpus& corpus, const std::vector<std::uint32_t>& indices,
                      int n_timed = 100) {
    if (indices.empty()) throw DataError("time_inference: empty index set");
    n_timed = std::max(n_timed, 100);
    Matrix<T> X(1, corpus.feature_len);
    const auto load_row = [&](std::size_t which) {
        const float* src = corpus.features.row(indices[which % indices.size()]);
        for (std::size_t j = 0; j < X.cols; ++j) X.data[j] = static_cast<T>(src[j]);
    };
    for (int w = 0; w < 10; ++w) {
        load_row(static_cast<std::size_t>(w));
        (void)predict_logits(params, X);
    }
    std::vector<double> seconds(static_cast<std::size_t>(n_timed));
    for (int t = 0; t < n_timed; ++t) {
        load_row(static_cast<std::size_t>(t));
        const auto t0 = std::chrono::steady_clock::now();
        (void)predict_logits(params, X);
        const auto t1 = std::chrono::steady_clock::now();
        seconds[static_cast<std::size_t>(t)] = std::chrono::duration<double>(t1 - t0).count();
    }
    std::nth_element(seconds.begin(), seconds.begin() + seconds.size() / 2, seconds.end());
    return seconds[seconds.size() / 2];
}

}  // namespace apadiag

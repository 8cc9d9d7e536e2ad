// Acceptance gate: one [PASS]/[FAIL] line per criterion, each with its
// measured value and the pinned tolerance; exit code = number of failures.
//
// The heavy criteria share one trained model: criterion 5 trains it,
// criteria 6 and 11 reuse it. Everything runs single-threaded so the
// determinism criterion observes the same code path as the rest.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <apadiag/config_io.hpp>
#include <apadiag/dataset.hpp>
#include <apadiag/nn.hpp>
#include <apadiag/pipeline.hpp>
#include <apadiag/report_io.hpp>
#include <apadiag/waveform.hpp>

namespace fs = std::filesystem;
using namespace apadiag;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

double secs_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int id, const std::string& name, bool ok, const std::string& detail) {
    if (!ok) ++g_failures;
    std::printf("[%s] (%2d) %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
}

void run_criterion(int id, const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
    const auto t0 = Clock::now();
    bool ok = false;
    std::string detail;
    try {
        auto r = body();
        ok = r.first;
        detail = std::move(r.second);
    } catch (const std::exception& e) {
        ok = false;
        detail = std::string("exception: ") + e.what();
    }
    char timing[32];
    std::snprintf(timing, sizeof timing, " [%.1f s]", secs_since(t0));
    report(id, name, ok, detail + timing);
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return std::string(buf);
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// ---- criterion 1: finite-difference gradient check, full-size model ----
//
// Exhaustive per-entry differencing of a 5.5M-parameter model is days of
// compute; instead a seeded sample of entries from EVERY trainable tensor is
// verified (largest-|gradient| entry always included). Pinned: rel err < 1e-4
// with absolute floor 1e-8 (covers exactly-invariant directions, e.g. dense
// biases feeding batch norm), central differences in 64-bit, < 300 s.
std::pair<bool, std::string> criterion_gradient_check() {
    const auto t0 = Clock::now();
    ModelSpec spec;
    spec.layer_sizes = {10000, 500, 500, 500, 49};

    auto params = init_params<double>(spec, derive_seed(2024, "accept-init"));
    Rng rng(derive_seed(2024, "accept-batch"));
    Matrix<double> X(8, 10000);
    for (auto& v : X.data) v = rng.normal();
    std::vector<std::uint16_t> y(8);
    for (auto& label : y) label = static_cast<std::uint16_t>(rng.bounded(49));

    const auto rm0 = params.run_mean;
    const auto rv0 = params.run_var;
    const auto loss_at = [&]() {
        Matrix<double> logits = forward(params, X, Mode::Train);
        params.run_mean = rm0;
        params.run_var = rv0;
        return softmax_xent_batch(logits, y, static_cast<Matrix<double>*>(nullptr));
    };

    ForwardCache<double> cache;
    forward(params, X, Mode::Train, &cache);
    params.run_mean = rm0;
    params.run_var = rv0;
    auto grads = Gradients<double>::allocate(spec);
    backward(params, cache, y, grads);

    struct TensorView {
        std::string name;
        std::vector<double>* w;
        const std::vector<double>* g;
    };
    std::vector<TensorView> tensors;
    for (std::size_t i = 0; i < params.W.size(); ++i) {
        tensors.push_back({"W" + std::to_string(i), &params.W[i].data, &grads.dW[i].data});
        tensors.push_back({"b" + std::to_string(i), &params.B[i], &grads.dB[i]});
    }
    for (std::size_t h = 0; h < params.gamma.size(); ++h) {
        tensors.push_back({"gamma" + std::to_string(h), &params.gamma[h], &grads.dgamma[h]});
        tensors.push_back({"beta" + std::to_string(h), &params.beta[h], &grads.dbeta[h]});
    }

    const int kPerTensor = 8;
    double worst_rel = 0.0;
    std::string worst_at = "-";
    int checked = 0, tensors_ok = 0;
    for (std::size_t t = 0; t < tensors.size(); ++t) {
        auto& tv = tensors[t];
        const auto& g = *tv.g;
        std::size_t argmax = 0;
        double gmax = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i)
            if (std::abs(g[i]) > gmax) gmax = std::abs(g[i]), argmax = i;
        std::set<std::size_t> picks{argmax};
        Rng pick_rng(derive_seed(2024, "accept-fd-pick", t));
        // Prefer entries with non-negligible gradient so the central
        // difference is well-conditioned; tiny-gradient tensors (invariant
        // directions) are covered by the absolute floor.
        for (int tries = 0; tries < 512 && static_cast<int>(picks.size()) < kPerTensor; ++tries) {
            const auto i = static_cast<std::size_t>(pick_rng.bounded(static_cast<std::uint64_t>(g.size())));
            if (gmax == 0.0 || std::abs(g[i]) >= 1e-3 * gmax || tries >= 256) picks.insert(i);
        }
        bool tensor_ok = true;
        for (const std::size_t i : picks) {
            auto& w = *tv.w;
            const double orig = w[i];
            const double h = 1e-6 * std::max(1.0, std::abs(orig));
            w[i] = orig + h;
            const double lp = loss_at();
            w[i] = orig - h;
            const double lm = loss_at();
            w[i] = orig;
            const double fd = (lp - lm) / (2.0 * h);
            const double err = std::abs(fd - g[i]);
            const double scale = std::max(std::abs(fd), std::abs(g[i]));
            const bool entry_ok = err <= 1e-4 * scale || err <= 1e-8;
            if (!entry_ok) tensor_ok = false;
            if (scale > 0.0 && err > 1e-8 && err / scale > worst_rel) {
                worst_rel = err / scale;
                worst_at = tv.name + "[" + std::to_string(i) + "]";
            }
            ++checked;
        }
        tensors_ok += tensor_ok ? 1 : 0;
    }
    const double elapsed = secs_since(t0);
    const bool ok = tensors_ok == static_cast<int>(tensors.size()) && elapsed < 300.0;
    return {ok, fmt("%d/%zu tensors ok over %d sampled entries, worst rel err %.2e at %s (tol 1e-4, abs floor 1e-8, "
                    "cap 300 s)",
                    tensors_ok, tensors.size(), checked, worst_rel, worst_at.c_str())};
}

// ---- criterion 2: uniform-logit loss identity ----
std::pair<bool, std::string> criterion_loss_identity() {
    const double want = std::log(49.0);
    double worst = 0.0;
    for (const double level : {0.0, 0.37, -3.0}) {
        Matrix<double> logits(8, 49);
        for (auto& v : logits.data) v = level;
        std::vector<std::uint16_t> y(8);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<std::uint16_t>((i * 11) % 49);
        worst = std::max(worst, std::abs(softmax_xent_batch(logits, y, static_cast<Matrix<double>*>(nullptr)) - want));
        std::vector<double> row(49, level);
        worst = std::max(worst, std::abs(softmax_xent(row, 17) - want));
    }
    return {worst <= 1e-9, fmt("uniform 49-class loss vs ln 49 = %.10f, worst |delta| %.2e (tol 1e-9)", want, worst)};
}

// ---- criterion 3: simulator oracles ----
std::pair<bool, std::string> criterion_simulator_oracles() {
    // (a) single-element 5 deg phase fault against the closed-form ratio
    // |15 + e^{j5deg}|/16 with unit channels and a pass-through PA.
    ArrayConfig cfg;
    PAModel identity;
    identity.memory_depth = 0;
    identity.elements.resize(16);
    for (auto& e : identity.elements) {
        e.h1 = {{1.0, 0.0}};
        e.h3 = {{0.0, 0.0}};
        e.h5 = {{0.0, 0.0}};
    }
    std::vector<std::complex<double>> unit_coeffs(16, {1.0, 0.0});
    IqFrame tx;
    tx.sample_rate_hz = 1.0;
    Rng rng(derive_seed(2024, "accept-tone"));
    tx.samples.resize(256);
    for (auto& s : tx.samples) s = 0.3 * std::complex<double>(rng.normal(), rng.normal());

    const auto nominal = observe(cfg, identity, nominal_states(16), tx, unit_coeffs);
    const auto faulty =
        observe(cfg, identity, apply_fault(nominal_states(16), FaultScenario::phase_shift(0, 5.0)), tx, unit_coeffs);
    const double want_ratio = std::abs(15.0 + std::polar(1.0, 5.0 * kPi / 180.0)) / 16.0;
    double worst_ratio = 0.0;
    for (std::size_t i = 0; i < tx.samples.size(); ++i)
        worst_ratio =
            std::max(worst_ratio, std::abs(std::abs(faulty.samples[i]) / std::abs(nominal.samples[i]) - want_ratio));

    // (b) memory-polynomial PA against a direct triple-loop evaluation.
    const PAModel bank = PAModel::default_bank(16, 404, 2);
    const IqFrame out = pa_apply(bank, 7, tx);
    double worst_pa = 0.0;
    const auto& c = bank.elements[7];
    for (std::size_t n = 0; n < tx.samples.size(); ++n) {
        std::complex<double> acc{0.0, 0.0};
        for (int q = 0; q <= bank.memory_depth; ++q) {
            if (static_cast<std::size_t>(q) > n) continue;
            const std::complex<double> x = tx.samples[n - static_cast<std::size_t>(q)];
            const double a2 = std::norm(x);
            acc += c.h1[static_cast<std::size_t>(q)] * x + c.h3[static_cast<std::size_t>(q)] * a2 * x +
                   c.h5[static_cast<std::size_t>(q)] * a2 * a2 * x;
        }
        worst_pa = std::max(worst_pa, std::abs(out.samples[n] - acc));
    }
    const bool ok = worst_ratio < 1e-12 && worst_pa < 1e-12;
    return {ok, fmt("phase-ratio |delta| %.2e, PA-vs-triple-loop |delta| %.2e (tol 1e-12 each)", worst_ratio,
                    worst_pa)};
}

// ---- criterion 4: PAPR of the default waveform ----
std::pair<bool, std::string> criterion_papr() {
    OfdmConfig cfg;  // 120 symbols by default
    const IqFrame frame = generate_ofdm(cfg);
    const double papr = papr_db(frame);
    const bool ok = cfg.n_symbols >= 100 && std::abs(papr - 10.6) <= 1.5;
    return {ok, fmt("PAPR %.2f dB over %d symbols (target 10.6 +/- 1.5 dB, >= 100 symbols)", papr, cfg.n_symbols)};
}

// Shared state for criteria 5, 6, 11.
struct TrainedPipeline {
    DatasetManifest manifest;
    Corpus corpus;
    SplitIndices split;
    ModelParams<float> params;
    RunReport report;
    double train_seconds = 0.0;
    double heldout_accuracy = 0.0;
    bool ready = false;
};

DatasetManifest default_run_manifest() {
    DatasetManifest m;
    m.scheme = LabelScheme::Single49;
    m.segment_len = 2000;
    m.capture_len = 200000;
    m.n_captures_per_class = 10;
    m.base_snr_db = 30.0;
    return m;
}

OptimizerConfig tuned_optimizer() {
    OptimizerConfig opt;
    opt.learning_rate = 0.03;
    opt.batch_size = 100;
    opt.max_epochs = 150;
    opt.plateau_patience = 8;
    opt.plateau_factor = 0.5;
    opt.min_lr = 1e-5;
    opt.val_fraction = 0.1;
    opt.seed = 7;
    return opt;
}

// ---- criterion 5: end-to-end 49-class run ----
std::pair<bool, std::string> criterion_end_to_end(TrainedPipeline& tp) {
    tp.manifest = default_run_manifest();
    tp.manifest.validate();
    tp.corpus = build_corpus(tp.manifest);
    tp.split = split_corpus(tp.corpus, tp.manifest.split_fraction, tp.manifest.split_seed);

    ModelSpec spec;
    spec.layer_sizes = {tp.manifest.feature_len(), 128, 128, 128, 49};
    const OptimizerConfig opt = tuned_optimizer();

    const auto t0 = Clock::now();
    tp.params = train<float>(tp.corpus, tp.split.train, spec, opt, tp.report);
    tp.train_seconds = secs_since(t0);
    const ConfusionMatrix cm = evaluate(tp.params, tp.corpus, tp.split.test);
    tp.heldout_accuracy = cm.accuracy();
    tp.ready = true;

    double worst_class = 1.0;
    for (const double a : cm.per_class_accuracy()) worst_class = std::min(worst_class, a);
    const std::size_t per_class = tp.corpus.labels.size() / 49;
    const bool ok = tp.heldout_accuracy >= 0.95 && tp.train_seconds < 1800.0 && per_class >= 1000 &&
                    tp.manifest.segment_len >= 1000;
    return {ok, fmt("49 classes x %zu segments (len %lld), width 128: held-out acc %.4f (floor 0.95), worst class "
                    "%.4f, trained %d epochs in %.0f s (cap 1800 s)",
                    per_class, static_cast<long long>(tp.manifest.segment_len), tp.heldout_accuracy, worst_class,
                    tp.report.epochs_run, tp.train_seconds)};
}

// ---- criterion 6: SNR robustness of the criterion-5 model ----
std::pair<bool, std::string> criterion_snr_robustness(const TrainedPipeline& tp) {
    if (!tp.ready) return {false, "skipped: criterion 5 model unavailable"};
    const SweepReport sweep = snr_sweep(tp.params, tp.corpus, tp.split.test, default_snr_grid(),
                                        derive_seed(tp.manifest.capture_seed, "sweep-noise"));
    double min_high_ratio = 1.0;
    double min_low_modal = 1.0;
    for (const auto& p : sweep.points) {
        if (p.clean) continue;
        if (p.snr_db >= 4.0) min_high_ratio = std::min(min_high_ratio, p.accuracy / sweep.clean_accuracy);
        if (p.snr_db <= -2.0) min_low_modal = std::min(min_low_modal, p.modal_fraction);
    }
    const bool ok = min_high_ratio >= 0.90 && min_low_modal >= 0.90;
    return {ok, fmt("clean acc %.4f; min acc/clean over snr >= 4 dB: %.4f (floor 0.90); min modal fraction over "
                    "snr <= -2 dB: %.4f (floor 0.90)",
                    sweep.clean_accuracy, min_high_ratio, min_low_modal)};
}

// ---- criterion 7: grouped multi-element experiment ----
std::pair<bool, std::string> criterion_multigroup() {
    DatasetManifest m;
    m.scheme = LabelScheme::MultiGroup;
    m.segment_len = 1000;
    m.capture_len = 100000;
    m.n_captures_per_class = 8;
    m.base_snr_db = 30.0;
    m.validate();
    ModelSpec spec;
    spec.layer_sizes = {m.feature_len(), 128, 128, 128, m.n_classes()};
    OptimizerConfig opt = tuned_optimizer();
    opt.max_epochs = 40;
    opt.plateau_patience = 5;

    const auto result = multi_element_experiment<float>(m, spec, opt);
    const double acc = result.confusion.accuracy();
    return {acc >= 0.80, fmt("%d grouped classes: test acc %.4f over %llu rows (floor 0.80), %d epochs",
                             m.n_classes(), acc, static_cast<unsigned long long>(result.confusion.total()),
                             result.report.epochs_run)};
}

// ---- criterion 8: 10-run re-split statistics ----
std::pair<bool, std::string> criterion_stat_runs(const TrainedPipeline& tp) {
    // Smaller corpora leave the weakest class below the 0.80 floor (the
    // 0.5 dB attenuation classes need the full segment budget), so the stat
    // runs use the same corpus scale as criterion 5 — and reuse its corpus
    // outright when available, since the manifests are identical.
    DatasetManifest m = default_run_manifest();
    m.validate();
    ModelSpec spec;
    spec.layer_sizes = {m.feature_len(), 128, 128, 128, 49};
    const OptimizerConfig opt = tuned_optimizer();

    Corpus local;
    if (!tp.ready) local = build_corpus(m);
    const Corpus& corpus = tp.ready ? tp.corpus : local;
    const std::vector<double> grid = {-5.0, 9.0};
    const StatReport stats = stat_runs<float>(corpus, m, spec, opt, grid, 10);

    bool ordered = true;
    const auto check_order = [&](const FiveNumber& f) {
        if (!(f.min <= f.q1 && f.q1 <= f.median && f.median <= f.q3 && f.q3 <= f.max)) ordered = false;
    };
    double clean_class_min = 1.0, clean_class_max = 0.0;
    for (std::size_t s = 0; s < stats.snr_grid_db.size(); ++s) {
        check_order(stats.overall[s]);
        for (const auto& f : stats.per_class[s]) {
            check_order(f);
            if (std::isinf(stats.snr_grid_db[s])) {
                clean_class_min = std::min(clean_class_min, f.min);
                clean_class_max = std::max(clean_class_max, f.max);
            }
        }
    }
    const bool in_band = clean_class_min >= 0.80 && clean_class_max <= 1.0;
    return {ordered && in_band && stats.n_runs == 10,
            fmt("10 runs; high-SNR (clean, 30 dB capture floor) per-class accuracies in [%.4f, %.4f] (band "
                "[0.80, 1.00]); five-number ordering %s",
                clean_class_min, clean_class_max, ordered ? "holds" : "VIOLATED")};
}

// ---- criterion 9: byte-identical artifacts across reruns ----
std::pair<bool, std::string> criterion_determinism() {
    const fs::path root = fs::temp_directory_path() / "apa-acceptance-det";
    fs::remove_all(root);

    DatasetManifest m;
    m.scheme = LabelScheme::Single49;
    m.segment_len = 64;
    m.capture_len = 512;
    m.n_captures_per_class = 2;
    m.loop_segments = 2;
    m.base_snr_db = 20.0;
    m.validate();
    ModelSpec spec;
    spec.layer_sizes = {m.feature_len(), 16, 49};
    OptimizerConfig opt;
    opt.learning_rate = 0.05;
    opt.max_epochs = 3;
    opt.batch_size = 32;
    opt.plateau_patience = 2;
    opt.min_lr = 1e-3;

    for (const char* run : {"a", "b"}) {
        const fs::path dir = root / run;
        fs::create_directories(dir);
        const Corpus corpus = build_corpus(m);
        save_corpus((dir / "dataset.apad").string(), corpus);
        const SplitIndices split = split_corpus(corpus, m.split_fraction, m.split_seed);
        RunReport rep;
        const ModelParams<float> params = train<float>(corpus, split.train, spec, opt, rep);
        save_model((dir / "model.apam").string(), params);
        const ConfusionMatrix cm = evaluate(params, corpus, split.test);
        AppConfig app;
        app.manifest = m;
        app.model = spec;
        app.optimizer = opt;
        save_json(run_report_json(rep, cm, app), (dir / "report.json").string());
        write_confusion_csv(cm, corpus.display_labels, (dir / "confusion.csv").string());
        const SweepReport sweep =
            snr_sweep(params, corpus, split.test, {0.0, 5.0}, derive_seed(m.capture_seed, "sweep-noise"));
        write_sweep_csv(sweep, (dir / "sweep.csv").string());
    }
    std::string mismatched;
    for (const char* name : {"dataset.apad", "model.apam", "report.json", "confusion.csv", "sweep.csv"}) {
        if (slurp(root / "a" / name) != slurp(root / "b" / name)) mismatched += std::string(" ") + name;
    }
    fs::remove_all(root);
    if (mismatched.empty())
        return {true, "dataset, checkpoint, report, confusion, sweep byte-identical across two single-thread runs"};
    return {false, "byte mismatch in:" + mismatched};
}

// ---- criterion 10: analytic parameter count ----
std::pair<bool, std::string> criterion_param_count() {
    ModelSpec spec;
    spec.layer_sizes = {10000, 500, 500, 500, 49};
    const std::uint64_t count = spec.param_count();
    const std::uint64_t want = 5529049ull;
    const long long published = 5549147ll;
    return {count == want,
            fmt("analytic count %llu (expected %llu); published reference lists %lld, delta %+lld — analysis in "
                "README",
                static_cast<unsigned long long>(count), static_cast<unsigned long long>(want), published,
                published - static_cast<long long>(count))};
}

// ---- criterion 11: inference latency ----
std::pair<bool, std::string> criterion_latency(const TrainedPipeline& tp) {
    if (!tp.ready) return {false, "skipped: criterion 5 model unavailable"};
    const double sps = time_inference(tp.params, tp.corpus, tp.split.test);
    const bool ok = sps > 0.0 && sps < 1.0 && std::isfinite(sps);
    return {ok, fmt("median inference %.6f s/sample (%.1f samples/s) at feature length %u — informational, asserted "
                    "only measurable and < 1 s",
                    sps, 1.0 / sps, tp.corpus.feature_len)};
}

}  // namespace

int main() {
    set_max_threads(1);
    std::printf("acceptance: single-thread run, %d criteria\n", 11);

    TrainedPipeline tp;
    run_criterion(1, "gradient-check", criterion_gradient_check);
    run_criterion(2, "loss-identity", criterion_loss_identity);
    run_criterion(3, "simulator-oracles", criterion_simulator_oracles);
    run_criterion(4, "papr-target", criterion_papr);
    run_criterion(5, "end-to-end-49-class", [&] { return criterion_end_to_end(tp); });
    run_criterion(6, "snr-robustness", [&] { return criterion_snr_robustness(tp); });
    run_criterion(7, "multigroup-experiment", criterion_multigroup);
    run_criterion(8, "stat-runs", [&] { return criterion_stat_runs(tp); });
    run_criterion(9, "determinism", criterion_determinism);
    run_criterion(10, "parameter-count", criterion_param_count);
    run_criterion(11, "inference-latency", [&] { return criterion_latency(tp); });

    std::printf("acceptance: %d/11 passed, %d failed\n", 11 - g_failures, g_failures);
    return g_failures == 0 ? 0 : 1;
}

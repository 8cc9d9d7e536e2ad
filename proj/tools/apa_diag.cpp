// apa-diag: single-binary front end for the phased-array fault-diagnosis
// pipeline. Subcommands: gen, train, eval, sweep, stats, multi, report.
//
// Configuration layering: built-in defaults < --config JSON < flags; the
// fully resolved configuration (plus seeds and artifact hashes) is echoed to
// manifest-<subcommand>.json in the output directory on every run, so any
// artifact is reconstructible from its echo alone.
//
// Exit codes: 0 success, 2 usage, 3 configuration, 4 data/IO, 5 shape,
// 6 state, 7 training, 8 internal.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include <apadiag/config_io.hpp>
#include <apadiag/dataset.hpp>
#include <apadiag/nn.hpp>
#include <apadiag/pipeline.hpp>
#include <apadiag/report_io.hpp>

namespace fs = std::filesystem;
using namespace apadiag;

namespace {

struct CliOptions {
    std::string command;
    std::string config_path;
    std::string out_dir = "out";
    std::string data_path;   // default: <out>/dataset.apad
    std::string model_path;  // default: <out>/model.apam
    bool force = false;
    bool verbose = false;
    int threads = 0;  // resolved later: flag > env > hardware
    bool seed_given = false;
    std::uint64_t seed = 0;
    std::string snr = "-5:9";
    int runs = 10;
    std::string scheme;      // optional override
    std::string activation;  // optional override
};

void note(const CliOptions& o, const std::string& msg) {
    if (o.verbose) std::cerr << "apa-diag: " << msg << "\n";
}

int resolve_threads(const CliOptions& o) {
    if (o.threads > 0) return o.threads;
    if (const char* env = std::getenv("APA_DIAG_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1)
            throw ConfigError("APA_DIAG_THREADS must be a positive integer, got '" + std::string(env) + "'");
        return static_cast<int>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

AppConfig resolve_config(const CliOptions& o) {
    AppConfig cfg;
    if (!o.config_path.empty()) cfg = load_app_config(o.config_path);
    if (!o.scheme.empty()) cfg.manifest.scheme = scheme_from_string(o.scheme);
    if (!o.activation.empty()) cfg.model.activation = activation_from_string(o.activation);
    if (o.seed_given) {
        // One seed re-keys the run randomness (capture noise/offsets, split,
        // optimizer init/shuffle). Device identity — hardware signature, PA
        // coefficients, excitation content — stays put.
        cfg.manifest.capture_seed = derive_seed(o.seed, "capture");
        cfg.manifest.split_seed = derive_seed(o.seed, "split");
        cfg.optimizer.seed = derive_seed(o.seed, "optimizer");
    }
    return cfg;
}

std::vector<double> parse_snr_grid(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos)
        throw ConfigError("--snr expects 'a:b' with integers a < b, got '" + s + "'");
    int a = 0, b = 0;
    try {
        std::size_t used = 0;
        a = std::stoi(s.substr(0, colon), &used);
        if (used != colon) throw std::invalid_argument("");
        const std::string tail = s.substr(colon + 1);
        b = std::stoi(tail, &used);
        if (used != tail.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
        throw ConfigError("--snr expects 'a:b' with integers a < b, got '" + s + "'");
    }
    if (a >= b) throw ConfigError("--snr expects 'a:b' with a < b, got '" + s + "'");
    std::vector<double> grid;
    for (int v = a; v <= b; ++v) grid.push_back(static_cast<double>(v));
    return grid;
}

std::string out_file(const CliOptions& o, const std::string& name) {
    return (fs::path(o.out_dir) / name).string();
}

void ensure_writable(const CliOptions& o, const std::string& path) {
    if (!o.force && fs::exists(path))
        throw ConfigError("output '" + path + "' exists; pass --force to overwrite");
}

std::string dataset_path(const CliOptions& o) {
    return o.data_path.empty() ? out_file(o, "dataset.apad") : o.data_path;
}

std::string model_path(const CliOptions& o) {
    return o.model_path.empty() ? out_file(o, "model.apam") : o.model_path;
}

Corpus load_dataset_checked(const CliOptions& o) {
    const std::string path = dataset_path(o);
    if (!fs::exists(path))
        throw DataError("dataset not found: '" + path + "'; run the gen subcommand first or pass --data");
    note(o, "loading dataset " + path);
    return load_corpus(path);
}

// First/last layer sizes follow the dataset; configured hidden sizes stay.
ModelSpec adapt_spec(ModelSpec spec, std::uint32_t feature_len, std::uint32_t n_classes) {
    spec.layer_sizes.front() = static_cast<int>(feature_len);
    spec.layer_sizes.back() = static_cast<int>(n_classes);
    return spec;
}

Json echo_base(const CliOptions& o, const AppConfig& cfg, int threads) {
    Json j;
    j["command"] = o.command;
    j["threads"] = threads;
    j["force"] = o.force;
    if (o.seed_given)
        j["seed_override"] = o.seed;
    else
        j["seed_override"] = nullptr;
    j["config"] = to_json(cfg);
    return j;
}

void write_echo(const CliOptions& o, Json echo, const std::vector<std::string>& artifacts) {
    Json arts;
    for (const auto& name : artifacts) {
        const std::string path = out_file(o, name);
        arts[name] = Json{{"bytes", static_cast<std::uint64_t>(fs::file_size(path))},
                          {"fnv1a64", file_hash_hex(path)}};
    }
    echo["artifacts"] = std::move(arts);
    save_json(echo, out_file(o, "manifest-" + o.command + ".json"));
}

// ---- subcommands ----

int cmd_gen(const CliOptions& o, const AppConfig& cfg, int threads) {
    cfg.manifest.validate();
    const std::string path = out_file(o, "dataset.apad");
    ensure_writable(o, path);
    note(o, "building corpus");
    const Corpus corpus = build_corpus(cfg.manifest);
    note(o, "writing " + path);
    save_corpus(path, corpus);
    write_echo(o, echo_base(o, cfg, threads), {"dataset.apad"});
    std::cout << "gen: wrote " << path << " (" << corpus.labels.size() << " samples, " << corpus.n_classes
              << " classes)\n";
    return 0;
}

int cmd_train(const CliOptions& o, const AppConfig& cfg, int threads) {
    const Corpus corpus = load_dataset_checked(o);
    const auto split = split_corpus(corpus, cfg.manifest.split_fraction, cfg.manifest.split_seed);
    AppConfig resolved = cfg;
    resolved.model = adapt_spec(cfg.model, corpus.feature_len, corpus.n_classes);
    const std::string mpath = out_file(o, "model.apam");
    for (const char* name : {"model.apam", "report.json", "confusion.csv", "timing.json"})
        ensure_writable(o, out_file(o, name));

    note(o, "training");
    RunReport report;
    const ModelParams<float> params = train<float>(corpus, split.train, resolved.model, resolved.optimizer, report);
    const ConfusionMatrix cm = evaluate(params, corpus, split.test);
    report.final_test_accuracy = cm.accuracy();
    report.per_class_accuracy = cm.per_class_accuracy();
    const double sps = time_inference(params, corpus, split.test);

    note(o, "writing artifacts");
    save_model(mpath, params);
    save_json(run_report_json(report, cm, resolved), out_file(o, "report.json"));
    write_confusion_csv(cm, corpus.display_labels, out_file(o, "confusion.csv"));
    save_json(timing_json(sps, report.param_count), out_file(o, "timing.json"));
    write_echo(o, echo_base(o, resolved, threads), {"model.apam", "report.json", "confusion.csv", "timing.json"});
    std::cout << "train: test accuracy " << cm.accuracy() << " after " << report.epochs_run << " epochs ("
              << report.param_count << " parameters)\n";
    return 0;
}

int cmd_eval(const CliOptions& o, const AppConfig& cfg, int threads) {
    const Corpus corpus = load_dataset_checked(o);
    const std::string mp = model_path(o);
    if (!fs::exists(mp)) throw DataError("model not found: '" + mp + "'; run the train subcommand first");
    const ModelParams<float> params = load_model(mp);
    const auto split = split_corpus(corpus, cfg.manifest.split_fraction, cfg.manifest.split_seed);
    for (const char* name : {"eval-report.json", "eval-confusion.csv"}) ensure_writable(o, out_file(o, name));

    const ConfusionMatrix cm = evaluate(params, corpus, split.test);
    AppConfig resolved = cfg;
    resolved.model = params.spec;
    Json j;
    j["test_accuracy"] = cm.accuracy();
    j["per_class_accuracy"] = cm.per_class_accuracy();
    j["n_test_samples"] = cm.total();
    j["config"] = to_json(resolved);
    save_json(j, out_file(o, "eval-report.json"));
    write_confusion_csv(cm, corpus.display_labels, out_file(o, "eval-confusion.csv"));
    write_echo(o, echo_base(o, resolved, threads), {"eval-report.json", "eval-confusion.csv"});
    std::cout << "eval: test accuracy " << cm.accuracy() << " over " << cm.total() << " samples\n";
    return 0;
}

int cmd_sweep(const CliOptions& o, const AppConfig& cfg, int threads) {
    const Corpus corpus = load_dataset_checked(o);
    const std::string mp = model_path(o);
    if (!fs::exists(mp)) throw DataError("model not found: '" + mp + "'; run the train subcommand first");
    const ModelParams<float> params = load_model(mp);
    const auto split = split_corpus(corpus, cfg.manifest.split_fraction, cfg.manifest.split_seed);
    const std::vector<double> grid = parse_snr_grid(o.snr);
    for (const char* name : {"sweep.csv", "sweep.json"}) ensure_writable(o, out_file(o, name));

    note(o, "sweeping " + std::to_string(grid.size()) + " SNR points plus clean");
    const SweepReport sweep =
        snr_sweep(params, corpus, split.test, grid, derive_seed(cfg.manifest.capture_seed, "sweep-noise"));
    AppConfig resolved = cfg;
    resolved.model = params.spec;
    write_sweep_csv(sweep, out_file(o, "sweep.csv"));
    Json j = sweep_report_json(sweep);
    j["config"] = to_json(resolved);
    save_json(j, out_file(o, "sweep.json"));
    Json echo = echo_base(o, resolved, threads);
    echo["snr_grid_db"] = grid;
    write_echo(o, std::move(echo), {"sweep.csv", "sweep.json"});
    std::cout << "sweep: clean accuracy " << sweep.clean_accuracy << ", " << grid.size() << " noisy points\n";
    return 0;
}

int cmd_stats(const CliOptions& o, const AppConfig& cfg, int threads) {
    const Corpus corpus = load_dataset_checked(o);
    AppConfig resolved = cfg;
    resolved.model = adapt_spec(cfg.model, corpus.feature_len, corpus.n_classes);
    const std::vector<double> grid = parse_snr_grid(o.snr);
    for (const char* name : {"stats.json", "stats.csv"}) ensure_writable(o, out_file(o, name));

    note(o, "running " + std::to_string(o.runs) + " re-split runs");
    const StatReport stats =
        stat_runs<float>(corpus, cfg.manifest, resolved.model, resolved.optimizer, grid, o.runs);
    Json j = stat_report_json(stats, corpus.display_labels);
    j["config"] = to_json(resolved);
    save_json(j, out_file(o, "stats.json"));
    write_stats_csv(stats, corpus.display_labels, out_file(o, "stats.csv"));
    Json echo = echo_base(o, resolved, threads);
    echo["snr_grid_db"] = grid;
    echo["n_runs"] = o.runs;
    write_echo(o, std::move(echo), {"stats.json", "stats.csv"});
    std::cout << "stats: " << o.runs << " runs over " << grid.size() << " SNR points plus clean\n";
    return 0;
}

int cmd_multi(const CliOptions& o, const AppConfig& cfg, int threads) {
    AppConfig resolved = cfg;
    resolved.manifest.scheme = LabelScheme::MultiGroup;
    resolved.manifest.validate();
    resolved.model = adapt_spec(cfg.model, static_cast<std::uint32_t>(resolved.manifest.feature_len()),
                                static_cast<std::uint32_t>(resolved.manifest.n_classes()));
    for (const char* name : {"multi-model.apam", "multi-report.json", "multi-confusion.csv"})
        ensure_writable(o, out_file(o, name));

    note(o, "building + training the grouped-fault experiment");
    const auto result = multi_element_experiment<float>(resolved.manifest, resolved.model, resolved.optimizer);
    save_model(out_file(o, "multi-model.apam"), result.params);
    save_json(run_report_json(result.report, result.confusion, resolved), out_file(o, "multi-report.json"));
    std::vector<std::uint16_t> labels;
    for (int c = 0; c < resolved.manifest.n_classes(); ++c)
        labels.push_back(static_cast<std::uint16_t>(c + 1));
    write_confusion_csv(result.confusion, labels, out_file(o, "multi-confusion.csv"));
    write_echo(o, echo_base(o, resolved, threads), {"multi-model.apam", "multi-report.json", "multi-confusion.csv"});
    std::cout << "multi: test accuracy " << result.confusion.accuracy() << "\n";
    return 0;
}

int cmd_report(const CliOptions& o, const AppConfig&, int) {
    // Validates every manifest echo in the output directory against its
    // artifacts and prints a one-line summary per artifact.
    static const char* kCommands[] = {"gen", "train", "eval", "sweep", "stats", "multi"};
    bool found_any = false;
    std::vector<std::string> problems;
    for (const char* cmd : kCommands) {
        const std::string echo_path = out_file(o, std::string("manifest-") + cmd + ".json");
        if (!fs::exists(echo_path)) continue;
        found_any = true;
        std::ifstream in(echo_path);
        Json echo;
        try {
            echo = Json::parse(in);
        } catch (const nlohmann::json::exception&) {
            problems.push_back(echo_path + ": invalid JSON");
            continue;
        }
        if (!echo.contains("artifacts") || !echo["artifacts"].is_object()) {
            problems.push_back(echo_path + ": no artifact list");
            continue;
        }
        for (const auto& item : echo["artifacts"].items()) {
            const std::string apath = out_file(o, item.key());
            if (!fs::exists(apath)) {
                problems.push_back(apath + ": missing");
                std::cout << cmd << " " << item.key() << " MISSING\n";
                continue;
            }
            const std::string want = item.value().value("fnv1a64", std::string());
            const std::string got = file_hash_hex(apath);
            if (want != got) {
                problems.push_back(apath + ": hash mismatch (manifest " + want + ", file " + got + ")");
                std::cout << cmd << " " << item.key() << " HASH-MISMATCH\n";
            } else {
                std::cout << cmd << " " << item.key() << " ok " << got << " ("
                          << item.value().value("bytes", std::uint64_t{0}) << " bytes)\n";
            }
        }
    }
    if (!found_any) throw DataError("no manifest echoes found in '" + o.out_dir + "'");
    if (!problems.empty()) throw DataError("artifact validation failed: " + problems.front());
    return 0;
}

int dispatch(const CliOptions& o) {
    const int threads = resolve_threads(o);
    set_max_threads(threads);
    fs::create_directories(o.out_dir);
    const AppConfig cfg = resolve_config(o);
    if (o.command == "gen") return cmd_gen(o, cfg, threads);
    if (o.command == "train") return cmd_train(o, cfg, threads);
    if (o.command == "eval") return cmd_eval(o, cfg, threads);
    if (o.command == "sweep") return cmd_sweep(o, cfg, threads);
    if (o.command == "stats") return cmd_stats(o, cfg, threads);
    if (o.command == "multi") return cmd_multi(o, cfg, threads);
    if (o.command == "report") return cmd_report(o, cfg, threads);
    throw ConfigError("unknown subcommand '" + o.command + "'");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Active-phased-array fault diagnosis pipeline"};
    app.require_subcommand(1);
    app.fallthrough();

    CliOptions o;
    app.add_option("--config", o.config_path, "JSON configuration file (defaults apply when omitted)");
    app.add_option("--out", o.out_dir, "Output directory (created if absent)")->capture_default_str();
    app.add_option("--data", o.data_path, "Dataset file (default: <out>/dataset.apad)");
    app.add_option("--model", o.model_path, "Model checkpoint (default: <out>/model.apam)");
    app.add_flag("--force", o.force, "Overwrite existing output files");
    app.add_flag("-v,--verbose", o.verbose, "Progress notes on stderr");
    app.add_option("--threads", o.threads, "Worker threads (default: APA_DIAG_THREADS or machine parallelism)");
    auto* seed_opt = app.add_option("--seed", o.seed, "Override run randomness (capture/split/optimizer seeds)");
    app.add_option("--snr", o.snr, "SNR grid 'a:b' in whole dB (sweep, stats)")->capture_default_str();
    app.add_option("--runs", o.runs, "Re-split run count (stats)")->capture_default_str();
    app.add_option("--scheme", o.scheme, "Label scheme override: single49|multigroup");
    app.add_option("--activation", o.activation, "Activation override: relu|leakyrelu");

    app.add_subcommand("gen", "Generate a dataset from the manifest");
    app.add_subcommand("train", "Train a model on a generated dataset");
    app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
    app.add_subcommand("sweep", "SNR robustness sweep of a checkpoint");
    app.add_subcommand("stats", "Multi-run re-split statistics");
    app.add_subcommand("multi", "Grouped multi-element fault experiment");
    app.add_subcommand("report", "Validate artifacts against manifest echoes");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error [usage] " << e.what() << "\n";
        return 2;
    }
    o.command = app.get_subcommands().front()->get_name();
    o.seed_given = seed_opt->count() > 0;

    try {
        return dispatch(o);
    } catch (const ConfigError& e) {
        std::cerr << "error [config] " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "error [data] " << e.what() << "\n";
        return 4;
    } catch (const ShapeError& e) {
        std::cerr << "error [shape] " << e.what() << "\n";
        return 5;
    } catch (const StateError& e) {
        std::cerr << "error [state] " << e.what() << "\n";
        return 6;
    } catch (const TrainError& e) {
        std::cerr << "error [train] " << e.what() << "\n";
        return 7;
    } catch (const std::exception& e) {
        std::cerr << "error [internal] " << e.what() << "\n";
        return 8;
    }
}

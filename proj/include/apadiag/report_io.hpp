#pragma once

// Deterministic on-disk report formats.
//
// Every artifact here is a pure function of its inputs: fixed column orders,
// fixed float formatting, no timestamps. Wall-clock measurements are the one
// inherently nondeterministic quantity, so they are quarantined in a separate
// timing.json artifact and never appear in report/sweep/stats files — those
// must be byte-identical across reruns with equal seeds in single-thread mode.

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <apadiag/config_io.hpp>
#include <apadiag/pipeline.hpp>

namespace apadiag {

namespace detail {

// Shortest-round-trip formatting via printf %.17g would print noise digits;
// reports use %.9g (float inputs carry < 8 significant digits of signal) and
// parse back losslessly for plotting purposes.
inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::string(buf);
}

inline void write_text(const std::string& path, const std::string& body) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << body;
    if (!out) throw DataError("short write to '" + path + "'");
}

}  // namespace detail

// ---- confusion matrix ----

// CSV with true classes as rows, predicted classes as columns, display labels
// in the header row/column.
inline void write_confusion_csv(const ConfusionMatrix& cm, const std::vector<std::uint16_t>& display_labels,
                                const std::string& path) {
    if (static_cast<int>(display_labels.size()) != cm.n_classes)
        throw ShapeError("write_confusion_csv: label count does not match confusion size");
    std::string body = "true_label";
    for (int c = 0; c < cm.n_classes; ++c) body += ",pred_" + std::to_string(display_labels[static_cast<std::size_t>(c)]);
    body += "\n";
    for (int r = 0; r < cm.n_classes; ++r) {
        body += std::to_string(display_labels[static_cast<std::size_t>(r)]);
        for (int c = 0; c < cm.n_classes; ++c) body += "," + std::to_string(cm.at(r, c));
        body += "\n";
    }
    detail::write_text(path, body);
}

// ---- training run report ----

// report.json: curves, final metrics, seeds, and the fully resolved config.
// Deliberately excludes wall-clock fields (see timing.json).
inline Json run_report_json(const RunReport& r, const ConfusionMatrix& cm, const AppConfig& config) {
    Json j;
    j["final_test_accuracy"] = cm.total() > 0 ? cm.accuracy() : r.final_test_accuracy;
    j["per_class_accuracy"] = cm.total() > 0 ? cm.per_class_accuracy() : r.per_class_accuracy;
    j["epochs_run"] = r.epochs_run;
    j["stopped_at_min_lr"] = r.stopped_at_min_lr;
    j["epoch_loss"] = r.epoch_loss;
    j["epoch_val_accuracy"] = r.epoch_val_acc;
    j["epoch_learning_rate"] = r.epoch_lr;
    j["param_count"] = r.param_count;
    j["seeds"] = Json{{"model_init", r.model_seed}, {"shuffle", r.shuffle_seed}};
    j["config"] = to_json(config);
    return j;
}

// ---- SNR sweep ----

// sweep.csv: one row per point, clean baseline first (empty snr_db column,
// is_clean = 1), then ascending SNR. With the default −5..9 dB grid this is
// 16 data rows.
inline void write_sweep_csv(const SweepReport& r, const std::string& path) {
    std::string body = "snr_db,is_clean,accuracy,modal_fraction,modal_class\n";
    for (const auto& p : r.points) {
        body += p.clean ? std::string() : detail::fmt_double(p.snr_db);
        body += p.clean ? ",1," : ",0,";
        body += detail::fmt_double(p.accuracy) + "," + detail::fmt_double(p.modal_fraction) + "," +
                std::to_string(p.modal_class) + "\n";
    }
    detail::write_text(path, body);
}

inline Json sweep_report_json(const SweepReport& r) {
    Json j;
    j["clean_accuracy"] = r.clean_accuracy;
    Json pts = Json::array();
    for (const auto& p : r.points) {
        Json q;
        q["is_clean"] = p.clean;
        if (!p.clean) q["snr_db"] = p.snr_db;
        q["accuracy"] = p.accuracy;
        q["modal_fraction"] = p.modal_fraction;
        q["modal_class"] = p.modal_class;
        q["per_class_accuracy"] = p.per_class_accuracy;
        pts.push_back(std::move(q));
    }
    j["points"] = std::move(pts);
    return j;
}

// ---- statistical runs ----

namespace detail {
inline Json five_number_json(const FiveNumber& f) {
    return Json{{"min", f.min}, {"q1", f.q1}, {"median", f.median}, {"q3", f.q3}, {"max", f.max}};
}
}  // namespace detail

inline Json stat_report_json(const StatReport& r, const std::vector<std::uint16_t>& display_labels) {
    Json j;
    j["n_runs"] = r.n_runs;
    Json points = Json::array();
    for (std::size_t s = 0; s < r.snr_grid_db.size(); ++s) {
        Json q;
        const bool clean = std::isinf(r.snr_grid_db[s]);
        q["is_clean"] = clean;
        if (!clean) q["snr_db"] = r.snr_grid_db[s];
        q["overall"] = detail::five_number_json(r.overall[s]);
        Json pc = Json::array();
        for (std::size_t c = 0; c < r.per_class[s].size(); ++c) {
            Json e = detail::five_number_json(r.per_class[s][c]);
            e["label"] = display_labels.at(c);
            pc.push_back(std::move(e));
        }
        q["per_class"] = std::move(pc);
        points.push_back(std::move(q));
    }
    j["points"] = std::move(points);
    return j;
}

// stats.csv: per (SNR point, class) five-number summary; the overall row uses
// class_label "overall".
inline void write_stats_csv(const StatReport& r, const std::vector<std::uint16_t>& display_labels,
                            const std::string& path) {
    std::string body = "snr_db,is_clean,class_label,min,q1,median,q3,max\n";
    auto row = [&](std::size_t s, const std::string& label, const FiveNumber& f) {
        const bool clean = std::isinf(r.snr_grid_db[s]);
        body += clean ? std::string() : detail::fmt_double(r.snr_grid_db[s]);
        body += clean ? ",1," : ",0,";
        body += label + "," + detail::fmt_double(f.min) + "," + detail::fmt_double(f.q1) + "," +
                detail::fmt_double(f.median) + "," + detail::fmt_double(f.q3) + "," + detail::fmt_double(f.max) +
                "\n";
    };
    for (std::size_t s = 0; s < r.snr_grid_db.size(); ++s) {
        row(s, "overall", r.overall[s]);
        for (std::size_t c = 0; c < r.per_class[s].size(); ++c)
            row(s, std::to_string(display_labels.at(c)), r.per_class[s][c]);
    }
    detail::write_text(path, body);
}

// ---- timing (the only artifact allowed to contain wall-clock numbers) ----

inline Json timing_json(double seconds_per_sample, std::uint64_t param_count) {
    Json j;
    j["seconds_per_sample"] = seconds_per_sample;
    j["param_count"] = param_count;
    return j;
}

}  // namespace apadiag

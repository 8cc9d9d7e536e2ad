#pragma once

// JSON configuration and manifest-echo serialization.
//
// Layering contract: a config file overrides defaults field-by-field; absent
// keys keep their defaults, unknown keys are rejected with the offending
// section and key named (typo protection — a silently ignored key would make
// a run unreproducible from its config). The manifest echo written next to
// every artifact is the fully resolved configuration plus artifact hashes,
// so any output file is reconstructible from its echo alone.

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include <apadiag/common.hpp>
#include <apadiag/dataset.hpp>
#include <apadiag/nn.hpp>

namespace apadiag {

using Json = nlohmann::ordered_json;

// Everything a pipeline run consumes, in one bundle.
struct AppConfig {
    DatasetManifest manifest;
    ModelSpec model;
    OptimizerConfig optimizer;
};

namespace detail {

inline void reject_unknown_keys(const Json& j, const std::string& section,
                                std::initializer_list<const char*> allowed) {
    if (!j.is_object())
        throw ConfigError("config: section '" + section + "' must be a JSON object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* k : allowed)
            if (item.key() == k) {
                known = true;
                break;
            }
        if (!known)
            throw ConfigError("config: unknown key '" + item.key() + "' in section '" + section + "'");
    }
}

template <typename T>
void read_field(const Json& j, const std::string& section, const char* key, T& out) {
    const auto it = j.find(key);
    if (it == j.end()) return;
    try {
        it->get_to(out);
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config: key '" + section + "." + key + "' has the wrong type");
    }
}

inline std::string enum_string(const Json& j, const std::string& section, const char* key,
                               const std::string& current) {
    std::string s = current;
    read_field(j, section, key, s);
    return s;
}

}  // namespace detail

// ---- enum encodings ----

inline std::string to_string(Modulation m) {
    switch (m) {
        case Modulation::QPSK: return "qpsk";
        case Modulation::QAM16: return "qam16";
        case Modulation::QAM64: return "qam64";
    }
    throw ConfigError("unknown modulation value");
}

inline Modulation modulation_from_string(const std::string& s) {
    if (s == "qpsk") return Modulation::QPSK;
    if (s == "qam16") return Modulation::QAM16;
    if (s == "qam64") return Modulation::QAM64;
    throw ConfigError("config: unknown modulation '" + s + "' (expected qpsk|qam16|qam64)");
}

inline std::string to_string(LabelScheme s) {
    return s == LabelScheme::Single49 ? "single49" : "multigroup";
}

inline LabelScheme scheme_from_string(const std::string& s) {
    if (s == "single49") return LabelScheme::Single49;
    if (s == "multigroup") return LabelScheme::MultiGroup;
    throw ConfigError("config: unknown scheme '" + s + "' (expected single49|multigroup)");
}

inline std::string to_string(Activation a) {
    return a == Activation::ReLU ? "relu" : "leakyrelu";
}

inline Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::ReLU;
    if (s == "leakyrelu") return Activation::LeakyReLU;
    throw ConfigError("config: unknown activation '" + s + "' (expected relu|leakyrelu)");
}

// ---- section serializers ----

inline Json to_json(const OfdmConfig& c) {
    Json j;
    j["n_subcarriers"] = c.n_subcarriers;
    j["n_active"] = c.n_active;
    j["cp_len"] = c.cp_len;
    j["n_symbols"] = c.n_symbols;
    j["modulation"] = to_string(c.modulation);
    j["sample_rate_hz"] = c.sample_rate_hz;
    j["seed"] = c.seed;
    return j;
}

inline void merge_from_json(const Json& j, const std::string& section, OfdmConfig& c) {
    detail::reject_unknown_keys(j, section,
                                {"n_subcarriers", "n_active", "cp_len", "n_symbols", "modulation",
                                 "sample_rate_hz", "seed"});
    detail::read_field(j, section, "n_subcarriers", c.n_subcarriers);
    detail::read_field(j, section, "n_active", c.n_active);
    detail::read_field(j, section, "cp_len", c.cp_len);
    detail::read_field(j, section, "n_symbols", c.n_symbols);
    c.modulation = modulation_from_string(detail::enum_string(j, section, "modulation", to_string(c.modulation)));
    detail::read_field(j, section, "sample_rate_hz", c.sample_rate_hz);
    detail::read_field(j, section, "seed", c.seed);
}

inline Json to_json(const ArrayConfig& c) {
    Json j;
    j["rows"] = c.rows;
    j["cols"] = c.cols;
    j["spacing_m"] = c.spacing_m;
    j["carrier_hz"] = c.carrier_hz;
    j["probe_offset_m"] = Json::array({c.probe_offset_m.x, c.probe_offset_m.y, c.probe_offset_m.z});
    j["signature_seed"] = c.signature_seed;
    j["signature_amp_ripple_db"] = c.signature_amp_ripple_db;
    j["signature_phase_spread_deg"] = c.signature_phase_spread_deg;
    j["signature_phase_ripple_deg"] = c.signature_phase_ripple_deg;
    return j;
}

inline void merge_from_json(const Json& j, const std::string& section, ArrayConfig& c) {
    detail::reject_unknown_keys(j, section,
                                {"rows", "cols", "spacing_m", "carrier_hz", "probe_offset_m", "signature_seed",
                                 "signature_amp_ripple_db", "signature_phase_spread_deg",
                                 "signature_phase_ripple_deg"});
    detail::read_field(j, section, "rows", c.rows);
    detail::read_field(j, section, "cols", c.cols);
    detail::read_field(j, section, "spacing_m", c.spacing_m);
    detail::read_field(j, section, "carrier_hz", c.carrier_hz);
    if (const auto it = j.find("probe_offset_m"); it != j.end()) {
        std::vector<double> v;
        try {
            it->get_to(v);
        } catch (const nlohmann::json::exception&) {
            throw ConfigError("config: key '" + section + ".probe_offset_m' has the wrong type");
        }
        if (v.size() != 3)
            throw ConfigError("config: key '" + section + ".probe_offset_m' must have exactly 3 entries");
        c.probe_offset_m = Vec3{v[0], v[1], v[2]};
    }
    detail::read_field(j, section, "signature_seed", c.signature_seed);
    detail::read_field(j, section, "signature_amp_ripple_db", c.signature_amp_ripple_db);
    detail::read_field(j, section, "signature_phase_spread_deg", c.signature_phase_spread_deg);
    detail::read_field(j, section, "signature_phase_ripple_deg", c.signature_phase_ripple_deg);
}

inline Json to_json(const DatasetManifest& m) {
    Json j;
    j["scheme"] = to_string(m.scheme);
    j["n_captures_per_class"] = m.n_captures_per_class;
    j["capture_len"] = m.capture_len;
    j["segment_len"] = m.segment_len;
    j["loop_segments"] = m.loop_segments;
    j["split_fraction"] = m.split_fraction;
    j["base_snr_db"] = m.base_snr_db;
    j["excitation_seed"] = m.excitation_seed;
    j["capture_seed"] = m.capture_seed;
    j["split_seed"] = m.split_seed;
    j["pa_seed"] = m.pa_seed;
    j["pa_memory_depth"] = m.pa_memory_depth;
    j["attenuation_db"] = m.attenuation_db;
    j["phase_shift_deg"] = m.phase_shift_deg;
    j["multi_instances_per_class"] = m.multi_instances_per_class;
    j["format_version"] = m.format_version;
    j["ofdm"] = to_json(m.ofdm);
    j["array"] = to_json(m.array);
    return j;
}

inline void merge_from_json(const Json& j, const std::string& section, DatasetManifest& m) {
    detail::reject_unknown_keys(
        j, section,
        {"scheme", "n_captures_per_class", "capture_len", "segment_len", "loop_segments", "split_fraction",
         "base_snr_db", "excitation_seed", "capture_seed", "split_seed", "pa_seed", "pa_memory_depth",
         "attenuation_db", "phase_shift_deg", "multi_instances_per_class", "format_version", "ofdm", "array"});
    m.scheme = scheme_from_string(detail::enum_string(j, section, "scheme", to_string(m.scheme)));
    detail::read_field(j, section, "n_captures_per_class", m.n_captures_per_class);
    detail::read_field(j, section, "capture_len", m.capture_len);
    detail::read_field(j, section, "segment_len", m.segment_len);
    detail::read_field(j, section, "loop_segments", m.loop_segments);
    detail::read_field(j, section, "split_fraction", m.split_fraction);
    detail::read_field(j, section, "base_snr_db", m.base_snr_db);
    detail::read_field(j, section, "excitation_seed", m.excitation_seed);
    detail::read_field(j, section, "capture_seed", m.capture_seed);
    detail::read_field(j, section, "split_seed", m.split_seed);
    detail::read_field(j, section, "pa_seed", m.pa_seed);
    detail::read_field(j, section, "pa_memory_depth", m.pa_memory_depth);
    detail::read_field(j, section, "attenuation_db", m.attenuation_db);
    detail::read_field(j, section, "phase_shift_deg", m.phase_shift_deg);
    detail::read_field(j, section, "multi_instances_per_class", m.multi_instances_per_class);
    detail::read_field(j, section, "format_version", m.format_version);
    if (const auto it = j.find("ofdm"); it != j.end()) merge_from_json(*it, section + ".ofdm", m.ofdm);
    if (const auto it = j.find("array"); it != j.end()) merge_from_json(*it, section + ".array", m.array);
}

inline Json to_json(const ModelSpec& s) {
    Json j;
    j["layer_sizes"] = s.layer_sizes;
    j["activation"] = to_string(s.activation);
    j["leaky_slope"] = s.leaky_slope;
    j["bn_eps"] = s.bn_eps;
    j["bn_momentum"] = s.bn_momentum;
    return j;
}

inline void merge_from_json(const Json& j, const std::string& section, ModelSpec& s) {
    detail::reject_unknown_keys(j, section, {"layer_sizes", "activation", "leaky_slope", "bn_eps", "bn_momentum"});
    detail::read_field(j, section, "layer_sizes", s.layer_sizes);
    s.activation = activation_from_string(detail::enum_string(j, section, "activation", to_string(s.activation)));
    detail::read_field(j, section, "leaky_slope", s.leaky_slope);
    detail::read_field(j, section, "bn_eps", s.bn_eps);
    detail::read_field(j, section, "bn_momentum", s.bn_momentum);
}

inline Json to_json(const OptimizerConfig& o) {
    Json j;
    j["learning_rate"] = o.learning_rate;
    j["plateau_patience"] = o.plateau_patience;
    j["plateau_factor"] = o.plateau_factor;
    j["min_lr"] = o.min_lr;
    j["max_epochs"] = o.max_epochs;
    j["batch_size"] = o.batch_size;
    j["val_fraction"] = o.val_fraction;
    j["seed"] = o.seed;
    return j;
}

inline void merge_from_json(const Json& j, const std::string& section, OptimizerConfig& o) {
    detail::reject_unknown_keys(j, section,
                                {"learning_rate", "plateau_patience", "plateau_factor", "min_lr", "max_epochs",
                                 "batch_size", "val_fraction", "seed"});
    detail::read_field(j, section, "learning_rate", o.learning_rate);
    detail::read_field(j, section, "plateau_patience", o.plateau_patience);
    detail::read_field(j, section, "plateau_factor", o.plateau_factor);
    detail::read_field(j, section, "min_lr", o.min_lr);
    detail::read_field(j, section, "max_epochs", o.max_epochs);
    detail::read_field(j, section, "batch_size", o.batch_size);
    detail::read_field(j, section, "val_fraction", o.val_fraction);
    detail::read_field(j, section, "seed", o.seed);
}

inline Json to_json(const AppConfig& c) {
    Json j;
    j["dataset"] = to_json(c.manifest);
    j["model"] = to_json(c.model);
    j["optimizer"] = to_json(c.optimizer);
    return j;
}

inline AppConfig app_config_from_json(const Json& j) {
    AppConfig c;
    detail::reject_unknown_keys(j, "<root>", {"dataset", "model", "optimizer"});
    if (const auto it = j.find("dataset"); it != j.end()) merge_from_json(*it, "dataset", c.manifest);
    if (const auto it = j.find("model"); it != j.end()) merge_from_json(*it, "model", c.model);
    if (const auto it = j.find("optimizer"); it != j.end()) merge_from_json(*it, "optimizer", c.optimizer);
    return c;
}

inline AppConfig load_app_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: '" + path + "' is not valid JSON: " + e.what());
    }
    return app_config_from_json(j);
}

inline void save_json(const Json& j, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + path + "' for writing");
    out << j.dump(2) << '\n';
    if (!out) throw DataError("short write to '" + path + "'");
}

// Streaming FNV-1a hash of a file's bytes, as a fixed-width hex string for
// manifests. Equals fnv1a64 of the whole file read at once.
inline std::string file_hash_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "' for hashing");
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[65536];
    for (;;) {
        in.read(buf, sizeof buf);
        const std::streamsize got = in.gcount();
        if (got > 0) h = fnv1a64(buf, static_cast<std::size_t>(got), h);
        if (got < static_cast<std::streamsize>(sizeof buf)) break;
    }
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

}  // namespace apadiag

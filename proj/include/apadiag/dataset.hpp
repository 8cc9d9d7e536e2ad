// dataset.hpp - corpus construction: captures of the simulated observation,
// segmentation into I-then-Q feature vectors, labeling, 70/30 split,
// batching, and the APAD binary container.
//
// Capture model: the transmit generator replays one fixed OFDM excitation
// loop (loop_segments * segment_len samples, shared by every class) while the
// array is put into each fault state. A capture is a window into that steady
// repetition starting at a random segment-aligned offset, plus fresh
// receiver noise at base_snr_db. Segments therefore align to a small set of
// loop contents per class, so a random segment-level split leaves every test
// segment a same-content training twin — which is what makes the held-out
// task learnable by a compact network, mirroring the replayed-transmitter
// measurement setup this models.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "apadiag/array_sim.hpp"
#include "apadiag/matrix.hpp"
#include "apadiag/rng.hpp"
#include "apadiag/waveform.hpp"

namespace apadiag {

enum class LabelScheme : std::uint8_t { Single49 = 0, MultiGroup = 1 };

inline int n_classes_for(LabelScheme scheme) { return scheme == LabelScheme::Single49 ? 49 : 8; }

struct DatasetManifest {
    LabelScheme scheme = LabelScheme::Single49;
    int n_captures_per_class = 10;
    std::int64_t capture_len = 5000000;
    int segment_len = 5000;
    int loop_segments = 4;   // excitation loop length, in segments
    double split_fraction = 0.7;
    double base_snr_db = 30.0;       // receiver noise present in every capture
    std::uint64_t excitation_seed = 101;
    std::uint64_t capture_seed = 202;  // root for per-capture offset/noise seeds
    std::uint64_t split_seed = 303;
    std::uint64_t pa_seed = 404;
    double attenuation_db = 0.5;
    double phase_shift_deg = 5.0;
    int multi_instances_per_class = 3;  // fault-set draws per MultiGroup class
    std::uint32_t format_version = 1;
    OfdmConfig ofdm;      // excitation numerology; seed/n_symbols are derived
    ArrayConfig array;
    int pa_memory_depth = 2;

    void validate() const {
        if (n_captures_per_class <= 0) throw ConfigError("DatasetManifest.n_captures_per_class must be positive");
        if (segment_len <= 0) throw ConfigError("DatasetManifest.segment_len must be positive");
        if (capture_len <= 0) throw ConfigError("DatasetManifest.capture_len must be positive");
        if (capture_len % segment_len != 0)
            throw ConfigError("DatasetManifest.capture_len must be divisible by segment_len (remainder " +
                              std::to_string(capture_len % segment_len) + ")");
        if (loop_segments <= 0) throw ConfigError("DatasetManifest.loop_segments must be positive");
        if (!(split_fraction > 0.0 && split_fraction < 1.0))
            throw ConfigError("DatasetManifest.split_fraction must lie in (0, 1)");
        if (!(attenuation_db > 0.0)) throw ConfigError("DatasetManifest.attenuation_db must be positive");
        if (phase_shift_deg == 0.0) throw ConfigError("DatasetManifest.phase_shift_deg must be nonzero");
        if (multi_instances_per_class <= 0)
            throw ConfigError("DatasetManifest.multi_instances_per_class must be positive");
        if (pa_memory_depth < 0) throw ConfigError("DatasetManifest.pa_memory_depth must be nonnegative");
        ofdm.validate();
        array.validate();
    }

    std::int64_t segments_per_capture() const { return capture_len / segment_len; }
    std::int64_t samples_per_class() const { return segments_per_capture() * n_captures_per_class; }
    int feature_len() const { return 2 * segment_len; }
    int n_classes() const { return n_classes_for(scheme); }

    std::uint64_t offset_seed_for(int class_idx, int capture_idx) const {
        return derive_seed(capture_seed, "offset",
                           (static_cast<std::uint64_t>(class_idx) << 20) + static_cast<std::uint64_t>(capture_idx));
    }
    std::uint64_t noise_seed_for(int class_idx, int capture_idx) const {
        return derive_seed(capture_seed, "noise",
                           (static_cast<std::uint64_t>(class_idx) << 20) + static_cast<std::uint64_t>(capture_idx));
    }
};

// Human-facing class numbering used in reports: classes are reported 1-based
// with 1 = no fault, matching how the confusion matrices are labeled.
inline std::uint16_t display_label(LabelScheme, int class_idx) { return static_cast<std::uint16_t>(class_idx + 1); }

// Single49 class layout: 0 none; 1..16 element off; 17..32 attenuation;
// 33..48 phase shift (element = idx within block).
inline FaultScenario single49_scenario(const DatasetManifest& m, int class_idx) {
    if (class_idx == 0) return FaultScenario::none();
    if (class_idx <= 16) return FaultScenario::element_off(class_idx - 1);
    if (class_idx <= 32) return FaultScenario::attenuation(class_idx - 17, m.attenuation_db);
    if (class_idx <= 48) return FaultScenario::phase_shift(class_idx - 33, m.phase_shift_deg);
    throw ConfigError("single49_scenario: class index out of range");
}

namespace detail {

inline bool is_chip_quad(const std::vector<int>& sorted_set, int n_elements) {
    if (sorted_set.size() != 4) return false;
    for (int chip = 0; chip * 4 + 3 < n_elements; ++chip) {
        if (sorted_set[0] == chip * 4 && sorted_set[1] == chip * 4 + 1 && sorted_set[2] == chip * 4 + 2 &&
            sorted_set[3] == chip * 4 + 3)
            return true;
    }
    return false;
}

inline std::vector<int> draw_subset(Rng& rng, int n_elements, int k) {
    std::vector<int> pool(static_cast<std::size_t>(n_elements));
    for (int i = 0; i < n_elements; ++i) pool[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < k; ++i) {
        const auto j = static_cast<std::size_t>(i) + rng.bounded(static_cast<std::uint64_t>(n_elements - i));
        std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    }
    std::vector<int> subset(pool.begin(), pool.begin() + k);
    std::sort(subset.begin(), subset.end());
    return subset;
}

}  // namespace detail

// MultiGroup class layout: 0 none; 1..6 = that many elements off (a small
// pool of fixed element sets per class, captures cycling through the pool);
// 7 = full chip off (pool = every chip). Off-4 sets that coincide with a
// chip quad are redrawn so classes 4 and 7 stay disjoint.
inline std::vector<FaultScenario> scenario_pool(const DatasetManifest& m, int class_idx) {
    const int n_elem = m.array.n_elements();
    if (m.scheme == LabelScheme::Single49) return {single49_scenario(m, class_idx)};
    if (class_idx == 0) return {FaultScenario::none()};
    if (class_idx == 7) {
        std::vector<FaultScenario> pool;
        for (int chip = 0; chip < m.array.n_chips(); ++chip) pool.push_back(FaultScenario::full_chip_off(chip));
        return pool;
    }
    if (class_idx < 1 || class_idx > 6) throw ConfigError("scenario_pool: class index out of range");
    const int k = class_idx;
    Rng rng(derive_seed(m.capture_seed, "multi-pool", static_cast<std::uint64_t>(k)));
    std::vector<FaultScenario> pool;
    std::vector<std::vector<int>> seen;
    int guard = 0;
    while (static_cast<int>(pool.size()) < m.multi_instances_per_class) {
        if (++guard > 10000) throw ConfigError("scenario_pool: unable to draw distinct element sets");
        auto subset = detail::draw_subset(rng, n_elem, k);
        if (detail::is_chip_quad(subset, n_elem)) continue;
        if (std::find(seen.begin(), seen.end(), subset) != seen.end()) continue;
        seen.push_back(subset);
        pool.push_back(FaultScenario::multi_off(subset));
    }
    return pool;
}

struct Corpus {
    LabelScheme scheme = LabelScheme::Single49;
    std::uint32_t feature_len = 0;
    std::uint16_t n_classes = 0;
    std::vector<std::uint16_t> display_labels;  // per class
    Matrix<float> features;                     // n_samples x feature_len
    std::vector<std::uint16_t> labels;          // per sample

    std::size_t n_samples() const { return labels.size(); }
};

// Planned sizes for a manifest, computable without building anything.
struct CorpusPlan {
    int n_classes = 0;
    std::int64_t samples_per_class = 0;
    std::int64_t n_total = 0;
    int feature_len = 0;
    std::int64_t train_per_class = 0;
    std::int64_t test_per_class = 0;
    std::int64_t train_total = 0;
    std::int64_t test_total = 0;
};

inline CorpusPlan plan_corpus(const DatasetManifest& m) {
    m.validate();
    CorpusPlan p;
    p.n_classes = m.n_classes();
    p.samples_per_class = m.samples_per_class();
    p.n_total = p.samples_per_class * p.n_classes;
    p.feature_len = m.feature_len();
    p.train_per_class = std::llround(m.split_fraction * static_cast<double>(p.samples_per_class));
    p.test_per_class = p.samples_per_class - p.train_per_class;
    p.train_total = p.train_per_class * p.n_classes;
    p.test_total = p.test_per_class * p.n_classes;
    return p;
}

// Splits capture `frame` into contiguous segments of segment_len complex
// samples, each emitted as a feature vector: real parts of the window first,
// then imaginary parts of the same window.
inline std::vector<std::vector<float>> segment(const IqFrame& frame, int segment_len) {
    if (segment_len <= 0) throw ConfigError("segment: segment_len must be positive");
    const auto L = static_cast<std::size_t>(segment_len);
    if (frame.samples.size() % L != 0)
        throw DataError("segment: capture length " + std::to_string(frame.samples.size()) + " leaves remainder " +
                        std::to_string(frame.samples.size() % L) + " for segment_len " + std::to_string(segment_len));
    const std::size_t n_seg = frame.samples.size() / L;
    std::vector<std::vector<float>> out(n_seg);
    for (std::size_t i = 0; i < n_seg; ++i) {
        auto& v = out[i];
        v.resize(2 * L);
        const auto* base = frame.samples.data() + i * L;
        for (std::size_t t = 0; t < L; ++t) {
            v[t] = static_cast<float>(base[t].real());
            v[L + t] = static_cast<float>(base[t].imag());
        }
    }
    return out;
}

namespace detail {

// Steady-state response of one fault state to the cyclic excitation loop:
// the loop tail is prepended so PA memory taps see their wrapped history,
// then the warm-up samples are dropped.
inline IqFrame steady_loop_response(const DatasetManifest& m, const PAModel& pa,
                                    const std::vector<ElementState>& states, const IqFrame& loop) {
    const auto q = static_cast<std::size_t>(m.pa_memory_depth);
    IqFrame padded;
    padded.sample_rate_hz = loop.sample_rate_hz;
    padded.samples.reserve(loop.samples.size() + q);
    padded.samples.insert(padded.samples.end(), loop.samples.end() - static_cast<std::ptrdiff_t>(q),
                          loop.samples.end());
    padded.samples.insert(padded.samples.end(), loop.samples.begin(), loop.samples.end());
    IqFrame resp = observe(m.array, pa, states, padded);
    resp.samples.erase(resp.samples.begin(), resp.samples.begin() + static_cast<std::ptrdiff_t>(q));
    return resp;
}

}  // namespace detail

// The shared excitation loop every capture replays.
inline IqFrame excitation_loop(const DatasetManifest& m) {
    const std::int64_t loop_len = static_cast<std::int64_t>(m.loop_segments) * m.segment_len;
    OfdmConfig cfg = m.ofdm;
    cfg.seed = m.excitation_seed;
    cfg.n_symbols = static_cast<int>((loop_len + cfg.symbol_len() - 1) / cfg.symbol_len());
    IqFrame frame = generate_ofdm(cfg);
    frame.samples.resize(static_cast<std::size_t>(loop_len));
    return frame;
}

// Builds the full labeled corpus for a manifest. Per class: the steady loop
// response of each fault instance is computed once; each capture then tiles
// it from a seeded segment-aligned offset, receives fresh AWGN at
// base_snr_db, and is segmented into feature vectors.
inline Corpus build_corpus(const DatasetManifest& m) {
    const CorpusPlan plan = plan_corpus(m);
    if (m.pa_memory_depth >= static_cast<int>(m.loop_segments) * m.segment_len)
        throw ConfigError("build_corpus: pa_memory_depth must be smaller than the excitation loop");

    const IqFrame loop = excitation_loop(m);
    const PAModel pa = PAModel::default_bank(m.array.n_elements(), m.pa_seed, m.pa_memory_depth);

    Corpus corpus;
    corpus.scheme = m.scheme;
    corpus.feature_len = static_cast<std::uint32_t>(plan.feature_len);
    corpus.n_classes = static_cast<std::uint16_t>(plan.n_classes);
    corpus.display_labels.resize(static_cast<std::size_t>(plan.n_classes));
    for (int c = 0; c < plan.n_classes; ++c)
        corpus.display_labels[static_cast<std::size_t>(c)] = display_label(m.scheme, c);
    corpus.features = Matrix<float>(static_cast<std::size_t>(plan.n_total), static_cast<std::size_t>(plan.feature_len));
    corpus.labels.assign(static_cast<std::size_t>(plan.n_total), 0);

    const auto L = static_cast<std::size_t>(m.segment_len);
    const std::size_t loop_len = static_cast<std::size_t>(m.loop_segments) * L;
    const auto n_seg = static_cast<std::size_t>(m.segments_per_capture());

    std::size_t row = 0;
    for (int c = 0; c < plan.n_classes; ++c) {
        const auto pool = scenario_pool(m, c);
        std::vector<IqFrame> responses;
        responses.reserve(pool.size());
        const auto nominal = nominal_states(m.array.n_elements());
        for (const auto& scenario : pool)
            responses.push_back(detail::steady_loop_response(m, pa, apply_fault(nominal, scenario), loop));

        for (int k = 0; k < m.n_captures_per_class; ++k) {
            const IqFrame& resp = responses[static_cast<std::size_t>(k) % responses.size()];
            Rng offset_rng(m.offset_seed_for(c, k));
            const std::size_t offset = static_cast<std::size_t>(offset_rng.bounded(
                                           static_cast<std::uint64_t>(m.loop_segments))) * L;
            IqFrame capture;
            capture.sample_rate_hz = resp.sample_rate_hz;
            capture.samples.resize(static_cast<std::size_t>(m.capture_len));
            for (std::size_t t = 0; t < capture.samples.size(); ++t)
                capture.samples[t] = resp.samples[(offset + t) % loop_len];
            capture = add_awgn(capture, m.base_snr_db, m.noise_seed_for(c, k));

            const auto segs = segment(capture, m.segment_len);
            for (std::size_t i = 0; i < n_seg; ++i, ++row) {
                std::copy(segs[i].begin(), segs[i].end(), corpus.features.row(row));
                corpus.labels[row] = static_cast<std::uint16_t>(c);
            }
        }
    }
    return corpus;
}

struct SplitIndices {
    std::vector<std::uint32_t> train;
    std::vector<std::uint32_t> test;
};

// Per-class random split: each class contributes round(fraction * n_c)
// training samples; the rest go to test. Deterministic in seed.
inline SplitIndices split_corpus(const Corpus& corpus, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) throw ConfigError("split_corpus: fraction must lie in (0, 1)");
    SplitIndices out;
    std::vector<std::vector<std::uint32_t>> by_class(corpus.n_classes);
    for (std::size_t i = 0; i < corpus.labels.size(); ++i) {
        const auto c = corpus.labels[i];
        if (c >= corpus.n_classes) throw DataError("split_corpus: label out of range");
        by_class[c].push_back(static_cast<std::uint32_t>(i));
    }
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        auto& idx = by_class[c];
        Rng rng(derive_seed(seed, "split-class", c));
        for (std::size_t i = idx.size(); i > 1; --i) {
            const auto j = rng.bounded(i);
            std::swap(idx[i - 1], idx[j]);
        }
        const auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
        out.train.insert(out.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
        out.test.insert(out.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    }
    return out;
}

// Deterministic shuffled mini-batches over a subset of corpus rows; every
// listed row appears exactly once per pass, final partial batch included.
class BatchStream {
  public:
    BatchStream(const Corpus& corpus, std::vector<std::uint32_t> indices, int batch_size, std::uint64_t shuffle_seed)
        : corpus_(corpus), indices_(std::move(indices)), batch_size_(batch_size) {
        if (batch_size_ < 1) throw ConfigError("BatchStream: batch_size must be at least 1");
        if (indices_.empty()) throw DataError("BatchStream: empty index set");
        reshuffle(shuffle_seed);
    }

    void reshuffle(std::uint64_t seed) {
        Rng rng(seed);
        for (std::size_t i = indices_.size(); i > 1; --i) {
            const auto j = rng.bounded(i);
            std::swap(indices_[i - 1], indices_[j]);
        }
        cursor_ = 0;
    }

    std::size_t n_batches() const {
        return (indices_.size() + static_cast<std::size_t>(batch_size_) - 1) / static_cast<std::size_t>(batch_size_);
    }

    bool next(Matrix<float>& X, std::vector<std::uint16_t>& y) {
        if (cursor_ >= indices_.size()) return false;
        const std::size_t n = std::min(static_cast<std::size_t>(batch_size_), indices_.size() - cursor_);
        const std::size_t f = corpus_.feature_len;
        if (X.rows != n || X.cols != f) X = Matrix<float>(n, f);
        y.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            const auto src = indices_[cursor_ + i];
            std::copy(corpus_.features.row(src), corpus_.features.row(src) + f, X.row(i));
            y[i] = corpus_.labels[src];
        }
        cursor_ += n;
        return true;
    }

  private:
    const Corpus& corpus_;
    std::vector<std::uint32_t> indices_;
    int batch_size_;
    std::size_t cursor_ = 0;
};

// ---- APAD container ----
//
// Little-endian layout:
//   byte 0..3   magic "APAD"
//   u32         version (1)
//   u32         n_samples
//   u32         feature_len
//   u32         n_classes
//   u8          scheme (0 = Single49, 1 = MultiGroup)
//   u16[n_classes]              display label table
//   f32[n_samples*feature_len]  features, row-major
//   u16[n_samples]              class labels

inline constexpr std::uint32_t kApadVersion = 1;

namespace detail {

template <typename T>
void write_pod(std::ofstream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& is, T& v, const std::string& what) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw DataError("corrupt header: unable to read " + what);
}

}  // namespace detail

inline void save_corpus(const std::string& path, const Corpus& corpus) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("save_corpus: cannot open " + path + " for writing");
    os.write("APAD", 4);
    detail::write_pod(os, kApadVersion);
    detail::write_pod(os, static_cast<std::uint32_t>(corpus.n_samples()));
    detail::write_pod(os, corpus.feature_len);
    detail::write_pod(os, static_cast<std::uint32_t>(corpus.n_classes));
    detail::write_pod(os, static_cast<std::uint8_t>(corpus.scheme));
    os.write(reinterpret_cast<const char*>(corpus.display_labels.data()),
             static_cast<std::streamsize>(corpus.display_labels.size() * sizeof(std::uint16_t)));
    os.write(reinterpret_cast<const char*>(corpus.features.data.data()),
             static_cast<std::streamsize>(corpus.features.data.size() * sizeof(float)));
    os.write(reinterpret_cast<const char*>(corpus.labels.data()),
             static_cast<std::streamsize>(corpus.labels.size() * sizeof(std::uint16_t)));
    if (!os) throw DataError("save_corpus: write failed for " + path);
}

inline Corpus load_corpus(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("load_corpus: cannot open " + path);
    is.seekg(0, std::ios::end);
    const auto actual_size = static_cast<std::uint64_t>(is.tellg());
    is.seekg(0, std::ios::beg);

    char magic[4] = {};
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "APAD") throw DataError("load_corpus: format error, bad magic in " + path);
    std::uint32_t version = 0, n_samples = 0, feature_len = 0, n_classes = 0;
    std::uint8_t scheme = 0;
    detail::read_pod(is, version, "version");
    if (version != kApadVersion)
        throw DataError("load_corpus: version mismatch, file has " + std::to_string(version) + ", expected " +
                        std::to_string(kApadVersion));
    detail::read_pod(is, n_samples, "sample count");
    detail::read_pod(is, feature_len, "feature length");
    detail::read_pod(is, n_classes, "class count");
    detail::read_pod(is, scheme, "scheme");
    if (scheme > 1) throw DataError("load_corpus: unknown label scheme " + std::to_string(scheme));
    if (n_classes == 0 || n_classes > 65535) throw DataError("load_corpus: invalid class count");

    const std::uint64_t expected_size = 4ull + 4 + 4 + 4 + 4 + 1 + 2ull * n_classes +
                                        4ull * n_samples * feature_len + 2ull * n_samples;
    if (actual_size != expected_size)
        throw DataError("load_corpus: truncated file, expected " + std::to_string(expected_size) + " bytes, found " +
                        std::to_string(actual_size));

    Corpus corpus;
    corpus.scheme = static_cast<LabelScheme>(scheme);
    corpus.feature_len = feature_len;
    corpus.n_classes = static_cast<std::uint16_t>(n_classes);
    corpus.display_labels.resize(n_classes);
    is.read(reinterpret_cast<char*>(corpus.display_labels.data()),
            static_cast<std::streamsize>(corpus.display_labels.size() * sizeof(std::uint16_t)));
    corpus.features = Matrix<float>(n_samples, feature_len);
    is.read(reinterpret_cast<char*>(corpus.features.data.data()),
            static_cast<std::streamsize>(corpus.features.data.size() * sizeof(float)));
    corpus.labels.resize(n_samples);
    is.read(reinterpret_cast<char*>(corpus.labels.data()),
            static_cast<std::streamsize>(corpus.labels.size() * sizeof(std::uint16_t)));
    if (!is) throw DataError("load_corpus: read failed for " + path);
    for (const auto label : corpus.labels)
        if (label >= corpus.n_classes) throw DataError("load_corpus: label out of range in " + path);
    return corpus;
}

}  // namespace apadiag

// waveform.hpp - OFDM complex-baseband generator and PAPR measurement.

#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "apadiag/common.hpp"
#include "apadiag/fft.hpp"
#include "apadiag/rng.hpp"

namespace apadiag {

struct IqFrame {
    std::vector<std::complex<double>> samples;
    double sample_rate_hz = 0.0;
};

inline double mean_power(const IqFrame& frame) {
    if (frame.samples.empty()) throw DataError("mean_power: empty frame");
    KahanSum acc;
    for (const auto& s : frame.samples) acc.add(std::norm(s));
    return acc.value() / static_cast<double>(frame.samples.size());
}

enum class Modulation : std::uint8_t { QPSK = 0, QAM16 = 1, QAM64 = 2 };

struct OfdmConfig {
    int n_subcarriers = 1024;
    int n_active = 600;
    int cp_len = 72;
    int n_symbols = 120;
    Modulation modulation = Modulation::QAM64;
    double sample_rate_hz = 61.44e6;
    std::uint64_t seed = 1;

    int symbol_len() const { return n_subcarriers + cp_len; }

    void validate() const {
        if (n_subcarriers <= 0) throw ConfigError("OfdmConfig.n_subcarriers must be positive");
        if (n_active <= 0) throw ConfigError("OfdmConfig.n_active must be positive");
        if (n_active > max_active_subcarriers(n_subcarriers))
            throw ConfigError("OfdmConfig.n_active exceeds the usable tone count (" +
                              std::to_string(max_active_subcarriers(n_subcarriers)) + ") for " +
                              std::to_string(n_subcarriers) + " subcarriers");
        if (cp_len < 0) throw ConfigError("OfdmConfig.cp_len must be nonnegative");
        if (cp_len >= n_subcarriers) throw ConfigError("OfdmConfig.cp_len must be smaller than n_subcarriers");
        if (n_symbols <= 0) throw ConfigError("OfdmConfig.n_symbols must be positive");
        if (!(sample_rate_hz > 0.0)) throw ConfigError("OfdmConfig.sample_rate_hz must be positive");
    }

    // DC is never used; for even sizes the Nyquist bin is also excluded.
    static int max_active_subcarriers(int n_subcarriers) {
        return n_subcarriers - 1 - (n_subcarriers % 2 == 0 ? 1 : 0);
    }
};

namespace detail {

// Active tones packed around DC (excluded), alternating +1, -1, +2, -2, ...
// in FFT-bin indexing; deterministic and nested across n_active values.
inline std::vector<std::size_t> active_tone_bins(int n_subcarriers, int n_active) {
    std::vector<std::size_t> bins;
    bins.reserve(static_cast<std::size_t>(n_active));
    const auto n = static_cast<std::size_t>(n_subcarriers);
    for (int i = 0; static_cast<int>(bins.size()) < n_active; ++i) {
        const std::size_t k = static_cast<std::size_t>(i / 2 + 1);
        bins.push_back(i % 2 == 0 ? k : n - k);
    }
    return bins;
}

inline unsigned gray_decode(unsigned g) {
    unsigned b = 0;
    for (; g; g >>= 1) b ^= g;
    return b;
}

// Unit-average-energy square QAM point; bits enter as Gray words per axis so
// adjacent amplitude levels differ in a single bit.
inline std::complex<double> map_qam(Rng& rng, Modulation mod) {
    const unsigned levels = mod == Modulation::QPSK ? 2u : mod == Modulation::QAM16 ? 4u : 8u;
    const double scale = 1.0 / std::sqrt(2.0 * (static_cast<double>(levels) * levels - 1.0) / 3.0);
    const auto axis = [&](void) -> double {
        const unsigned idx = gray_decode(static_cast<unsigned>(rng.bounded(levels)));
        return (2.0 * static_cast<double>(idx) - static_cast<double>(levels - 1)) * scale;
    };
    const double i = axis();
    const double q = axis();
    return {i, q};
}

}  // namespace detail

// Generates n_symbols OFDM symbols (IFFT of random QAM tones, cyclic prefix
// prepended) and normalizes the whole frame to unit mean power.
inline IqFrame generate_ofdm(const OfdmConfig& config) {
    config.validate();
    const auto n = static_cast<std::size_t>(config.n_subcarriers);
    const auto cp = static_cast<std::size_t>(config.cp_len);
    const auto bins = detail::active_tone_bins(config.n_subcarriers, config.n_active);
    Fft plan(n);
    Rng rng(config.seed);

    IqFrame frame;
    frame.sample_rate_hz = config.sample_rate_hz;
    frame.samples.reserve(static_cast<std::size_t>(config.n_symbols) * (n + cp));
    std::vector<std::complex<double>> spectrum(n);
    for (int s = 0; s < config.n_symbols; ++s) {
        std::fill(spectrum.begin(), spectrum.end(), std::complex<double>{0.0, 0.0});
        for (std::size_t bin : bins) spectrum[bin] = detail::map_qam(rng, config.modulation);
        plan.inverse(spectrum);
        for (std::size_t i = n - cp; i < n; ++i) frame.samples.push_back(spectrum[i]);
        for (std::size_t i = 0; i < n; ++i) frame.samples.push_back(spectrum[i]);
    }

    const double p = mean_power(frame);
    if (!(p > 0.0)) throw ConfigError("generate_ofdm: degenerate zero-power frame");
    const double scale = 1.0 / std::sqrt(p);
    for (auto& v : frame.samples) v *= scale;
    return frame;
}

// 10*log10(max |s|^2 / mean |s|^2); zero for constant-envelope frames.
inline double papr_db(const IqFrame& frame) {
    if (frame.samples.empty()) throw DataError("papr_db: empty frame");
    double peak = 0.0;
    KahanSum acc;
    for (const auto& s : frame.samples) {
        const double p = std::norm(s);
        acc.add(p);
        if (p > peak) peak = p;
    }
    const double mean = acc.value() / static_cast<double>(frame.samples.size());
    if (!(mean > 0.0)) throw DataError("papr_db: zero-power frame");
    return 10.0 * std::log10(peak / mean);
}

}  // namespace apadiag

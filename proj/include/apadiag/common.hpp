// common.hpp - shared error types, numeric helpers, and thread control.

#pragma once

#include <bit>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts unsupported");

namespace apadiag {

inline constexpr double kPi = 3.14159265358979323846;

// Error categories map 1:1 onto CLI exit codes.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {  // file format / io problems
    using std::runtime_error::runtime_error;
};
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct StateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Compensated summation. Power/energy sums run over up to 5e6 terms and the
// generator contract asks for 1e-9 relative accuracy; plain accumulation is
// right at that edge.
class KahanSum {
  public:
    void add(double x) {
        const double y = x - comp_;
        const double t = sum_ + y;
        comp_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }

  private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

namespace detail {
inline int& thread_limit() {
    static int limit = 1;
    return limit;
}
}  // namespace detail

// Global worker cap. 1 (the default) means fully sequential execution, which
// is also the bit-determinism guarantee the CLI exposes as --threads 1.
inline void set_max_threads(int n) { detail::thread_limit() = n < 1 ? 1 : n; }
inline int max_threads() { return detail::thread_limit(); }

// Runs fn(begin, end) over [0, n) split into contiguous chunks. Work items
// must not share mutable state across chunks; chunk boundaries depend only on
// (n, thread count), and each index is processed exactly once.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    const int workers = static_cast<int>(std::min<std::size_t>(n, static_cast<std::size_t>(max_threads())));
    if (workers <= 1) {
        if (n > 0) fn(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    const std::size_t chunk = (n + static_cast<std::size_t>(workers) - 1) / static_cast<std::size_t>(workers);
    for (int w = 0; w < workers; ++w) {
        const std::size_t begin = static_cast<std::size_t>(w) * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back(fn, begin, end);
    }
    for (auto& t : pool) t.join();
}

}  // namespace apadiag

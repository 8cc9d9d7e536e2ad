// fft.hpp - discrete Fourier transform used by the OFDM generator.
//
// Power-of-two sizes take an iterative radix-2 path with precomputed twiddle
// and bit-reversal tables; other sizes fall back to a direct O(n^2) DFT,
// which only matters for small test configurations. Conventions:
//   forward:  X[k] = sum_n x[n] e^{-j2pi kn/N}    (no scaling)
//   inverse:  x[n] = (1/N) sum_k X[k] e^{+j2pi kn/N}

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <utility>
#include <vector>

namespace apadiag {

class Fft {
  public:
    using cplx = std::complex<double>;

    explicit Fft(std::size_t n) : n_(n), pow2_((n & (n - 1)) == 0 && n > 0) {
        if (!pow2_) return;
        bitrev_.resize(n_);
        std::size_t log2n = 0;
        while ((std::size_t{1} << log2n) < n_) ++log2n;
        for (std::size_t i = 0; i < n_; ++i) {
            std::size_t r = 0;
            for (std::size_t b = 0; b < log2n; ++b)
                if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (log2n - 1 - b);
            bitrev_[i] = r;
        }
        twiddle_.resize(n_ / 2);
        for (std::size_t k = 0; k < n_ / 2; ++k) {
            const double ang = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(n_);
            twiddle_[k] = cplx(std::cos(ang), std::sin(ang));
        }
    }

    std::size_t size() const { return n_; }

    void forward(std::vector<cplx>& a) const { transform(a, false); }

    void inverse(std::vector<cplx>& a) const {
        transform(a, true);
        const double s = 1.0 / static_cast<double>(n_);
        for (auto& v : a) v *= s;
    }

  private:
    static constexpr double kPi = 3.14159265358979323846;

    void transform(std::vector<cplx>& a, bool invert) const {
        if (pow2_) {
            radix2(a, invert);
        } else {
            naive(a, invert);
        }
    }

    void radix2(std::vector<cplx>& a, bool invert) const {
        for (std::size_t i = 0; i < n_; ++i)
            if (i < bitrev_[i]) std::swap(a[i], a[bitrev_[i]]);
        for (std::size_t len = 2; len <= n_; len <<= 1) {
            const std::size_t stride = n_ / len;
            for (std::size_t i = 0; i < n_; i += len) {
                for (std::size_t k = 0; k < len / 2; ++k) {
                    cplx w = twiddle_[k * stride];
                    if (invert) w = std::conj(w);
                    const cplx u = a[i + k];
                    const cplx v = a[i + k + len / 2] * w;
                    a[i + k] = u + v;
                    a[i + k + len / 2] = u - v;
                }
            }
        }
    }

    void naive(std::vector<cplx>& a, bool invert) const {
        const double sign = invert ? 1.0 : -1.0;
        std::vector<cplx> out(n_);
        for (std::size_t k = 0; k < n_; ++k) {
            cplx acc(0.0, 0.0);
            for (std::size_t n = 0; n < n_; ++n) {
                const double ang = sign * 2.0 * kPi * static_cast<double>(k * n % n_) / static_cast<double>(n_);
                acc += a[n] * cplx(std::cos(ang), std::sin(ang));
            }
            out[k] = acc;
        }
        a = std::move(out);
    }

    std::size_t n_;
    bool pow2_;
    std::vector<std::size_t> bitrev_;
    std::vector<cplx> twiddle_;
};

}  // namespace apadiag

// matrix.hpp - row-major matrix storage plus the three GEMM forms the
// network needs (x·Wᵀ forward, g·W input-gradient, gᵀ·x weight-gradient).
//
// Kernels use fixed-length accumulator banks / independent output elements so
// the compiler can vectorize without reassociation flags. Threading splits
// only across disjoint output rows and each element keeps a fixed serial
// reduction order, so results are bitwise independent of the thread count.

#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

#include "apadiag/common.hpp"

namespace apadiag {

template <typename T>
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, T{}) {}

    T* row(std::size_t i) { return data.data() + i * cols; }
    const T* row(std::size_t i) const { return data.data() + i * cols; }

    T& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    T& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    const T& at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::size_t size() const { return data.size(); }
    void zero() { std::fill(data.begin(), data.end(), T{}); }
};

namespace detail {

// Dot product with a bank of independent accumulators; the fixed combine
// order keeps results reproducible while still exposing SIMD parallelism.
template <typename T>
T dot_banked(const T* a, const T* b, std::size_t n) {
    constexpr std::size_t kLanes = 64 / sizeof(T);
    T acc[kLanes] = {};
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes)
        for (std::size_t u = 0; u < kLanes; ++u) acc[u] += a[i + u] * b[i + u];
    T tail{};
    for (; i < n; ++i) tail += a[i] * b[i];
    T s{};
    for (std::size_t u = 0; u < kLanes; ++u) s += acc[u];
    return s + tail;
}

inline void require_shape(bool ok, const std::string& what) {
    if (!ok) throw ShapeError("shape mismatch: " + what);
}

}  // namespace detail

// C = A · Bᵀ.  A: m×k, B: n×k, C: m×n.
template <typename T>
void gemm_nt(const Matrix<T>& A, const Matrix<T>& B, Matrix<T>& C) {
    detail::require_shape(A.cols == B.cols, "gemm_nt inner dims");
    detail::require_shape(C.rows == A.rows && C.cols == B.rows, "gemm_nt output dims");
    const std::size_t k = A.cols;
    parallel_for(A.rows, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t i = r0; i < r1; ++i) {
            const T* ai = A.row(i);
            T* ci = C.row(i);
            for (std::size_t j = 0; j < B.rows; ++j) ci[j] = detail::dot_banked(ai, B.row(j), k);
        }
    });
}

// C = A · B.  A: m×k, B: k×n, C: m×n.  Inner loop is an axpy over B's rows,
// so the k-sum order per output element is fixed.
template <typename T>
void gemm_nn(const Matrix<T>& A, const Matrix<T>& B, Matrix<T>& C) {
    detail::require_shape(A.cols == B.rows, "gemm_nn inner dims");
    detail::require_shape(C.rows == A.rows && C.cols == B.cols, "gemm_nn output dims");
    const std::size_t n = B.cols;
    parallel_for(A.rows, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t i = r0; i < r1; ++i) {
            T* ci = C.row(i);
            std::fill(ci, ci + n, T{});
            const T* ai = A.row(i);
            for (std::size_t k = 0; k < A.cols; ++k) {
                const T a = ai[k];
                const T* bk = B.row(k);
                for (std::size_t j = 0; j < n; ++j) ci[j] += a * bk[j];
            }
        }
    });
}

// C += Aᵀ · B.  A: m×r, B: m×c, C: r×c.  Threads own disjoint row ranges of
// C (columns of A), each scanning all of A/B, so accumulation stays ordered.
template <typename T>
void gemm_tn_acc(const Matrix<T>& A, const Matrix<T>& B, Matrix<T>& C) {
    detail::require_shape(A.rows == B.rows, "gemm_tn_acc sample dims");
    detail::require_shape(C.rows == A.cols && C.cols == B.cols, "gemm_tn_acc output dims");
    const std::size_t n = B.cols;
    parallel_for(C.rows, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t s = 0; s < A.rows; ++s) {
            const T* as = A.row(s);
            const T* bs = B.row(s);
            for (std::size_t j = r0; j < r1; ++j) {
                const T a = as[j];
                T* cj = C.row(j);
                for (std::size_t t = 0; t < n; ++t) cj[t] += a * bs[t];
            }
        }
    });
}

}  // namespace apadiag

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lrbatch/common.hpp"

namespace lrbatch {

// =============================================================================
// Plain row-major dense block. Carrier for intermediates and oracle results.
struct DenseBlock {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    DenseBlock() = default;

    DenseBlock(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    DenseBlock(std::size_t r, std::size_t c, std::vector<double> d)
        : rows(r), cols(c), data(std::move(d)) {
        require_shape(data.size() == rows * cols,
                      "DenseBlock: data length " + std::to_string(data.size()) +
                          " != rows*cols " + std::to_string(rows * cols));
    }

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    static DenseBlock identity(std::size_t n) {
        DenseBlock b(n, n);
        for (std::size_t i = 0; i < n; ++i) b.at(i, i) = 1.0;
        return b;
    }
};

// Raw triple-loop product on row-major buffers. Oracle primitive: no blocking,
// no reassociation; k ascends so the summation order is fixed.
// When `flops` is non-null it accumulates two per multiply-add, counted in the
// inner loop rather than derived from the shape.
inline void gemm_naive_raw(const double* a, const double* b, double* c,
                           std::size_t m, std::size_t k, std::size_t n,
                           bool accumulate, std::uint64_t* flops = nullptr) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double sum = accumulate ? c[i * n + j] : 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                sum += a[i * k + p] * b[p * n + j];
                if (flops) *flops += 2;
            }
            c[i * n + j] = sum;
        }
    }
}

inline void dense_gemm_naive(const DenseBlock& a, const DenseBlock& b, DenseBlock& out,
                             bool accumulate, std::uint64_t* flops = nullptr) {
    require_shape(a.cols == b.rows,
                  "dense_gemm_naive: a is " + std::to_string(a.rows) + "x" +
                      std::to_string(a.cols) + " but b is " + std::to_string(b.rows) + "x" +
                      std::to_string(b.cols));
    require_shape(out.rows == a.rows && out.cols == b.cols,
                  "dense_gemm_naive: output is " + std::to_string(out.rows) + "x" +
                      std::to_string(out.cols) + ", expected " + std::to_string(a.rows) + "x" +
                      std::to_string(b.cols));
    gemm_naive_raw(a.data.data(), b.data.data(), out.data.data(), a.rows, a.cols, b.cols,
                   accumulate, flops);
}

inline DenseBlock dense_gemm_naive(const DenseBlock& a, const DenseBlock& b,
                                   std::uint64_t* flops = nullptr) {
    DenseBlock out(a.rows, b.cols);
    dense_gemm_naive(a, b, out, false, flops);
    return out;
}

} // namespace lrbatch

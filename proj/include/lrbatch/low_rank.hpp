#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lrbatch/common.hpp"
#include "lrbatch/dense.hpp"

namespace lrbatch {

// =============================================================================
/// One factorized matrix U * X * Vt with dimensions (m, n, rank). Storage is
/// row major for every factor: u is m x rank, x is rank x rank, vt is rank x n.
struct LowRankOperand {
    std::size_t m = 0;
    std::size_t n = 0;
    std::size_t rank = 0;
    std::vector<double> u;
    std::vector<double> x;
    std::vector<double> vt;

    LowRankOperand() = default;

    LowRankOperand(std::size_t m_, std::size_t n_, std::size_t rank_)
        : m(m_), n(n_), rank(rank_) {
        validate_dims();
        u.assign(m * rank, 0.0);
        x.assign(rank * rank, 0.0);
        vt.assign(rank * n, 0.0);
    }

    LowRankOperand(std::size_t m_, std::size_t n_, std::size_t rank_, std::vector<double> u_,
                   std::vector<double> x_, std::vector<double> vt_)
        : m(m_), n(n_), rank(rank_), u(std::move(u_)), x(std::move(x_)), vt(std::move(vt_)) {
        validate_dims();
        require_shape(u.size() == m * rank, "LowRankOperand: u length != m*rank");
        require_shape(x.size() == rank * rank, "LowRankOperand: x length != rank*rank");
        require_shape(vt.size() == rank * n, "LowRankOperand: vt length != rank*n");
    }

    static LowRankOperand random(std::size_t m, std::size_t n, std::size_t rank,
                                 NormalSource& src) {
        LowRankOperand op(m, n, rank);
        src.fill(op.u.data(), op.u.size());
        src.fill(op.x.data(), op.x.size());
        src.fill(op.vt.data(), op.vt.size());
        return op;
    }

    // Stored entries of the factorization; smaller than m*n whenever the rank
    // satisfies rank < m*n / (m + n + rank).
    std::size_t stored_entries() const { return m * rank + rank * rank + rank * n; }

private:
    void validate_dims() const {
        require_shape(rank >= 1, "LowRankOperand: rank must be >= 1");
        require_shape(m >= rank && n >= rank,
                      "LowRankOperand: need m >= rank and n >= rank, got (" + std::to_string(m) +
                          ", " + std::to_string(n) + ", " + std::to_string(rank) + ")");
    }
};

/// Multiply-add operation count of one low rank product: 4*rank^3 + 2*rank^2*block_size.
inline std::uint64_t flops_per_item(std::uint64_t rank, std::uint64_t block_size) {
    return 4 * rank * rank * rank + 2 * rank * rank * block_size;
}

// =============================================================================
/// Reference product G = A_X * (A_Vt * B_U) * B_X on raw row-major buffers.
/// Three explicit naive multiplies with both intermediates materialized.
inline void low_rank_multiply_reference_raw(const double* a_vt, const double* b_u,
                                            const double* a_x, const double* b_x, double* g,
                                            std::size_t rank_a, std::size_t rank_b,
                                            std::size_t block, std::vector<double>& c_scratch,
                                            std::vector<double>& e_scratch,
                                            std::uint64_t* flops = nullptr) {
    c_scratch.assign(rank_a * rank_b, 0.0);
    e_scratch.assign(rank_a * rank_b, 0.0);
    // C = A_Vt (rank_a x block) * B_U (block x rank_b)
    gemm_naive_raw(a_vt, b_u, c_scratch.data(), rank_a, block, rank_b, false, flops);
    // E = A_X (rank_a x rank_a) * C
    gemm_naive_raw(a_x, c_scratch.data(), e_scratch.data(), rank_a, rank_a, rank_b, false, flops);
    // G = E * B_X (rank_b x rank_b)
    gemm_naive_raw(e_scratch.data(), b_x, g, rank_a, rank_b, rank_b, false, flops);
}

inline DenseBlock low_rank_multiply_reference(const LowRankOperand& a, const LowRankOperand& b,
                                              std::uint64_t* flops = nullptr) {
    require_shape(a.n == b.m, "low_rank_multiply_reference: A has " + std::to_string(a.n) +
                                  " columns but B has " + std::to_string(b.m) + " rows");
    DenseBlock g(a.rank, b.rank);
    std::vector<double> c_scratch, e_scratch;
    low_rank_multiply_reference_raw(a.vt.data(), b.u.data(), a.x.data(), b.x.data(),
                                    g.data.data(), a.rank, b.rank, a.n, c_scratch, e_scratch,
                                    flops);
    return g;
}

// =============================================================================
/// Contiguous storage for a batch of operand pairs. Each of the five arrays
/// holds batch_size matrices back to back, one array per matrix role:
///   a_vt_batch  rank_a x block_size     (row major, per item)
///   b_u_batch   block_size x rank_b
///   a_x_batch   rank_a x rank_a
///   b_x_batch   rank_b x rank_b
///   g_xy_batch  rank_a x rank_b         (zero initialized results)
struct LowRankBatch {
    std::size_t batch_size = 0;
    std::size_t block_size = 0;
    std::size_t rank_a = 0;
    std::size_t rank_b = 0;
    std::vector<double> a_vt_batch;
    std::vector<double> b_u_batch;
    std::vector<double> a_x_batch;
    std::vector<double> b_x_batch;
    std::vector<double> g_xy_batch;
    std::optional<std::uint64_t> seed; // recorded when randomly generated

    LowRankBatch() = default;

    LowRankBatch(std::size_t batch, std::size_t block, std::size_t ra, std::size_t rb)
        : batch_size(batch), block_size(block), rank_a(ra), rank_b(rb) {
        require_shape(batch >= 1, "LowRankBatch: batch_size must be >= 1");
        require_shape(block >= 1, "LowRankBatch: block_size must be >= 1");
        require_shape(ra >= 1 && rb >= 1, "LowRankBatch: ranks must be >= 1");
        a_vt_batch.assign(batch * ra * block, 0.0);
        b_u_batch.assign(batch * block * rb, 0.0);
        a_x_batch.assign(batch * ra * ra, 0.0);
        b_x_batch.assign(batch * rb * rb, 0.0);
        g_xy_batch.assign(batch * ra * rb, 0.0);
    }

    static LowRankBatch random(std::size_t batch, std::size_t block, std::size_t rank,
                               std::uint64_t seed) {
        LowRankBatch out(batch, block, rank, rank);
        NormalSource src(seed);
        src.fill(out.a_vt_batch.data(), out.a_vt_batch.size());
        src.fill(out.b_u_batch.data(), out.b_u_batch.size());
        src.fill(out.a_x_batch.data(), out.a_x_batch.size());
        src.fill(out.b_x_batch.data(), out.b_x_batch.size());
        out.seed = seed;
        return out;
    }

    const double* a_vt(std::size_t item) const {
        return a_vt_batch.data() + item * rank_a * block_size;
    }
    const double* b_u(std::size_t item) const {
        return b_u_batch.data() + item * block_size * rank_b;
    }
    const double* a_x(std::size_t item) const { return a_x_batch.data() + item * rank_a * rank_a; }
    const double* b_x(std::size_t item) const { return b_x_batch.data() + item * rank_b * rank_b; }
    double* g_xy(std::size_t item) { return g_xy_batch.data() + item * rank_a * rank_b; }
    const double* g_xy(std::size_t item) const {
        return g_xy_batch.data() + item * rank_a * rank_b;
    }

    void zero_results() { g_xy_batch.assign(g_xy_batch.size(), 0.0); }

    void validate() const {
        require_shape(batch_size >= 1 && block_size >= 1 && rank_a >= 1 && rank_b >= 1,
                      "LowRankBatch: degenerate dimensions");
        require_shape(a_vt_batch.size() == batch_size * rank_a * block_size,
                      "LowRankBatch: a_vt_batch length mismatch");
        require_shape(b_u_batch.size() == batch_size * block_size * rank_b,
                      "LowRankBatch: b_u_batch length mismatch");
        require_shape(a_x_batch.size() == batch_size * rank_a * rank_a,
                      "LowRankBatch: a_x_batch length mismatch");
        require_shape(b_x_batch.size() == batch_size * rank_b * rank_b,
                      "LowRankBatch: b_x_batch length mismatch");
        require_shape(g_xy_batch.size() == batch_size * rank_a * rank_b,
                      "LowRankBatch: g_xy_batch length mismatch");
    }
};

/// Reference result for one batch item, written into `g` (rank_a x rank_b).
inline void reference_item(const LowRankBatch& batch, std::size_t item, double* g,
                           std::vector<double>& c_scratch, std::vector<double>& e_scratch) {
    low_rank_multiply_reference_raw(batch.a_vt(item), batch.b_u(item), batch.a_x(item),
                                    batch.b_x(item), g, batch.rank_a, batch.rank_b,
                                    batch.block_size, c_scratch, e_scratch);
}

} // namespace lrbatch

#pragma once

#include <vector>

#include "lrbatch/bench.hpp"
#include "lrbatch/dense.hpp"
#include "lrbatch/kernels.hpp"
#include "lrbatch/low_rank.hpp"

namespace lrbatch {

// =============================================================================
/// Weakly admissible block low-rank matrix: dense tiles on the diagonal,
/// low-rank tiles everywhere else, over a uniform block grid.
struct BlrMatrix {
    std::size_t n = 0;
    std::size_t block_size = 0;
    std::size_t rank = 0;
    std::size_t tiles = 0;
    std::vector<DenseBlock> diagonal;          // tiles entries, block x block
    std::vector<LowRankOperand> off_diagonal;  // tiles*(tiles-1), row-major order

    BlrMatrix(std::size_t n_, std::size_t block_size_, std::size_t rank_)
        : n(n_), block_size(block_size_), rank(rank_) {
        require_shape(block_size >= 1 && n >= block_size, "BlrMatrix: bad block size");
        require_shape(n % block_size == 0,
                      "BlrMatrix: n = " + std::to_string(n) + " is not a multiple of block_size " +
                          std::to_string(block_size));
        require_shape(rank >= 1 && rank <= block_size, "BlrMatrix: rank must be in [1, block]");
        tiles = n / block_size;
    }

    std::size_t off_index(std::size_t i, std::size_t j) const {
        return i * (tiles - 1) + (j < i ? j : j - 1);
    }

    const LowRankOperand& off_tile(std::size_t i, std::size_t j) const {
        return off_diagonal[off_index(i, j)];
    }

    static BlrMatrix random(std::size_t n, std::size_t block_size, std::size_t rank,
                            std::uint64_t seed) {
        BlrMatrix m(n, block_size, rank);
        NormalSource src(seed);
        m.diagonal.reserve(m.tiles);
        for (std::size_t i = 0; i < m.tiles; ++i) {
            DenseBlock d(block_size, block_size);
            src.fill(d.data.data(), d.data.size());
            m.diagonal.push_back(std::move(d));
        }
        if (m.tiles > 1) {
            m.off_diagonal.reserve(m.tiles * (m.tiles - 1));
            for (std::size_t i = 0; i < m.tiles; ++i)
                for (std::size_t j = 0; j < m.tiles; ++j)
                    if (i != j)
                        m.off_diagonal.push_back(
                            LowRankOperand::random(block_size, block_size, rank, src));
        }
        return m;
    }

    /// Exact dense assembly of all tiles (test oracle; the off-diagonal tiles
    /// are reconstructed from their factors, so no approximation error).
    DenseBlock reconstruct_dense() const {
        DenseBlock full(n, n);
        for (std::size_t ti = 0; ti < tiles; ++ti) {
            for (std::size_t tj = 0; tj < tiles; ++tj) {
                if (ti == tj) {
                    const DenseBlock& d = diagonal[ti];
                    for (std::size_t r = 0; r < block_size; ++r)
                        for (std::size_t c = 0; c < block_size; ++c)
                            full.at(ti * block_size + r, tj * block_size + c) = d.at(r, c);
                } else {
                    const LowRankOperand& lr = off_tile(ti, tj);
                    DenseBlock ux = dense_gemm_naive(
                        DenseBlock(lr.m, lr.rank, lr.u), DenseBlock(lr.rank, lr.rank, lr.x));
                    DenseBlock tile =
                        dense_gemm_naive(ux, DenseBlock(lr.rank, lr.n, lr.vt));
                    for (std::size_t r = 0; r < block_size; ++r)
                        for (std::size_t c = 0; c < block_size; ++c)
                            full.at(ti * block_size + r, tj * block_size + c) = tile.at(r, c);
                }
            }
        }
        return full;
    }
};

// =============================================================================
/// Marshals every off-diagonal tile times its right-hand-side block into one
/// batch for the packed engine. The rhs block rides as the right operand's
/// skinny factor with an identity small factor; both ranks are padded to
/// max(rank, nrhs) so the batch stays square in rank.
///
/// Item order is row-major over (i, j), j skipping the diagonal; G of item
/// (i, j) holds X_ij * Vt_ij * rhs_j in its first rank x nrhs entries.
inline LowRankBatch batch_from_blr(const BlrMatrix& m, const DenseBlock& rhs) {
    require_shape(rhs.rows == m.n, "batch_from_blr: rhs has " + std::to_string(rhs.rows) +
                                       " rows, matrix has dimension " + std::to_string(m.n));
    require_shape(m.tiles > 1, "batch_from_blr: single-tile matrix has no off-diagonal part");
    const std::size_t nrhs = rhs.cols;
    const std::size_t r_star = std::max(m.rank, nrhs);
    const std::size_t block = m.block_size;
    LowRankBatch batch(m.tiles * (m.tiles - 1), block, r_star, r_star);

    std::size_t item = 0;
    for (std::size_t i = 0; i < m.tiles; ++i) {
        for (std::size_t j = 0; j < m.tiles; ++j) {
            if (i == j) continue;
            const LowRankOperand& lr = m.off_tile(i, j);
            // a_vt: Vt (rank x block) into the first rank rows
            double* a_vt = batch.a_vt_batch.data() + item * r_star * block;
            std::memcpy(a_vt, lr.vt.data(), m.rank * block * sizeof(double));
            // b_u: rhs block j (block x nrhs) into the first nrhs columns
            double* b_u = batch.b_u_batch.data() + item * block * r_star;
            const double* rhs_block = rhs.data.data() + j * block * nrhs;
            if (r_star == nrhs) {
                std::memcpy(b_u, rhs_block, block * nrhs * sizeof(double));
            } else {
                for (std::size_t r = 0; r < block; ++r)
                    for (std::size_t c = 0; c < nrhs; ++c)
                        b_u[r * r_star + c] = rhs_block[r * nrhs + c];
            }
            // a_x: X (rank x rank) into the top-left corner
            double* a_x = batch.a_x_batch.data() + item * r_star * r_star;
            for (std::size_t r = 0; r < m.rank; ++r)
                std::memcpy(a_x + r * r_star, lr.x.data() + r * m.rank,
                            m.rank * sizeof(double));
            // b_x: identity on the first nrhs diagonal entries
            double* b_x = batch.b_x_batch.data() + item * r_star * r_star;
            for (std::size_t c = 0; c < nrhs; ++c) b_x[c * r_star + c] = 1.0;
            ++item;
        }
    }
    return batch;
}

/// y = M * rhs through the batched engine: dense diagonal tiles via the
/// naive product, off-diagonal contributions via packed_multiply, then a
/// fixed-order scatter-accumulate of U_ij * G_ij into the result blocks.
inline DenseBlock blr_matvec(const BlrMatrix& m, const DenseBlock& rhs, const PackingPlan& plan,
                             std::size_t workers = 1) {
    require_shape(rhs.rows == m.n, "blr_matvec: rhs has " + std::to_string(rhs.rows) +
                                       " rows, matrix has dimension " + std::to_string(m.n));
    const std::size_t nrhs = rhs.cols;
    const std::size_t block = m.block_size;
    DenseBlock y(m.n, nrhs);

    for (std::size_t i = 0; i < m.tiles; ++i) {
        // y_i += D_ii * rhs_i
        gemm_naive_raw(m.diagonal[i].data.data(), rhs.data.data() + i * block * nrhs,
                       y.data.data() + i * block * nrhs, block, block, nrhs, true);
    }
    if (m.tiles == 1) return y;

    LowRankBatch batch = batch_from_blr(m, rhs);
    packed_multiply(batch, plan, workers);

    const std::size_t r_star = batch.rank_a;
    std::vector<double> g_live(m.rank * nrhs);
    std::size_t item = 0;
    for (std::size_t i = 0; i < m.tiles; ++i) {
        for (std::size_t j = 0; j < m.tiles; ++j) {
            if (i == j) continue;
            const double* g = batch.g_xy(item);
            for (std::size_t r = 0; r < m.rank; ++r)
                for (std::size_t c = 0; c < nrhs; ++c) g_live[r * nrhs + c] = g[r * r_star + c];
            // y_i += U_ij * G_live
            gemm_naive_raw(m.off_tile(i, j).u.data(), g_live.data(),
                           y.data.data() + i * block * nrhs, block, m.rank, nrhs, true);
            ++item;
        }
    }
    return y;
}

/// Per-tile naive loop (oracle and timing comparator): three dense products
/// per off-diagonal tile, same fixed tile order as the batched path.
inline DenseBlock blr_matvec_naive(const BlrMatrix& m, const DenseBlock& rhs) {
    require_shape(rhs.rows == m.n, "blr_matvec_naive: shape mismatch");
    const std::size_t nrhs = rhs.cols;
    const std::size_t block = m.block_size;
    DenseBlock y(m.n, nrhs);
    std::vector<double> vt_x(m.rank * nrhs), x_vt_x(m.rank * nrhs);
    for (std::size_t i = 0; i < m.tiles; ++i)
        gemm_naive_raw(m.diagonal[i].data.data(), rhs.data.data() + i * block * nrhs,
                       y.data.data() + i * block * nrhs, block, block, nrhs, true);
    for (std::size_t i = 0; i < m.tiles; ++i) {
        for (std::size_t j = 0; j < m.tiles; ++j) {
            if (i == j) continue;
            const LowRankOperand& lr = m.off_tile(i, j);
            vt_x.assign(m.rank * nrhs, 0.0);
            x_vt_x.assign(m.rank * nrhs, 0.0);
            gemm_naive_raw(lr.vt.data(), rhs.data.data() + j * block * nrhs, vt_x.data(), m.rank,
                           block, nrhs, false);
            gemm_naive_raw(lr.x.data(), vt_x.data(), x_vt_x.data(), m.rank, m.rank, nrhs, false);
            gemm_naive_raw(lr.u.data(), x_vt_x.data(), y.data.data() + i * block * nrhs, block,
                           m.rank, nrhs, true);
        }
    }
    return y;
}

} // namespace lrbatch

#pragma once

#include <cstring>
#include <vector>

#include "lrbatch/low_rank.hpp"
#include "lrbatch/plan.hpp"

namespace lrbatch {

// =============================================================================
// Cache-sized staging buffers. Small matrices are copied into padded
// rank x rank tiles (zero outside the live region); skinny matrices are
// copied into panels sized for the register-tile kernels:
//   a_vt  column-major panels of width m_pack: panel p holds columns
//         [p*m_pack, ...) of A_Vt, laid out [k][i] -> k*width + i
//   b_u   row-major panels of width n_pack: [k][j] -> k*width + j
// Both reorderings are bijections of the source entries plus zero padding of
// the rank dimension up to the tile multiple.
// =============================================================================
struct PackedBuffers {
    std::size_t rank_a = 0, rank_b = 0;
    std::size_t padded_rank_a = 0, padded_rank_b = 0;
    std::size_t block = 0;
    std::size_t m_pack = 0, n_pack = 0;
    std::size_t small_capacity = 0;  // item pairs in a_x / b_x
    std::size_t skinny_capacity = 0; // items in a_vt / b_u
    AlignedArray a_x, b_x;
    AlignedArray a_vt, b_u;

    PackedBuffers() = default;

    PackedBuffers(const PackingPlan& plan, std::size_t rank_a_, std::size_t rank_b_,
                  std::size_t block_, std::size_t small_cap, std::size_t skinny_cap)
        : rank_a(rank_a_), rank_b(rank_b_), padded_rank_a(plan.padded_rank(rank_a_)),
          padded_rank_b(plan.padded_rank(rank_b_)), block(block_), m_pack(plan.m_pack),
          n_pack(plan.n_pack), small_capacity(small_cap), skinny_capacity(skinny_cap) {
        std::size_t align = plan.alignment_bytes;
        if (small_cap > 0) {
            a_x = AlignedArray(small_cap * padded_rank_a * padded_rank_a, align);
            b_x = AlignedArray(small_cap * padded_rank_b * padded_rank_b, align);
        }
        if (skinny_cap > 0) {
            a_vt = AlignedArray(skinny_cap * padded_rank_a * block, align);
            b_u = AlignedArray(skinny_cap * padded_rank_b * block, align);
        }
    }

    double* a_x_tile(std::size_t pos) { return a_x.data() + pos * padded_rank_a * padded_rank_a; }
    const double* a_x_tile(std::size_t pos) const {
        return a_x.data() + pos * padded_rank_a * padded_rank_a;
    }
    double* b_x_tile(std::size_t pos) { return b_x.data() + pos * padded_rank_b * padded_rank_b; }
    const double* b_x_tile(std::size_t pos) const {
        return b_x.data() + pos * padded_rank_b * padded_rank_b;
    }

    double* a_vt_slot(std::size_t slot) { return a_vt.data() + slot * padded_rank_a * block; }
    const double* a_vt_slot(std::size_t slot) const {
        return a_vt.data() + slot * padded_rank_a * block;
    }
    double* b_u_slot(std::size_t slot) { return b_u.data() + slot * padded_rank_b * block; }
    const double* b_u_slot(std::size_t slot) const {
        return b_u.data() + slot * padded_rank_b * block;
    }

    // Panel of columns starting at m_c (a multiple of m_pack); panels are
    // stored back to back so the offset is just block * m_c.
    const double* a_vt_panel(std::size_t slot, std::size_t m_c) const {
        return a_vt_slot(slot) + block * m_c;
    }
    const double* b_u_panel(std::size_t slot, std::size_t n_c) const {
        return b_u_slot(slot) + block * n_c;
    }
};

// -----------------------------------------------------------------------------
// Small-matrix packing (outer chunk)
// -----------------------------------------------------------------------------

namespace detail {

inline void pack_padded_tile(const double* src, std::size_t rank, double* dst,
                             std::size_t padded) {
    if (padded == rank) {
        std::memcpy(dst, src, rank * rank * sizeof(double));
        return;
    }
    std::memset(dst, 0, padded * padded * sizeof(double));
    for (std::size_t i = 0; i < rank; ++i)
        std::memcpy(dst + i * padded, src + i * rank, rank * sizeof(double));
}

} // namespace detail

/// Packs positions [sub_begin, sub_end) of the chunk that starts at batch item
/// `chunk_begin`. Workers call this on disjoint sub-ranges of one chunk.
inline void pack_small(const LowRankBatch& batch, std::size_t chunk_begin, std::size_t sub_begin,
                       std::size_t sub_end, PackedBuffers& buffers) {
    for (std::size_t pos = sub_begin; pos < sub_end; ++pos) {
        std::size_t item = chunk_begin + pos;
        detail::pack_padded_tile(batch.a_x(item), batch.rank_a, buffers.a_x_tile(pos),
                                 buffers.padded_rank_a);
        detail::pack_padded_tile(batch.b_x(item), batch.rank_b, buffers.b_x_tile(pos),
                                 buffers.padded_rank_b);
    }
}

/// Packs one whole chunk of `chunk_len` items.
inline void pack_small(const LowRankBatch& batch, std::size_t chunk_begin, std::size_t chunk_len,
                       const PackingPlan& plan, PackedBuffers& buffers) {
    require_shape(chunk_len <= plan.b_small, "pack_small: chunk exceeds b_small");
    require_shape(chunk_len <= buffers.small_capacity, "pack_small: chunk exceeds buffer");
    pack_small(batch, chunk_begin, 0, chunk_len, buffers);
}

// -----------------------------------------------------------------------------
// Skinny packing (inner chunk)
// -----------------------------------------------------------------------------

/// Packs item `item` of the batch into skinny slot `slot`.
inline void pack_skinny(const LowRankBatch& batch, std::size_t item, std::size_t slot,
                        PackedBuffers& buffers) {
    const std::size_t block = buffers.block;
    const std::size_t ra = buffers.rank_a;
    const std::size_t rb = buffers.rank_b;

    // A_Vt (ra x block, row major) -> column-major panels of width m_pack.
    {
        const double* LRB_RESTRICT src = batch.a_vt(item);
        double* LRB_RESTRICT dst = buffers.a_vt_slot(slot);
        for (std::size_t m0 = 0; m0 < buffers.padded_rank_a; m0 += buffers.m_pack) {
            std::size_t w = std::min(buffers.m_pack, buffers.padded_rank_a - m0);
            double* LRB_RESTRICT panel = dst + block * m0;
            std::size_t live = m0 < ra ? std::min(w, ra - m0) : 0;
            for (std::size_t k = 0; k < block; ++k) {
                double* LRB_RESTRICT col = panel + k * w;
                for (std::size_t i = 0; i < live; ++i) col[i] = src[(m0 + i) * block + k];
                for (std::size_t i = live; i < w; ++i) col[i] = 0.0;
            }
        }
    }

    // B_U (block x rb, row major) -> row-major panels of width n_pack.
    {
        const double* LRB_RESTRICT src = batch.b_u(item);
        double* LRB_RESTRICT dst = buffers.b_u_slot(slot);
        if (buffers.padded_rank_b == rb && buffers.n_pack >= rb) {
            // single full-width panel: the packed layout equals the source
            std::memcpy(dst, src, block * rb * sizeof(double));
            return;
        }
        for (std::size_t n0 = 0; n0 < buffers.padded_rank_b; n0 += buffers.n_pack) {
            std::size_t w = std::min(buffers.n_pack, buffers.padded_rank_b - n0);
            double* LRB_RESTRICT panel = dst + block * n0;
            std::size_t live = n0 < rb ? std::min(w, rb - n0) : 0;
            for (std::size_t k = 0; k < block; ++k) {
                double* LRB_RESTRICT row = panel + k * w;
                const double* LRB_RESTRICT srow = src + k * rb + n0;
                for (std::size_t j = 0; j < live; ++j) row[j] = srow[j];
                for (std::size_t j = live; j < w; ++j) row[j] = 0.0;
            }
        }
    }
}

// -----------------------------------------------------------------------------
// Inverse mappings (bijection checks and verification)
// -----------------------------------------------------------------------------

inline std::vector<double> unpack_small_a(const PackedBuffers& buffers, std::size_t pos) {
    std::vector<double> out(buffers.rank_a * buffers.rank_a);
    const double* tile = buffers.a_x_tile(pos);
    for (std::size_t i = 0; i < buffers.rank_a; ++i)
        for (std::size_t j = 0; j < buffers.rank_a; ++j)
            out[i * buffers.rank_a + j] = tile[i * buffers.padded_rank_a + j];
    return out;
}

inline std::vector<double> unpack_small_b(const PackedBuffers& buffers, std::size_t pos) {
    std::vector<double> out(buffers.rank_b * buffers.rank_b);
    const double* tile = buffers.b_x_tile(pos);
    for (std::size_t i = 0; i < buffers.rank_b; ++i)
        for (std::size_t j = 0; j < buffers.rank_b; ++j)
            out[i * buffers.rank_b + j] = tile[i * buffers.padded_rank_b + j];
    return out;
}

/// Recovers A_Vt (rank_a x block, row major) from the column-major panels.
inline std::vector<double> unpack_skinny_a_vt(const PackedBuffers& buffers, std::size_t slot) {
    std::vector<double> out(buffers.rank_a * buffers.block);
    const double* base = buffers.a_vt_slot(slot);
    for (std::size_t m0 = 0; m0 < buffers.padded_rank_a; m0 += buffers.m_pack) {
        std::size_t w = std::min(buffers.m_pack, buffers.padded_rank_a - m0);
        const double* panel = base + buffers.block * m0;
        for (std::size_t k = 0; k < buffers.block; ++k)
            for (std::size_t i = 0; i < w && m0 + i < buffers.rank_a; ++i)
                out[(m0 + i) * buffers.block + k] = panel[k * w + i];
    }
    return out;
}

/// Recovers B_U (block x rank_b, row major) from the row-major panels.
inline std::vector<double> unpack_skinny_b_u(const PackedBuffers& buffers, std::size_t slot) {
    std::vector<double> out(buffers.block * buffers.rank_b);
    const double* base = buffers.b_u_slot(slot);
    for (std::size_t n0 = 0; n0 < buffers.padded_rank_b; n0 += buffers.n_pack) {
        std::size_t w = std::min(buffers.n_pack, buffers.padded_rank_b - n0);
        const double* panel = base + buffers.block * n0;
        for (std::size_t k = 0; k < buffers.block; ++k)
            for (std::size_t j = 0; j < w && n0 + j < buffers.rank_b; ++j)
                out[k * buffers.rank_b + (n0 + j)] = panel[k * w + j];
    }
    return out;
}

} // namespace lrbatch

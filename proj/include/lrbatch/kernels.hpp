#pragma once

#include <barrier>
#include <chrono>
#include <cstring>
#include <thread>
#include <vector>

#include "lrbatch/pack.hpp"

namespace lrbatch {

struct MultiplyStats {
    std::uint64_t g_entry_stores = 0; // result entries written by the kernels
    double pack_small_seconds = 0.0;
    double pack_skinny_seconds = 0.0;
    double kernel_seconds = 0.0;
};

// =============================================================================
// Micro kernels. Tiles are row-major slices held in fixed-size local
// accumulators; widths stay below kMaxTileWidth so the whole tile fits on the
// stack and the compiler can keep the inner loops vectorized.
// =============================================================================

/// C(m, n) = sum_k A_Vt(m_c+m, k) * B_U(k, n_c+n) over the full block.
/// `pa` is the column-major panel for m_c (mw values per k), `pb` the
/// row-major panel for n_c (nw values per k). k ascends; with
/// `dual_accumulator` even and odd k go to separate accumulators that are
/// added at the end.
inline void micro_kernel_cmn(const double* LRB_RESTRICT pa, const double* LRB_RESTRICT pb,
                             std::size_t block, std::size_t mw, std::size_t nw,
                             double* LRB_RESTRICT c, bool dual_accumulator = false) {
    for (std::size_t i = 0; i < mw * nw; ++i) c[i] = 0.0;
    if (!dual_accumulator) {
        for (std::size_t k = 0; k < block; ++k) {
            const double* LRB_RESTRICT a = pa + k * mw;
            const double* LRB_RESTRICT b = pb + k * nw;
            for (std::size_t m = 0; m < mw; ++m) {
                double am = a[m];
                double* LRB_RESTRICT crow = c + m * nw;
                for (std::size_t n = 0; n < nw; ++n) crow[n] += am * b[n];
            }
        }
        return;
    }
    double c2[kMaxTileWidth * kMaxTileWidth];
    for (std::size_t i = 0; i < mw * nw; ++i) c2[i] = 0.0;
    for (std::size_t k = 0; k < block; ++k) {
        const double* LRB_RESTRICT a = pa + k * mw;
        const double* LRB_RESTRICT b = pb + k * nw;
        double* LRB_RESTRICT acc = (k & 1) ? c2 : c;
        for (std::size_t m = 0; m < mw; ++m) {
            double am = a[m];
            double* LRB_RESTRICT crow = acc + m * nw;
            for (std::size_t n = 0; n < nw; ++n) crow[n] += am * b[n];
        }
    }
    for (std::size_t i = 0; i < mw * nw; ++i) c[i] += c2[i];
}

/// E(x, n) = sum_{m in slice} A_X(x_c+x, m_c+m) * C(m, n). The m sum covers
/// only the current slice; accumulation across slices happens in G.
inline void micro_kernel_exn(const double* LRB_RESTRICT a_x_tile, std::size_t padded_rank_a,
                             const double* LRB_RESTRICT c, std::size_t m_c, std::size_t x_c,
                             std::size_t mw, std::size_t nw, std::size_t xw,
                             double* LRB_RESTRICT e) {
    for (std::size_t i = 0; i < xw * nw; ++i) e[i] = 0.0;
    for (std::size_t m = 0; m < mw; ++m) {
        const double* LRB_RESTRICT crow = c + m * nw;
        for (std::size_t x = 0; x < xw; ++x) {
            double axm = a_x_tile[(x_c + x) * padded_rank_a + (m_c + m)];
            double* LRB_RESTRICT erow = e + x * nw;
            for (std::size_t n = 0; n < nw; ++n) erow[n] += axm * crow[n];
        }
    }
}

/// G(x_c+x, y_c+y) += sum_{n in slice} E(x, n) * B_X(n_c+n, y_c+y), read-
/// modify-write on the unpadded result region. Stores touch live entries
/// only; `store_count` tallies them when instrumentation is on.
inline void micro_kernel_gxy(const double* LRB_RESTRICT b_x_tile, std::size_t padded_rank_b,
                             const double* LRB_RESTRICT e, std::size_t x_c, std::size_t n_c,
                             std::size_t y_c, std::size_t xw, std::size_t nw, std::size_t yw,
                             double* LRB_RESTRICT g, std::size_t rank_a, std::size_t rank_b,
                             std::uint64_t* store_count = nullptr) {
    std::size_t live_x = x_c < rank_a ? std::min(xw, rank_a - x_c) : 0;
    std::size_t live_y = y_c < rank_b ? std::min(yw, rank_b - y_c) : 0;
    for (std::size_t x = 0; x < live_x; ++x) {
        double acc[kMaxTileWidth];
        double* LRB_RESTRICT grow = g + (x_c + x) * rank_b + y_c;
        for (std::size_t y = 0; y < live_y; ++y) acc[y] = grow[y];
        const double* LRB_RESTRICT erow = e + x * nw;
        for (std::size_t n = 0; n < nw; ++n) {
            double exn = erow[n];
            const double* LRB_RESTRICT brow = b_x_tile + (n_c + n) * padded_rank_b + y_c;
            for (std::size_t y = 0; y < live_y; ++y) acc[y] += exn * brow[y];
        }
        for (std::size_t y = 0; y < live_y; ++y) grow[y] = acc[y];
    }
    if (store_count) *store_count += live_x * live_y;
}

// Buffer-indexed wrappers. The skinny buffers feed cmn; the small-matrix
// buffers feed exn and gxy.
inline void micro_kernel_cmn(const PackedBuffers& buffers, std::size_t slot, std::size_t m_c,
                             std::size_t n_c, std::size_t mw, std::size_t nw, double* c,
                             bool dual_accumulator = false) {
    micro_kernel_cmn(buffers.a_vt_panel(slot, m_c), buffers.b_u_panel(slot, n_c), buffers.block,
                     mw, nw, c, dual_accumulator);
}

inline void micro_kernel_exn(const PackedBuffers& buffers, std::size_t pos, const double* c,
                             std::size_t m_c, std::size_t x_c, std::size_t mw, std::size_t nw,
                             std::size_t xw, double* e) {
    micro_kernel_exn(buffers.a_x_tile(pos), buffers.padded_rank_a, c, m_c, x_c, mw, nw, xw, e);
}

inline void micro_kernel_gxy(const PackedBuffers& buffers, std::size_t pos, const double* e,
                             std::size_t x_c, std::size_t n_c, std::size_t y_c, std::size_t xw,
                             std::size_t nw, std::size_t yw, double* g,
                             std::uint64_t* store_count = nullptr) {
    micro_kernel_gxy(buffers.b_x_tile(pos), buffers.padded_rank_b, e, x_c, n_c, y_c, xw, nw, yw,
                     g, buffers.rank_a, buffers.rank_b, store_count);
}

// =============================================================================
// Fused six-loop algorithm: scalar accumulators, one write of each result
// entry at the end of its item.
// =============================================================================
inline void fused_multiply(LowRankBatch& batch) {
    batch.validate();
    require_shape(batch.rank_a == batch.rank_b,
                  "fused_multiply: rank_a must equal rank_b (got " +
                      std::to_string(batch.rank_a) + " and " + std::to_string(batch.rank_b) + ")");
    const std::size_t rank = batch.rank_a;
    const std::size_t block = batch.block_size;
    std::vector<double> g_local(rank * rank);
    for (std::size_t item = 0; item < batch.batch_size; ++item) { // loop 1
        const double* a_vt = batch.a_vt(item);
        const double* b_u = batch.b_u(item);
        const double* a_x = batch.a_x(item);
        const double* b_x = batch.b_x(item);
        std::fill(g_local.begin(), g_local.end(), 0.0);
        for (std::size_t m = 0; m < rank; ++m) {         // loop 2
            for (std::size_t n = 0; n < rank; ++n) {     // loop 3
                double c_mn = 0.0;
                for (std::size_t k = 0; k < block; ++k)  // loop 4
                    c_mn += a_vt[m * block + k] * b_u[k * rank + n];
                for (std::size_t x = 0; x < rank; ++x) { // loop 5
                    double e_xn = a_x[x * rank + m] * c_mn;
                    double* grow = g_local.data() + x * rank;
                    const double* brow = b_x + n * rank;
                    for (std::size_t y = 0; y < rank; ++y) // loop 6
                        grow[y] += e_xn * brow[y];
                }
            }
        }
        std::memcpy(batch.g_xy(item), g_local.data(), rank * rank * sizeof(double));
    }
}

// =============================================================================
// Packed algorithm
// =============================================================================

namespace detail {

/// Whole-item register-tile path for padded rank == tile: the macro loops
/// collapse to one slice, G is produced in the accumulators and stored once.
template <int W>
inline void packed_item_regtile(const double* LRB_RESTRICT pa, const double* LRB_RESTRICT pb,
                                const double* LRB_RESTRICT ax, const double* LRB_RESTRICT bx,
                                std::size_t block, double* LRB_RESTRICT g, std::size_t rank_a,
                                std::size_t rank_b, bool dual_accumulator,
                                std::uint64_t* store_count) {
    double c[W * W];
    micro_kernel_cmn(pa, pb, block, W, W, c, dual_accumulator);
    double e[W * W];
    for (int i = 0; i < W * W; ++i) e[i] = 0.0;
    for (int m = 0; m < W; ++m) {
        const double* LRB_RESTRICT crow = c + m * W;
        for (int x = 0; x < W; ++x) {
            double axm = ax[x * W + m];
            double* LRB_RESTRICT erow = e + x * W;
            for (int n = 0; n < W; ++n) erow[n] += axm * crow[n];
        }
    }
    for (std::size_t x = 0; x < rank_a; ++x) {
        double acc[W] = {};
        const double* LRB_RESTRICT erow = e + x * W;
        for (int n = 0; n < W; ++n) {
            double exn = erow[n];
            const double* LRB_RESTRICT brow = bx + n * W;
            for (int y = 0; y < W; ++y) acc[y] += exn * brow[y];
        }
        double* LRB_RESTRICT grow = g + x * rank_b;
        for (std::size_t y = 0; y < rank_b; ++y) grow[y] = acc[y];
    }
    if (store_count) *store_count += rank_a * rank_b;
}

/// Macro-kernel loop nest over one item (generic widths).
inline void packed_item_generic(const PackedBuffers& small_bufs, std::size_t pos,
                                const PackedBuffers& skinny, std::size_t slot,
                                const PackingPlan& plan, double* g,
                                std::uint64_t* store_count) {
    const std::size_t ra_pad = small_bufs.padded_rank_a;
    const std::size_t rb_pad = small_bufs.padded_rank_b;
    double c[kMaxTileWidth * kMaxTileWidth];
    double e[kMaxTileWidth * kMaxTileWidth];
    for (std::size_t m_c = 0; m_c < ra_pad; m_c += plan.m_pack) {       // loop 2
        std::size_t mw = std::min(plan.m_pack, ra_pad - m_c);
        for (std::size_t n_c = 0; n_c < rb_pad; n_c += plan.n_pack) {   // loop 3
            std::size_t nw = std::min(plan.n_pack, rb_pad - n_c);
            micro_kernel_cmn(skinny, slot, m_c, n_c, mw, nw, c, plan.dual_accumulator);
            for (std::size_t x_c = 0; x_c < ra_pad; x_c += plan.x_pack) { // loop 5
                std::size_t xw = std::min(plan.x_pack, ra_pad - x_c);
                micro_kernel_exn(small_bufs, pos, c, m_c, x_c, mw, nw, xw, e);
                for (std::size_t y_c = 0; y_c < rb_pad; y_c += plan.y_pack) { // loop 6
                    std::size_t yw = std::min(plan.y_pack, rb_pad - y_c);
                    micro_kernel_gxy(small_bufs, pos, e, x_c, n_c, y_c, xw, nw, yw, g,
                                     store_count);
                }
            }
        }
    }
}

using StatsClock = std::chrono::steady_clock;

inline double seconds_since(StatsClock::time_point t0) {
    return std::chrono::duration<double>(StatsClock::now() - t0).count();
}

} // namespace detail

/// Cache-blocked batched multiply. Outer chunks of b_small item pairs are
/// packed into the shared small buffer (split across workers, then a
/// barrier); afterwards each worker owns a contiguous slice of the chunk and
/// streams its items through private skinny buffers. Per-item reduction order
/// is fixed, so results are identical for every worker count.
inline void packed_multiply(LowRankBatch& batch, const PackingPlan& plan, std::size_t workers = 1,
                            MultiplyStats* stats = nullptr) {
    batch.validate();
    require_shape(batch.rank_a == batch.rank_b,
                  "packed_multiply: rank_a must equal rank_b (got " +
                      std::to_string(batch.rank_a) + " and " + std::to_string(batch.rank_b) + ")");
    plan.validate(batch.rank_a);
    if (workers < 1) workers = 1;

    const std::size_t ra_pad = plan.padded_rank(batch.rank_a);
    const std::size_t rb_pad = plan.padded_rank(batch.rank_b);
    const std::size_t tile = plan.tile;
    const bool regtile_path = ra_pad == tile && rb_pad == tile && plan.m_pack == tile &&
                              plan.n_pack == tile && plan.x_pack == tile && plan.y_pack == tile &&
                              (tile == 4 || tile == 8 || tile == 16);
    if (!regtile_path) batch.zero_results(); // generic path accumulates into G

    const std::size_t chunk_cap = std::min(plan.b_small, batch.batch_size);
    PackedBuffers small_bufs(plan, batch.rank_a, batch.rank_b, batch.block_size, chunk_cap, 0);

    std::vector<MultiplyStats> worker_stats(workers);
    std::barrier sync(static_cast<std::ptrdiff_t>(workers));

    auto worker_body = [&](std::size_t w) {
        MultiplyStats local;
        std::uint64_t* store_count = stats ? &local.g_entry_stores : nullptr;
        PackedBuffers skinny(plan, batch.rank_a, batch.rank_b, batch.block_size, 0,
                             plan.b_skinny);
        for (std::size_t chunk_begin = 0; chunk_begin < batch.batch_size;
             chunk_begin += chunk_cap) {
            const std::size_t chunk_len = std::min(chunk_cap, batch.batch_size - chunk_begin);
            const std::size_t per = (chunk_len + workers - 1) / workers;
            const std::size_t sub_begin = std::min(w * per, chunk_len);
            const std::size_t sub_end = std::min(sub_begin + per, chunk_len);

            auto t0 = detail::StatsClock::now();
            pack_small(batch, chunk_begin, sub_begin, sub_end, small_bufs);
            if (stats) local.pack_small_seconds += detail::seconds_since(t0);
            sync.arrive_and_wait();

            // loop 1B/1C over this worker's slice, b_skinny items at a time
            for (std::size_t g0 = sub_begin; g0 < sub_end; g0 += plan.b_skinny) {
                const std::size_t group = std::min(plan.b_skinny, sub_end - g0);
                auto tp = detail::StatsClock::now();
                for (std::size_t s = 0; s < group; ++s)
                    pack_skinny(batch, chunk_begin + g0 + s, s, skinny);
                if (stats) local.pack_skinny_seconds += detail::seconds_since(tp);

                auto tk = detail::StatsClock::now();
                for (std::size_t s = 0; s < group; ++s) {
                    const std::size_t pos = g0 + s;
                    const std::size_t item = chunk_begin + pos;
                    double* g = batch.g_xy(item);
                    if (regtile_path) {
                        const double* pa = skinny.a_vt_slot(s);
                        const double* pb = skinny.b_u_slot(s);
                        const double* ax = small_bufs.a_x_tile(pos);
                        const double* bx = small_bufs.b_x_tile(pos);
                        if (tile == 4)
                            detail::packed_item_regtile<4>(pa, pb, ax, bx, batch.block_size, g,
                                                           batch.rank_a, batch.rank_b,
                                                           plan.dual_accumulator, store_count);
                        else if (tile == 8)
                            detail::packed_item_regtile<8>(pa, pb, ax, bx, batch.block_size, g,
                                                           batch.rank_a, batch.rank_b,
                                                           plan.dual_accumulator, store_count);
                        else
                            detail::packed_item_regtile<16>(pa, pb, ax, bx, batch.block_size, g,
                                                            batch.rank_a, batch.rank_b,
                                                            plan.dual_accumulator, store_count);
                    } else {
                        detail::packed_item_generic(small_bufs, pos, skinny, s, plan, g,
                                                    store_count);
                    }
                }
                if (stats) local.kernel_seconds += detail::seconds_since(tk);
            }
            sync.arrive_and_wait();
        }
        worker_stats[w] = local;
    };

    if (workers == 1) {
        worker_body(0);
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers - 1);
        for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker_body, w);
        worker_body(0);
        for (auto& t : pool) t.join();
    }

    if (stats) {
        stats->g_entry_stores = 0;
        double best = -1.0;
        for (const auto& ws : worker_stats) {
            stats->g_entry_stores += ws.g_entry_stores;
            double total = ws.pack_small_seconds + ws.pack_skinny_seconds + ws.kernel_seconds;
            if (total > best) {
                best = total;
                stats->pack_small_seconds = ws.pack_small_seconds;
                stats->pack_skinny_seconds = ws.pack_skinny_seconds;
                stats->kernel_seconds = ws.kernel_seconds;
            }
        }
    }
}

} // namespace lrbatch

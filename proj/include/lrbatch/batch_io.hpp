#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>

#include "lrbatch/low_rank.hpp"

// Flat binary batch file. All integers are little-endian uint64, all matrix
// entries little-endian IEEE-754 doubles:
//
//   bytes 0..7    magic "LRBATCH1"
//   bytes 8..39   batch_size, block_size, rank_a, rank_b
//   then the four operand arrays back to back, each batch_size matrices:
//   a_vt (rank_a x block_size), b_u (block_size x rank_b),
//   a_x (rank_a x rank_a), b_x (rank_b x rank_b)
//
// Result blocks are not stored; loading yields zeroed g_xy.

namespace lrbatch {

inline constexpr char kBatchMagic[8] = {'L', 'R', 'B', 'A', 'T', 'C', 'H', '1'};

static_assert(std::endian::native == std::endian::little,
              "batch file i/o assumes a little-endian host");

inline void save_batch(const LowRankBatch& batch, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path);
    auto put_u64 = [&](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
    out.write(kBatchMagic, 8);
    put_u64(batch.batch_size);
    put_u64(batch.block_size);
    put_u64(batch.rank_a);
    put_u64(batch.rank_b);
    auto put_doubles = [&](const std::vector<double>& v) {
        out.write(reinterpret_cast<const char*>(v.data()),
                  static_cast<std::streamsize>(v.size() * sizeof(double)));
    };
    put_doubles(batch.a_vt_batch);
    put_doubles(batch.b_u_batch);
    put_doubles(batch.a_x_batch);
    put_doubles(batch.b_x_batch);
    if (!out) throw IoError("write failed: " + path);
}

inline LowRankBatch load_batch(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kBatchMagic, 8) != 0)
        throw ParseError("not a batch file (bad magic): " + path);
    auto get_u64 = [&]() {
        std::uint64_t v = 0;
        in.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    std::uint64_t batch = get_u64();
    std::uint64_t block = get_u64();
    std::uint64_t ra = get_u64();
    std::uint64_t rb = get_u64();
    if (!in) throw ParseError("truncated batch header: " + path);
    LowRankBatch out(batch, block, ra, rb);
    auto get_doubles = [&](std::vector<double>& v) {
        in.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(v.size() * sizeof(double)));
    };
    get_doubles(out.a_vt_batch);
    get_doubles(out.b_u_batch);
    get_doubles(out.a_x_batch);
    get_doubles(out.b_x_batch);
    if (!in) throw ParseError("truncated batch payload: " + path);
    return out;
}

} // namespace lrbatch

#include <catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>

#include "lrbatch/batch_io.hpp"
#include "lrbatch/dense.hpp"
#include "lrbatch/low_rank.hpp"

using namespace lrbatch;

namespace {

LowRankOperand ones_operand(std::size_t m, std::size_t n, std::size_t rank) {
    LowRankOperand op(m, n, rank);
    std::fill(op.u.begin(), op.u.end(), 1.0);
    std::fill(op.x.begin(), op.x.end(), 1.0);
    std::fill(op.vt.begin(), op.vt.end(), 1.0);
    return op;
}

} // namespace

TEST_CASE("dense_gemm_naive basics") {
    DenseBlock id = DenseBlock::identity(3);
    DenseBlock m(3, 3, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    DenseBlock r = dense_gemm_naive(id, m);
    REQUIRE(r.data == m.data);

    DenseBlock z(2, 5);
    DenseBlock any(5, 4, std::vector<double>(20, 3.25));
    DenseBlock zr = dense_gemm_naive(z, any);
    for (double v : zr.data) REQUIRE(v == 0.0);

    DenseBlock a(2, 2, {1, 2, 3, 4});
    DenseBlock b(2, 2, {5, 6, 7, 8});
    DenseBlock c = dense_gemm_naive(a, b);
    REQUIRE(c.data == std::vector<double>{19, 22, 43, 50});
}

TEST_CASE("dense_gemm_naive accumulate flag") {
    DenseBlock a(2, 2, {1, 0, 0, 1});
    DenseBlock b(2, 2, {1, 2, 3, 4});
    DenseBlock out(2, 2, {10, 10, 10, 10});
    dense_gemm_naive(a, b, out, true);
    REQUIRE(out.data == std::vector<double>{11, 12, 13, 14});
    dense_gemm_naive(a, b, out, false);
    REQUIRE(out.data == b.data);
}

TEST_CASE("dense_gemm_naive shape errors name the offending pair") {
    DenseBlock a(2, 3), b(4, 2);
    REQUIRE_THROWS_AS(dense_gemm_naive(a, b), ShapeError);
    REQUIRE_THROWS_WITH(dense_gemm_naive(a, b),
                        Catch::Matchers::ContainsSubstring("2x3") &&
                            Catch::Matchers::ContainsSubstring("4x2"));
}

TEST_CASE("reference multiply trivial shapes") {
    DenseBlock g1 = low_rank_multiply_reference(ones_operand(1, 1, 1), ones_operand(1, 1, 1));
    REQUIRE(g1.rows == 1);
    REQUIRE(g1.cols == 1);
    REQUIRE(g1.data[0] == 1.0);

    DenseBlock g4 = low_rank_multiply_reference(ones_operand(4, 4, 1), ones_operand(4, 4, 1));
    REQUIRE(g4.data[0] == 4.0);
}

TEST_CASE("reference multiply equals stepwise dense oracle") {
    const std::size_t rank = 8, block = 512;
    NormalSource src(1234);
    LowRankOperand a = LowRankOperand::random(block, block, rank, src);
    LowRankOperand b = LowRankOperand::random(block, block, rank, src);

    DenseBlock got = low_rank_multiply_reference(a, b);

    DenseBlock c = dense_gemm_naive(DenseBlock(rank, block, a.vt), DenseBlock(block, rank, b.u));
    DenseBlock e = dense_gemm_naive(DenseBlock(rank, rank, a.x), c);
    DenseBlock expect = dense_gemm_naive(e, DenseBlock(rank, rank, b.x));

    REQUIRE(got.rows == rank);
    REQUIRE(got.cols == rank);
    for (std::size_t i = 0; i < got.data.size(); ++i) {
        double rel = std::abs(got.data[i] - expect.data[i]) /
                     std::max(1e-300, std::abs(expect.data[i]));
        REQUIRE(rel < 1e-13);
    }
}

TEST_CASE("reference multiply rejects mismatched inner dimension") {
    LowRankOperand a(8, 16, 2), b(8, 8, 2);
    REQUIRE_THROWS_AS(low_rank_multiply_reference(a, b), ShapeError);
}

TEST_CASE("flops_per_item formula") {
    REQUIRE(flops_per_item(8, 512) == 67584);
    REQUIRE(flops_per_item(1, 1) == 6);
    REQUIRE(flops_per_item(32, 2048) == 4325376);
}

TEST_CASE("flops_per_item matches instrumented oracle count") {
    for (std::size_t rank : {1u, 4u, 8u, 16u, 32u}) {
        for (std::size_t block : {1u, 256u, 512u}) {
            LowRankBatch batch = LowRankBatch::random(1, block, rank, 7 + rank + block);
            std::vector<double> g(rank * rank, 0.0), c_scratch, e_scratch;
            std::uint64_t counted = 0;
            low_rank_multiply_reference_raw(batch.a_vt(0), batch.b_u(0), batch.a_x(0),
                                            batch.b_x(0), g.data(), rank, rank, block,
                                            c_scratch, e_scratch, &counted);
            REQUIRE(counted == flops_per_item(rank, block));
        }
    }
}

TEST_CASE("storage economy holds whenever the rank bound does") {
    NormalSource src(99);
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t m = 1 + rng() % 200;
        std::size_t n = 1 + rng() % 200;
        std::size_t rank = 1 + rng() % std::min(m, n);
        LowRankOperand op(m, n, rank);
        if (rank * (m + n + rank) < m * n) // rank < m*n/(m+n+rank)
            REQUIRE(op.stored_entries() < m * n);
    }
}

TEST_CASE("operand invariants enforced") {
    REQUIRE_THROWS_AS(LowRankOperand(2, 8, 4), ShapeError);  // m < rank
    REQUIRE_THROWS_AS(LowRankOperand(8, 2, 4), ShapeError);  // n < rank
    REQUIRE_THROWS_AS(LowRankOperand(8, 8, 4, std::vector<double>(3, 0.0),
                                     std::vector<double>(16, 0.0), std::vector<double>(32, 0.0)),
                      ShapeError);
}

TEST_CASE("random batch is seeded and zero-initialized") {
    LowRankBatch a = LowRankBatch::random(3, 16, 4, 77);
    LowRankBatch b = LowRankBatch::random(3, 16, 4, 77);
    LowRankBatch c = LowRankBatch::random(3, 16, 4, 78);
    REQUIRE(a.seed.has_value());
    REQUIRE(*a.seed == 77);
    REQUIRE(a.a_vt_batch == b.a_vt_batch);
    REQUIRE(a.b_x_batch == b.b_x_batch);
    REQUIRE(a.a_vt_batch != c.a_vt_batch);
    for (double v : a.g_xy_batch) REQUIRE(v == 0.0);
}

TEST_CASE("batch file round trip is bit exact") {
    LowRankBatch batch = LowRankBatch::random(5, 33, 6, 2024);
    std::string path =
        (std::filesystem::temp_directory_path() / "lrbatch_io_test.lrb").string();
    save_batch(batch, path);
    LowRankBatch loaded = load_batch(path);
    REQUIRE(loaded.batch_size == batch.batch_size);
    REQUIRE(loaded.block_size == batch.block_size);
    REQUIRE(loaded.rank_a == batch.rank_a);
    REQUIRE(loaded.rank_b == batch.rank_b);
    REQUIRE(loaded.a_vt_batch == batch.a_vt_batch);
    REQUIRE(loaded.b_u_batch == batch.b_u_batch);
    REQUIRE(loaded.a_x_batch == batch.a_x_batch);
    REQUIRE(loaded.b_x_batch == batch.b_x_batch);
    for (double v : loaded.g_xy_batch) REQUIRE(v == 0.0);
    std::filesystem::remove(path);
}

TEST_CASE("batch file loader rejects bad magic") {
    std::string path =
        (std::filesystem::temp_directory_path() / "lrbatch_io_bad.lrb").string();
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOTABATCHFILE---garbage";
    }
    REQUIRE_THROWS_AS(load_batch(path), ParseError);
    std::filesystem::remove(path);
}

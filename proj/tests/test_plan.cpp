#include <catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "lrbatch/machine.hpp"
#include "lrbatch/plan.hpp"

using namespace lrbatch;

TEST_CASE("compute_b_small exact values") {
    REQUIRE(compute_b_small(28835840, 8) == 28160);
    REQUIRE(compute_b_small(1024, 8) == 1);
    REQUIRE(compute_b_small(28835840, 16) == 7040);
}

TEST_CASE("compute_b_small capacity error below one pair") {
    REQUIRE_THROWS_AS(compute_b_small(1023, 8), CapacityError);
    REQUIRE_THROWS_WITH(compute_b_small(100, 64),
                        Catch::Matchers::ContainsSubstring("b_small=1"));
}

TEST_CASE("plan capacity invariant over random inputs") {
    std::mt19937_64 rng(31337);
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t rank = 1 + rng() % 64;
        std::size_t pair = 2 * rank * rank * sizeof(double);
        std::size_t llc = pair + rng() % (512u * 1024 * 1024);
        std::size_t b_small = compute_b_small(llc, rank);
        REQUIRE(b_small >= 1);
        REQUIRE(b_small * 2 * rank * rank * 8 <= llc);
        // floor division: one more pair must not fit
        REQUIRE((b_small + 1) * pair > llc);
    }
}

TEST_CASE("slice widths per family and rank") {
    MachineModel intel = resolve_machine("skylake-x-6148");
    MachineModel amd = resolve_machine("epyc-7502");
    MachineModel fujitsu = resolve_machine("a64fx");

    PackingPlan p = make_packing_plan(intel, 8, 1024);
    REQUIRE(p.x_pack == 8);
    REQUIRE(p.y_pack == 8);
    REQUIRE(p.m_pack == 8);
    REQUIRE(p.n_pack == 8);
    REQUIRE(p.tile == 8);

    p = make_packing_plan(intel, 16, 1024);
    REQUIRE(p.x_pack == 4);
    REQUIRE(p.y_pack == 16);
    REQUIRE(p.m_pack == 8);
    REQUIRE(p.n_pack == 16);

    p = make_packing_plan(amd, 16, 1024);
    REQUIRE(p.x_pack == 4);
    REQUIRE(p.y_pack == 4);
    REQUIRE(p.m_pack == 4);
    REQUIRE(p.n_pack == 4);
    REQUIRE(p.tile == 4);

    p = make_packing_plan(fujitsu, 8, 1024);
    REQUIRE(p.x_pack == 8);
    REQUIRE(p.m_pack == 8);
    p = make_packing_plan(fujitsu, 32, 1024);
    REQUIRE(p.x_pack == 8);
    REQUIRE(p.n_pack == 8);
}

TEST_CASE("packing cache capacity feeds b_small") {
    MachineModel intel = resolve_machine("skylake-x-6148");
    REQUIRE(intel.packing_cache_bytes() == 28835840);
    PackingPlan p = make_packing_plan(intel, 8, 512);
    REQUIRE(p.b_small == 28160);

    // two-level machine: the L2 aggregate is the packing cache
    MachineModel fujitsu = resolve_machine("a64fx");
    REQUIRE(fujitsu.packing_cache_bytes() == std::size_t{4} * 8388608);
    p = make_packing_plan(fujitsu, 8, 512);
    REQUIRE(p.b_small == std::size_t{4} * 8388608 / 1024);
}

TEST_CASE("degenerate capacity falls back to b_small = 1 with a plan") {
    MachineModel intel = resolve_machine("skylake-x-6148");
    MachineModel tiny = intel;
    tiny.levels.back().count = 1;
    tiny.levels.back().size_bytes = 2048; // smaller than one rank-32 pair
    // keep sizes strictly increasing for validate()
    tiny.levels[0].size_bytes = 512;
    tiny.levels[1].size_bytes = 1024;
    PackingPlan p = make_packing_plan(tiny, 32, 64);
    REQUIRE(p.b_small == 1);
    p.validate(32);
}

TEST_CASE("widths clamp to the padded rank") {
    MachineModel intel = resolve_machine("skylake-x-6148");
    PackingPlan p = make_packing_plan(intel, 3, 64);
    REQUIRE(p.padded_rank(3) == 8);
    REQUIRE(p.m_pack == 8);
    REQUIRE(p.y_pack == 8);
    p = make_packing_plan(intel, 9, 64); // padded 16, rank > tile
    REQUIRE(p.x_pack == 4);
    REQUIRE(p.n_pack == 16);
}

TEST_CASE("plan text round trip") {
    MachineModel amd = resolve_machine("epyc-7502");
    PackingPlan p = make_packing_plan(amd, 16, 2048);
    p.dual_accumulator = true;
    PackingPlan q = plan_from_text(plan_to_text(p));
    REQUIRE(q.b_small == p.b_small);
    REQUIRE(q.b_skinny == p.b_skinny);
    REQUIRE(q.m_pack == p.m_pack);
    REQUIRE(q.n_pack == p.n_pack);
    REQUIRE(q.x_pack == p.x_pack);
    REQUIRE(q.y_pack == p.y_pack);
    REQUIRE(q.tile == p.tile);
    REQUIRE(q.llc_bytes == p.llc_bytes);
    REQUIRE(q.alignment_bytes == p.alignment_bytes);
    REQUIRE(q.dual_accumulator == p.dual_accumulator);
}

TEST_CASE("plan parser rejects unknown keys") {
    PackingPlan base;
    REQUIRE_THROWS_AS(plan_from_text("bogus = 3\n", base), ParseError);
}

TEST_CASE("plan validation rejects inconsistent widths") {
    PackingPlan p;
    p.tile = 8;
    p.m_pack = 5; // neither multiple nor divisor of 8, nor the padded rank
    REQUIRE_THROWS_AS(p.validate(8), ShapeError);
}

TEST_CASE("a64fx plan uses cache-line alignment") {
    MachineModel fujitsu = resolve_machine("a64fx");
    PackingPlan p = make_packing_plan(fujitsu, 8, 512);
    REQUIRE(p.alignment_bytes == 256);
}

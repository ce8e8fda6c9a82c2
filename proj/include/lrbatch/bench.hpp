#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lrbatch/kernels.hpp"
#include "lrbatch/low_rank.hpp"
#include "lrbatch/plan.hpp"

namespace lrbatch {

// -----------------------------------------------------------------------------
// Rate formulas
// -----------------------------------------------------------------------------

inline double gflops(std::uint64_t batch_size, std::uint64_t rank, std::uint64_t block_size,
                     double seconds) {
    require_shape(seconds > 0.0, "gflops: seconds must be positive");
    return static_cast<double>(batch_size) *
           static_cast<double>(flops_per_item(rank, block_size)) / seconds * 1e-9;
}

/// Read traffic only; the measure for machines whose caches overlap stores
/// with loads.
inline double bandwidth_overlapped_gib_s(std::uint64_t batch_size, std::uint64_t rank,
                                         std::uint64_t block_size, double seconds) {
    require_shape(seconds > 0.0, "bandwidth: seconds must be positive");
    require_shape(rank >= 1, "bandwidth: rank must be >= 1");
    double words = 2.0 * rank * rank + 2.0 * rank * block_size;
    return static_cast<double>(batch_size) * words * sizeof(double) /
           (seconds * 1073741824.0);
}

/// Adds the result write to the small-matrix term (3 rank^2 instead of 2) for
/// machines with non-overlapping transfers.
inline double bandwidth_nonoverlapped_gib_s(std::uint64_t batch_size, std::uint64_t rank,
                                            std::uint64_t block_size, double seconds) {
    require_shape(seconds > 0.0, "bandwidth: seconds must be positive");
    require_shape(rank >= 1, "bandwidth: rank must be >= 1");
    double words = 3.0 * rank * rank + 2.0 * rank * block_size;
    return static_cast<double>(batch_size) * words * sizeof(double) /
           (seconds * 1073741824.0);
}

// -----------------------------------------------------------------------------
// Baseline: the reference oracle applied item by item, parallelized over the
// batch with per-worker scratch.
// -----------------------------------------------------------------------------

inline void naive_multiply_batch(LowRankBatch& batch, std::size_t workers = 1) {
    batch.validate();
    if (workers < 1) workers = 1;
    workers = std::min(workers, batch.batch_size);
    auto body = [&](std::size_t begin, std::size_t end) {
        std::vector<double> c_scratch, e_scratch;
        for (std::size_t item = begin; item < end; ++item)
            reference_item(batch, item, batch.g_xy(item), c_scratch, e_scratch);
    };
    if (workers == 1) {
        body(0, batch.batch_size);
        return;
    }
    std::vector<std::thread> pool;
    std::size_t per = (batch.batch_size + workers - 1) / workers;
    for (std::size_t w = 1; w < workers; ++w) {
        std::size_t b = std::min(w * per, batch.batch_size);
        std::size_t e = std::min(b + per, batch.batch_size);
        pool.emplace_back(body, b, e);
    }
    body(0, std::min(per, batch.batch_size));
    for (auto& t : pool) t.join();
}

// -----------------------------------------------------------------------------
// Timing
// -----------------------------------------------------------------------------

inline double median_of(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    std::size_t mid = values.size() / 2;
    if (values.size() % 2 == 1) return values[mid];
    return 0.5 * (values[mid - 1] + values[mid]);
}

struct BenchConfig {
    std::size_t batch_size = 10000;
    std::size_t block_size = 1024;
    std::size_t rank = 8;
    std::size_t workers = 1;
    std::size_t repetitions = 5;
    std::size_t warmup_reps = 1;
    std::uint64_t seed = 42;
    std::string machine = "skylake-x-6148";
    std::string plan_file;
    std::string output_path; // empty: stdout
    bool run_baseline = true;

    void validate() const {
        require_shape(repetitions >= 1, "BenchConfig: repetitions must be >= 1");
    }
};

struct BenchResult {
    std::size_t batch_size = 0, block_size = 0, rank = 0, workers = 0;
    std::size_t repetitions = 0, warmup_reps = 0;
    std::uint64_t seed = 0;
    double wall_seconds = 0.0; // median of repetitions
    double gflops_rate = 0.0;
    double bandwidth_overlapped = 0.0;
    double bandwidth_nonoverlapped = 0.0;
    double pack_small_seconds = 0.0;
    double pack_skinny_seconds = 0.0;
    double kernel_seconds = 0.0;
    double other_seconds = 0.0;
    double baseline_seconds = 0.0; // 0 when the baseline was skipped
    double speedup = 0.0;
};

inline std::string bench_csv_header() {
    return "batch_size,block_size,rank,workers,repetitions,warmup_reps,seed,wall_s,gflops,"
           "bw_overlapped_gib_s,bw_nonoverlapped_gib_s,pack_small_s,pack_skinny_s,kernel_s,"
           "other_s,baseline_s,speedup";
}

inline std::string bench_csv_row(const BenchResult& r) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "%zu,%zu,%zu,%zu,%zu,%zu,%llu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g",
                  r.batch_size, r.block_size, r.rank, r.workers, r.repetitions, r.warmup_reps,
                  static_cast<unsigned long long>(r.seed), r.wall_seconds, r.gflops_rate,
                  r.bandwidth_overlapped, r.bandwidth_nonoverlapped, r.pack_small_seconds,
                  r.pack_skinny_seconds, r.kernel_seconds, r.other_seconds, r.baseline_seconds,
                  r.speedup);
    return buf;
}

inline BenchResult parse_bench_csv_row(const std::string& line) {
    BenchResult r;
    std::istringstream is(line);
    std::string tok;
    auto next = [&]() -> std::string {
        if (!std::getline(is, tok, ',')) throw ParseError("short CSV row: " + line);
        return tok;
    };
    r.batch_size = std::stoull(next());
    r.block_size = std::stoull(next());
    r.rank = std::stoull(next());
    r.workers = std::stoull(next());
    r.repetitions = std::stoull(next());
    r.warmup_reps = std::stoull(next());
    r.seed = std::stoull(next());
    r.wall_seconds = std::stod(next());
    r.gflops_rate = std::stod(next());
    r.bandwidth_overlapped = std::stod(next());
    r.bandwidth_nonoverlapped = std::stod(next());
    r.pack_small_seconds = std::stod(next());
    r.pack_skinny_seconds = std::stod(next());
    r.kernel_seconds = std::stod(next());
    r.other_seconds = std::stod(next());
    r.baseline_seconds = std::stod(next());
    r.speedup = std::stod(next());
    if (std::getline(is, tok, ',')) throw ParseError("trailing fields in CSV row: " + line);
    return r;
}

/// Times packed_multiply on a random batch: warmup, then the median of the
/// repetitions; the phase split comes from the median repetition. Verification
/// is not part of the timed section.
inline BenchResult run_bench(const BenchConfig& config, const PackingPlan& plan) {
    config.validate();
    BenchResult result;
    result.batch_size = config.batch_size;
    result.block_size = config.block_size;
    result.rank = config.rank;
    result.workers = config.workers;
    result.repetitions = config.repetitions;
    result.warmup_reps = config.warmup_reps;
    result.seed = config.seed;

    LowRankBatch batch =
        LowRankBatch::random(config.batch_size, config.block_size, config.rank, config.seed);

    using Clock = std::chrono::steady_clock;
    for (std::size_t i = 0; i < config.warmup_reps; ++i)
        packed_multiply(batch, plan, config.workers);

    std::vector<std::pair<double, MultiplyStats>> reps;
    for (std::size_t i = 0; i < config.repetitions; ++i) {
        MultiplyStats stats;
        auto t0 = Clock::now();
        packed_multiply(batch, plan, config.workers, &stats);
        double wall = std::chrono::duration<double>(Clock::now() - t0).count();
        reps.emplace_back(wall, stats);
    }
    std::sort(reps.begin(), reps.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    const auto& [wall, stats] = reps[reps.size() / 2];
    result.wall_seconds = wall;
    result.gflops_rate = gflops(config.batch_size, config.rank, config.block_size, wall);
    result.bandwidth_overlapped =
        bandwidth_overlapped_gib_s(config.batch_size, config.rank, config.block_size, wall);
    result.bandwidth_nonoverlapped =
        bandwidth_nonoverlapped_gib_s(config.batch_size, config.rank, config.block_size, wall);
    result.pack_small_seconds = stats.pack_small_seconds;
    result.pack_skinny_seconds = stats.pack_skinny_seconds;
    result.kernel_seconds = stats.kernel_seconds;
    result.other_seconds = std::max(
        0.0, wall - stats.pack_small_seconds - stats.pack_skinny_seconds - stats.kernel_seconds);

    if (config.run_baseline) {
        for (std::size_t i = 0; i < config.warmup_reps; ++i)
            naive_multiply_batch(batch, config.workers);
        std::vector<double> walls;
        for (std::size_t i = 0; i < config.repetitions; ++i) {
            auto t0 = Clock::now();
            naive_multiply_batch(batch, config.workers);
            walls.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
        }
        result.baseline_seconds = median_of(walls);
        result.speedup = result.baseline_seconds / result.wall_seconds;
    }
    return result;
}

} // namespace lrbatch

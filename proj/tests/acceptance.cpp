// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Heavier criteria print their elapsed time.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lrbatch/lrbatch.hpp"

using namespace lrbatch;

namespace {

int g_failures = 0;

void report(int id, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

void report_note(const std::string& note) {
    std::printf("       %s\n", note.c_str());
    std::fflush(stdout);
}

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

// Scale-aware entrywise relative error of the filled batch against
// precomputed expected results.
double max_rel_against(const LowRankBatch& batch, const std::vector<double>& expected) {
    const std::size_t entries = batch.rank_a * batch.rank_b;
    double worst = 0.0;
    for (std::size_t item = 0; item < batch.batch_size; ++item) {
        const double* e = expected.data() + item * entries;
        const double* got = batch.g_xy(item);
        double sumsq = 0.0;
        for (std::size_t i = 0; i < entries; ++i) sumsq += e[i] * e[i];
        double rms = std::sqrt(sumsq / static_cast<double>(entries));
        double floor = rms > 0.0 ? rms : 1.0;
        for (std::size_t i = 0; i < entries; ++i) {
            double scale = std::max(std::abs(e[i]), floor);
            worst = std::max(worst, std::abs(got[i] - e[i]) / scale);
        }
    }
    return worst;
}

std::vector<double> reference_all(const LowRankBatch& batch) {
    const std::size_t entries = batch.rank_a * batch.rank_b;
    std::vector<double> expected(batch.batch_size * entries, 0.0);
    std::vector<double> c_scratch, e_scratch;
    for (std::size_t item = 0; item < batch.batch_size; ++item)
        reference_item(batch, item, expected.data() + item * entries, c_scratch, e_scratch);
    return expected;
}

std::size_t physical_cores() {
    std::ifstream in("/proc/cpuinfo");
    std::set<std::pair<int, int>> cores;
    int phys = -1, core = -1;
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("physical id", 0) == 0) phys = std::atoi(line.c_str() + line.find(':') + 1);
        if (line.rfind("core id", 0) == 0) {
            core = std::atoi(line.c_str() + line.find(':') + 1);
            cores.insert({phys, core});
        }
    }
    if (!cores.empty()) return cores.size();
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

std::string cpu_model_name() {
    std::ifstream in("/proc/cpuinfo");
    std::string line;
    while (std::getline(in, line))
        if (line.rfind("model name", 0) == 0) return line.substr(line.find(':') + 1);
    return "unknown";
}

// ---------------------------------------------------------------------------

void criterion_1_oracle_equivalence() {
    double t0 = now_seconds();
    const std::size_t ranks[] = {1, 3, 4, 8, 16, 32};
    const std::size_t blocks[] = {1, 17, 256, 512, 1024, 2048};
    const std::size_t batches[] = {1, 7, 100, 1000};
    const std::size_t worker_counts[] = {1, 2, 8};
    const MachineModel machine = resolve_machine("skylake-x-6148");
    const double tol = 1e-12;

    double worst = 0.0;
    std::string worst_at;
    bool pass = true;
    for (std::size_t rank : ranks) {
        for (std::size_t block : blocks) {
            PackingPlan plan = make_packing_plan(machine, rank, block);
            for (std::size_t batch_n : batches) {
                std::uint64_t seed = 90000 + rank * 100 + block + batch_n;
                LowRankBatch batch = LowRankBatch::random(batch_n, block, rank, seed);
                std::vector<double> expected = reference_all(batch);
                auto check = [&](const char* what) {
                    double rel = max_rel_against(batch, expected);
                    if (rel > worst) {
                        worst = rel;
                        std::ostringstream os;
                        os << what << " rank=" << rank << " block=" << block
                           << " batch=" << batch_n;
                        worst_at = os.str();
                    }
                    if (rel >= tol) pass = false;
                };
                fused_multiply(batch);
                check("fused");
                for (std::size_t workers : worker_counts) {
                    batch.zero_results();
                    packed_multiply(batch, plan, workers);
                    check("packed");
                }
            }
        }
    }
    std::ostringstream os;
    os << "oracle equivalence over the full grid, max rel err " << worst << " (" << worst_at
       << "), tolerance 1e-12, " << static_cast<int>(now_seconds() - t0) << " s";
    report(1, pass, os.str());
}

void criterion_2_ecm_tables() {
    struct Check {
        const char* machine;
        const char* kernel;
        std::size_t stride;
        double expected;
    };
    const Check checks[] = {
        {"a64fx", "pack-bu", 8, 5.0},           {"a64fx", "pack-bu", 16, 6.0},
        {"a64fx", "pack-bu", 32, 8.0},          {"skylake-x-6148", "pack-bu", 8, 14.0},
        {"skylake-x-6148", "pack-bu", 16, 16.0}, {"skylake-x-6148", "pack-bu", 32, 20.0},
        {"epyc-7502", "pack-bu", 4, 4.0},       {"epyc-7502", "pack-bu", 8, 4.0},
        {"epyc-7502", "pack-bu", 16, 6.0},      {"a64fx", "cmn", 0, 4.5},
        {"skylake-x-6148", "cmn", 0, 4.66},     {"epyc-7502", "cmn", 0, 3.5},
        {"a64fx", "pack-av", 2048, 26.0},
    };
    bool pass = true;
    std::string bad;
    for (const Check& c : checks) {
        MachineModel m = resolve_machine(c.machine);
        double got = std::string(c.kernel) == "pack-bu" ? model_pack_bu(m, c.stride).t_ecm
                     : std::string(c.kernel) == "pack-av" ? model_pack_av(m, c.stride).t_ecm
                                                          : model_cmn(m).t_ecm;
        if (std::abs(got - c.expected) > 1e-9) {
            pass = false;
            std::ostringstream os;
            os << " " << c.machine << "/" << c.kernel << "/" << c.stride << " got " << got
               << " want " << c.expected;
            bad += os.str();
        }
    }
    report(2, pass,
           "analytical cycle counts reproduce all 13 published values exactly" + bad);
}

void criterion_3_b_small() {
    bool pass = compute_b_small(28835840, 8) == 28160;
    std::mt19937_64 rng(20240815);
    for (int trial = 0; trial < 1000 && pass; ++trial) {
        std::size_t rank = 1 + rng() % 64;
        std::size_t pair = 2 * rank * rank * sizeof(double);
        std::size_t llc = pair + rng() % (1u << 30);
        std::size_t b_small = compute_b_small(llc, rank);
        pass = b_small >= 1 && b_small * 2 * rank * rank * 8 <= llc;
    }
    report(3, pass,
           "compute_b_small(28835840, 8) = 28160 and the capacity invariant holds for 1000 "
           "random (llc, rank) pairs");
}

void criterion_4_determinism() {
    const MachineModel machine = resolve_machine("skylake-x-6148");
    PackingPlan plan = make_packing_plan(machine, 8, 512);
    LowRankBatch a = LowRankBatch::random(1000, 512, 8, 777);
    LowRankBatch b = LowRankBatch::random(1000, 512, 8, 777);
    packed_multiply(a, plan, 1);
    packed_multiply(b, plan, 8);
    bool pass = std::memcmp(a.g_xy_batch.data(), b.g_xy_batch.data(),
                            a.g_xy_batch.size() * sizeof(double)) == 0;
    LowRankBatch c = LowRankBatch::random(1000, 512, 8, 777);
    packed_multiply(c, plan, 2);
    pass = pass && a.g_xy_batch == c.g_xy_batch;
    report(4, pass,
           "identical seed and config give bitwise-identical results across worker counts "
           "1, 2, 8 (batch 1000, rank 8, block 512)");
}

void criterion_5_store_once() {
    const MachineModel machine = resolve_machine("skylake-x-6148");
    const std::size_t rank = 8, block = 512, batch_n = 200;
    PackingPlan plan = make_packing_plan(machine, rank, block);
    LowRankBatch batch = LowRankBatch::random(batch_n, block, rank, 31);
    MultiplyStats stats;
    packed_multiply(batch, plan, 4, &stats);
    bool pass = stats.g_entry_stores == batch_n * rank * rank;
    std::ostringstream os;
    os << "instrumented packed_multiply stores exactly rank^2 = 64 result entries per item at "
          "rank == tile ("
       << stats.g_entry_stores << " stores for " << batch_n << " items)";
    report(5, pass, os.str());
}

void criterion_6_formulas() {
    bool pass = std::abs(gflops(10000, 8, 512, 1.0) - 0.67584) < 1e-15;
    double expect_overlapped = 20000.0 * 16512.0 * 8.0 / 1073741824.0;
    pass = pass &&
           bandwidth_overlapped_gib_s(20000, 8, 1024, 1.0) == expect_overlapped;
    double expect_nonoverlapped = 20000.0 * 16576.0 * 8.0 / 1073741824.0;
    pass = pass &&
           bandwidth_nonoverlapped_gib_s(20000, 8, 1024, 1.0) == expect_nonoverlapped;
    pass = pass && bandwidth_nonoverlapped_gib_s(1, 1, 1, 1.0) == 5.0 * 8.0 / 1073741824.0;
    report(6, pass, "gflops(10000, 8, 512, 1 s) = 0.67584 and bandwidth formulas match hand "
                    "evaluations exactly");
}

void criterion_7_throughput() {
    double t0 = now_seconds();
    const std::size_t cores = physical_cores();
    const MachineModel machine = resolve_machine("skylake-x-6148");

    auto measure = [&](std::size_t batch_n, std::size_t block, std::size_t rank,
                       std::size_t workers) {
        PackingPlan plan = make_packing_plan(machine, rank, block);
        LowRankBatch batch = LowRankBatch::random(batch_n, block, rank, 2025);
        packed_multiply(batch, plan, workers); // warmup
        std::vector<double> packed_times, naive_times;
        for (int rep = 0; rep < 3; ++rep) {
            double s = now_seconds();
            packed_multiply(batch, plan, workers);
            packed_times.push_back(now_seconds() - s);
        }
        naive_multiply_batch(batch, workers); // warmup
        for (int rep = 0; rep < 3; ++rep) {
            double s = now_seconds();
            naive_multiply_batch(batch, workers);
            naive_times.push_back(now_seconds() - s);
        }
        return median_of(naive_times) / median_of(packed_times);
    };

    const std::size_t workers = std::max<std::size_t>(1, cores);
    double ratio = measure(10000, 1024, 8, workers);
    std::ostringstream os;
    os << "packed vs naive baseline at rank 8, block 1024, batch 10000, workers " << workers
       << ": " << ratio << "x";
    if (cores >= 4) {
        os << " (assert >= 1.5x on " << cores << " physical cores), "
           << static_cast<int>(now_seconds() - t0) << " s";
        report(7, ratio >= 1.5, os.str());
    } else {
        os << " (reported only: " << cores << " physical cores < 4), "
           << static_cast<int>(now_seconds() - t0) << " s";
        report(7, true, os.str());
    }
    // Reported, not asserted: other shapes including the large-rank crossover.
    struct Shape {
        std::size_t batch, block, rank;
    } shapes[] = {{2000, 512, 16}, {500, 512, 32}, {200, 512, 96}};
    for (const Shape& s : shapes) {
        double r = measure(s.batch, s.block, s.rank, workers);
        std::ostringstream note;
        note << "reported: rank " << s.rank << ", block " << s.block << ", batch " << s.batch
             << " -> " << r << "x vs naive baseline";
        report_note(note.str());
    }
}

void criterion_8_triad() {
    double t0 = now_seconds();
    // Use the bundled model matching the host when there is one; the sweep
    // shape is meaningful regardless, the prediction comparison is not.
    std::string model_name = cpu_model_name();
    std::string machine_name = "skylake-x-6148";
    bool matches = model_name.find("6148") != std::string::npos;
    if (model_name.find("7502") != std::string::npos) {
        machine_name = "epyc-7502";
        matches = true;
    } else if (model_name.find("A64FX") != std::string::npos ||
               model_name.find("a64fx") != std::string::npos) {
        machine_name = "a64fx";
        matches = true;
    }
    MachineModel machine = resolve_machine(machine_name);
    std::vector<std::size_t> working_sets = {16 * 1024, 256 * 1024, 4 * 1024 * 1024,
                                             64 * 1024 * 1024, 256u * 1024 * 1024};
    std::vector<TriadPoint> points = triad_sweep(machine, working_sets, 11);
    bool monotone = true;
    std::ostringstream series;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (i) series << ", ";
        series << points[i].working_set_bytes / 1024 << "Ki=" << points[i].cycles_per_vl;
        // nondecreasing medians; sizes on one cache plateau may tie, so allow
        // 5% timer noise between neighbours
        if (i && points[i].cycles_per_vl < points[i - 1].cycles_per_vl * 0.95) monotone = false;
    }
    std::ostringstream os;
    os << "triad medians nondecreasing from L1-sized to beyond-LLC working sets (cycles/VL: "
       << series.str() << "), " << static_cast<int>(now_seconds() - t0) << " s";
    report(8, monotone, os.str());

    if (matches) {
        const TriadPoint& mem_point = points.back();
        double rel = std::abs(mem_point.cycles_per_vl - mem_point.predicted_cycles_per_vl) /
                     mem_point.predicted_cycles_per_vl;
        std::ostringstream note;
        note << "memory-resident measurement " << mem_point.cycles_per_vl << " vs prediction "
             << mem_point.predicted_cycles_per_vl << " cycles/VL (" << rel * 100.0 << "%)";
        report_note(note.str());
        if (rel > 0.25) {
            ++g_failures;
            report_note("prediction comparison FAILED the 25% bound");
        }
    } else {
        report_note("prediction comparison skipped: host CPU (" + model_name +
                    " ) does not match a bundled machine model");
    }
}

void criterion_9_blr_matvec() {
    double t0 = now_seconds();
    const MachineModel machine = resolve_machine("skylake-x-6148");
    bool pass = true;
    double worst = 0.0;
    auto rel_check = [&](const DenseBlock& got, const DenseBlock& expect) {
        double rms = 0.0;
        for (double v : expect.data) rms += v * v;
        rms = std::sqrt(rms / static_cast<double>(expect.data.size()));
        double floor = rms > 0.0 ? rms : 1.0;
        double w = 0.0;
        for (std::size_t i = 0; i < expect.data.size(); ++i)
            w = std::max(w, std::abs(got.data[i] - expect.data[i]) /
                                std::max(std::abs(expect.data[i]), floor));
        worst = std::max(worst, w);
        if (w >= 1e-10) pass = false;
    };

    for (std::size_t tiles : {2u, 8u, 16u}) {
        for (std::size_t rank : {4u, 8u}) {
            for (std::size_t nrhs : {1u, 8u}) {
                const std::size_t block = 24;
                BlrMatrix m =
                    BlrMatrix::random(tiles * block, block, rank, 500 + tiles + rank + nrhs);
                DenseBlock rhs(tiles * block, nrhs);
                NormalSource src(600 + nrhs);
                src.fill(rhs.data.data(), rhs.data.size());
                PackingPlan plan = make_packing_plan(machine, std::max(rank, nrhs), block);
                DenseBlock got = blr_matvec(m, rhs, plan, 2);
                DenseBlock expect = dense_gemm_naive(m.reconstruct_dense(), rhs);
                rel_check(got, expect);
            }
        }
    }

    // linearity
    {
        const std::size_t block = 32, tiles = 6, rank = 8, nrhs = 4;
        BlrMatrix m = BlrMatrix::random(tiles * block, block, rank, 911);
        PackingPlan plan = make_packing_plan(machine, rank, block);
        DenseBlock r1(tiles * block, nrhs), r2(tiles * block, nrhs);
        NormalSource src(913);
        src.fill(r1.data.data(), r1.data.size());
        src.fill(r2.data.data(), r2.data.size());
        DenseBlock mix(tiles * block, nrhs);
        for (std::size_t i = 0; i < mix.data.size(); ++i)
            mix.data[i] = 2.5 * r1.data[i] - 0.75 * r2.data[i];
        DenseBlock y_mix = blr_matvec(m, mix, plan, 2);
        DenseBlock y1 = blr_matvec(m, r1, plan, 2);
        DenseBlock y2 = blr_matvec(m, r2, plan, 2);
        DenseBlock expect(tiles * block, nrhs);
        for (std::size_t i = 0; i < expect.data.size(); ++i)
            expect.data[i] = 2.5 * y1.data[i] - 0.75 * y2.data[i];
        rel_check(y_mix, expect);
    }

    std::ostringstream os;
    os << "blr matvec equals dense reconstruction on grids up to 16x16 and is linear in the "
          "rhs, max rel err "
       << worst << " (tolerance 1e-10), " << static_cast<int>(now_seconds() - t0) << " s";
    report(9, pass, os.str());
}

} // namespace

int main() {
    std::printf("acceptance suite (%zu physical cores, cpu:%s)\n", physical_cores(),
                cpu_model_name().c_str());
    criterion_1_oracle_equivalence();
    criterion_2_ecm_tables();
    criterion_3_b_small();
    criterion_4_determinism();
    criterion_5_store_once();
    criterion_6_formulas();
    criterion_7_throughput();
    criterion_8_triad();
    criterion_9_blr_matvec();
    if (g_failures) std::printf("acceptance: %d criterion failure(s)\n", g_failures);
    else std::printf("acceptance: all criteria passed\n");
    return g_failures ? 1 : 0;
}

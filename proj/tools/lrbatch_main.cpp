// Command-line harness: verification, benchmarking, the triad sweep, cycle
// predictions, and the block low-rank matvec demo.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "lrbatch/lrbatch.hpp"

namespace {

using namespace lrbatch;

std::vector<std::size_t> parse_size_list(const std::string& text) {
    std::vector<std::size_t> out;
    std::istringstream is(text);
    std::string tok;
    while (std::getline(is, tok, ',')) {
        if (tok.empty()) continue;
        out.push_back(std::stoull(tok));
    }
    if (out.empty()) throw CLI::ValidationError("empty list: " + text);
    return out;
}

struct PlanOptions {
    std::string plan_file;
    long long b_small = -1, b_skinny = -1;
    long long m_pack = -1, n_pack = -1, x_pack = -1, y_pack = -1;
    long long tile = -1, llc_bytes = -1, alignment = -1;
    bool dual_accumulator = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--plan-file", plan_file, "key = value plan file applied on top");
        cmd->add_option("--b-small", b_small, "small-matrix pairs per outer chunk");
        cmd->add_option("--b-skinny", b_skinny, "skinny matrices per inner chunk");
        cmd->add_option("--m-pack", m_pack, "macro slice width m");
        cmd->add_option("--n-pack", n_pack, "macro slice width n");
        cmd->add_option("--x-pack", x_pack, "macro slice width x");
        cmd->add_option("--y-pack", y_pack, "macro slice width y");
        cmd->add_option("--tile", tile, "register tile width (doubles)");
        cmd->add_option("--llc-bytes", llc_bytes, "packing cache capacity");
        cmd->add_option("--alignment", alignment, "packed buffer alignment (bytes)");
        cmd->add_flag("--dual-accumulator", dual_accumulator,
                      "split-accumulator rank-1 update variant");
    }

    PackingPlan build(const MachineModel& machine, std::size_t rank,
                      std::size_t block_size) const {
        PackingPlan plan = make_packing_plan(machine, rank, block_size);
        if (!plan_file.empty()) {
            std::ifstream in(plan_file);
            if (!in) throw IoError("cannot open plan file: " + plan_file);
            read_plan(in, plan, plan_file);
        }
        if (b_small >= 0) plan.b_small = static_cast<std::size_t>(b_small);
        if (b_skinny >= 0) plan.b_skinny = static_cast<std::size_t>(b_skinny);
        if (m_pack >= 0) plan.m_pack = static_cast<std::size_t>(m_pack);
        if (n_pack >= 0) plan.n_pack = static_cast<std::size_t>(n_pack);
        if (x_pack >= 0) plan.x_pack = static_cast<std::size_t>(x_pack);
        if (y_pack >= 0) plan.y_pack = static_cast<std::size_t>(y_pack);
        if (tile >= 0) plan.tile = static_cast<std::size_t>(tile);
        if (llc_bytes >= 0) plan.llc_bytes = static_cast<std::size_t>(llc_bytes);
        if (alignment >= 0) plan.alignment_bytes = static_cast<std::size_t>(alignment);
        if (dual_accumulator) plan.dual_accumulator = true;
        plan.validate(rank);
        return plan;
    }
};

// -----------------------------------------------------------------------------
// verify
// -----------------------------------------------------------------------------

int run_verify_shape(const MachineModel& machine, const PlanOptions& plan_opts,
                     std::size_t batch_size, std::size_t block, std::size_t rank,
                     std::size_t workers, std::uint64_t seed, double tol,
                     LowRankBatch* preloaded) {
    LowRankBatch batch = preloaded
                             ? std::move(*preloaded)
                             : LowRankBatch::random(batch_size, block, rank, seed);
    PackingPlan plan = plan_opts.build(machine, batch.rank_a, batch.block_size);
    int failures = 0;

    fused_multiply(batch);
    VerifyReport fused_report = compare_to_reference(batch, tol);
    std::printf("  fused  batch=%-6zu block=%-5zu rank=%-3zu          : %s\n", batch.batch_size,
                batch.block_size, batch.rank_a, fused_report.to_string().c_str());
    failures += fused_report.ok ? 0 : 1;

    batch.zero_results();
    packed_multiply(batch, plan, workers);
    VerifyReport packed_report = compare_to_reference(batch, tol);
    std::printf("  packed batch=%-6zu block=%-5zu rank=%-3zu workers=%zu: %s\n", batch.batch_size,
                batch.block_size, batch.rank_a, workers, packed_report.to_string().c_str());
    failures += packed_report.ok ? 0 : 1;
    return failures;
}

int cmd_verify(const std::string& machine_name, const PlanOptions& plan_opts,
               std::size_t batch_size, std::size_t block, std::size_t rank, std::size_t workers,
               std::uint64_t seed, const std::string& input, bool skip_smoke, double tol) {
    MachineModel machine = resolve_machine(machine_name);
    int failures = 0;
    std::printf("configured shape:\n");
    if (!input.empty()) {
        LowRankBatch loaded = load_batch(input);
        failures += run_verify_shape(machine, plan_opts, 0, 0, 0, workers, seed, tol, &loaded);
    } else {
        failures +=
            run_verify_shape(machine, plan_opts, batch_size, block, rank, workers, seed, tol,
                             nullptr);
    }
    if (!skip_smoke) {
        std::printf("smoke grid (padded and unpadded ranks):\n");
        for (std::size_t r : {std::size_t{1}, std::size_t{3}, std::size_t{6}, std::size_t{8},
                              std::size_t{16}}) {
            for (std::size_t b : {std::size_t{1}, std::size_t{17}, std::size_t{64}}) {
                for (std::size_t n : {std::size_t{1}, std::size_t{7}, std::size_t{33}}) {
                    failures += run_verify_shape(machine, plan_opts, n, b, r, workers,
                                                 seed + r * 1000 + b * 10 + n, tol, nullptr);
                }
            }
        }
    }
    if (failures) {
        std::printf("verify: %d failure(s)\n", failures);
        return 1;
    }
    std::printf("verify: all comparisons passed\n");
    return 0;
}

// -----------------------------------------------------------------------------
// bench
// -----------------------------------------------------------------------------

int cmd_bench(const std::string& machine_name, const PlanOptions& plan_opts, BenchConfig config,
              const std::vector<std::size_t>& ranks, const std::vector<std::size_t>& blocks,
              const std::vector<std::size_t>& workers_list, bool dump_plan) {
    MachineModel machine = resolve_machine(machine_name);
    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!config.output_path.empty()) {
        file.open(config.output_path);
        if (!file) throw IoError("cannot open output file: " + config.output_path);
        out = &file;
    }
    *out << bench_csv_header() << "\n";
    for (std::size_t rank : ranks) {
        for (std::size_t block : blocks) {
            PackingPlan plan = plan_opts.build(machine, rank, block);
            if (dump_plan) std::cerr << "# plan for rank " << rank << ":\n" << plan_to_text(plan);
            for (std::size_t workers : workers_list) {
                config.rank = rank;
                config.block_size = block;
                config.workers = workers;
                BenchResult result = run_bench(config, plan);
                *out << bench_csv_row(result) << "\n";
                out->flush();
            }
        }
    }
    return 0;
}

// -----------------------------------------------------------------------------
// triad
// -----------------------------------------------------------------------------

int cmd_triad(const std::string& machine_name, std::vector<std::size_t> sizes,
              std::size_t samples, const std::string& output_path) {
    MachineModel machine = resolve_machine(machine_name);
    if (sizes.empty()) sizes = default_triad_sizes(machine);
    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!output_path.empty()) {
        file.open(output_path);
        if (!file) throw IoError("cannot open output file: " + output_path);
        out = &file;
    }
    *out << "working_set_bytes,elements,median_s,gib_per_s,cycles_per_vl,data_level,"
            "predicted_cycles_per_vl\n";
    for (std::size_t ws : sizes) {
        TriadPoint p = run_triad_point(machine, std::max<std::size_t>(ws / 24, 64), samples);
        std::string level_name = p.data_level < machine.levels.size()
                                     ? machine.levels[p.data_level].name
                                     : std::string("mem");
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%zu,%zu,%.6e,%.3f,%.3f,%s,%.3f", p.working_set_bytes,
                      p.elements, p.median_seconds, p.gib_per_s, p.cycles_per_vl,
                      level_name.c_str(), p.predicted_cycles_per_vl);
        *out << buf << "\n";
        out->flush();
    }
    std::cerr << "note: cycle counts use the model clock of " << machine.clock_hz
              << " Hz; compare against predictions only on matching hardware\n";
    return 0;
}

// -----------------------------------------------------------------------------
// predict
// -----------------------------------------------------------------------------

struct PaperCheck {
    const char* machine;
    const char* kernel;
    std::size_t stride;
    double expected;
};

int run_check_paper() {
    // Published analytical cycle counts for the bundled machine models.
    const PaperCheck checks[] = {
        {"a64fx", "pack-bu", 8, 5.0},
        {"a64fx", "pack-bu", 16, 6.0},
        {"a64fx", "pack-bu", 32, 8.0},
        {"skylake-x-6148", "pack-bu", 8, 14.0},
        {"skylake-x-6148", "pack-bu", 16, 16.0},
        {"skylake-x-6148", "pack-bu", 32, 20.0},
        {"epyc-7502", "pack-bu", 4, 4.0},
        {"epyc-7502", "pack-bu", 8, 4.0},
        {"epyc-7502", "pack-bu", 16, 6.0},
        {"a64fx", "cmn", 0, 4.5},
        {"skylake-x-6148", "cmn", 0, 4.66},
        {"epyc-7502", "cmn", 0, 3.5},
        {"a64fx", "pack-av", 2048, 26.0},
    };
    int failures = 0;
    for (const PaperCheck& check : checks) {
        MachineModel machine = resolve_machine(check.machine);
        EcmPrediction pred;
        if (std::string(check.kernel) == "pack-bu") pred = model_pack_bu(machine, check.stride);
        else if (std::string(check.kernel) == "pack-av") pred = model_pack_av(machine, check.stride);
        else pred = model_cmn(machine);
        bool ok = std::abs(pred.t_ecm - check.expected) <= 1e-9;
        if (check.stride)
            std::printf("[%s] %-15s %-8s stride %-5zu T_ECM = %-6.4g (expected %g)\n",
                        ok ? "PASS" : "FAIL", check.machine, check.kernel, check.stride,
                        pred.t_ecm, check.expected);
        else
            std::printf("[%s] %-15s %-8s              T_ECM = %-6.4g (expected %g)\n",
                        ok ? "PASS" : "FAIL", check.machine, check.kernel, pred.t_ecm,
                        check.expected);
        failures += ok ? 0 : 1;
    }
    return failures ? 1 : 0;
}

int cmd_predict(const std::string& machine_name, const std::string& kernel, std::size_t stride,
                long long level, const std::string& loop_file, bool check_paper) {
    if (check_paper) return run_check_paper();
    MachineModel machine = resolve_machine(machine_name);
    EcmPrediction pred;
    std::string label = kernel;
    if (!loop_file.empty()) {
        pred = predict_loop(machine, load_loop_file(loop_file, machine));
        label = loop_file;
    } else if (kernel == "pack-bu") pred = model_pack_bu(machine, stride);
    else if (kernel == "pack-av") pred = model_pack_av(machine, stride);
    else if (kernel == "cmn") pred = model_cmn(machine);
    else if (kernel == "triad") {
        std::size_t data_level =
            level < 0 ? machine.levels.size() : static_cast<std::size_t>(level);
        pred = model_stream_triad(machine, data_level);
    } else {
        throw CLI::ValidationError("unknown kernel '" + kernel +
                                   "' (want pack-bu|pack-av|cmn|triad, or --loop <file>)");
    }
    std::printf("%s, %s", machine.name.c_str(), label.c_str());
    if (loop_file.empty() && (kernel == "pack-bu" || kernel == "pack-av"))
        std::printf(", stride %zu", stride);
    std::printf(" (cycles per vector length):\n%s",
                format_prediction(machine, pred).c_str());
    return 0;
}

// -----------------------------------------------------------------------------
// matvec
// -----------------------------------------------------------------------------

int cmd_matvec(const std::string& machine_name, const PlanOptions& plan_opts, std::size_t n,
               std::size_t block, std::size_t rank, std::size_t nrhs, std::size_t workers,
               std::uint64_t seed, std::size_t reps) {
    MachineModel machine = resolve_machine(machine_name);
    BlrMatrix m = BlrMatrix::random(n, block, rank, seed);
    DenseBlock rhs(n, nrhs);
    NormalSource src(seed + 1);
    src.fill(rhs.data.data(), rhs.data.size());
    PackingPlan plan = plan_opts.build(machine, std::max(rank, nrhs), block);

    using Clock = std::chrono::steady_clock;
    std::vector<double> batched_times, naive_times;
    DenseBlock y_batched, y_naive;
    for (std::size_t r = 0; r < reps; ++r) {
        auto t0 = Clock::now();
        y_batched = blr_matvec(m, rhs, plan, workers);
        batched_times.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
        t0 = Clock::now();
        y_naive = blr_matvec_naive(m, rhs);
        naive_times.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
    }
    double max_rel = 0.0;
    double rms = 0.0;
    for (double v : y_naive.data) rms += v * v;
    rms = std::sqrt(rms / static_cast<double>(y_naive.data.size()));
    for (std::size_t i = 0; i < y_naive.data.size(); ++i) {
        double scale = std::max(std::abs(y_naive.data[i]), rms > 0 ? rms : 1.0);
        max_rel = std::max(max_rel, std::abs(y_batched.data[i] - y_naive.data[i]) / scale);
    }
    double tb = median_of(batched_times), tn = median_of(naive_times);
    std::printf("n,block,rank,nrhs,workers,batched_s,per_tile_s,speedup,max_rel_err\n");
    std::printf("%zu,%zu,%zu,%zu,%zu,%.6e,%.6e,%.3f,%.3e\n", n, block, rank, nrhs, workers, tb,
                tn, tn / tb, max_rel);
    return max_rel < 1e-10 ? 0 : 1;
}

// -----------------------------------------------------------------------------
// gen
// -----------------------------------------------------------------------------

int cmd_gen(const std::string& output, std::size_t batch, std::size_t block, std::size_t rank,
            std::uint64_t seed) {
    LowRankBatch b = LowRankBatch::random(batch, block, rank, seed);
    save_batch(b, output);
    std::printf("wrote %s: batch=%zu block=%zu rank=%zu seed=%llu\n", output.c_str(), batch,
                block, rank, static_cast<unsigned long long>(seed));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"batched low-rank matrix multiplication engine and cycle model"};
    app.require_subcommand(1);
    app.fallthrough(); // accept --machine after the subcommand name as well

    std::string machine = "skylake-x-6148";
    app.add_option("--machine", machine,
                   "machine model name or path (also via LRBATCH_MACHINES)")
        ->envname("LRBATCH_MACHINE");

    // verify
    auto* verify = app.add_subcommand("verify", "check fused and packed against the oracle");
    std::size_t v_batch = 1000, v_block = 256, v_rank = 8, v_workers = 2;
    std::uint64_t v_seed = 42;
    std::string v_input;
    bool v_skip_smoke = false;
    double v_tol = 1e-12;
    verify->add_option("--batch", v_batch, "batch size");
    verify->add_option("--block", v_block, "block size");
    verify->add_option("--rank", v_rank, "rank");
    verify->add_option("--workers", v_workers, "worker threads for the packed run");
    verify->add_option("--seed", v_seed, "random seed");
    verify->add_option("--input", v_input, "batch file instead of random data");
    verify->add_option("--tolerance", v_tol, "relative error bound");
    verify->add_flag("--skip-smoke", v_skip_smoke, "run only the configured shape");
    PlanOptions v_plan;
    v_plan.attach(verify);

    // bench
    auto* bench = app.add_subcommand("bench", "time packed_multiply and the naive baseline");
    BenchConfig b_config;
    std::string b_ranks = "8", b_blocks = "1024", b_workers = "1";
    bool b_no_baseline = false, b_dump_plan = false;
    bench->add_option("--batch", b_config.batch_size, "batch size");
    bench->add_option("--rank", b_ranks, "rank list, comma separated");
    bench->add_option("--block", b_blocks, "block size list, comma separated");
    bench->add_option("--workers", b_workers, "worker count list, comma separated");
    bench->add_option("--reps", b_config.repetitions, "timed repetitions (median reported)");
    bench->add_option("--warmup", b_config.warmup_reps, "warmup repetitions");
    bench->add_option("--seed", b_config.seed, "random seed");
    bench->add_option("--output", b_config.output_path, "CSV output path (default stdout)");
    bench->add_flag("--no-baseline", b_no_baseline, "skip the naive baseline");
    bench->add_flag("--dump-plan", b_dump_plan, "print the packing plan to stderr");
    PlanOptions b_plan;
    b_plan.attach(bench);

    // triad
    auto* triad = app.add_subcommand("triad", "streaming a = b + alpha*c working-set sweep");
    std::string t_sizes;
    std::size_t t_samples = 11;
    std::string t_output;
    triad->add_option("--sizes", t_sizes, "working-set bytes, comma separated");
    triad->add_option("--samples", t_samples, "timed samples per size (median reported)");
    triad->add_option("--output", t_output, "CSV output path (default stdout)");

    // predict
    auto* predict = app.add_subcommand("predict", "analytical cycles per vector length");
    std::string p_kernel = "pack-bu";
    std::size_t p_stride = 8;
    long long p_level = -1;
    std::string p_loop;
    bool p_check_paper = false;
    predict->add_option("--kernel", p_kernel, "pack-bu|pack-av|cmn|triad");
    predict->add_option("--stride", p_stride, "stride in doubles (packing kernels)");
    predict->add_option("--level", p_level, "data level for triad (0=L1, last=memory)");
    predict->add_option("--loop", p_loop, "loop descriptor file instead of a built-in kernel");
    predict->add_flag("--check-paper", p_check_paper,
                      "assert the published table values for the bundled models");

    // matvec
    auto* matvec = app.add_subcommand("matvec", "block low-rank matrix times multiple rhs");
    std::size_t m_n = 4096, m_block = 512, m_rank = 8, m_nrhs = 8, m_workers = 1, m_reps = 3;
    std::uint64_t m_seed = 42;
    matvec->add_option("--n", m_n, "matrix dimension");
    matvec->add_option("--block", m_block, "tile size");
    matvec->add_option("--rank", m_rank, "off-diagonal tile rank");
    matvec->add_option("--nrhs", m_nrhs, "right-hand sides");
    matvec->add_option("--workers", m_workers, "worker threads");
    matvec->add_option("--seed", m_seed, "random seed");
    matvec->add_option("--reps", m_reps, "repetitions (median reported)");
    PlanOptions m_plan;
    m_plan.attach(matvec);

    // gen
    auto* gen = app.add_subcommand("gen", "write a random batch file");
    std::string g_output = "batch.lrb";
    std::size_t g_batch = 1000, g_block = 512, g_rank = 8;
    std::uint64_t g_seed = 42;
    gen->add_option("--output", g_output, "output path");
    gen->add_option("--batch", g_batch, "batch size");
    gen->add_option("--block", g_block, "block size");
    gen->add_option("--rank", g_rank, "rank");
    gen->add_option("--seed", g_seed, "random seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (verify->parsed())
            return cmd_verify(machine, v_plan, v_batch, v_block, v_rank, v_workers, v_seed,
                              v_input, v_skip_smoke, v_tol);
        if (bench->parsed()) {
            b_config.run_baseline = !b_no_baseline;
            return cmd_bench(machine, b_plan, b_config, parse_size_list(b_ranks),
                             parse_size_list(b_blocks), parse_size_list(b_workers), b_dump_plan);
        }
        if (triad->parsed())
            return cmd_triad(machine, t_sizes.empty() ? std::vector<std::size_t>{}
                                                      : parse_size_list(t_sizes),
                             t_samples, t_output);
        if (predict->parsed())
            return cmd_predict(machine, p_kernel, p_stride, p_level, p_loop, p_check_paper);
        if (matvec->parsed())
            return cmd_matvec(machine, m_plan, m_n, m_block, m_rank, m_nrhs, m_workers, m_seed,
                              m_reps);
        if (gen->parsed()) return cmd_gen(g_output, g_batch, g_block, g_rank, g_seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

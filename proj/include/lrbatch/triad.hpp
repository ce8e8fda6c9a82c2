#pragma once

#include <chrono>
#include <cstddef>
#include <vector>

#include "lrbatch/common.hpp"
#include "lrbatch/ecm.hpp"
#include "lrbatch/machine.hpp"

namespace lrbatch {

// a(i) = b(i) + alpha * c(i) working-set sweep, single threaded. Cycle counts
// come from wall time and the model's clock frequency, so absolute values are
// only meaningful on matching silicon; the step shape is meaningful anywhere.

struct TriadPoint {
    std::size_t working_set_bytes = 0; // all three arrays together
    std::size_t elements = 0;          // per array
    double median_seconds = 0.0;       // one pass over the arrays
    double gib_per_s = 0.0;            // 24 bytes per element
    double cycles_per_vl = 0.0;
    std::size_t data_level = 0;        // index into machine levels; levels.size() = memory
    double predicted_cycles_per_vl = 0.0;
};

namespace detail {

[[gnu::noinline]] inline void triad_pass(double* a, const double* b, const double* c,
                                         std::size_t n, double alpha) {
    for (std::size_t i = 0; i < n; ++i) a[i] = b[i] + alpha * c[i];
}

} // namespace detail

/// Smallest level whose per-core reach holds the working set; levels.size()
/// means memory.
inline std::size_t triad_data_level(const MachineModel& machine, std::size_t working_set_bytes) {
    for (std::size_t i = 0; i < machine.levels.size(); ++i)
        if (working_set_bytes <= machine.level_visible_bytes(i)) return i;
    return machine.levels.size();
}

inline TriadPoint run_triad_point(const MachineModel& machine, std::size_t elements,
                                  std::size_t samples = 11) {
    TriadPoint point;
    point.elements = elements;
    point.working_set_bytes = 3 * elements * sizeof(double);

    AlignedArray a(elements, 64), b(elements, 64), c(elements, 64);
    for (std::size_t i = 0; i < elements; ++i) {
        a[i] = 0.0;
        b[i] = 1.0 + static_cast<double>(i % 7);
        c[i] = 2.0 + static_cast<double>(i % 5);
    }
    const double alpha = 0.42;

    // Enough passes per sample to stay well above timer resolution. Roles of
    // a and b swap between passes so no pass is dead.
    double bytes_per_pass = 24.0 * static_cast<double>(elements);
    std::size_t passes = static_cast<std::size_t>(std::max(1.0, 2.0e8 / bytes_per_pass));

    using Clock = std::chrono::steady_clock;
    double* x = a.data();
    double* y = b.data();
    std::vector<double> per_pass;
    detail::triad_pass(x, y, c.data(), elements, alpha); // touch all pages
    for (std::size_t s = 0; s < samples; ++s) {
        auto t0 = Clock::now();
        for (std::size_t p = 0; p < passes; ++p) {
            detail::triad_pass(x, y, c.data(), elements, alpha);
            std::swap(x, y);
        }
        double t = std::chrono::duration<double>(Clock::now() - t0).count();
        per_pass.push_back(t / static_cast<double>(passes));
    }
    std::sort(per_pass.begin(), per_pass.end());
    point.median_seconds = per_pass[per_pass.size() / 2];
    point.gib_per_s = bytes_per_pass / (point.median_seconds * 1073741824.0);

    double vl = static_cast<double>(machine.vector_doubles());
    point.cycles_per_vl =
        point.median_seconds * machine.clock_hz * vl / static_cast<double>(elements);
    point.data_level = triad_data_level(machine, point.working_set_bytes);
    point.predicted_cycles_per_vl = model_stream_triad(machine, point.data_level).t_ecm;
    return point;
}

/// Default sweep: geometric ladder of working-set sizes from well inside L1 to
/// beyond the last cache level.
inline std::vector<std::size_t> default_triad_sizes(const MachineModel& machine) {
    std::size_t llc = machine.level_visible_bytes(machine.levels.size() - 1);
    std::vector<std::size_t> sizes;
    for (std::size_t ws = 16 * 1024; ws <= 4 * llc; ws *= 4) sizes.push_back(ws);
    if (sizes.empty() || sizes.back() < 4 * llc) sizes.push_back(4 * llc);
    return sizes;
}

inline std::vector<TriadPoint> triad_sweep(const MachineModel& machine,
                                           const std::vector<std::size_t>& working_sets,
                                           std::size_t samples = 11) {
    std::vector<TriadPoint> points;
    for (std::size_t ws : working_sets)
        points.push_back(run_triad_point(machine, std::max<std::size_t>(ws / 24, 64), samples));
    return points;
}

} // namespace lrbatch

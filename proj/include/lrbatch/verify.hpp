#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "lrbatch/low_rank.hpp"

namespace lrbatch {

// Scale-aware entrywise comparison. Each entry's error is measured relative
// to the larger of its own magnitude and the item's root-mean-square result
// magnitude, so entries that are themselves cancellation residue do not blow
// up the quotient.

struct VerifyReport {
    bool ok = true;
    double max_rel_error = 0.0;
    std::size_t worst_item = 0;
    std::size_t worst_entry = 0;
    std::size_t checked_items = 0;

    std::string to_string() const {
        char buf[160];
        if (ok)
            std::snprintf(buf, sizeof(buf), "ok, %zu items, max relative error %.3e",
                          checked_items, max_rel_error);
        else
            std::snprintf(buf, sizeof(buf),
                          "MISMATCH at item %zu entry %zu, relative error %.3e", worst_item,
                          worst_entry, max_rel_error);
        return buf;
    }
};

/// Compares the filled g_xy blocks of `batch` against the reference oracle.
inline VerifyReport compare_to_reference(const LowRankBatch& batch, double tolerance) {
    VerifyReport report;
    const std::size_t entries = batch.rank_a * batch.rank_b;
    std::vector<double> expected(entries);
    std::vector<double> c_scratch, e_scratch;
    for (std::size_t item = 0; item < batch.batch_size; ++item) {
        expected.assign(entries, 0.0);
        reference_item(batch, item, expected.data(), c_scratch, e_scratch);
        double sumsq = 0.0;
        for (double v : expected) sumsq += v * v;
        double rms = std::sqrt(sumsq / static_cast<double>(entries));
        double scale_floor = rms > 0.0 ? rms : 1.0;
        const double* got = batch.g_xy(item);
        for (std::size_t e = 0; e < entries; ++e) {
            double scale = std::max(std::abs(expected[e]), scale_floor);
            double rel = std::abs(got[e] - expected[e]) / scale;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_item = item;
                report.worst_entry = e;
            }
        }
        ++report.checked_items;
    }
    report.ok = report.max_rel_error < tolerance;
    return report;
}

} // namespace lrbatch

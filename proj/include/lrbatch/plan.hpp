#pragma once

#include <iostream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "lrbatch/common.hpp"
#include "lrbatch/machine.hpp"

namespace lrbatch {

inline constexpr std::size_t kMaxTileWidth = 32;

// =============================================================================
/// All blocking parameters for the packed algorithm. b_small pairs of small
/// matrices are packed per outer chunk, b_skinny skinny matrices per operand
/// per inner chunk, and the four *_pack widths slice the padded rank for the
/// register-tile kernels. `tile` is the vector width in doubles.
struct PackingPlan {
    std::size_t b_small = 1;
    std::size_t b_skinny = 1;
    std::size_t m_pack = 8;
    std::size_t n_pack = 8;
    std::size_t x_pack = 8;
    std::size_t y_pack = 8;
    std::size_t tile = 8;
    std::size_t llc_bytes = 0;
    std::size_t alignment_bytes = 64;
    bool dual_accumulator = false; // split-accumulator rank-1 update variant

    std::size_t padded_rank(std::size_t rank) const { return round_up(rank, tile); }

    void validate(std::size_t rank) const {
        require_shape(b_small >= 1 && b_skinny >= 1, "PackingPlan: counts must be >= 1");
        require_shape(b_small % b_skinny == 0,
                      "PackingPlan: b_small must be a multiple of b_skinny");
        require_shape(tile >= 1 && tile <= kMaxTileWidth, "PackingPlan: tile out of range");
        std::size_t padded = padded_rank(rank);
        for (std::size_t w : {m_pack, n_pack, x_pack, y_pack}) {
            require_shape(w >= 1 && w <= kMaxTileWidth, "PackingPlan: slice width out of range");
            // Widths are tile multiples, tile divisors, or the padded rank
            // itself; anything else breaks the register-tile layout.
            require_shape(w % tile == 0 || tile % w == 0 || w == padded,
                          "PackingPlan: slice width " + std::to_string(w) +
                              " incompatible with tile " + std::to_string(tile));
        }
    }
};

/// Small-matrix pairs that fit in the packing cache:
/// floor(llc_bytes / (2 * rank * rank * sizeof(double))).
inline std::size_t compute_b_small(std::size_t llc_bytes, std::size_t rank) {
    std::size_t pair_bytes = 2 * rank * rank * sizeof(double);
    if (llc_bytes < pair_bytes)
        throw CapacityError("packing cache of " + std::to_string(llc_bytes) +
                            " bytes holds no small-matrix pair at rank " + std::to_string(rank) +
                            " (" + std::to_string(pair_bytes) + " bytes); fall back to b_small=1");
    return llc_bytes / pair_bytes;
}

/// Blocking parameters for a machine and problem shape. Slice widths default
/// to the vector width; the Xeon uses narrower x / wider y and n slices once
/// the rank exceeds the vector width. Widths never exceed the padded rank.
inline PackingPlan make_packing_plan(const MachineModel& machine, std::size_t rank,
                                     std::size_t block_size) {
    (void)block_size; // slicing depends on rank only; block rides along loop 4
    PackingPlan plan;
    plan.tile = static_cast<std::size_t>(machine.vector_doubles());
    if (plan.tile < 1) plan.tile = 1;
    if (plan.tile > kMaxTileWidth) plan.tile = kMaxTileWidth;
    plan.llc_bytes = machine.packing_cache_bytes();
    plan.alignment_bytes = std::max<std::size_t>(64, machine.cache_line_bytes);
    plan.b_skinny = 1;
    try {
        plan.b_small = compute_b_small(plan.llc_bytes, rank);
    } catch (const CapacityError& e) {
        std::cerr << "lrbatch: warning: " << e.what() << "\n";
        plan.b_small = 1;
    }
    plan.b_small = std::max<std::size_t>(plan.b_small - plan.b_small % plan.b_skinny,
                                         plan.b_skinny);

    std::size_t padded = plan.padded_rank(rank);
    if (machine.family == Family::intel && rank > plan.tile) {
        plan.x_pack = 4;
        plan.y_pack = 16;
        plan.m_pack = 8;
        plan.n_pack = 16;
    } else {
        plan.x_pack = plan.y_pack = plan.m_pack = plan.n_pack = plan.tile;
    }
    plan.m_pack = std::min(plan.m_pack, padded);
    plan.n_pack = std::min(plan.n_pack, padded);
    plan.x_pack = std::min(plan.x_pack, padded);
    plan.y_pack = std::min(plan.y_pack, padded);
    plan.validate(rank);
    return plan;
}

// -----------------------------------------------------------------------------
// key = value serialization, one field per line
// -----------------------------------------------------------------------------

inline void write_plan(const PackingPlan& plan, std::ostream& out) {
    out << "b_small = " << plan.b_small << "\n";
    out << "b_skinny = " << plan.b_skinny << "\n";
    out << "m_pack = " << plan.m_pack << "\n";
    out << "n_pack = " << plan.n_pack << "\n";
    out << "x_pack = " << plan.x_pack << "\n";
    out << "y_pack = " << plan.y_pack << "\n";
    out << "tile = " << plan.tile << "\n";
    out << "llc_bytes = " << plan.llc_bytes << "\n";
    out << "alignment = " << plan.alignment_bytes << "\n";
    out << "dual_accumulator = " << (plan.dual_accumulator ? "yes" : "no") << "\n";
}

inline std::string plan_to_text(const PackingPlan& plan) {
    std::ostringstream os;
    write_plan(plan, os);
    return os.str();
}

/// Parses key = value lines; unknown keys are an error, missing keys keep the
/// value already present in `plan`, so a file can override selectively.
inline void read_plan(std::istream& in, PackingPlan& plan, const std::string& source_name) {
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string body = detail::trim(detail::strip_comment(line));
        if (body.empty()) continue;
        const std::string where = source_name + ":" + std::to_string(line_no);
        std::size_t eq = body.find('=');
        if (eq == std::string::npos) throw ParseError("expected key = value at " + where);
        std::string key = detail::trim(body.substr(0, eq));
        std::string value = detail::trim(body.substr(eq + 1));
        auto num = [&]() { return static_cast<std::size_t>(detail::parse_number(value, where)); };
        if (key == "b_small") plan.b_small = num();
        else if (key == "b_skinny") plan.b_skinny = num();
        else if (key == "m_pack") plan.m_pack = num();
        else if (key == "n_pack") plan.n_pack = num();
        else if (key == "x_pack") plan.x_pack = num();
        else if (key == "y_pack") plan.y_pack = num();
        else if (key == "tile") plan.tile = num();
        else if (key == "llc_bytes") plan.llc_bytes = num();
        else if (key == "alignment") plan.alignment_bytes = num();
        else if (key == "dual_accumulator") plan.dual_accumulator = detail::parse_bool(value, where);
        else throw ParseError("unknown plan key '" + key + "' at " + where);
    }
}

inline PackingPlan plan_from_text(const std::string& text, PackingPlan base = {}) {
    std::istringstream is(text);
    read_plan(is, base, "<text>");
    return base;
}

} // namespace lrbatch

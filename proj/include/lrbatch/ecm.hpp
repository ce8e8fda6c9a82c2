#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "lrbatch/machine.hpp"

namespace lrbatch {

// =============================================================================
// Analytical cycle model for steady-state loops. Everything is counted per
// vector-length iteration and kept fractional; presentation may round, the
// engine never does.
// =============================================================================

struct LevelTransfer {
    double read_lines = 0.0;  // transfer units of vector-width bytes
    double write_lines = 0.0; // logical writes, before write-policy accounting
};

/// Instruction mix plus per-level transfer counts for one loop iteration.
/// level_transfers[i] belongs to machine.levels[i + 1] (everything past L1;
/// L1 traffic is carried by the load/store instructions themselves).
struct LoopModel {
    std::vector<std::pair<InstructionSpec, double>> instructions;
    std::vector<LevelTransfer> level_transfers;
    LevelTransfer mem_transfers;
};

struct EcmComponents {
    double t_c = 0.0;
    double t_l1_load = 0.0;
    double t_l1_store = 0.0;
    std::vector<double> t_mid; // one combined read+write figure per level past L1
    double t_mem = 0.0;
};

struct EcmPrediction {
    double t_c = 0.0;
    double t_l1_load = 0.0;
    double t_l1_store = 0.0;
    std::vector<std::pair<double, double>> t_mid; // (read, write) per level past L1
    double t_mem_read = 0.0;
    double t_mem_write = 0.0;
    double t_ecm = 0.0;

    double t_mem() const { return t_mem_read + t_mem_write; }

    EcmComponents components() const {
        EcmComponents c;
        c.t_c = t_c;
        c.t_l1_load = t_l1_load;
        c.t_l1_store = t_l1_store;
        for (const auto& [r, w] : t_mid) c.t_mid.push_back(r + w);
        c.t_mem = t_mem();
        return c;
    }
};

/// Combines per-level transfer times into the predicted cycles per iteration.
inline double combine(OverlapKind kind, const EcmComponents& p) {
    double mid_sum = 0.0;
    double mid_max = 0.0;
    for (double t : p.t_mid) {
        mid_sum += t;
        mid_max = std::max(mid_max, t);
    }
    switch (kind) {
    case OverlapKind::serial:
        return std::max(p.t_c, p.t_l1_load + p.t_l1_store + mid_sum + p.t_mem);
    case OverlapKind::full_overlap:
        return std::max({p.t_c, p.t_l1_load, p.t_l1_store, mid_max, p.t_mem});
    case OverlapKind::nested:
        return std::max(p.t_c,
                        std::max(p.t_l1_load + std::max(p.t_l1_store, mid_sum), p.t_mem));
    }
    return p.t_c;
}

/// Cycles to move `read_lines` / `write_lines` transfer units through one
/// level. `level_index` < levels.size() names a cache level; levels.size()
/// names the memory interface. Pure per-direction division, no rounding.
inline std::pair<double, double> cycles_for_transfers(const MachineModel& machine,
                                                      std::size_t level_index, double read_lines,
                                                      double write_lines) {
    double unit = static_cast<double>(machine.transfer_unit_bytes());
    double load_bpc, store_bpc;
    if (level_index < machine.levels.size()) {
        load_bpc = machine.levels[level_index].load_bpc;
        store_bpc = machine.levels[level_index].store_bpc;
    } else {
        load_bpc = machine.mem_load_bpc;
        store_bpc = machine.mem_store_bpc;
    }
    return {read_lines * unit / load_bpc, write_lines * unit / store_bpc};
}

/// Generic engine: instruction issue cycles per port class, transfer cycles
/// per level with write-allocate accounting, combined by the machine's
/// overlap rule.
inline EcmPrediction predict_loop(const MachineModel& machine, const LoopModel& loop) {
    EcmPrediction p;
    for (const auto& [spec, count] : loop.instructions) {
        double cycles = count * spec.reciprocal_throughput;
        switch (spec.port) {
        case PortClass::compute: p.t_c += cycles; break;
        case PortClass::load: p.t_l1_load += cycles; break;
        case PortClass::store: p.t_l1_store += cycles; break;
        }
    }

    // Every written line on a write-allocate path is fetched once before the
    // store goes out, doubling the counted write traffic. A victim LLC soaks
    // that up before the memory interface.
    double mem_write_factor = machine.mem_write_allocate() ? 2.0 : 1.0;

    for (std::size_t i = 1; i < machine.levels.size(); ++i) {
        LevelTransfer t;
        if (i - 1 < loop.level_transfers.size()) t = loop.level_transfers[i - 1];
        double write_factor =
            machine.level_write_policy(i) == WritePolicy::write_allocate ? 2.0 : 1.0;
        p.t_mid.push_back(
            cycles_for_transfers(machine, i, t.read_lines, t.write_lines * write_factor));
    }
    p.t_mem_read = 0.0;
    p.t_mem_write = 0.0;
    {
        auto [r, w] = cycles_for_transfers(machine, machine.levels.size(),
                                           loop.mem_transfers.read_lines,
                                           loop.mem_transfers.write_lines * mem_write_factor);
        p.t_mem_read = r;
        p.t_mem_write = w;
    }
    p.t_ecm = combine(machine.overlap(), p.components());
    return p;
}

// -----------------------------------------------------------------------------
// Application models
// -----------------------------------------------------------------------------

namespace detail {

inline const InstructionSpec& instruction_or(const MachineModel& m, const std::string& preferred,
                                             const std::string& fallback) {
    const InstructionSpec* spec = m.find_instruction(preferred);
    return spec ? *spec : m.instruction(fallback);
}

} // namespace detail

/// a(i) = b(i) + alpha * c(i) with the working set resident at `data_level`
/// (0 = L1, levels.size() = memory). Two loads, one fused multiply-add, one
/// store per vector; two read lines and one written line traverse every level
/// between the data and the core.
inline EcmPrediction model_stream_triad(const MachineModel& machine, std::size_t data_level) {
    if (data_level > machine.levels.size())
        throw ShapeError("model_stream_triad: data_level out of range");
    LoopModel loop;
    loop.instructions.push_back({machine.instruction("load"), 2.0});
    loop.instructions.push_back({detail::instruction_or(machine, "triad_fma", "fma"), 1.0});
    loop.instructions.push_back({machine.instruction("store"), 1.0});
    loop.level_transfers.assign(machine.levels.size() - 1, LevelTransfer{});
    for (std::size_t i = 1; i < machine.levels.size() && i <= data_level; ++i)
        loop.level_transfers[i - 1] = {2.0, 1.0};
    if (data_level == machine.levels.size()) loop.mem_transfers = {2.0, 1.0};
    return predict_loop(machine, loop);
}

/// Packing the right skinny operand: contiguous panel copies, one load and one
/// store per vector. Rows of the source sit `stride_doubles` apart, so reads
/// below L1 touch stride/VL transfer units per useful vector; a victim LLC
/// hides that amplification from the memory interface.
inline EcmPrediction model_pack_bu(const MachineModel& machine, std::size_t stride_doubles) {
    if (stride_doubles < 1) throw ShapeError("model_pack_bu: stride must be >= 1");
    double s = std::max(1.0, static_cast<double>(stride_doubles) /
                                 static_cast<double>(machine.vector_doubles()));
    LoopModel loop;
    loop.instructions.push_back({machine.instruction("load"), 1.0});
    loop.instructions.push_back({machine.instruction("store"), 1.0});
    loop.level_transfers.assign(machine.levels.size() - 1, LevelTransfer{s, 1.0});
    loop.mem_transfers = {machine.victim_llc ? 1.0 : s, 1.0};
    return predict_loop(machine, loop);
}

/// Packing the left skinny operand into column-major panels: one gather and
/// one store per vector. Each gathered lane lands in its own transfer unit
/// once the stride reaches the vector length, except on machines whose
/// gathers behave like a single line fetch.
inline EcmPrediction model_pack_av(const MachineModel& machine, std::size_t stride_doubles) {
    if (stride_doubles < 1) throw ShapeError("model_pack_av: stride must be >= 1");
    LoopModel loop;
    loop.instructions.push_back({machine.gather_instruction(stride_doubles), 1.0});
    loop.instructions.push_back({machine.instruction("store"), 1.0});
    loop.level_transfers.assign(machine.levels.size() - 1, LevelTransfer{});
    if (machine.gather_single_line) {
        // Observed page-based fetching: one unit into L2, two across deeper
        // levels, one from memory; buffer writes stay cache-resident.
        for (std::size_t i = 0; i < loop.level_transfers.size(); ++i)
            loop.level_transfers[i] = {i == 0 ? 1.0 : 2.0, 0.0};
        loop.mem_transfers = {1.0, 0.0};
    } else {
        double lanes = std::min<double>(machine.vector_doubles(),
                                        static_cast<double>(stride_doubles));
        for (auto& t : loop.level_transfers) t = {lanes, 1.0};
        loop.mem_transfers = {machine.victim_llc ? 1.0 : lanes, 1.0};
    }
    return predict_loop(machine, loop);
}

/// One rank-1 update of the register tile: a contiguous vector load of the
/// left panel column, one broadcast and one fused multiply-add per tile row.
/// Operands stream from L1 and the accumulators never leave the registers.
inline EcmPrediction model_cmn(const MachineModel& machine) {
    double tile = static_cast<double>(machine.vector_doubles());
    LoopModel loop;
    loop.instructions.push_back({detail::instruction_or(machine, "cmn_load", "load"), 1.0});
    loop.instructions.push_back({detail::instruction_or(machine, "cmn_broadcast", "broadcast"), tile});
    loop.instructions.push_back({machine.instruction("fma"), tile});
    loop.level_transfers.assign(machine.levels.size() - 1, LevelTransfer{});
    return predict_loop(machine, loop);
}

// -----------------------------------------------------------------------------
// Loop descriptor files
// -----------------------------------------------------------------------------

/// Parses a loop descriptor: `instruction <name> <count>` lines referencing
/// the machine's instruction table and `transfers <level|mem> <read> <write>`
/// lines in transfer units per vector-length iteration. L1 traffic is carried
/// by the load/store instructions, so only deeper levels take transfer lines.
inline LoopModel parse_loop_model(std::istream& in, const MachineModel& machine,
                                  const std::string& source_name) {
    LoopModel loop;
    loop.level_transfers.assign(machine.levels.size() - 1, LevelTransfer{});
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string body = detail::trim(detail::strip_comment(line));
        if (body.empty()) continue;
        const std::string where = source_name + ":" + std::to_string(line_no);
        std::istringstream words(body);
        std::string head;
        words >> head;
        if (head == "instruction") {
            std::string name, count_tok;
            words >> name >> count_tok;
            if (count_tok.empty()) throw ParseError("short instruction record at " + where);
            loop.instructions.push_back(
                {machine.instruction(name), detail::parse_number(count_tok, where)});
            continue;
        }
        if (head == "transfers") {
            std::string level_tok, read_tok, write_tok;
            words >> level_tok >> read_tok >> write_tok;
            if (write_tok.empty()) throw ParseError("short transfers record at " + where);
            LevelTransfer t{detail::parse_number(read_tok, where),
                            detail::parse_number(write_tok, where)};
            if (level_tok == "mem") {
                loop.mem_transfers = t;
                continue;
            }
            bool found = false;
            for (std::size_t i = 1; i < machine.levels.size(); ++i) {
                if (machine.levels[i].name == level_tok) {
                    loop.level_transfers[i - 1] = t;
                    found = true;
                    break;
                }
            }
            if (!found)
                throw ParseError("unknown transfer level '" + level_tok + "' at " + where +
                                 " (L1 traffic belongs to the load/store instructions)");
            continue;
        }
        throw ParseError("unrecognized loop record '" + head + "' at " + where);
    }
    if (loop.instructions.empty() && loop.mem_transfers.read_lines == 0 &&
        loop.mem_transfers.write_lines == 0) {
        bool any = false;
        for (const auto& t : loop.level_transfers)
            any = any || t.read_lines > 0 || t.write_lines > 0;
        if (!any) throw ParseError(source_name + ": loop needs an instruction or a transfer");
    }
    return loop;
}

inline LoopModel load_loop_file(const std::string& path, const MachineModel& machine) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open loop file: " + path);
    return parse_loop_model(in, machine, path);
}

// -----------------------------------------------------------------------------
// Presentation
// -----------------------------------------------------------------------------

inline std::string format_prediction(const MachineModel& machine, const EcmPrediction& p) {
    char buf[128];
    std::string out;
    auto row = [&](const std::string& label, double value) {
        std::snprintf(buf, sizeof(buf), "  %-8s %8.2f\n", label.c_str(), value);
        out += buf;
    };
    auto row_rw = [&](const std::string& label, double r, double w) {
        std::snprintf(buf, sizeof(buf), "  %-8s %8.2f  (read %.2f + write %.2f)\n", label.c_str(),
                      r + w, r, w);
        out += buf;
    };
    row("T_c", p.t_c);
    row("T_L1_L", p.t_l1_load);
    row("T_L1_S", p.t_l1_store);
    for (std::size_t i = 0; i < p.t_mid.size(); ++i) {
        const std::string name = "T_" + machine.levels[i + 1].name;
        row_rw(name, p.t_mid[i].first, p.t_mid[i].second);
    }
    row_rw("T_mem", p.t_mem_read, p.t_mem_write);
    row("T_ECM", p.t_ecm);
    return out;
}

} // namespace lrbatch

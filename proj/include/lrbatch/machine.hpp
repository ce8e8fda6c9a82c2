#pragma once

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lrbatch/common.hpp"

namespace lrbatch {

// =============================================================================
// Machine description consumed by the cycle model. Models are plain text files
// (see machines/ for the bundled ones); the schema is documented in the README.
// =============================================================================

/// Selects both the cache-overlap rule and the slice-width defaults.
enum class Family { a64fx, intel, amd };

/// How per-level transfer times combine into one figure.
///   full_overlap : max over every term
///   serial       : sum of all transfer terms
///   nested       : T_L1L + max(T_L1S, mid levels), then max with T_mem
enum class OverlapKind { full_overlap, serial, nested };

enum class WritePolicy { write_allocate, write_back };

/// Reach of one cache level: private per core, shared by a core cluster, or
/// shared by the whole socket.
enum class CacheScope { per_core, cluster, socket };

enum class PortClass { compute, load, store };

struct InstructionSpec {
    std::string mnemonic;
    double latency = 0.0;             // informational; cycles
    double reciprocal_throughput = 0; // cycles per issue, already port-aggregated
    PortClass port = PortClass::compute;
};

struct CacheLevel {
    std::string name;        // "L1", "L2", ...
    std::size_t count = 1;   // instances per socket
    std::size_t size_bytes = 0; // capacity of one instance
    double load_bpc = 0.0;   // bytes per cycle toward the core
    double store_bpc = 0.0;  // bytes per cycle away from the core
    CacheScope scope = CacheScope::per_core;
    // Levels inherit the machine's write policy unless the file overrides it.
    std::optional<WritePolicy> write_policy;
};

struct MachineModel {
    std::string name;
    Family family = Family::intel;
    int vector_bits = 512;
    int cores = 1;
    int cache_line_bytes = 64;
    double clock_hz = 0.0;
    int fma_per_core = 2;
    int load_ports = 2;
    int store_ports = 1;
    WritePolicy write_policy = WritePolicy::write_back;
    // A victim last-level cache absorbs strided over-fetch and store-allocate
    // traffic at the memory interface; without one, both hit memory.
    bool victim_llc = false;
    // Gathers modeled as one line fetch per vector instead of one per lane
    // (page-based fetch behaviour observed on the Xeon).
    bool gather_single_line = false;
    std::vector<CacheLevel> levels; // L1 first; memory is not a level
    double mem_load_bpc = 0.0;
    double mem_store_bpc = 0.0;
    std::vector<InstructionSpec> instructions;

    int vector_doubles() const { return vector_bits / 64; }
    /// Bytes moved per vector-length iteration; the unit all transfer terms
    /// are counted in.
    int transfer_unit_bytes() const { return vector_doubles() * 8; }

    OverlapKind overlap() const {
        switch (family) {
        case Family::amd: return OverlapKind::full_overlap;
        case Family::intel: return OverlapKind::serial;
        case Family::a64fx: return OverlapKind::nested;
        }
        return OverlapKind::serial;
    }

    bool mem_write_allocate() const {
        return write_policy == WritePolicy::write_allocate && !victim_llc;
    }

    WritePolicy level_write_policy(std::size_t level_index) const {
        const auto& override = levels.at(level_index).write_policy;
        return override ? *override : write_policy;
    }

    const InstructionSpec* find_instruction(const std::string& mnemonic) const {
        for (const auto& spec : instructions)
            if (spec.mnemonic == mnemonic) return &spec;
        return nullptr;
    }

    const InstructionSpec& instruction(const std::string& mnemonic) const {
        const InstructionSpec* spec = find_instruction(mnemonic);
        if (!spec)
            throw ParseError("machine '" + name + "' lacks instruction entry '" + mnemonic + "'");
        return *spec;
    }

    /// Stride-sensitive gather throughput: exact "gather@<stride>" entry wins,
    /// otherwise the plain "gather" entry.
    const InstructionSpec& gather_instruction(std::size_t stride_doubles) const {
        const InstructionSpec* exact =
            find_instruction("gather@" + std::to_string(stride_doubles));
        return exact ? *exact : instruction("gather");
    }

    /// Capacity one core can see at a level (bounds the working-set steps).
    std::size_t level_visible_bytes(std::size_t level_index) const {
        const CacheLevel& lvl = levels.at(level_index);
        return lvl.scope == CacheScope::socket ? lvl.count * lvl.size_bytes : lvl.size_bytes;
    }

    /// Total capacity of the level small operands are packed into: the last
    /// cache level, aggregated over all instances.
    std::size_t packing_cache_bytes() const {
        const CacheLevel& last = levels.back();
        return last.count * last.size_bytes;
    }

    void validate() const {
        if (levels.empty()) throw ParseError("machine '" + name + "': no cache levels");
        if (vector_bits < 64 || vector_bits % 64 != 0)
            throw ParseError("machine '" + name + "': vector_bits must be a multiple of 64");
        if (clock_hz <= 0) throw ParseError("machine '" + name + "': clock_hz must be positive");
        for (std::size_t i = 0; i < levels.size(); ++i) {
            const CacheLevel& lvl = levels[i];
            if (lvl.load_bpc <= 0 || lvl.store_bpc <= 0)
                throw ParseError("machine '" + name + "': " + lvl.name +
                                 " bytes/cycle must be positive");
            if (i > 0 && levels[i - 1].size_bytes >= lvl.size_bytes)
                throw ParseError("machine '" + name + "': cache sizes must strictly increase");
        }
        if (mem_load_bpc <= 0 || mem_store_bpc <= 0)
            throw ParseError("machine '" + name + "': memory bytes/cycle must be positive");
        for (const auto& spec : instructions)
            if (spec.reciprocal_throughput <= 0)
                throw ParseError("machine '" + name + "': instruction '" + spec.mnemonic +
                                 "' needs a positive reciprocal throughput");
    }
};

// -----------------------------------------------------------------------------
// Parsing
// -----------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::string strip_comment(const std::string& line) {
    std::size_t pos = line.find('#');
    return pos == std::string::npos ? line : line.substr(0, pos);
}

inline double parse_number(const std::string& tok, const std::string& context) {
    try {
        std::size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError("bad number '" + tok + "' in " + context);
    }
}

inline bool parse_bool(const std::string& tok, const std::string& context) {
    if (tok == "yes" || tok == "true" || tok == "on") return true;
    if (tok == "no" || tok == "false" || tok == "off") return false;
    throw ParseError("bad flag '" + tok + "' in " + context + " (want yes/no)");
}

} // namespace detail

inline Family parse_family(const std::string& tok) {
    if (tok == "a64fx" || tok == "fujitsu" || tok == "nested") return Family::a64fx;
    if (tok == "intel" || tok == "serial") return Family::intel;
    if (tok == "amd" || tok == "full-overlap") return Family::amd;
    throw ParseError("unknown family '" + tok + "'");
}

inline MachineModel parse_machine_model(std::istream& in, const std::string& source_name) {
    MachineModel m;
    bool have_mem = false;
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

        if (head == "level") {
            CacheLevel lvl;
            std::string count_tok, size_tok, load_tok, store_tok, scope_tok, policy_tok;
            words >> lvl.name >> count_tok >> size_tok >> load_tok >> store_tok >> scope_tok >>
                policy_tok;
            if (scope_tok.empty()) throw ParseError("short level record at " + where);
            lvl.count = static_cast<std::size_t>(detail::parse_number(count_tok, where));
            lvl.size_bytes = static_cast<std::size_t>(detail::parse_number(size_tok, where));
            lvl.load_bpc = detail::parse_number(load_tok, where);
            lvl.store_bpc = detail::parse_number(store_tok, where);
            if (scope_tok == "per-core") lvl.scope = CacheScope::per_core;
            else if (scope_tok == "cluster") lvl.scope = CacheScope::cluster;
            else if (scope_tok == "socket") lvl.scope = CacheScope::socket;
            else throw ParseError("unknown scope '" + scope_tok + "' at " + where);
            if (!policy_tok.empty()) {
                if (policy_tok == "write-allocate") lvl.write_policy = WritePolicy::write_allocate;
                else if (policy_tok == "write-back") lvl.write_policy = WritePolicy::write_back;
                else throw ParseError("unknown level write policy '" + policy_tok + "' at " + where);
            }
            m.levels.push_back(lvl);
            continue;
        }
        if (head == "mem") {
            std::string load_tok, store_tok;
            words >> load_tok >> store_tok;
            if (store_tok.empty()) throw ParseError("short mem record at " + where);
            m.mem_load_bpc = detail::parse_number(load_tok, where);
            m.mem_store_bpc = detail::parse_number(store_tok, where);
            have_mem = true;
            continue;
        }
        if (head == "instruction") {
            InstructionSpec spec;
            std::string port_tok, lat_tok, tput_tok;
            words >> spec.mnemonic >> port_tok >> lat_tok >> tput_tok;
            if (tput_tok.empty()) throw ParseError("short instruction record at " + where);
            if (port_tok == "compute") spec.port = PortClass::compute;
            else if (port_tok == "load") spec.port = PortClass::load;
            else if (port_tok == "store") spec.port = PortClass::store;
            else throw ParseError("unknown port class '" + port_tok + "' at " + where);
            spec.latency = lat_tok == "-" ? 0.0 : detail::parse_number(lat_tok, where);
            spec.reciprocal_throughput = detail::parse_number(tput_tok, where);
            m.instructions.push_back(spec);
            continue;
        }

        // key = value
        std::size_t eq = body.find('=');
        if (eq == std::string::npos) throw ParseError("unrecognized line at " + where);
        std::string key = detail::trim(body.substr(0, eq));
        std::string value = detail::trim(body.substr(eq + 1));
        if (key == "name") m.name = value;
        else if (key == "family") m.family = parse_family(value);
        else if (key == "vector_bits") m.vector_bits = static_cast<int>(detail::parse_number(value, where));
        else if (key == "cores") m.cores = static_cast<int>(detail::parse_number(value, where));
        else if (key == "cache_line_bytes") m.cache_line_bytes = static_cast<int>(detail::parse_number(value, where));
        else if (key == "clock_hz") m.clock_hz = detail::parse_number(value, where);
        else if (key == "fma_per_core") m.fma_per_core = static_cast<int>(detail::parse_number(value, where));
        else if (key == "load_ports") m.load_ports = static_cast<int>(detail::parse_number(value, where));
        else if (key == "store_ports") m.store_ports = static_cast<int>(detail::parse_number(value, where));
        else if (key == "write_policy") {
            if (value == "write-allocate") m.write_policy = WritePolicy::write_allocate;
            else if (value == "write-back") m.write_policy = WritePolicy::write_back;
            else throw ParseError("unknown write policy '" + value + "' at " + where);
        } else if (key == "victim_llc") m.victim_llc = detail::parse_bool(value, where);
        else if (key == "gather_line_fetch") {
            if (value == "single") m.gather_single_line = true;
            else if (value == "per-lane") m.gather_single_line = false;
            else throw ParseError("gather_line_fetch wants single|per-lane at " + where);
        } else throw ParseError("unknown key '" + key + "' at " + where);
    }
    if (m.name.empty()) m.name = source_name;
    if (!have_mem) throw ParseError("machine '" + m.name + "': missing mem record");
    m.validate();
    return m;
}

inline MachineModel load_machine_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open machine file: " + path);
    return parse_machine_model(in, path);
}

/// Resolve a machine argument: an existing path wins, otherwise `<name>.mm`
/// is looked up in LRBATCH_MACHINES (environment), then in the build-time
/// machine directory when compiled in.
inline MachineModel resolve_machine(const std::string& name_or_path) {
    auto try_load = [](const std::string& p) -> MachineModel* {
        static thread_local MachineModel scratch;
        std::ifstream probe(p);
        if (!probe) return nullptr;
        scratch = parse_machine_model(probe, p);
        return &scratch;
    };
    if (MachineModel* m = try_load(name_or_path)) return *m;
    std::vector<std::string> tried{name_or_path};
    if (const char* dir = std::getenv("LRBATCH_MACHINES")) {
        std::string p = std::string(dir) + "/" + name_or_path + ".mm";
        if (MachineModel* m = try_load(p)) return *m;
        tried.push_back(p);
    }
#ifdef LRBATCH_MACHINE_DIR
    {
        std::string p = std::string(LRBATCH_MACHINE_DIR) + "/" + name_or_path + ".mm";
        if (MachineModel* m = try_load(p)) return *m;
        tried.push_back(p);
    }
#endif
    std::string msg = "machine model not found; tried:";
    for (const auto& t : tried) msg += " " + t;
    throw IoError(msg);
}

} // namespace lrbatch

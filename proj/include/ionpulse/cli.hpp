#pragma once

// Command layer shared by the ionpulse binary and the tests.  Commands are
// plain functions over option structs writing to caller-supplied streams, so
// their output (and the files they produce) can be checked byte for byte.
//
// Exit codes: 0 success, 1 user error (bad input files, parse or validation
// failures, missing triggers), 2 internal error (reserved for the binary's
// catch-all; the command functions signal user errors only).

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ionpulse/dds.hpp"
#include "ionpulse/jaqal.hpp"

namespace ionpulse {

/// User-facing failure outside the source files themselves (missing file,
/// bad flag value, unreadable timeline).
class CliError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Compilation pipeline
// ---------------------------------------------------------------------------

struct ChannelSummary {
    ChannelId channel = 0;
    std::size_t pulses = 0;          // before padding
    std::uint64_t active_cycles = 0; // before padding
    std::uint64_t pad_cycles = 0;
    friend bool operator==(const ChannelSummary&, const ChannelSummary&) = default;
};

struct CompileReport {
    std::string set_name;
    int channel_count = 0;
    std::uint64_t program_cycles = 0;
    std::vector<ChannelSummary> channels;
    std::vector<std::string> merge_notes;
    std::size_t sync_pulses = 0;
    std::size_t fb_pulses = 0;
    std::size_t waittrig_pulses = 0;
};

struct CompileResult {
    Timelines timelines;
    CompileReport report;
};

inline CompileResult compile_program(const std::string& program_src,
                                     const std::string& defs_src, const std::string& calib_src,
                                     int channel_count = default_channel_count) {
    const Calibration calib = calib_src.empty() ? Calibration{} : parse_calibration(calib_src);
    BoundPulseSet set(parse_pulse_defs(defs_src), calib);
    const Program prog = parse_program(program_src);

    CompileResult r;
    r.report.set_name = set.name();
    r.report.channel_count = channel_count;
    ChannelStreams streams = elaborate(prog, set, channel_count, &r.report.merge_notes);

    for (const auto& ch : streams) {
        for (const auto& p : ch) {
            if (p.sync_mask) ++r.report.sync_pulses;
            if (p.fb_enable_mask) ++r.report.fb_pulses;
            if (p.waittrig) ++r.report.waittrig_pulses;
        }
    }

    r.timelines = lay_out(streams);
    std::vector<std::uint64_t> before;
    before.reserve(r.timelines.channels.size());
    for (const auto& tl : r.timelines.channels) before.push_back(tl.total_cycles());
    pad_to_common_duration(r.timelines);

    for (std::size_t ch = 0; ch < streams.size(); ++ch) {
        ChannelSummary s;
        s.channel = static_cast<ChannelId>(ch);
        s.pulses = streams[ch].size();
        s.active_cycles = before[ch];
        s.pad_cycles = r.timelines.channels[ch].total_cycles() - before[ch];
        r.report.channels.push_back(s);
    }
    r.report.program_cycles = r.timelines.program_cycles;
    return r;
}

inline void print_report(const CompileReport& rep, std::ostream& os) {
    char secs[40];
    std::snprintf(secs, sizeof secs, "%.9g",
                  static_cast<double>(rep.program_cycles) * clock_period_s);
    os << "pulse set:       " << rep.set_name << '\n';
    os << "channels:        " << rep.channel_count << '\n';
    os << "program cycles:  " << rep.program_cycles << " (" << secs << " s)\n";
    os << "sync pulses:     " << rep.sync_pulses << '\n';
    os << "feedback pulses: " << rep.fb_pulses << '\n';
    os << "waittrig pulses: " << rep.waittrig_pulses << '\n';
    for (const auto& c : rep.channels) {
        if (c.pulses == 0 && c.pad_cycles == 0) continue;
        os << "channel " << c.channel << ": " << c.pulses << " pulse" << (c.pulses == 1 ? "" : "s")
           << ", " << c.active_cycles << " active cycles, " << c.pad_cycles << " pad cycles\n";
    }
    for (const auto& n : rep.merge_notes) os << "note: " << n << '\n';
}

// ---------------------------------------------------------------------------
// File plumbing
// ---------------------------------------------------------------------------

namespace detail {

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw CliError("cannot open '" + p.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw CliError("cannot write '" + p.string() + "'");
    out << text;
}

} // namespace detail

/// Feed-forward step table: '#' comments and "<t_global> <word>" lines with
/// strictly increasing cycle counts.
inline CorrectionStream parse_correction_table(std::string_view src) {
    CorrectionStream out;
    std::istringstream is{std::string(src)};
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::uint64_t t = 0;
        std::int64_t w = 0;
        if (!(ls >> t)) {
            std::string rest;
            if (ls.clear(), ls >> rest)
                throw ParseError(lineno, 1, "expected '<t_global> <word>'");
            continue; // blank
        }
        if (!(ls >> w)) throw ParseError(lineno, 1, "missing correction word");
        std::string rest;
        if (ls >> rest) throw ParseError(lineno, 1, "trailing input after correction word");
        if (!out.steps.empty() && t <= out.steps.back().first)
            throw ParseError(lineno, 1, "correction steps must increase in time");
        out.steps.emplace_back(t, w);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

struct CompileOptions {
    std::string program_path;
    std::string defs_path;  // empty: <program dir>/<from-stem>.pdef
    std::string calib_path; // empty: <program dir>/default.calib when present
    int channel_count = default_channel_count;
    std::string out_path;   // empty: <program stem>.timeline.json in cwd; "-": stdout
};

namespace detail {

struct LoadedSources {
    std::string program, defs, calib;
};

inline LoadedSources load_sources(const CompileOptions& opt) {
    namespace fs = std::filesystem;
    if (opt.program_path.empty()) throw CliError("no program file given");
    LoadedSources src;
    src.program = read_file(opt.program_path);
    const fs::path dir = fs::path(opt.program_path).parent_path();

    fs::path defs = opt.defs_path;
    if (defs.empty()) {
        const Program prog = parse_program(src.program); // for the usepulses stem
        defs = dir / (prog.defs_file + ".pdef");
    }
    src.defs = read_file(defs);

    fs::path calib = opt.calib_path;
    if (calib.empty()) {
        const fs::path fallback = dir / "default.calib";
        if (fs::exists(fallback)) calib = fallback;
    }
    if (!calib.empty()) src.calib = read_file(calib);
    return src;
}

inline CompileResult compile_from_files(const CompileOptions& opt) {
    if (opt.channel_count < 1) throw CliError("--channels must be at least 1");
    const LoadedSources src = load_sources(opt);
    return compile_program(src.program, src.defs, src.calib, opt.channel_count);
}

} // namespace detail

/// Compile a program to its timeline JSON.  The report goes to `out` unless
/// the JSON itself does (out_path "-"), in which case the report moves to
/// `err` to keep stdout machine-readable.
inline int cmd_compile(const CompileOptions& opt, std::ostream& out, std::ostream& err) {
    try {
        const CompileResult r = detail::compile_from_files(opt);
        const std::string text = to_json(r.timelines).dump(2) + "\n";
        if (opt.out_path == "-") {
            out << text;
            print_report(r.report, err);
        } else {
            std::filesystem::path dest = opt.out_path;
            if (dest.empty())
                dest = std::filesystem::path(opt.program_path).stem().string() +
                       ".timeline.json";
            detail::write_file(dest, text);
            print_report(r.report, out);
            out << "wrote " << dest.string() << '\n';
        }
        return 0;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const CliError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

inline int cmd_inspect(const CompileOptions& opt, std::ostream& out, std::ostream& err) {
    try {
        const CompileResult r = detail::compile_from_files(opt);
        print_report(r.report, out);
        return 0;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const CliError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

struct SimulateOptions {
    std::string program_path; // .jaqal sources or a compiled .timeline.json
    std::string defs_path;
    std::string calib_path;
    int channel_count = default_channel_count;
    std::string out_path = "-"; // waveform destination; "-": stdout
    std::string format = "csv"; // csv | json
    std::uint64_t t_global = 0;
    std::int64_t correction = 0;        // constant correction word
    std::string correction_table_path;  // overrides the constant
    std::int64_t correction_scale = 1;
    std::vector<std::uint64_t> triggers;
    int oversample = 1;
    int decimate = 1;
};

inline int cmd_simulate(const SimulateOptions& opt, std::ostream& out, std::ostream& err) {
    try {
        if (opt.format != "csv" && opt.format != "json")
            throw CliError("--format must be csv or json");
        if (opt.oversample < 1) throw CliError("--oversample must be at least 1");
        if (opt.decimate < 1) throw CliError("--decimate must be at least 1");

        Timelines tl;
        if (std::filesystem::path(opt.program_path).extension() == ".json") {
            try {
                tl = timelines_from_json(
                    nlohmann::json::parse(detail::read_file(opt.program_path)));
            } catch (const nlohmann::json::exception& e) {
                throw CliError("bad timeline file '" + opt.program_path + "': " + e.what());
            }
        } else {
            CompileOptions copt;
            copt.program_path = opt.program_path;
            copt.defs_path = opt.defs_path;
            copt.calib_path = opt.calib_path;
            copt.channel_count = opt.channel_count;
            tl = detail::compile_from_files(copt).timelines;
        }

        SimConfig cfg;
        cfg.t_global_initial = opt.t_global;
        if (!opt.correction_table_path.empty())
            cfg.correction = parse_correction_table(detail::read_file(opt.correction_table_path));
        else
            cfg.correction.constant = opt.correction;
        cfg.correction_scale = opt.correction_scale;
        cfg.trigger_cycles = opt.triggers;
        std::sort(cfg.trigger_cycles.begin(), cfg.trigger_cycles.end());
        cfg.oversample = opt.oversample;

        const WaveformTable table = simulate(tl, cfg);
        std::ostringstream body;
        if (opt.format == "csv") write_waveform_csv(table, body, opt.decimate);
        else write_waveform_json(table, body, opt.decimate);

        if (opt.out_path == "-" || opt.out_path.empty()) out << body.str();
        else detail::write_file(opt.out_path, body.str());
        return 0;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const TriggerError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    } catch (const CliError& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace ionpulse

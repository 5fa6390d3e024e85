// ionpulse command-line driver.
//
//   ionpulse compile  --program prog.jaqal [--defs set.pdef] [--calib c.calib]
//   ionpulse inspect  --program prog.jaqal ...
//   ionpulse simulate --program prog.jaqal|timeline.json [--format csv|json] ...
//
// Exit codes: 0 success, 1 user error, 2 internal error.

#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "ionpulse/cli.hpp"

namespace {

void add_compile_flags(CLI::App& cmd, ionpulse::CompileOptions& opt) {
    cmd.add_option("--program", opt.program_path, "gate program (.jaqal)")->required();
    cmd.add_option("--defs", opt.defs_path,
                   "pulse definition file (default: <program dir>/<usepulses stem>.pdef)");
    cmd.add_option("--calib", opt.calib_path,
                   "calibration file (default: <program dir>/default.calib if present)");
    cmd.add_option("--channels", opt.channel_count, "output channel count (default 8)");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"pulse-level compiler and cycle-accurate DDS simulator "
                 "for trapped-ion gate programs"};
    app.require_subcommand(1);

    ionpulse::CompileOptions compile_opt;
    CLI::App* compile = app.add_subcommand("compile", "compile a program to timeline JSON");
    add_compile_flags(*compile, compile_opt);
    compile->add_option("--out", compile_opt.out_path,
                        "timeline destination ('-' for stdout; default <stem>.timeline.json)");

    ionpulse::CompileOptions inspect_opt;
    CLI::App* inspect = app.add_subcommand("inspect", "compile and print the report only");
    add_compile_flags(*inspect, inspect_opt);

    ionpulse::SimulateOptions sim_opt;
    CLI::App* simulate =
        app.add_subcommand("simulate", "compile (or load a timeline) and emit the waveform");
    simulate->add_option("--program", sim_opt.program_path,
                         "gate program (.jaqal) or compiled timeline (.json)")
        ->required();
    simulate->add_option("--defs", sim_opt.defs_path, "pulse definition file");
    simulate->add_option("--calib", sim_opt.calib_path, "calibration file");
    simulate->add_option("--channels", sim_opt.channel_count, "output channel count (default 8)");
    simulate->add_option("--out", sim_opt.out_path, "waveform destination (default '-')");
    simulate->add_option("--format", sim_opt.format, "waveform format: csv or json");
    simulate->add_option("--t-global", sim_opt.t_global, "global counter value at cycle 0");
    simulate->add_option("--correction", sim_opt.correction, "constant feed-forward word");
    simulate->add_option("--correction-table", sim_opt.correction_table_path,
                         "feed-forward step table file");
    simulate->add_option("--correction-scale", sim_opt.correction_scale,
                         "per-channel feed-forward scale factor");
    simulate->add_option("--triggers", sim_opt.triggers,
                         "external trigger arrival cycles for waittrig pulses");
    simulate->add_option("--oversample", sim_opt.oversample, "output rows per clock cycle");
    simulate->add_option("--decimate", sim_opt.decimate, "keep every k-th cycle in the output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (compile->parsed())
            return ionpulse::cmd_compile(compile_opt, std::cout, std::cerr);
        if (inspect->parsed())
            return ionpulse::cmd_inspect(inspect_opt, std::cout, std::cerr);
        return ionpulse::cmd_simulate(sim_opt, std::cout, std::cerr);
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 2;
    }
}

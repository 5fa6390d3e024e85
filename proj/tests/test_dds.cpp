#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "ionpulse/dds.hpp"
#include "support/oracles.hpp"

using namespace ionpulse;

namespace {

PulseRecord tone_pulse(ChannelId ch, double dur_s, ParamSource f, ParamSource phase,
                       ParamSource amp) {
    PulseRecord p = nop(ch, dur_s);
    p.freq0 = std::move(f);
    p.phase0 = std::move(phase);
    p.amp0 = std::move(amp);
    return p;
}

Timelines lay_single(std::vector<PulseRecord> pulses, int channel_count = 1) {
    std::vector<GateBlock> blocks;
    for (auto& p : pulses) blocks.push_back(GateBlock{{std::move(p)}});
    return lay_out(sequence(blocks, channel_count));
}

std::vector<std::uint64_t> acc0_by_cycle(const WaveformTable& t, int channel) {
    std::vector<std::uint64_t> v;
    for (const auto& r : t.rows)
        if (r.channel == channel && r.subsample == 0) v.push_back(r.acc0);
    return v;
}

std::vector<double> tone0_by_cycle(const WaveformTable& t, int channel) {
    std::vector<double> v;
    for (const auto& r : t.rows)
        if (r.channel == channel && r.subsample == 0) v.push_back(r.tone0);
    return v;
}

constexpr double dur_512 = 512 * clock_period_s;

} // namespace

TEST_CASE("sync phase matches modular multiply oracle", "[dds]") {
    REQUIRE(apply_sync(FreqWord{0}, 123456).value == 0);
    REQUIRE(apply_sync(FreqWord{1}, 123456).value == 123456);
    REQUIRE(apply_sync(FreqWord{1} , phase_modulus).value == 0);

    std::mt19937_64 rng(611);
    std::uniform_int_distribution<std::int64_t> words(-max_freq_word, max_freq_word);
    std::uniform_int_distribution<std::uint64_t> times(0, std::uint64_t(1) << 48);
    for (int i = 0; i < 200; ++i) {
        const std::int64_t w = words(rng);
        const std::uint64_t t = times(rng);
        REQUIRE(apply_sync(FreqWord{w}, t).value ==
                oracle::mulmod40(phase_word_from_signed(w), t));
    }
}

TEST_CASE("phase error after epoch is the wrapped word product", "[dds]") {
    REQUIRE(phase_error_after_epoch(1, std::uint64_t(1) << 39) == 180.0);
    REQUIRE(phase_error_after_epoch(1, std::uint64_t(1) << 40) == 0.0);
    REQUIRE(phase_error_after_epoch(2, std::uint64_t(1) << 37) == 90.0);
    // one freq LSB of detuning, one second after the epoch
    const std::uint64_t one_second = 409600000;
    REQUIRE_THAT(phase_error_after_epoch(1, one_second),
                 Catch::Matchers::WithinAbs(one_second * 360.0 / std::pow(2.0, 40), 1e-12));
}

TEST_CASE("run_cycle samples before advancing", "[dds]") {
    ToneAccumulators acc;
    ToneCycleInput t0;
    t0.freq_word = discretize_frequency(1e6).value;
    t0.phase_offset_word = discretize_phase(90.0).value;
    t0.amplitude = 50.0;
    ToneCycleInput t1; // silent

    auto s = run_cycle(acc, t0, t1);
    REQUIRE_THAT(s.tone0, Catch::Matchers::WithinAbs(0.5, 1e-12)); // sin(90 deg)
    REQUIRE(s.tone1 == 0.0);
    REQUIRE(acc.acc0 == static_cast<std::uint64_t>(t0.freq_word));
    REQUIRE(acc.acc1 == 0);
}

TEST_CASE("run_cycle with negative word decrements the accumulator", "[dds]") {
    ToneAccumulators acc;
    ToneCycleInput t0;
    t0.freq_word = -3;
    ToneCycleInput t1;
    run_cycle(acc, t0, t1);
    REQUIRE(acc.acc0 == phase_modulus - 3);
    run_cycle(acc, t0, t1);
    REQUIRE(acc.acc0 == phase_modulus - 6);
}

TEST_CASE("run_cycle feed-forward applies only to enabled tones", "[dds]") {
    ToneAccumulators acc;
    ToneCycleInput t0;
    t0.freq_word = 1000;
    t0.fb_enabled = true;
    ToneCycleInput t1;
    t1.freq_word = 1000;
    run_cycle(acc, t0, t1, -7);
    REQUIRE(acc.acc0 == 993);
    REQUIRE(acc.acc1 == 1000);
}

TEST_CASE("constant tone reproduces the closed-form sinusoid", "[dds]") {
    const double f = to_hz(discretize_frequency(1e6));
    const std::uint64_t w = static_cast<std::uint64_t>(discretize_frequency(1e6).value);
    auto t = simulate(lay_single({tone_pulse(0, 1e-5, Constant{f}, Constant{0}, Constant{100})}));

    REQUIRE(t.rows.size() == 4096);
    for (std::uint64_t n = 0; n < 4096; ++n) {
        const double expect =
            std::sin(2.0 * std::numbers::pi * static_cast<double>(oracle::mulmod40(w, n)) /
                     static_cast<double>(phase_modulus));
        REQUIRE_THAT(t.rows[n].tone0, Catch::Matchers::WithinAbs(expect, 1e-9));
        REQUIRE(t.rows[n].acc0 == oracle::mulmod40(w, n));
        REQUIRE(t.rows[n].tone1 == 0.0);
    }
}

TEST_CASE("rows come out cycle-major, channel-minor", "[dds]") {
    auto blocks = std::vector<GateBlock>{
        GateBlock{{nop(0, dur_512), nop(1, dur_512)}}};
    SimConfig cfg;
    cfg.oversample = 2;
    auto t = simulate(lay_out(sequence(blocks, 2)), cfg);
    REQUIRE(t.rows.size() == 512 * 2 * 2);
    std::size_t i = 0;
    for (std::uint64_t cycle = 0; cycle < 512; ++cycle) {
        for (int ch = 0; ch < 2; ++ch) {
            for (int sub = 0; sub < 2; ++sub, ++i) {
                REQUIRE(t.rows[i].cycle == cycle);
                REQUIRE(t.rows[i].channel == ch);
                REQUIRE(t.rows[i].subsample == sub);
                REQUIRE_THAT(t.rows[i].t_seconds,
                             Catch::Matchers::WithinRel(
                                 (double(cycle) + sub / 2.0) * clock_period_s, 1e-15));
            }
        }
    }
}

TEST_CASE("disabled tone stays silent while its accumulator advances", "[dds]") {
    auto on = tone_pulse(0, dur_512, Constant{10e6}, Constant{0}, Constant{80});
    auto off = on;
    off.enable_mask = 0b01;
    auto t_on = simulate(lay_single({on}));
    auto t_off = simulate(lay_single({off}));
    REQUIRE(acc0_by_cycle(t_off, 0) == acc0_by_cycle(t_on, 0));
    bool any_nonzero = false;
    for (double v : tone0_by_cycle(t_on, 0)) any_nonzero |= (v != 0.0);
    REQUIRE(any_nonzero);
    for (double v : tone0_by_cycle(t_off, 0)) REQUIRE(v == 0.0);
}

TEST_CASE("accumulator carries across pulse boundaries", "[dds]") {
    const double f = to_hz(discretize_frequency(3e6));
    auto t = simulate(lay_single({
        tone_pulse(0, dur_512, Constant{f}, Constant{0}, Constant{100}),
        tone_pulse(0, dur_512, Constant{f}, Constant{0}, Constant{100}),
    }));
    auto one = simulate(lay_single({tone_pulse(0, 2 * dur_512, Constant{f}, Constant{0},
                                               Constant{100})}));
    REQUIRE(acc0_by_cycle(t, 0) == acc0_by_cycle(one, 0));
    REQUIRE(tone0_by_cycle(t, 0) == tone0_by_cycle(one, 0));
}

TEST_CASE("frequency hop leaves the documented misalignment", "[dds]") {
    const std::int64_t w0 = discretize_frequency(200e6).value;
    const std::int64_t w1 = discretize_frequency(201e6).value;
    const double f0 = to_hz(FreqWord{w0});
    const double f1 = to_hz(FreqWord{w1});

    auto hopped = simulate(lay_single({
        tone_pulse(0, dur_512, Constant{f0}, Constant{0}, Constant{100}),
        tone_pulse(0, dur_512, Constant{f1}, Constant{0}, Constant{100}),
        tone_pulse(0, dur_512, Constant{f0}, Constant{0}, Constant{100}),
    }));
    auto straight = simulate(lay_single({
        tone_pulse(0, 3 * dur_512, Constant{f0}, Constant{0}, Constant{100}),
    }));

    const auto a = acc0_by_cycle(hopped, 0);
    const auto b = acc0_by_cycle(straight, 0);
    const std::uint64_t expect = mul_word_mod(w1 - w0, 512);
    for (std::uint64_t n = 1024; n < 1536; ++n)
        REQUIRE(((a[n] - b[n]) & phase_word_mask) == expect);
}

TEST_CASE("sync on return restores the uninterrupted tone", "[dds]") {
    const std::int64_t w0 = discretize_frequency(200e6).value;
    const double f0 = to_hz(FreqWord{w0});
    const double f1 = to_hz(discretize_frequency(201e6));

    auto a = tone_pulse(0, dur_512, Constant{f0}, Constant{0}, Constant{100});
    a.sync_mask = 0b01;
    auto b = tone_pulse(0, dur_512, Constant{f1}, Constant{0}, Constant{100});
    auto c = a; // same frequency, sync on return

    auto resynced = simulate(lay_single({a, b, c}));
    auto uninterrupted = simulate(lay_single({
        tone_pulse(0, 3 * dur_512, Constant{f0}, Constant{0}, Constant{100})}));

    const auto ra = acc0_by_cycle(resynced, 0);
    const auto ua = acc0_by_cycle(uninterrupted, 0);
    for (std::uint64_t n = 1024; n < 1536; ++n) {
        REQUIRE(ra[n] == ua[n]);
        REQUIRE(ra[n] == oracle::mulmod40(static_cast<std::uint64_t>(w0), n));
    }
    // and without sync the same comparison fails
    auto unsynced = simulate(lay_single({a, b, tone_pulse(0, dur_512, Constant{f0},
                                                          Constant{0}, Constant{100})}));
    REQUIRE(acc0_by_cycle(unsynced, 0)[1024] != ua[1024]);
}

TEST_CASE("sync accounts for a nonzero epoch", "[dds]") {
    const std::int64_t w = discretize_frequency(50e6).value;
    auto p = tone_pulse(0, dur_512, Constant{to_hz(FreqWord{w})}, Constant{0}, Constant{100});
    p.sync_mask = 0b01;
    SimConfig cfg;
    cfg.t_global_initial = 987654321;
    auto t = simulate(lay_single({p}), cfg);
    REQUIRE(t.rows[0].acc0 ==
            oracle::mulmod40(static_cast<std::uint64_t>(w), cfg.t_global_initial));
}

TEST_CASE("sync uses the first knot of a modulated frequency", "[dds]") {
    auto p = nop(0, dur_512);
    p.freq0 = SplineKnots{{10e6, 20e6, 15e6}};
    p.amp0 = Constant{100};
    p.sync_mask = 0b01;
    SimConfig cfg;
    cfg.t_global_initial = 777777;
    auto t = simulate(lay_single({p}), cfg);
    const std::uint64_t w = static_cast<std::uint64_t>(discretize_frequency(10e6).value);
    REQUIRE(t.rows[0].acc0 == oracle::mulmod40(w, cfg.t_global_initial));
}

TEST_CASE("feed-forward equals baking the correction into the word", "[dds]") {
    const std::int64_t w = discretize_frequency(100e6).value;
    const std::int64_t c = -5000;

    auto fb = tone_pulse(0, dur_512, Constant{to_hz(FreqWord{w})}, Constant{0}, Constant{100});
    fb.fb_enable_mask = 0b01;
    SimConfig cfg;
    cfg.correction.constant = c;
    auto corrected = simulate(lay_single({fb}), cfg);

    auto baked = simulate(lay_single({tone_pulse(0, dur_512, Constant{to_hz(FreqWord{w + c})},
                                                 Constant{0}, Constant{100})}));
    REQUIRE(acc0_by_cycle(corrected, 0) == acc0_by_cycle(baked, 0));
    REQUIRE(tone0_by_cycle(corrected, 0) == tone0_by_cycle(baked, 0));
}

TEST_CASE("correction scale multiplies the applied word", "[dds]") {
    const std::int64_t w = discretize_frequency(100e6).value;
    auto fb = tone_pulse(0, dur_512, Constant{to_hz(FreqWord{w})}, Constant{0}, Constant{100});
    fb.fb_enable_mask = 0b01;

    SimConfig scaled;
    scaled.correction.constant = 40;
    scaled.correction_scale = -3;
    SimConfig plain;
    plain.correction.constant = -120;
    REQUIRE(acc0_by_cycle(simulate(lay_single({fb}), scaled), 0) ==
            acc0_by_cycle(simulate(lay_single({fb}), plain), 0));
}

TEST_CASE("stepped correction follows the global counter", "[dds]") {
    const std::int64_t w = discretize_frequency(100e6).value;
    auto fb = tone_pulse(0, dur_512, Constant{to_hz(FreqWord{w})}, Constant{0}, Constant{100});
    fb.fb_enable_mask = 0b01;

    SimConfig cfg;
    cfg.correction.steps = {{0, 11}, {100, -11}};
    auto t = simulate(lay_single({fb}), cfg);
    const auto acc = acc0_by_cycle(t, 0);
    REQUIRE(acc[100] == mul_word_mod(w + 11, 100));
    const std::uint64_t tail = mul_word_mod(w - 11, 412);
    REQUIRE(acc[511] == ((mul_word_mod(w + 11, 100) + mul_word_mod(w - 11, 411)) &
                         phase_word_mask));
    REQUIRE(((acc[100] + tail) & phase_word_mask) ==
            ((mul_word_mod(w, 512) + mul_word_mod(11, 100) + mul_word_mod(-11, 412)) &
             phase_word_mask));
}

TEST_CASE("feed-forward ignores tones without the fb bit", "[dds]") {
    auto p = tone_pulse(0, dur_512, Constant{10e6}, Constant{0}, Constant{100});
    SimConfig cfg;
    cfg.correction.constant = 9999;
    REQUIRE(acc0_by_cycle(simulate(lay_single({p}), cfg), 0) ==
            acc0_by_cycle(simulate(lay_single({p})), 0));
}

TEST_CASE("forwarded frame shifts the carrier like a phase offset", "[dds]") {
    auto framed = tone_pulse(0, dur_512, Constant{10e6}, Constant{0}, Constant{100});
    framed.framerot0 = Constant{15};
    framed.fwd_frame0_mask = 0b01;
    auto offset = tone_pulse(0, dur_512, Constant{10e6}, Constant{15}, Constant{100});
    REQUIRE(tone0_by_cycle(simulate(lay_single({framed})), 0) ==
            tone0_by_cycle(simulate(lay_single({offset})), 0));

    // second pulse sees the accumulated frame
    auto two_framed = simulate(lay_single({framed, framed}));
    auto offset30 = tone_pulse(0, dur_512, Constant{10e6}, Constant{30}, Constant{100});
    auto expect = simulate(lay_single({offset, offset30}));
    REQUIRE(tone0_by_cycle(two_framed, 0) == tone0_by_cycle(expect, 0));
}

TEST_CASE("frames do not disturb sync or accumulators", "[dds]") {
    auto framed = tone_pulse(0, dur_512, Constant{10e6}, Constant{0}, Constant{100});
    framed.framerot0 = Constant{77};
    framed.fwd_frame0_mask = 0b11;
    framed.sync_mask = 0b11;
    auto plain = framed;
    plain.framerot0 = Constant{0};
    plain.fwd_frame0_mask = 0;
    SimConfig cfg;
    cfg.t_global_initial = 424242;
    REQUIRE(acc0_by_cycle(simulate(lay_single({framed}), cfg), 0) ==
            acc0_by_cycle(simulate(lay_single({plain}), cfg), 0));
}

TEST_CASE("frame columns report the running accumulators", "[dds]") {
    auto p = nop(0, dur_512);
    p.framerot0 = Constant{150};
    auto t = simulate(lay_single({p, p, p}));
    auto frame_at = [&](std::uint64_t cycle) { return t.rows[cycle].frame0_deg; };
    REQUIRE(frame_at(0) == 150.0);
    REQUIRE(frame_at(600) == -60.0); // 300 wrapped
    REQUIRE(frame_at(1100) == 90.0); // 450 wrapped
    REQUIRE(t.rows[0].frame1_deg == 0.0);
}

TEST_CASE("waittrig stalls until the next trigger", "[dds]") {
    auto p = tone_pulse(0, dur_512, Constant{0}, Constant{90}, Constant{100});
    p.waittrig = true;
    SimConfig cfg;
    cfg.trigger_cycles = {100};
    auto t = simulate(lay_single({p}), cfg);
    REQUIRE(t.rows.size() == 612);
    for (std::uint64_t n = 0; n < 100; ++n) {
        REQUIRE(t.rows[n].tone0 == 0.0);
        REQUIRE(t.rows[n].acc0 == 0);
    }
    // freq word 0, phase 90: each active cycle outputs exactly sin(90 deg)
    for (std::uint64_t n = 100; n < 612; ++n)
        REQUIRE_THAT(t.rows[n].tone0, Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("trigger at the current cycle starts immediately", "[dds]") {
    auto p = tone_pulse(0, dur_512, Constant{0}, Constant{90}, Constant{100});
    p.waittrig = true;
    SimConfig cfg;
    cfg.trigger_cycles = {0, 600};
    auto t = simulate(lay_single({p, p}), cfg);
    REQUIRE(t.rows.size() == 600 + 512);
    REQUIRE(t.rows[0].tone0 != 0.0);     // first pulse fires at once
    REQUIRE(t.rows[512].tone0 == 0.0);   // second waits 512..599
    REQUIRE(t.rows[600].tone0 != 0.0);
}

TEST_CASE("running out of triggers is an error", "[dds]") {
    auto p = tone_pulse(0, dur_512, Constant{0}, Constant{90}, Constant{100});
    p.waittrig = true;
    SimConfig one_trigger;
    one_trigger.trigger_cycles = {0};
    REQUIRE_THROWS_AS(simulate(lay_single({p, p}), one_trigger), TriggerError);
    REQUIRE_THROWS_AS(simulate(lay_single({p})), TriggerError);
}

TEST_CASE("modulated parameters drive the output cycle by cycle", "[dds]") {
    // freq word 0 so the accumulator stays put; phase steps move the carrier
    auto p = nop(0, dur_512);
    p.amp0 = Constant{100};
    p.phase0 = Discrete{{30, 90, 150, 210}};
    auto t = simulate(lay_single({p}));
    auto deg_of = [](double v) { return std::asin(v) * 180.0 / std::numbers::pi; };
    REQUIRE_THAT(deg_of(t.rows[0].tone0), Catch::Matchers::WithinAbs(30, 1e-9));
    REQUIRE_THAT(t.rows[200].tone0, Catch::Matchers::WithinAbs(1.0, 1e-12));
    REQUIRE_THAT(deg_of(t.rows[300].tone0), Catch::Matchers::WithinAbs(30, 1e-9)); // 150
    REQUIRE_THAT(t.rows[500].tone0, Catch::Matchers::WithinAbs(-0.5, 1e-9)); // 210
}

TEST_CASE("amplitude spline is evaluated inside the cycle grid", "[dds]") {
    auto p = nop(0, 8 * clock_period_s);
    p.amp0 = SplineKnots{{0, 100}};
    p.phase0 = Constant{90};
    SimConfig cfg;
    cfg.oversample = 4;
    auto t = simulate(lay_single({p}), cfg);
    REQUIRE(t.rows.size() == 32);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const double u = static_cast<double>(i) / 32.0;
        REQUIRE_THAT(t.rows[i].tone0, Catch::Matchers::WithinAbs(u, 1e-12));
    }
}

TEST_CASE("oversampled carrier interpolates the accumulator", "[dds]") {
    const std::uint64_t w = static_cast<std::uint64_t>(discretize_frequency(40e6).value);
    auto p = tone_pulse(0, dur_512, Constant{to_hz(discretize_frequency(40e6))}, Constant{0},
                        Constant{100});
    SimConfig cfg;
    cfg.oversample = 4;
    auto t = simulate(lay_single({p}), cfg);
    REQUIRE(t.rows.size() == 512 * 4);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const std::uint64_t n = i / 4;
        const double frac = (i % 4) / 4.0;
        const double turns =
            (static_cast<double>(oracle::mulmod40(w, n)) + static_cast<double>(w) * frac) /
            static_cast<double>(phase_modulus);
        REQUIRE_THAT(t.rows[i].tone0,
                     Catch::Matchers::WithinAbs(std::sin(2 * std::numbers::pi * turns), 1e-9));
    }
}

TEST_CASE("spline frequency matches a per-cycle word oracle", "[dds]") {
    auto p = nop(0, dur_512);
    p.freq0 = SplineKnots{{1e6, 5e6, 2e6}};
    p.amp0 = Constant{100};
    auto t = simulate(lay_single({p}));

    // reconstruct: word per cycle from the fitted spline, accumulate mod 2^40
    auto sp = fit_natural_cubic(std::vector<double>{1e6, 5e6, 2e6}, 512);
    std::uint64_t acc = 0;
    for (std::uint64_t n = 0; n < 512; ++n) {
        REQUIRE(t.rows[n].acc0 == acc);
        const double expect = std::sin(2 * std::numbers::pi * static_cast<double>(acc) /
                                       static_cast<double>(phase_modulus));
        REQUIRE_THAT(t.rows[n].tone0, Catch::Matchers::WithinAbs(expect, 1e-9));
        const std::int64_t w = round_half_even(evaluate(sp, n) / freq_lsb_hz);
        acc = (acc + static_cast<std::uint64_t>(w)) & phase_word_mask;
    }
}

TEST_CASE("channels that finish early pad with silence", "[dds]") {
    auto blocks = std::vector<GateBlock>{GateBlock{{nop(0, 2 * dur_512),
                                                    tone_pulse(1, dur_512, Constant{0},
                                                               Constant{90}, Constant{100})}}};
    auto t = simulate(lay_out(sequence(blocks, 2)));
    // channel 1 runs out at cycle 512 but rows keep coming until 1024
    REQUIRE(t.rows.size() == 1024 * 2);
    REQUIRE(t.rows[2 * 600 + 1].channel == 1);
    REQUIRE(t.rows[2 * 600 + 1].tone0 == 0.0);
    REQUIRE(t.rows[2 * 400 + 1].tone0 != 0.0);
}

TEST_CASE("csv writer emits the documented header and plain rows", "[dds]") {
    auto p = tone_pulse(0, 4 * clock_period_s, Constant{0}, Constant{90}, Constant{50});
    auto t = simulate(lay_single({p}));
    std::ostringstream os;
    write_waveform_csv(t, os);
    std::istringstream is(os.str());
    std::string line;
    REQUIRE(std::getline(is, line));
    REQUIRE(line == "cycle,t_seconds,channel,tone0,tone1,sum,frame0_deg,frame1_deg,acc0,acc1");
    REQUIRE(std::getline(is, line));
    REQUIRE(line == "0,0,0,0.5,0,0.5,0,0,0,0");
    int rows = 1;
    while (std::getline(is, line)) ++rows;
    REQUIRE(rows == 4);
}

TEST_CASE("csv decimation keeps cycles on the stride", "[dds]") {
    auto t = simulate(lay_single({nop(0, 12 * clock_period_s)}));
    std::ostringstream os;
    write_waveform_csv(t, os, 4);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line); // header
    std::vector<std::string> kept;
    while (std::getline(is, line)) kept.push_back(line.substr(0, line.find(',')));
    REQUIRE(kept == std::vector<std::string>{"0", "4", "8"});
}

TEST_CASE("json waveform carries columns and rows", "[dds]") {
    auto t = simulate(lay_single({nop(0, 8 * clock_period_s)}));
    std::ostringstream os;
    write_waveform_json(t, os, 2);
    auto j = nlohmann::json::parse(os.str());
    REQUIRE(j["columns"].size() == 10);
    REQUIRE(j["rows"].size() == 4);
    REQUIRE(j["clock_hz"] == clock_hz);
    REQUIRE(j["rows"][1][0] == 2);
}

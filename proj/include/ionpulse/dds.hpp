#pragma once

// Cycle-accurate dual-tone DDS simulation.
//
// Each tone owns a 40-bit phase accumulator that advances by its frequency
// word once per clock cycle (modulo 2^40).  The output stage converts the
// accumulator plus the pulse's phase offset and any forwarded frame value to
// turns and synthesizes amp/100 * sin(2*pi*turns).  A global cycle counter
// runs from a configurable epoch and is never reset; pulses with a sync bit
// overwrite the tone's accumulator with freq_word * t_global at their first
// cycle, which re-references the tone to the shared epoch.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ionpulse/frames.hpp"
#include "ionpulse/schedule.hpp"
#include "ionpulse/words.hpp"

namespace ionpulse {

/// (word * t) mod 2^40, exact for any signed word and 64-bit counter.
inline std::uint64_t mul_word_mod(std::int64_t word, std::uint64_t t) {
    const std::uint64_t a = phase_word_from_signed(word);
    const unsigned __int128 p = static_cast<unsigned __int128>(a) * t;
    return static_cast<std::uint64_t>(p) & phase_word_mask;
}

/// Accumulator value a synced tone receives: the phase a tone at this
/// frequency would have accumulated had it run since the epoch.
inline PhaseWord apply_sync(FreqWord freq_at_pulse_start, std::uint64_t t_global) {
    return PhaseWord{mul_word_mod(freq_at_pulse_start.value, t_global)};
}

/// Residual phase between two synced tones separated by f_eps_words, t_global
/// cycles after the epoch.
inline double phase_error_after_epoch(std::int64_t f_eps_words, std::uint64_t t_global) {
    return to_degrees(PhaseWord{mul_word_mod(f_eps_words, t_global)});
}

// ---------------------------------------------------------------------------
// Single-cycle kernel
// ---------------------------------------------------------------------------

struct ToneAccumulators {
    std::uint64_t acc0 = 0;
    std::uint64_t acc1 = 0;
};

struct ToneCycleInput {
    std::int64_t freq_word = 0;
    std::uint64_t phase_offset_word = 0;
    double amplitude = 0;        // [-100, 100]
    double frame_offset_deg = 0; // forwarded frame value, already signed
    bool output_enabled = true;  // false: force zero, accumulator still runs
    bool fb_enabled = false;     // add the correction word to the increment
};

struct CycleSample {
    double tone0 = 0;
    double tone1 = 0;
};

namespace detail {

inline double tone_sample(std::uint64_t acc, const ToneCycleInput& in, double extra_turns) {
    if (!in.output_enabled) return 0.0;
    const std::uint64_t frame_word = discretize_phase(in.frame_offset_deg).value;
    const std::uint64_t w = (acc + in.phase_offset_word + frame_word) & phase_word_mask;
    const double turns = static_cast<double>(w) / static_cast<double>(phase_modulus) + extra_turns;
    return in.amplitude / 100.0 * std::sin(2.0 * std::numbers::pi * turns);
}

} // namespace detail

/// Sample both tones, then advance the accumulators by one cycle.
inline CycleSample run_cycle(ToneAccumulators& acc, const ToneCycleInput& t0,
                             const ToneCycleInput& t1, std::int64_t correction_word = 0) {
    CycleSample s;
    s.tone0 = detail::tone_sample(acc.acc0, t0, 0.0);
    s.tone1 = detail::tone_sample(acc.acc1, t1, 0.0);
    auto advance = [&](std::uint64_t a, const ToneCycleInput& in) {
        const std::int64_t inc = in.freq_word + (in.fb_enabled ? correction_word : 0);
        return (a + static_cast<std::uint64_t>(inc)) & phase_word_mask;
    };
    acc.acc0 = advance(acc.acc0, t0);
    acc.acc1 = advance(acc.acc1, t1);
    return s;
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

/// Additive feed-forward words as a step function of the global counter.
struct CorrectionStream {
    std::int64_t constant = 0;
    std::vector<std::pair<std::uint64_t, std::int64_t>> steps; // (from_cycle, word), sorted

    std::int64_t at(std::uint64_t t_global) const {
        std::int64_t w = constant;
        for (const auto& [from, word] : steps) {
            if (from > t_global) break;
            w = word;
        }
        return w;
    }
};

struct SimConfig {
    std::uint64_t t_global_initial = 0;
    CorrectionStream correction;
    std::int64_t correction_scale = 1; // sign/magnitude of the applied correction
    std::vector<std::uint64_t> trigger_cycles; // program-relative, sorted ascending
    int oversample = 1; // output samples per clock cycle
};

struct WaveformRow {
    std::uint64_t cycle = 0;
    int subsample = 0;
    int channel = 0;
    double t_seconds = 0;
    double tone0 = 0, tone1 = 0, sum = 0;
    double frame0_deg = 0, frame1_deg = 0;
    std::uint64_t acc0 = 0, acc1 = 0;
};

struct WaveformTable {
    int oversample = 1;
    std::vector<WaveformRow> rows;
};

class TriggerError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Simulator
// ---------------------------------------------------------------------------

namespace detail {

template <typename Word>
struct ModCursor {
    const Modulation<Word>* mod = nullptr;
    std::uint64_t pos = 0;
    std::size_t idx = 0;
    std::uint64_t idx_start = 0;

    void reset(const Modulation<Word>* m) { *this = ModCursor{m, 0, 0, 0}; }

    std::size_t slice_count() const {
        if (const auto* d = std::get_if<DiscreteMod<Word>>(mod)) return d->words.size();
        if (const auto* s = std::get_if<SplineMod>(mod)) return s->segments.size();
        return 1;
    }

    std::uint64_t slice_cycles() const {
        if (const auto* d = std::get_if<DiscreteMod<Word>>(mod)) return d->cycles[idx];
        if (const auto* s = std::get_if<SplineMod>(mod)) return s->segments[idx].cycles;
        return 0;
    }

    void advance() {
        ++pos;
        if (idx + 1 < slice_count() && pos >= idx_start + slice_cycles()) {
            idx_start += slice_cycles();
            ++idx;
        }
    }

    bool is_spline() const { return std::holds_alternative<SplineMod>(*mod); }

    Word word() const {
        if (const auto* c = std::get_if<ConstantMod<Word>>(mod)) return c->word;
        return std::get<DiscreteMod<Word>>(*mod).words[idx];
    }

    double spline_at(double frac) const {
        const auto& seg = std::get<SplineMod>(*mod).segments[idx];
        const double u = (static_cast<double>(pos - idx_start) + frac) /
                         static_cast<double>(seg.cycles);
        return seg.eval(u);
    }
};

inline std::int64_t freq_word_at(const ModCursor<FreqWord>& c) {
    if (c.is_spline()) return round_half_even(c.spline_at(0.0) / freq_lsb_hz);
    return c.word().value;
}

inline std::uint64_t phase_word_at(const ModCursor<PhaseWord>& c) {
    if (c.is_spline()) return discretize_phase(c.spline_at(0.0)).value;
    return c.word().value;
}

inline double amp_value_at(const ModCursor<AmpWord>& c, double frac) {
    if (c.is_spline()) return c.spline_at(frac);
    return to_amplitude(c.word());
}

/// First frequency word of a pulse, used by sync: the first element of a
/// stepped list, the first knot of a spline, or the constant itself.
inline std::int64_t initial_freq_word(const Modulation<FreqWord>& m) {
    if (const auto* c = std::get_if<ConstantMod<FreqWord>>(&m)) return c->word.value;
    if (const auto* d = std::get_if<DiscreteMod<FreqWord>>(&m)) return d->words.front().value;
    return round_half_even(std::get<SplineMod>(m).segments.front().c0 / freq_lsb_hz);
}

} // namespace detail

inline FrameDirective frame_directive(const EncodedPulse& p) {
    FrameDirective d;
    d.framerot0 = p.framerot0;
    d.framerot1 = p.framerot1;
    d.apply_at_end_mask = p.apply_at_end_mask;
    d.rst_frame_mask = p.rst_frame_mask;
    d.fwd_frame0_mask = p.fwd_frame0_mask;
    d.fwd_frame1_mask = p.fwd_frame1_mask;
    d.inv_frame0_mask = p.inv_frame0_mask;
    d.inv_frame1_mask = p.inv_frame1_mask;
    return d;
}

namespace detail {

struct ActivePulse {
    const EncodedPulse* p = nullptr;
    std::uint64_t pos = 0;
    ModCursor<FreqWord> f0, f1;
    ModCursor<PhaseWord> ph0, ph1;
    ModCursor<AmpWord> a0, a1;
    FrameDirective dir;
    FrameTrace trace0, trace1;
    FrameState end_state;
};

struct ChannelRuntime {
    const ChannelTimeline* tl = nullptr;
    std::size_t next = 0;
    std::optional<ActivePulse> active;
    bool stalled = false;
    std::uint64_t resume_row = 0;
    ToneAccumulators acc;
    FrameState frames;

    bool finished() const { return !active && !stalled && next == tl->segments.size(); }
};

} // namespace detail

/// Run the program and hand every output row to `sink` in deterministic
/// order: cycle-major, channel-minor, subsamples innermost.  waittrig pulses
/// stall their channel (zero output, accumulators held) until the next
/// trigger at or after the current cycle; stalls push the channel's later
/// segments back, so channels may finish at different cycles and the run
/// extends to the last one.
inline void simulate(const Timelines& tl, const SimConfig& cfg,
                     const std::function<void(const WaveformRow&)>& sink) {
    if (cfg.oversample < 1) throw std::invalid_argument("simulate: oversample must be >= 1");
    const int over = cfg.oversample;

    std::vector<detail::ChannelRuntime> chans(tl.channels.size());
    for (std::size_t i = 0; i < tl.channels.size(); ++i) chans[i].tl = &tl.channels[i];

    auto start_pulse = [&](detail::ChannelRuntime& ch, std::uint64_t t_global) {
        const EncodedPulse& p = ch.tl->segments[ch.next].pulse;
        detail::ActivePulse a;
        a.p = &p;
        a.f0.reset(&p.tone0.freq);
        a.f1.reset(&p.tone1.freq);
        a.ph0.reset(&p.tone0.phase);
        a.ph1.reset(&p.tone1.phase);
        a.a0.reset(&p.tone0.amp);
        a.a1.reset(&p.tone1.amp);
        a.dir = frame_directive(p);
        auto fr = step_frame(ch.frames, a.dir, p.cycles);
        a.trace0 = std::move(fr.trace0);
        a.trace1 = std::move(fr.trace1);
        a.end_state = fr.state;
        if (mask_bit(p.sync_mask, 0))
            ch.acc.acc0 = apply_sync(FreqWord{detail::initial_freq_word(p.tone0.freq)}, t_global).value;
        if (mask_bit(p.sync_mask, 1))
            ch.acc.acc1 = apply_sync(FreqWord{detail::initial_freq_word(p.tone1.freq)}, t_global).value;
        ch.active = std::move(a);
    };

    auto all_finished = [&] {
        for (const auto& ch : chans)
            if (!ch.finished()) return false;
        return true;
    };

    for (std::uint64_t row = 0; !all_finished(); ++row) {
        const std::uint64_t t_global = cfg.t_global_initial + row;
        const std::int64_t correction = cfg.correction_scale * cfg.correction.at(t_global);

        for (std::size_t ci = 0; ci < chans.size(); ++ci) {
            auto& ch = chans[ci];

            if (ch.stalled && row >= ch.resume_row) ch.stalled = false;
            if (!ch.active && !ch.stalled && ch.next < ch.tl->segments.size()) {
                const EncodedPulse& p = ch.tl->segments[ch.next].pulse;
                if (p.waittrig) {
                    auto it = std::lower_bound(cfg.trigger_cycles.begin(),
                                               cfg.trigger_cycles.end(), row);
                    if (it == cfg.trigger_cycles.end())
                        throw TriggerError("channel " + std::to_string(ch.tl->channel) +
                                           ": waittrig at cycle " + std::to_string(row) +
                                           " with no trigger remaining");
                    if (*it > row) {
                        ch.stalled = true;
                        ch.resume_row = *it;
                    }
                }
                if (!ch.stalled) start_pulse(ch, t_global);
            }

            WaveformRow base;
            base.cycle = row;
            base.channel = static_cast<int>(ci);
            base.acc0 = ch.acc.acc0;
            base.acc1 = ch.acc.acc1;
            base.frame0_deg = wrap_degrees(ch.frames.frame0_deg);
            base.frame1_deg = wrap_degrees(ch.frames.frame1_deg);

            if (!ch.active) { // stalled, finished, or waiting out other channels
                for (int j = 0; j < over; ++j) {
                    WaveformRow r = base;
                    r.subsample = j;
                    r.t_seconds = (static_cast<double>(row) + static_cast<double>(j) / over) *
                                  clock_period_s;
                    sink(r);
                }
                continue;
            }

            auto& a = *ch.active;
            const EncodedPulse& p = *a.p;
            const double frame0 = a.trace0.at(a.pos);
            const double frame1 = a.trace1.at(a.pos);
            base.frame0_deg = frame0;
            base.frame1_deg = frame1;

            ToneCycleInput in0;
            in0.freq_word = detail::freq_word_at(a.f0);
            in0.phase_offset_word = detail::phase_word_at(a.ph0);
            in0.frame_offset_deg = tone_phase_offset(frame0, frame1, a.dir, 0);
            in0.output_enabled = !mask_bit(p.enable_mask, 0);
            in0.fb_enabled = mask_bit(p.fb_enable_mask, 0);
            ToneCycleInput in1;
            in1.freq_word = detail::freq_word_at(a.f1);
            in1.phase_offset_word = detail::phase_word_at(a.ph1);
            in1.frame_offset_deg = tone_phase_offset(frame0, frame1, a.dir, 1);
            in1.output_enabled = !mask_bit(p.enable_mask, 1);
            in1.fb_enabled = mask_bit(p.fb_enable_mask, 1);

            for (int j = 0; j < over; ++j) {
                const double frac = static_cast<double>(j) / over;
                in0.amplitude = detail::amp_value_at(a.a0, frac);
                in1.amplitude = detail::amp_value_at(a.a1, frac);
                const auto inc_turns = [&](const ToneCycleInput& in) {
                    const double inc = static_cast<double>(
                        in.freq_word + (in.fb_enabled ? correction : 0));
                    return inc * frac / static_cast<double>(phase_modulus);
                };
                WaveformRow r = base;
                r.subsample = j;
                r.t_seconds =
                    (static_cast<double>(row) + frac) * clock_period_s;
                r.tone0 = detail::tone_sample(ch.acc.acc0, in0, inc_turns(in0));
                r.tone1 = detail::tone_sample(ch.acc.acc1, in1, inc_turns(in1));
                r.sum = r.tone0 + r.tone1;
                sink(r);
            }

            in0.amplitude = detail::amp_value_at(a.a0, 0.0);
            in1.amplitude = detail::amp_value_at(a.a1, 0.0);
            run_cycle(ch.acc, in0, in1, correction);

            a.f0.advance(); a.f1.advance();
            a.ph0.advance(); a.ph1.advance();
            a.a0.advance(); a.a1.advance();
            ++a.pos;
            if (a.pos == p.cycles) {
                ch.frames = a.end_state;
                ch.active.reset();
                ++ch.next;
            }
        }
    }
}

inline WaveformTable simulate(const Timelines& tl, const SimConfig& cfg = {}) {
    WaveformTable out;
    out.oversample = cfg.oversample;
    simulate(tl, cfg, [&](const WaveformRow& r) { out.rows.push_back(r); });
    return out;
}

// ---------------------------------------------------------------------------
// Waveform output
// ---------------------------------------------------------------------------

inline constexpr const char* waveform_csv_header =
    "cycle,t_seconds,channel,tone0,tone1,sum,frame0_deg,frame1_deg,acc0,acc1";

namespace detail {

inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

} // namespace detail

/// CSV rows in simulation order; `decimate` keeps cycles divisible by it.
inline void write_waveform_csv(const WaveformTable& t, std::ostream& os, int decimate = 1) {
    if (decimate < 1) throw std::invalid_argument("write_waveform_csv: decimate must be >= 1");
    os << waveform_csv_header << '\n';
    for (const auto& r : t.rows) {
        if (r.cycle % static_cast<std::uint64_t>(decimate) != 0) continue;
        os << r.cycle << ',' << detail::fmt_double(r.t_seconds) << ',' << r.channel << ','
           << detail::fmt_double(r.tone0) << ',' << detail::fmt_double(r.tone1) << ','
           << detail::fmt_double(r.sum) << ',' << detail::fmt_double(r.frame0_deg) << ','
           << detail::fmt_double(r.frame1_deg) << ',' << r.acc0 << ',' << r.acc1 << '\n';
    }
}

inline void write_waveform_json(const WaveformTable& t, std::ostream& os, int decimate = 1) {
    if (decimate < 1) throw std::invalid_argument("write_waveform_json: decimate must be >= 1");
    nlohmann::json j;
    j["clock_hz"] = clock_hz;
    j["oversample"] = t.oversample;
    j["columns"] = {"cycle", "t_seconds", "channel", "tone0", "tone1", "sum",
                    "frame0_deg", "frame1_deg", "acc0", "acc1"};
    auto& rows = j["rows"] = nlohmann::json::array();
    for (const auto& r : t.rows) {
        if (r.cycle % static_cast<std::uint64_t>(decimate) != 0) continue;
        rows.push_back({r.cycle, r.t_seconds, r.channel, r.tone0, r.tone1, r.sum, r.frame0_deg,
                        r.frame1_deg, r.acc0, r.acc1});
    }
    os << j.dump(2) << '\n';
}

} // namespace ionpulse

#pragma once

// Channel/pulse data model.  A PulseRecord is the single-channel unit of
// work: two tones (frequency, phase, amplitude each constant, stepped, or
// spline-modulated), two frame-rotation inputs, and per-pulse metadata
// masks.  Masks hold one bit per tone or frame: bit 0 = tone/frame 0,
// bit 1 = tone/frame 1.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "ionpulse/spline.hpp"
#include "ionpulse/words.hpp"

namespace ionpulse {

/// Channel index; channel 0 drives the global beam by convention.
using ChannelId = int;
inline constexpr ChannelId global_beam_channel = 0;
inline constexpr int default_channel_count = 8;

inline constexpr bool mask_bit(std::uint8_t mask, int index) {
    return ((mask >> index) & 1u) != 0;
}

/// A single value held for the whole pulse.
struct Constant {
    double value = 0;
    friend bool operator==(const Constant&, const Constant&) = default;
};

/// N values played back to back, each over 1/N of the pulse.
struct Discrete {
    std::vector<double> values;
    explicit Discrete(std::vector<double> v) : values(std::move(v)) {
        if (values.empty()) throw std::invalid_argument("Discrete: needs at least one value");
    }
    friend bool operator==(const Discrete&, const Discrete&) = default;
};

/// k equally spaced knots interpolated by a natural cubic (k - 1 segments).
struct SplineKnots {
    std::vector<double> knots;
    explicit SplineKnots(std::vector<double> k) : knots(std::move(k)) {
        if (knots.size() < 2) throw std::invalid_argument("SplineKnots: needs at least two knots");
    }
    friend bool operator==(const SplineKnots&, const SplineKnots&) = default;
};

using ParamSource = std::variant<Constant, Discrete, SplineKnots>;

/// Number of time slices the source divides a pulse into.
inline std::size_t modulation_slices(const ParamSource& p) {
    if (std::holds_alternative<Constant>(p)) return 1;
    if (const auto* d = std::get_if<Discrete>(&p)) return d->values.size();
    return std::get<SplineKnots>(p).knots.size() - 1;
}

inline bool param_finite(const ParamSource& p) {
    auto all_finite = [](const std::vector<double>& vs) {
        for (double v : vs)
            if (!std::isfinite(v)) return false;
        return true;
    };
    if (const auto* c = std::get_if<Constant>(&p)) return std::isfinite(c->value);
    if (const auto* d = std::get_if<Discrete>(&p)) return all_finite(d->values);
    return all_finite(std::get<SplineKnots>(p).knots);
}

/// Conservative bound on |value(t)|.  Spline sources sample the fitted cubic
/// at 64 points per segment plus the knots, since the interpolant can
/// overshoot its knots between them.
inline double param_max_abs(const ParamSource& p) {
    auto vabs = [](double v) { return v < 0 ? -v : v; };
    if (const auto* c = std::get_if<Constant>(&p)) return vabs(c->value);
    if (const auto* d = std::get_if<Discrete>(&p)) {
        double m = 0;
        for (double v : d->values) m = std::max(m, vabs(v));
        return m;
    }
    const auto& knots = std::get<SplineKnots>(p).knots;
    const auto sp = fit_natural_cubic(knots, knots.size() - 1);
    double m = 0;
    for (double v : knots) m = std::max(m, vabs(v));
    for (const auto& seg : sp.segments)
        for (int i = 0; i <= 64; ++i) m = std::max(m, vabs(seg.eval(i / 64.0)));
    return m;
}

struct PulseRecord {
    ChannelId channel = 0;
    double duration_s = 0;

    ParamSource freq0 = Constant{0}, freq1 = Constant{0};   // Hz
    ParamSource phase0 = Constant{0}, phase1 = Constant{0}; // degrees
    ParamSource amp0 = Constant{0}, amp1 = Constant{0};     // [-100, 100]
    ParamSource framerot0 = Constant{0}, framerot1 = Constant{0}; // degrees

    std::uint8_t sync_mask = 0;       // tone bits: re-reference phase to the global counter
    std::uint8_t enable_mask = 0;     // tone bits: set forces the tone's output to zero
    std::uint8_t fb_enable_mask = 0;  // tone bits: apply the feed-forward word stream
    std::uint8_t fwd_frame0_mask = 0; // tone bits: add frame 0 to the tone's phase
    std::uint8_t fwd_frame1_mask = 0;
    std::uint8_t inv_frame0_mask = 0; // tone bits: negate the forwarded frame
    std::uint8_t inv_frame1_mask = 0;
    std::uint8_t apply_at_end_mask = 0; // frame bits: add the input after the pulse
    std::uint8_t rst_frame_mask = 0;    // frame bits: zero the accumulator at pulse start
    bool waittrig = false;

    friend bool operator==(const PulseRecord&, const PulseRecord&) = default;
};

/// Ordered pulses emitted by one gate instantiation.
struct GateBlock {
    std::vector<PulseRecord> pulses;
    friend bool operator==(const GateBlock&, const GateBlock&) = default;
};

/// Idle filler: both tones at frequency 0, amplitude 0, no frame changes.
inline PulseRecord nop(ChannelId channel, double duration_s) {
    PulseRecord p;
    p.channel = channel;
    p.duration_s = duration_s;
    return p;
}

enum class DiagnosticCode {
    channel_out_of_range,
    duration_out_of_range,
    frequency_out_of_range,
    amplitude_out_of_range,
    amplitude_sum_exceeded,
    mask_out_of_range,
    non_finite_value,
    modulation_too_dense,
};

struct Diagnostic {
    DiagnosticCode code;
    int tone = -1; // -1 when not tone specific
    std::string message;
};

inline std::string to_string(const Diagnostic& d) {
    const char* name = "";
    switch (d.code) {
        case DiagnosticCode::channel_out_of_range: name = "channel_out_of_range"; break;
        case DiagnosticCode::duration_out_of_range: name = "duration_out_of_range"; break;
        case DiagnosticCode::frequency_out_of_range: name = "frequency_out_of_range"; break;
        case DiagnosticCode::amplitude_out_of_range: name = "amplitude_out_of_range"; break;
        case DiagnosticCode::amplitude_sum_exceeded: name = "amplitude_sum_exceeded"; break;
        case DiagnosticCode::mask_out_of_range: name = "mask_out_of_range"; break;
        case DiagnosticCode::non_finite_value: name = "non_finite_value"; break;
        case DiagnosticCode::modulation_too_dense: name = "modulation_too_dense"; break;
    }
    std::string out = name;
    if (d.tone >= 0) out += " (tone " + std::to_string(d.tone) + ")";
    if (!d.message.empty()) out += ": " + d.message;
    return out;
}

/// Physical-range checks on one pulse.  Returns every violated constraint;
/// an empty result means the pulse can be encoded losslessly (modulo LSB
/// rounding).  Pure: no mutation, identical results on repeated calls.
inline std::vector<Diagnostic> validate_pulse(const PulseRecord& p,
                                              int channel_count = default_channel_count) {
    std::vector<Diagnostic> out;
    auto diag = [&](DiagnosticCode code, int tone, std::string msg) {
        out.push_back(Diagnostic{code, tone, std::move(msg)});
    };

    if (p.channel < 0 || p.channel >= channel_count)
        diag(DiagnosticCode::channel_out_of_range, -1,
             "channel " + std::to_string(p.channel) + " with " +
                 std::to_string(channel_count) + " channels configured");

    bool have_cycles = false;
    std::uint64_t cycles = 0;
    try {
        cycles = quantize_duration(p.duration_s).cycles;
        have_cycles = true;
    } catch (const std::exception& e) {
        diag(DiagnosticCode::duration_out_of_range, -1, e.what());
    }

    struct Named {
        const ParamSource* src;
        const char* name;
        int tone;
    };
    const Named all[] = {
        {&p.freq0, "freq0", 0},   {&p.freq1, "freq1", 1},
        {&p.phase0, "phase0", 0}, {&p.phase1, "phase1", 1},
        {&p.amp0, "amp0", 0},     {&p.amp1, "amp1", 1},
        {&p.framerot0, "framerot0", -1}, {&p.framerot1, "framerot1", -1},
    };
    for (const auto& n : all) {
        if (!param_finite(*n.src)) {
            diag(DiagnosticCode::non_finite_value, n.tone, n.name);
            continue;
        }
        const std::size_t slices = modulation_slices(*n.src);
        if (have_cycles && slices > cycles)
            diag(DiagnosticCode::modulation_too_dense, n.tone,
                 std::string(n.name) + " has " + std::to_string(slices) +
                     " slices over " + std::to_string(cycles) + " cycles");
    }

    double amp_peak_sum = 0;
    bool amp_sum_valid = true;
    for (int tone = 0; tone < 2; ++tone) {
        const ParamSource& f = tone == 0 ? p.freq0 : p.freq1;
        const ParamSource& a = tone == 0 ? p.amp0 : p.amp1;
        if (param_finite(f) && param_max_abs(f) > max_freq_hz)
            diag(DiagnosticCode::frequency_out_of_range, tone,
                 "peak " + std::to_string(param_max_abs(f)) + " Hz");
        if (param_finite(a)) {
            const double peak = param_max_abs(a);
            if (peak > max_amp)
                diag(DiagnosticCode::amplitude_out_of_range, tone,
                     "peak " + std::to_string(peak));
            amp_peak_sum += peak;
        } else {
            amp_sum_valid = false;
        }
    }
    if (amp_sum_valid && amp_peak_sum > max_amp)
        diag(DiagnosticCode::amplitude_sum_exceeded, -1,
             "tone peaks sum to " + std::to_string(amp_peak_sum));

    struct MaskRef {
        std::uint8_t value;
        const char* name;
    };
    const MaskRef masks[] = {
        {p.sync_mask, "sync_mask"},
        {p.enable_mask, "enable_mask"},
        {p.fb_enable_mask, "fb_enable_mask"},
        {p.fwd_frame0_mask, "fwd_frame0_mask"},
        {p.fwd_frame1_mask, "fwd_frame1_mask"},
        {p.inv_frame0_mask, "inv_frame0_mask"},
        {p.inv_frame1_mask, "inv_frame1_mask"},
        {p.apply_at_end_mask, "apply_at_end_mask"},
        {p.rst_frame_mask, "rst_frame_mask"},
    };
    for (const auto& m : masks)
        if (m.value > 3)
            diag(DiagnosticCode::mask_out_of_range, -1,
                 std::string(m.name) + " = " + std::to_string(m.value));

    return out;
}

} // namespace ionpulse

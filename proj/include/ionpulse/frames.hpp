#pragma once

// Frame-rotation tracking.  Each channel carries two frame accumulators
// (degrees, wrapped to [-180, 180) after every mutation).  A pulse feeds
// each frame through its framerot input and routes frame values onto tones
// through the forward/invert masks; the rotation itself costs no pulse time.

#include <cstdint>
#include <variant>
#include <vector>

#include "ionpulse/core.hpp"
#include "ionpulse/spline.hpp"

namespace ionpulse {

struct FrameState {
    double frame0_deg = 0;
    double frame1_deg = 0;
    friend bool operator==(const FrameState&, const FrameState&) = default;
};

/// Per-pulse frame plumbing, lifted out of a PulseRecord.
struct FrameDirective {
    ParamSource framerot0 = Constant{0};
    ParamSource framerot1 = Constant{0};
    std::uint8_t apply_at_end_mask = 0; // frame bits
    std::uint8_t rst_frame_mask = 0;    // frame bits
    std::uint8_t fwd_frame0_mask = 0;   // tone bits
    std::uint8_t fwd_frame1_mask = 0;
    std::uint8_t inv_frame0_mask = 0;
    std::uint8_t inv_frame1_mask = 0;
};

inline FrameDirective frame_directive(const PulseRecord& p) {
    return FrameDirective{p.framerot0,        p.framerot1,      p.apply_at_end_mask,
                          p.rst_frame_mask,   p.fwd_frame0_mask, p.fwd_frame1_mask,
                          p.inv_frame0_mask,  p.inv_frame1_mask};
}

/// Piecewise view of one frame's value over a pulse.  Pieces are constant or
/// cubic in normalized slice time; reads are wrapped to [-180, 180).
class FrameTrace {
public:
    struct Piece {
        std::uint64_t start = 0;
        CubicSegment seg; // constant pieces use c1 = c2 = c3 = 0
    };

    void add_piece(std::uint64_t start, CubicSegment seg) { pieces_.push_back({start, seg}); }

    double at(std::uint64_t cycle) const {
        const Piece* p = &pieces_.front();
        for (const auto& q : pieces_) {
            if (q.start > cycle) break;
            p = &q;
        }
        const double u = static_cast<double>(cycle - p->start) / static_cast<double>(p->seg.cycles);
        return wrap_degrees(p->seg.eval(u));
    }

    const std::vector<Piece>& pieces() const { return pieces_; }

private:
    std::vector<Piece> pieces_;
};

struct FrameStepResult {
    FrameTrace trace0;
    FrameTrace trace1;
    FrameState state; // accumulators after the pulse
};

namespace detail {

struct OneFrameStep {
    FrameTrace trace;
    double end = 0;
};

inline CubicSegment constant_piece(double value, std::uint64_t cycles) {
    CubicSegment s;
    s.c0 = value;
    s.cycles = cycles;
    return s;
}

// Reset applies first, then the input.  Constant inputs land at cycle 0
// unless deferred by apply_at_end; discrete inputs step once per slice (at
// the slice end when deferred); spline inputs trace the interpolant offset
// to start at the accumulator and ignore apply_at_end, and the final knot's
// value is what lands in the accumulator.
inline OneFrameStep step_one_frame(double acc, const ParamSource& src, bool rst, bool at_end,
                                   std::uint64_t cycles) {
    OneFrameStep out;
    if (rst) acc = 0;

    if (const auto* c = std::get_if<Constant>(&src)) {
        if (at_end) {
            out.trace.add_piece(0, constant_piece(acc, cycles));
            acc = wrap_degrees(acc + c->value);
        } else {
            acc = wrap_degrees(acc + c->value);
            out.trace.add_piece(0, constant_piece(acc, cycles));
        }
        out.end = acc;
        return out;
    }

    if (const auto* d = std::get_if<Discrete>(&src)) {
        const auto slices = distribute_cycles(cycles, d->values.size());
        std::uint64_t start = 0;
        for (std::size_t i = 0; i < d->values.size(); ++i) {
            if (at_end) {
                out.trace.add_piece(start, constant_piece(acc, slices[i]));
                acc = wrap_degrees(acc + d->values[i]);
            } else {
                acc = wrap_degrees(acc + d->values[i]);
                out.trace.add_piece(start, constant_piece(acc, slices[i]));
            }
            start += slices[i];
        }
        out.end = acc;
        return out;
    }

    const auto& knots = std::get<SplineKnots>(src).knots;
    const auto sp = wind_phase_coefficients(fit_natural_cubic(knots, cycles));
    const double offset = acc - knots.front();
    std::uint64_t start = 0;
    for (const auto& seg : sp.segments) {
        CubicSegment s = seg;
        s.c0 += offset;
        out.trace.add_piece(start, s);
        start += seg.cycles;
    }
    out.end = wrap_degrees(acc + knots.back());
    return out;
}

} // namespace detail

/// Advance both frames across one pulse of `cycles` cycles.  Pure in its
/// inputs; returns the per-cycle traces and the post-pulse accumulators.
inline FrameStepResult step_frame(const FrameState& state, const FrameDirective& d,
                                  std::uint64_t cycles) {
    auto f0 = detail::step_one_frame(state.frame0_deg, d.framerot0, mask_bit(d.rst_frame_mask, 0),
                                     mask_bit(d.apply_at_end_mask, 0), cycles);
    auto f1 = detail::step_one_frame(state.frame1_deg, d.framerot1, mask_bit(d.rst_frame_mask, 1),
                                     mask_bit(d.apply_at_end_mask, 1), cycles);
    FrameStepResult out;
    out.trace0 = std::move(f0.trace);
    out.trace1 = std::move(f1.trace);
    out.state = FrameState{f0.end, f1.end};
    return out;
}

/// Phase offset a tone sees from the frames at one instant.  Frame 0 wins
/// when both are forwarded to the same tone; the invert masks negate per
/// tone.  No forwarding bit set means no frame contribution at all.
inline double tone_phase_offset(double frame0_deg, double frame1_deg, const FrameDirective& d,
                                int tone) {
    if (mask_bit(d.fwd_frame0_mask, tone))
        return mask_bit(d.inv_frame0_mask, tone) ? -frame0_deg : frame0_deg;
    if (mask_bit(d.fwd_frame1_mask, tone))
        return mask_bit(d.inv_frame1_mask, tone) ? -frame1_deg : frame1_deg;
    return 0.0;
}

} // namespace ionpulse

#pragma once

// Natural cubic splines over equally spaced knots, fit with the Thomas
// tridiagonal solve on second-derivative moments.  Coefficients are stored
// per segment in normalized time u in [0, 1]; a curve with k knots yields
// k-1 segments whose cycle counts sum exactly to the requested total.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "ionpulse/words.hpp"

namespace ionpulse {

/// One cubic segment: value(u) = c0 + c1*u + c2*u^2 + c3*u^3, u in [0, 1).
struct CubicSegment {
    double c0 = 0, c1 = 0, c2 = 0, c3 = 0;
    std::uint64_t cycles = 0;

    double eval(double u) const { return c0 + u * (c1 + u * (c2 + u * c3)); }
    friend bool operator==(const CubicSegment&, const CubicSegment&) = default;
};

struct SplineProgram {
    std::vector<CubicSegment> segments;

    std::uint64_t total_cycles() const {
        std::uint64_t n = 0;
        for (const auto& s : segments) n += s.cycles;
        return n;
    }
    friend bool operator==(const SplineProgram&, const SplineProgram&) = default;
};

/// Split `total` cycles over `n` equal slices; the first (total % n) slices
/// take one extra cycle.  Used for both spline segments and discrete lists.
inline std::vector<std::uint64_t> distribute_cycles(std::uint64_t total, std::size_t n) {
    if (n == 0) throw std::invalid_argument("distribute_cycles: zero slices");
    if (total < n)
        throw std::invalid_argument("distribute_cycles: " + std::to_string(n) +
                                    " slices need at least " + std::to_string(n) + " cycles");
    const std::uint64_t base = total / n;
    const std::uint64_t extra = total % n;
    std::vector<std::uint64_t> out(n, base);
    for (std::uint64_t i = 0; i < extra; ++i) out[i] += 1;
    return out;
}

/// Natural cubic spline through `knots` (k >= 2), equally spaced in time.
/// Natural boundary: second derivative zero at both ends.  k = 2 degenerates
/// to an exact linear ramp (c2 = c3 = 0).
inline SplineProgram fit_natural_cubic(std::span<const double> knots, std::uint64_t total_cycles) {
    const std::size_t k = knots.size();
    if (k < 2) throw std::invalid_argument("fit_natural_cubic: need at least 2 knots");
    const std::size_t n = k - 1;
    if (total_cycles < n)
        throw std::invalid_argument("fit_natural_cubic: " + std::to_string(total_cycles) +
                                    " cycles cannot carry " + std::to_string(n) + " segments");

    // Second-derivative moments m[i] at the knots, natural ends m[0] = m[k-1] = 0.
    // Interior rows (unit knot spacing): m[i-1] + 4 m[i] + m[i+1] = 6 (y[i-1] - 2 y[i] + y[i+1]).
    std::vector<double> m(k, 0.0);
    if (k > 2) {
        const std::size_t rows = k - 2;
        std::vector<double> diag(rows, 4.0);
        std::vector<double> rhs(rows);
        for (std::size_t i = 0; i < rows; ++i)
            rhs[i] = 6.0 * (knots[i] - 2.0 * knots[i + 1] + knots[i + 2]);
        for (std::size_t i = 1; i < rows; ++i) {
            const double w = 1.0 / diag[i - 1];
            diag[i] -= w;
            rhs[i] -= w * rhs[i - 1];
        }
        m[rows] = rhs[rows - 1] / diag[rows - 1];
        for (std::size_t i = rows - 1; i >= 1; --i)
            m[i] = (rhs[i - 1] - m[i + 1]) / diag[i - 1];
    }

    const auto cycles = distribute_cycles(total_cycles, n);
    SplineProgram out;
    out.segments.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        CubicSegment s;
        s.c0 = knots[i];
        s.c1 = (knots[i + 1] - knots[i]) - m[i] / 3.0 - m[i + 1] / 6.0;
        s.c2 = m[i] / 2.0;
        s.c3 = (m[i + 1] - m[i]) / 6.0;
        s.cycles = cycles[i];
        out.segments.push_back(s);
    }
    return out;
}

/// Value at an absolute cycle index within the program.  Cycle c of a segment
/// spanning [start, start + cycles) maps to u = (c - start) / cycles, so the
/// first cycle of each segment lands exactly on its left knot.
inline double evaluate(const SplineProgram& sp, std::uint64_t cycle) {
    std::uint64_t start = 0;
    for (const auto& s : sp.segments) {
        if (cycle < start + s.cycles) {
            const double u = static_cast<double>(cycle - start) / static_cast<double>(s.cycles);
            return s.eval(u);
        }
        start += s.cycles;
    }
    throw std::out_of_range("evaluate: cycle " + std::to_string(cycle) +
                            " beyond spline program (" + std::to_string(start) + " cycles)");
}

/// Wrap each segment's zeroth-order coefficient into [-180, 180).  Shifts are
/// whole turns, so any waveform consuming the value modulo 360 is unchanged.
inline SplineProgram wind_phase_coefficients(const SplineProgram& sp) {
    SplineProgram out = sp;
    for (auto& s : out.segments) s.c0 = wrap_degrees(s.c0);
    return out;
}

} // namespace ionpulse

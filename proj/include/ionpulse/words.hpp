#pragma once

// Fixed-point word types for a dual-tone DDS control stack.
//
// The modeled hardware runs a 409.6 MHz clock and 40-bit frequency/phase
// words.  One frequency LSB is 819.2e6 / 2^40 Hz; one phase LSB is
// 360 / 2^40 degrees; amplitude is a signed word with LSB 100 / 2^14 on
// [-100, 100].  Durations are counted in clock cycles, 4 <= cycles <= 2^40.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ionpulse {

inline constexpr double clock_hz = 409.6e6;
inline constexpr double clock_period_s = 1.0 / clock_hz;

inline constexpr std::uint64_t phase_modulus = std::uint64_t{1} << 40;
inline constexpr std::uint64_t phase_word_mask = phase_modulus - 1;

inline constexpr double freq_lsb_hz = 819.2e6 / static_cast<double>(phase_modulus);
inline constexpr double phase_lsb_deg = 360.0 / static_cast<double>(phase_modulus);
inline constexpr double amp_lsb = 100.0 / 16384.0;

inline constexpr double max_freq_hz = 409.6e6;
inline constexpr std::int64_t max_freq_word = std::int64_t{1} << 39;
inline constexpr double max_amp = 100.0;
inline constexpr std::int16_t max_amp_word = 16384;

inline constexpr std::uint64_t min_pulse_cycles = 4;
inline constexpr std::uint64_t max_pulse_cycles = std::uint64_t{1} << 40;

namespace detail {
constexpr double cabs(double x) { return x < 0 ? -x : x; }
} // namespace detail

// Resolution identities, pinned at build time.
static_assert(detail::cabs(freq_lsb_hz - 745.0581e-6) < 1e-10);
static_assert(detail::cabs(phase_lsb_deg - 3.2742e-10) < 1e-14);
static_assert(amp_lsb == 6.103515625e-3);
static_assert(clock_period_s == 2.44140625e-9);

/// Signed 40-bit frequency word, |value| <= 2^39 (one LSB ~ 745 uHz).
struct FreqWord {
    std::int64_t value = 0;
    friend bool operator==(const FreqWord&, const FreqWord&) = default;
};

/// Unsigned phase word modulo 2^40 (one LSB ~ 3.27e-10 deg).
struct PhaseWord {
    std::uint64_t value = 0;
    friend bool operator==(const PhaseWord&, const PhaseWord&) = default;
};

/// Signed amplitude word, value = word * (100 / 2^14), |word| <= 16384.
struct AmpWord {
    std::int16_t value = 0;
    friend bool operator==(const AmpWord&, const AmpWord&) = default;
};

/// Pulse duration in clock cycles.
struct DurationWord {
    std::uint64_t cycles = 0;
    friend bool operator==(const DurationWord&, const DurationWord&) = default;
};

/// Round to nearest, ties to even.  Exact for |x| < 2^53.
inline std::int64_t round_half_even(double x) {
    const double f = std::floor(x);
    const double d = x - f;
    const auto fi = static_cast<std::int64_t>(f);
    if (d < 0.5) return fi;
    if (d > 0.5) return fi + 1;
    return (fi & 1) == 0 ? fi : fi + 1;
}

/// Wrap an angle in degrees to [-180, 180).
inline double wrap_degrees(double deg) {
    return deg - 360.0 * std::floor((deg + 180.0) / 360.0);
}

/// Reduce a signed phase-word quantity modulo 2^40.
inline std::uint64_t phase_word_from_signed(std::int64_t w) {
    return static_cast<std::uint64_t>(w) & phase_word_mask;
}

inline FreqWord discretize_frequency(double hz) {
    if (!std::isfinite(hz))
        throw std::domain_error("discretize_frequency: non-finite input");
    if (detail::cabs(hz) > max_freq_hz)
        throw std::out_of_range("discretize_frequency: " + std::to_string(hz) +
                                " Hz outside [-409.6e6, 409.6e6]");
    return FreqWord{round_half_even(hz / freq_lsb_hz)};
}

inline PhaseWord discretize_phase(double deg) {
    if (!std::isfinite(deg))
        throw std::domain_error("discretize_phase: non-finite input");
    return PhaseWord{phase_word_from_signed(round_half_even(wrap_degrees(deg) / phase_lsb_deg))};
}

inline AmpWord discretize_amplitude(double a) {
    if (!std::isfinite(a))
        throw std::domain_error("discretize_amplitude: non-finite input");
    if (detail::cabs(a) > max_amp)
        throw std::out_of_range("discretize_amplitude: " + std::to_string(a) +
                                " outside [-100, 100]");
    return AmpWord{static_cast<std::int16_t>(round_half_even(a / amp_lsb))};
}

inline DurationWord quantize_duration(double seconds) {
    if (!std::isfinite(seconds) || seconds < 0)
        throw std::domain_error("quantize_duration: invalid duration");
    const double raw = seconds * clock_hz;
    if (raw > static_cast<double>(max_pulse_cycles) + 0.5)
        throw std::out_of_range("quantize_duration: " + std::to_string(seconds) +
                                " s exceeds 2^40 cycles");
    const auto cycles = static_cast<std::uint64_t>(round_half_even(raw));
    if (cycles < min_pulse_cycles || cycles > max_pulse_cycles)
        throw std::out_of_range("quantize_duration: " + std::to_string(seconds) +
                                " s rounds to " + std::to_string(cycles) +
                                " cycles, outside [4, 2^40]");
    return DurationWord{cycles};
}

inline double to_hz(FreqWord w) { return static_cast<double>(w.value) * freq_lsb_hz; }
inline double to_degrees(PhaseWord w) { return static_cast<double>(w.value) * phase_lsb_deg; }
inline double to_amplitude(AmpWord w) { return static_cast<double>(w.value) * amp_lsb; }
inline double to_seconds(DurationWord w) { return static_cast<double>(w.cycles) * clock_period_s; }

} // namespace ionpulse

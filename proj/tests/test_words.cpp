#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "ionpulse/words.hpp"

using namespace ionpulse;
using Catch::Approx;

TEST_CASE("resolution identities", "[words]") {
    CHECK(freq_lsb_hz == Approx(745.0581e-6).margin(1e-10));
    CHECK(phase_lsb_deg == Approx(3.2742e-10).margin(1e-14));
    CHECK(amp_lsb == 6.103515625e-3);
    CHECK(clock_period_s == 2.44140625e-9);
    CHECK(to_seconds(DurationWord{min_pulse_cycles}) == Approx(9.77e-9).margin(5e-12));
    CHECK(to_seconds(DurationWord{max_pulse_cycles}) == Approx(2684.35456).margin(1e-9));
}

TEST_CASE("round half to even", "[words]") {
    CHECK(round_half_even(4.5) == 4);
    CHECK(round_half_even(5.5) == 6);
    CHECK(round_half_even(2.5) == 2);
    CHECK(round_half_even(3.5) == 4);
    CHECK(round_half_even(-4.5) == -4);
    CHECK(round_half_even(-5.5) == -6);
    CHECK(round_half_even(0.49999999) == 0);
    CHECK(round_half_even(-0.5) == 0);
    CHECK(round_half_even(1e12 + 0.25) == 1000000000000);
}

TEST_CASE("frequency words", "[words]") {
    CHECK(discretize_frequency(0.0).value == 0);
    CHECK(discretize_frequency(745.0581e-6).value == 1);
    CHECK(discretize_frequency(200e6).value == 268435456000);
    CHECK(discretize_frequency(409.6e6).value == max_freq_word);
    CHECK(discretize_frequency(-409.6e6).value == -max_freq_word);
    CHECK_THROWS_AS(discretize_frequency(409.6e6 + 1.0), std::out_of_range);
    CHECK_THROWS_AS(discretize_frequency(500e6), std::out_of_range);

    SECTION("round trip and monotonicity") {
        std::mt19937 rng(7);
        std::uniform_real_distribution<double> dist(-409.6e6, 409.6e6);
        std::vector<double> fs(2000);
        for (auto& f : fs) f = dist(rng);
        std::sort(fs.begin(), fs.end());
        std::int64_t prev = discretize_frequency(fs.front()).value;
        for (double f : fs) {
            const FreqWord w = discretize_frequency(f);
            CHECK(std::abs(to_hz(w) - f) <= freq_lsb_hz / 2);
            CHECK(w.value >= prev);
            prev = w.value;
        }
    }
}

TEST_CASE("phase words wrap to one turn", "[words]") {
    CHECK(discretize_phase(0.0).value == 0);
    CHECK(discretize_phase(360.0).value == 0);
    CHECK(discretize_phase(90.0).value == phase_modulus / 4);
    CHECK(discretize_phase(180.0).value == phase_modulus / 2);
    CHECK(discretize_phase(-90.0).value == 3 * (phase_modulus / 4));
    CHECK(discretize_phase(-90.0) == discretize_phase(270.0));
    CHECK_THROWS_AS(discretize_phase(std::nan("")), std::domain_error);

    SECTION("equivalence modulo 360") {
        std::mt19937 rng(11);
        std::uniform_real_distribution<double> deg(-180.0, 180.0);
        std::uniform_int_distribution<int> turns(-5, 5);
        for (int i = 0; i < 500; ++i) {
            const double d = deg(rng);
            const int k = turns(rng);
            CHECK(discretize_phase(d) == discretize_phase(d + 360.0 * k));
            const PhaseWord w = discretize_phase(d);
            CHECK(w.value < phase_modulus);
            CHECK(std::abs(wrap_degrees(to_degrees(w) - d)) <= phase_lsb_deg);
        }
    }
}

TEST_CASE("amplitude words", "[words]") {
    CHECK(discretize_amplitude(0.0).value == 0);
    CHECK(discretize_amplitude(6.1035e-3).value == 1);
    CHECK(discretize_amplitude(100.0).value == max_amp_word);
    CHECK(discretize_amplitude(-100.0).value == -max_amp_word);
    CHECK(discretize_amplitude(50.0).value == 8192);
    CHECK_THROWS_AS(discretize_amplitude(100.001), std::out_of_range);

    std::mt19937 rng(13);
    std::uniform_real_distribution<double> dist(-100.0, 100.0);
    for (int i = 0; i < 500; ++i) {
        const double a = dist(rng);
        CHECK(std::abs(to_amplitude(discretize_amplitude(a)) - a) <= amp_lsb / 2);
    }
}

TEST_CASE("duration quantization", "[words]") {
    CHECK(quantize_duration(1.25e-6).cycles == 512);
    CHECK(quantize_duration(2.5e-6).cycles == 1024);
    CHECK(quantize_duration(10e-6).cycles == 4096);
    CHECK(quantize_duration(9.77e-9).cycles == 4);
    CHECK(quantize_duration(9.765625e-9).cycles == 4);
    CHECK(quantize_duration(2684.35456).cycles == max_pulse_cycles);
    CHECK_THROWS_AS(quantize_duration(1e-9), std::out_of_range);
    CHECK_THROWS_AS(quantize_duration(2684.36), std::out_of_range);
    CHECK_THROWS_AS(quantize_duration(-1.0), std::domain_error);

    SECTION("exact cycle multiples survive the round trip") {
        std::mt19937 rng(17);
        std::uniform_int_distribution<std::uint64_t> cyc(4, 1u << 20);
        for (int i = 0; i < 500; ++i) {
            const std::uint64_t c = cyc(rng);
            CHECK(quantize_duration(static_cast<double>(c) * clock_period_s).cycles == c);
        }
    }
}

TEST_CASE("wrap_degrees range and fixpoints", "[words]") {
    CHECK(wrap_degrees(180.0) == -180.0);
    CHECK(wrap_degrees(-180.0) == -180.0);
    CHECK(wrap_degrees(350.0) == -10.0);
    CHECK(wrap_degrees(370.0) == 10.0);
    CHECK(wrap_degrees(720.0) == 0.0);
    std::mt19937 rng(19);
    std::uniform_real_distribution<double> dist(-5000.0, 5000.0);
    for (int i = 0; i < 500; ++i) {
        const double w = wrap_degrees(dist(rng));
        CHECK(w >= -180.0);
        CHECK(w < 180.0);
    }
}

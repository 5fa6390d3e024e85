#pragma once

// Encoding and scheduling.  Gate blocks are flattened into per-channel
// streams of encoded pulses; pulses on one channel run back to back with no
// implicit gaps.  Parallel composition unions disjoint channels and accepts
// a channel claimed by several branches only when every branch encodes the
// identical pulse list.  After layout, channels are padded to the common
// program duration with a single trailing idle segment.

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ionpulse/core.hpp"
#include "ionpulse/spline.hpp"
#include "ionpulse/words.hpp"

namespace ionpulse {

// ---------------------------------------------------------------------------
// Encoded modulation
// ---------------------------------------------------------------------------

template <typename Word>
struct ConstantMod {
    Word word{};
    friend bool operator==(const ConstantMod&, const ConstantMod&) = default;
};

template <typename Word>
struct DiscreteMod {
    std::vector<Word> words;
    std::vector<std::uint64_t> cycles; // one entry per word, sums to the pulse
    friend bool operator==(const DiscreteMod&, const DiscreteMod&) = default;
};

struct SplineMod {
    std::vector<CubicSegment> segments;
    friend bool operator==(const SplineMod&, const SplineMod&) = default;
};

template <typename Word>
using Modulation = std::variant<ConstantMod<Word>, DiscreteMod<Word>, SplineMod>;

struct EncodedTone {
    Modulation<FreqWord> freq = ConstantMod<FreqWord>{};
    Modulation<PhaseWord> phase = ConstantMod<PhaseWord>{};
    Modulation<AmpWord> amp = ConstantMod<AmpWord>{};
    friend bool operator==(const EncodedTone&, const EncodedTone&) = default;
};

/// Quantized single-channel pulse.  Frame inputs stay in degrees; they feed
/// the frame accumulators, which are converted to phase words only at the
/// output stage of the simulator.
struct EncodedPulse {
    ChannelId channel = 0;
    std::uint64_t cycles = 0;
    EncodedTone tone0, tone1;
    ParamSource framerot0 = Constant{0};
    ParamSource framerot1 = Constant{0};
    std::uint8_t sync_mask = 0, enable_mask = 0, fb_enable_mask = 0;
    std::uint8_t fwd_frame0_mask = 0, fwd_frame1_mask = 0;
    std::uint8_t inv_frame0_mask = 0, inv_frame1_mask = 0;
    std::uint8_t apply_at_end_mask = 0, rst_frame_mask = 0;
    bool waittrig = false;
    friend bool operator==(const EncodedPulse&, const EncodedPulse&) = default;
};

namespace detail {

template <typename Word, typename Quantize>
Modulation<Word> encode_param(const ParamSource& src, std::uint64_t cycles, Quantize q,
                              bool wind) {
    if (const auto* c = std::get_if<Constant>(&src)) return ConstantMod<Word>{q(c->value)};
    if (const auto* d = std::get_if<Discrete>(&src)) {
        DiscreteMod<Word> m;
        m.words.reserve(d->values.size());
        for (double v : d->values) m.words.push_back(q(v));
        m.cycles = distribute_cycles(cycles, d->values.size());
        return m;
    }
    const auto& knots = std::get<SplineKnots>(src).knots;
    auto sp = fit_natural_cubic(knots, cycles);
    if (wind) sp = wind_phase_coefficients(sp);
    return SplineMod{std::move(sp.segments)};
}

} // namespace detail

/// Quantize one pulse.  Throws std::out_of_range / std::invalid_argument on
/// values validate_pulse would have flagged.
inline EncodedPulse encode_pulse(const PulseRecord& p) {
    EncodedPulse e;
    e.channel = p.channel;
    e.cycles = quantize_duration(p.duration_s).cycles;

    auto tone = [&](const ParamSource& f, const ParamSource& ph, const ParamSource& a) {
        EncodedTone t;
        t.freq = detail::encode_param<FreqWord>(f, e.cycles, discretize_frequency, false);
        t.phase = detail::encode_param<PhaseWord>(ph, e.cycles, discretize_phase, true);
        t.amp = detail::encode_param<AmpWord>(a, e.cycles, discretize_amplitude, false);
        return t;
    };
    e.tone0 = tone(p.freq0, p.phase0, p.amp0);
    e.tone1 = tone(p.freq1, p.phase1, p.amp1);
    e.framerot0 = p.framerot0;
    e.framerot1 = p.framerot1;
    e.sync_mask = p.sync_mask;
    e.enable_mask = p.enable_mask;
    e.fb_enable_mask = p.fb_enable_mask;
    e.fwd_frame0_mask = p.fwd_frame0_mask;
    e.fwd_frame1_mask = p.fwd_frame1_mask;
    e.inv_frame0_mask = p.inv_frame0_mask;
    e.inv_frame1_mask = p.inv_frame1_mask;
    e.apply_at_end_mask = p.apply_at_end_mask;
    e.rst_frame_mask = p.rst_frame_mask;
    e.waittrig = p.waittrig;
    return e;
}

inline EncodedPulse encoded_nop(ChannelId channel, std::uint64_t cycles) {
    EncodedPulse e;
    e.channel = channel;
    e.cycles = cycles;
    return e;
}

inline bool is_idle(const EncodedPulse& e) {
    return e == encoded_nop(e.channel, e.cycles);
}

// ---------------------------------------------------------------------------
// Streams and parallel merge
// ---------------------------------------------------------------------------

/// Per-channel pulse lists, indexed by channel.
using ChannelStreams = std::vector<std::vector<EncodedPulse>>;

inline ChannelStreams make_streams(int channel_count = default_channel_count) {
    return ChannelStreams(static_cast<std::size_t>(channel_count));
}

inline void append_streams(ChannelStreams& dst, const ChannelStreams& src) {
    if (dst.size() != src.size()) throw std::invalid_argument("append_streams: size mismatch");
    for (std::size_t ch = 0; ch < dst.size(); ++ch)
        dst[ch].insert(dst[ch].end(), src[ch].begin(), src[ch].end());
}

/// Flatten gate blocks in order; within a block, pulses land on their
/// channels in list order.  sequence(A ++ B) == sequence(A) ++ sequence(B).
inline ChannelStreams sequence(std::span<const GateBlock> blocks,
                               int channel_count = default_channel_count) {
    ChannelStreams out = make_streams(channel_count);
    for (const auto& b : blocks)
        for (const auto& p : b.pulses) {
            if (p.channel < 0 || p.channel >= channel_count)
                throw std::out_of_range("sequence: channel " + std::to_string(p.channel) +
                                        " out of range");
            out[static_cast<std::size_t>(p.channel)].push_back(encode_pulse(p));
        }
    return out;
}

class CollisionError : public std::runtime_error {
public:
    CollisionError(ChannelId channel, std::string field)
        : std::runtime_error("parallel collision on channel " + std::to_string(channel) +
                             ": branches differ at " + field),
          channel_(channel), field_(std::move(field)) {}
    ChannelId channel() const { return channel_; }
    const std::string& field() const { return field_; }

private:
    ChannelId channel_;
    std::string field_;
};

namespace detail {

inline std::optional<std::string> first_difference(const EncodedPulse& a, const EncodedPulse& b) {
    if (a.cycles != b.cycles) return "cycles";
    if (!(a.tone0.freq == b.tone0.freq)) return "tone0.freq";
    if (!(a.tone0.phase == b.tone0.phase)) return "tone0.phase";
    if (!(a.tone0.amp == b.tone0.amp)) return "tone0.amp";
    if (!(a.tone1.freq == b.tone1.freq)) return "tone1.freq";
    if (!(a.tone1.phase == b.tone1.phase)) return "tone1.phase";
    if (!(a.tone1.amp == b.tone1.amp)) return "tone1.amp";
    if (!(a.framerot0 == b.framerot0)) return "framerot0";
    if (!(a.framerot1 == b.framerot1)) return "framerot1";
    if (a.sync_mask != b.sync_mask) return "sync_mask";
    if (a.enable_mask != b.enable_mask) return "enable_mask";
    if (a.fb_enable_mask != b.fb_enable_mask) return "fb_enable_mask";
    if (a.fwd_frame0_mask != b.fwd_frame0_mask) return "fwd_frame0_mask";
    if (a.fwd_frame1_mask != b.fwd_frame1_mask) return "fwd_frame1_mask";
    if (a.inv_frame0_mask != b.inv_frame0_mask) return "inv_frame0_mask";
    if (a.inv_frame1_mask != b.inv_frame1_mask) return "inv_frame1_mask";
    if (a.apply_at_end_mask != b.apply_at_end_mask) return "apply_at_end_mask";
    if (a.rst_frame_mask != b.rst_frame_mask) return "rst_frame_mask";
    if (a.waittrig != b.waittrig) return "waittrig";
    return std::nullopt;
}

} // namespace detail

/// Union per-channel lists from parallel branches.  A channel claimed by
/// more than one branch is accepted only when every claim is bit-identical
/// after encoding; the identity is on encoded words, so two source-level
/// expressions rounding to the same words merge cleanly.  Symmetric in its
/// branches when channels are disjoint.
inline ChannelStreams merge_parallel(const std::vector<ChannelStreams>& branches,
                                     int channel_count = default_channel_count,
                                     std::vector<std::string>* notes = nullptr) {
    ChannelStreams out = make_streams(channel_count);
    for (std::size_t ch = 0; ch < out.size(); ++ch) {
        const std::vector<EncodedPulse>* first = nullptr;
        int claims = 0;
        for (const auto& br : branches) {
            if (br.size() != out.size())
                throw std::invalid_argument("merge_parallel: branch channel count mismatch");
            const auto& list = br[ch];
            if (list.empty()) continue;
            ++claims;
            if (first == nullptr) {
                first = &list;
                continue;
            }
            if (list.size() != first->size())
                throw CollisionError(static_cast<ChannelId>(ch), "pulse count");
            for (std::size_t i = 0; i < list.size(); ++i)
                if (auto field = detail::first_difference((*first)[i], list[i]))
                    throw CollisionError(static_cast<ChannelId>(ch),
                                         "pulse " + std::to_string(i) + " " + *field);
        }
        if (first != nullptr) out[ch] = *first;
        if (claims > 1 && notes != nullptr)
            notes->push_back("channel " + std::to_string(ch) + ": " + std::to_string(claims) +
                             " parallel branches emit identical pulses; merged");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Layout and padding
// ---------------------------------------------------------------------------

struct TimedPulse {
    std::uint64_t start_cycle = 0;
    EncodedPulse pulse;
    friend bool operator==(const TimedPulse&, const TimedPulse&) = default;
};

struct ChannelTimeline {
    ChannelId channel = 0;
    std::vector<TimedPulse> segments; // gapless, ordered by start_cycle
    std::uint64_t total_cycles() const {
        std::uint64_t n = 0;
        for (const auto& s : segments) n += s.pulse.cycles;
        return n;
    }
    friend bool operator==(const ChannelTimeline&, const ChannelTimeline&) = default;
};

struct Timelines {
    std::uint64_t program_cycles = 0;
    std::vector<ChannelTimeline> channels;
    friend bool operator==(const Timelines&, const Timelines&) = default;
};

inline Timelines lay_out(const ChannelStreams& streams) {
    Timelines out;
    out.channels.resize(streams.size());
    for (std::size_t ch = 0; ch < streams.size(); ++ch) {
        auto& tl = out.channels[ch];
        tl.channel = static_cast<ChannelId>(ch);
        std::uint64_t at = 0;
        for (const auto& p : streams[ch]) {
            tl.segments.push_back(TimedPulse{at, p});
            at += p.cycles;
        }
        out.program_cycles = std::max(out.program_cycles, at);
    }
    return out;
}

/// Bring every channel to the longest channel's duration with one trailing
/// idle segment.  An existing trailing idle segment is extended instead of
/// stacking a second one; a fresh idle segment shorter than the minimum
/// pulse length cannot be represented and is reported as an error.
inline void pad_to_common_duration(Timelines& tl) {
    std::uint64_t target = tl.program_cycles;
    for (const auto& ch : tl.channels) target = std::max(target, ch.total_cycles());
    tl.program_cycles = target;
    for (auto& ch : tl.channels) {
        const std::uint64_t have = ch.total_cycles();
        if (have == target) continue;
        const std::uint64_t pad = target - have;
        if (!ch.segments.empty() && is_idle(ch.segments.back().pulse)) {
            ch.segments.back().pulse.cycles += pad;
            continue;
        }
        if (pad < min_pulse_cycles)
            throw std::runtime_error("pad_to_common_duration: channel " +
                                     std::to_string(ch.channel) + " needs a " +
                                     std::to_string(pad) + "-cycle pad; idle segments are at least " +
                                     std::to_string(min_pulse_cycles) + " cycles");
        ch.segments.push_back(TimedPulse{have, encoded_nop(ch.channel, pad)});
    }
}

// ---------------------------------------------------------------------------
// Timeline JSON
// ---------------------------------------------------------------------------

namespace detail {

template <typename Word>
std::int64_t word_value(Word w) {
    return static_cast<std::int64_t>(w.value);
}

template <typename Word>
nlohmann::json mod_to_json(const Modulation<Word>& m) {
    nlohmann::json j;
    if (const auto* c = std::get_if<ConstantMod<Word>>(&m)) {
        j["kind"] = "constant";
        j["word"] = word_value(c->word);
    } else if (const auto* d = std::get_if<DiscreteMod<Word>>(&m)) {
        j["kind"] = "discrete";
        auto& words = j["words"] = nlohmann::json::array();
        for (const auto& w : d->words) words.push_back(word_value(w));
        j["cycles"] = d->cycles;
    } else {
        const auto& s = std::get<SplineMod>(m);
        j["kind"] = "spline";
        auto& segs = j["segments"] = nlohmann::json::array();
        for (const auto& seg : s.segments)
            segs.push_back({{"c0", seg.c0},
                            {"c1", seg.c1},
                            {"c2", seg.c2},
                            {"c3", seg.c3},
                            {"cycles", seg.cycles}});
    }
    return j;
}

inline SplineMod spline_from_json(const nlohmann::json& j) {
    SplineMod s;
    for (const auto& seg : j.at("segments"))
        s.segments.push_back(CubicSegment{seg.at("c0").get<double>(), seg.at("c1").get<double>(),
                                          seg.at("c2").get<double>(), seg.at("c3").get<double>(),
                                          seg.at("cycles").get<std::uint64_t>()});
    return s;
}

template <typename Word>
Modulation<Word> mod_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant") {
        Word w{};
        w.value = static_cast<decltype(w.value)>(j.at("word").get<std::int64_t>());
        return ConstantMod<Word>{w};
    }
    if (kind == "discrete") {
        DiscreteMod<Word> d;
        for (const auto& v : j.at("words")) {
            Word w{};
            w.value = static_cast<decltype(w.value)>(v.get<std::int64_t>());
            d.words.push_back(w);
        }
        d.cycles = j.at("cycles").get<std::vector<std::uint64_t>>();
        return d;
    }
    if (kind == "spline") return spline_from_json(j);
    throw std::runtime_error("timeline JSON: unknown modulation kind '" + kind + "'");
}

inline nlohmann::json frame_to_json(const ParamSource& p) {
    nlohmann::json j;
    if (const auto* c = std::get_if<Constant>(&p)) {
        j["kind"] = "constant";
        j["value"] = c->value;
    } else if (const auto* d = std::get_if<Discrete>(&p)) {
        j["kind"] = "discrete";
        j["values"] = d->values;
    } else {
        j["kind"] = "spline";
        j["knots"] = std::get<SplineKnots>(p).knots;
    }
    return j;
}

inline ParamSource frame_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant") return Constant{j.at("value").get<double>()};
    if (kind == "discrete") return Discrete{j.at("values").get<std::vector<double>>()};
    if (kind == "spline") return SplineKnots{j.at("knots").get<std::vector<double>>()};
    throw std::runtime_error("timeline JSON: unknown frame input kind '" + kind + "'");
}

} // namespace detail

inline nlohmann::json to_json(const Timelines& tl) {
    nlohmann::json j;
    j["clock_hz"] = clock_hz;
    j["channel_count"] = tl.channels.size();
    j["program_cycles"] = tl.program_cycles;
    auto& chans = j["channels"] = nlohmann::json::array();
    for (const auto& ch : tl.channels) {
        nlohmann::json cj;
        cj["channel"] = ch.channel;
        auto& segs = cj["segments"] = nlohmann::json::array();
        for (const auto& s : ch.segments) {
            nlohmann::json sj;
            sj["start_cycle"] = s.start_cycle;
            sj["cycles"] = s.pulse.cycles;
            sj["tone0"] = {{"freq", detail::mod_to_json(s.pulse.tone0.freq)},
                           {"phase", detail::mod_to_json(s.pulse.tone0.phase)},
                           {"amp", detail::mod_to_json(s.pulse.tone0.amp)}};
            sj["tone1"] = {{"freq", detail::mod_to_json(s.pulse.tone1.freq)},
                           {"phase", detail::mod_to_json(s.pulse.tone1.phase)},
                           {"amp", detail::mod_to_json(s.pulse.tone1.amp)}};
            sj["frame_inputs"] = {{"framerot0", detail::frame_to_json(s.pulse.framerot0)},
                                  {"framerot1", detail::frame_to_json(s.pulse.framerot1)}};
            sj["sync_mask"] = s.pulse.sync_mask;
            sj["enable_mask"] = s.pulse.enable_mask;
            sj["fb_enable_mask"] = s.pulse.fb_enable_mask;
            sj["fwd_frame0_mask"] = s.pulse.fwd_frame0_mask;
            sj["fwd_frame1_mask"] = s.pulse.fwd_frame1_mask;
            sj["inv_frame0_mask"] = s.pulse.inv_frame0_mask;
            sj["inv_frame1_mask"] = s.pulse.inv_frame1_mask;
            sj["apply_at_end_mask"] = s.pulse.apply_at_end_mask;
            sj["rst_frame_mask"] = s.pulse.rst_frame_mask;
            sj["waittrig"] = s.pulse.waittrig;
            segs.push_back(std::move(sj));
        }
        chans.push_back(std::move(cj));
    }
    return j;
}

inline Timelines timelines_from_json(const nlohmann::json& j) {
    Timelines tl;
    tl.program_cycles = j.at("program_cycles").get<std::uint64_t>();
    for (const auto& cj : j.at("channels")) {
        ChannelTimeline ch;
        ch.channel = cj.at("channel").get<ChannelId>();
        for (const auto& sj : cj.at("segments")) {
            TimedPulse s;
            s.start_cycle = sj.at("start_cycle").get<std::uint64_t>();
            auto& p = s.pulse;
            p.channel = ch.channel;
            p.cycles = sj.at("cycles").get<std::uint64_t>();
            p.tone0.freq = detail::mod_from_json<FreqWord>(sj.at("tone0").at("freq"));
            p.tone0.phase = detail::mod_from_json<PhaseWord>(sj.at("tone0").at("phase"));
            p.tone0.amp = detail::mod_from_json<AmpWord>(sj.at("tone0").at("amp"));
            p.tone1.freq = detail::mod_from_json<FreqWord>(sj.at("tone1").at("freq"));
            p.tone1.phase = detail::mod_from_json<PhaseWord>(sj.at("tone1").at("phase"));
            p.tone1.amp = detail::mod_from_json<AmpWord>(sj.at("tone1").at("amp"));
            p.framerot0 = detail::frame_from_json(sj.at("frame_inputs").at("framerot0"));
            p.framerot1 = detail::frame_from_json(sj.at("frame_inputs").at("framerot1"));
            p.sync_mask = sj.at("sync_mask").get<std::uint8_t>();
            p.enable_mask = sj.at("enable_mask").get<std::uint8_t>();
            p.fb_enable_mask = sj.at("fb_enable_mask").get<std::uint8_t>();
            p.fwd_frame0_mask = sj.at("fwd_frame0_mask").get<std::uint8_t>();
            p.fwd_frame1_mask = sj.at("fwd_frame1_mask").get<std::uint8_t>();
            p.inv_frame0_mask = sj.at("inv_frame0_mask").get<std::uint8_t>();
            p.inv_frame1_mask = sj.at("inv_frame1_mask").get<std::uint8_t>();
            p.apply_at_end_mask = sj.at("apply_at_end_mask").get<std::uint8_t>();
            p.rst_frame_mask = sj.at("rst_frame_mask").get<std::uint8_t>();
            p.waittrig = sj.at("waittrig").get<bool>();
            ch.segments.push_back(std::move(s));
        }
        tl.channels.push_back(std::move(ch));
    }
    return tl;
}

} // namespace ionpulse

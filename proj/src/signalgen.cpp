#include "ure/signalgen.hpp"

#include "ure/binary_io.hpp"
#include "ure/error.hpp"
#include "ure/rng.hpp"

#include <cmath>
#include <numbers>
#include <set>

namespace ure::signal {

void validate(const DeviceProfile& profile, double sample_rate) {
    const std::string where = "profile '" + profile.name + "' (class " + std::to_string(profile.class_id) + ")";
    require(sample_rate > 0.0, ErrorCode::kInvalidArgument, "sample_rate must be positive");
    require(profile.class_id >= 0, ErrorCode::kInvalidArgument, where + ": class_id must be >= 0");
    const double nyquist = sample_rate / 2.0;
    for (std::size_t i = 0; i < profile.harmonics.size(); ++i) {
        const Harmonic& h = profile.harmonics[i];
        require(h.frequency >= 0.0 && h.frequency < nyquist, ErrorCode::kInvalidArgument,
                where + ": harmonic " + std::to_string(i) + " frequency " + std::to_string(h.frequency) +
                    " Hz violates Nyquist limit " + std::to_string(nyquist) + " Hz");
        require(h.amplitude >= 0.0 && std::isfinite(h.amplitude), ErrorCode::kInvalidArgument,
                where + ": harmonic " + std::to_string(i) + " amplitude must be finite and >= 0");
    }
    if (profile.am) {
        require(profile.am->depth >= 0.0 && profile.am->depth <= 1.0, ErrorCode::kInvalidArgument,
                where + ": am depth must lie in [0, 1]");
        require(profile.am->rate >= 0.0 && profile.am->rate < nyquist, ErrorCode::kInvalidArgument,
                where + ": am rate must lie in [0, Nyquist)");
    }
    require(profile.noise_floor >= 0.0 && std::isfinite(profile.noise_floor), ErrorCode::kInvalidArgument,
            where + ": noise_floor must be finite and >= 0");
    require(std::isfinite(profile.drift_ppm), ErrorCode::kInvalidArgument, where + ": drift_ppm must be finite");
}

void validate(std::span<const DeviceProfile> profiles, double sample_rate) {
    std::set<int> seen;
    for (const auto& p : profiles) {
        validate(p, sample_rate);
        require(seen.insert(p.class_id).second, ErrorCode::kInvalidArgument,
                "duplicate class_id " + std::to_string(p.class_id) + " in profile set");
    }
}

void validate(const TimeSeries& ts) {
    require(!ts.samples.empty(), ErrorCode::kInvalidArgument, "time series is empty");
    require(ts.sample_rate > 0.0, ErrorCode::kInvalidArgument, "time series sample_rate must be positive");
    for (std::size_t i = 0; i < ts.samples.size(); ++i) {
        require(std::isfinite(ts.samples[i]), ErrorCode::kNonFinite,
                "non-finite sample at index " + std::to_string(i));
    }
}

TimeSeries synthesize_recording(const DeviceProfile& profile, double duration, double sample_rate, std::uint64_t seed) {
    require(duration > 0.0, ErrorCode::kInvalidArgument, "duration must be positive");
    validate(profile, sample_rate);
    const auto n = static_cast<std::size_t>(std::llround(duration * sample_rate));
    require(n >= 1, ErrorCode::kInvalidArgument, "duration * sample_rate must be at least one sample");

    constexpr double kTwoPi = 2.0 * std::numbers::pi;
    // Instantaneous frequency ramps linearly from f to f(1 + drift) over the recording,
    // so the phase picks up a quadratic term.
    const double drift = profile.drift_ppm * 1e-6;
    const double total = static_cast<double>(n) / sample_rate;

    TimeSeries ts;
    ts.sample_rate = sample_rate;
    ts.samples.resize(n);

    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = static_cast<double>(k) / sample_rate;
        const double warped = t + drift * t * t / (2.0 * total);
        double v = 0.0;
        for (const Harmonic& h : profile.harmonics) {
            v += h.amplitude * std::sin(kTwoPi * h.frequency * warped + h.phase);
        }
        if (profile.am) {
            v *= 1.0 + profile.am->depth * std::sin(kTwoPi * profile.am->rate * t);
        }
        if (profile.noise_floor > 0.0) {
            v += profile.noise_floor * normal(rng);
        }
        ts.samples[k] = static_cast<float>(v);
    }
    return ts;
}

std::vector<TimeSeries> segment(const TimeSeries& ts, std::size_t segment_len) {
    require(segment_len >= 1, ErrorCode::kInvalidArgument, "segment_len must be >= 1");
    std::vector<TimeSeries> out;
    const std::size_t count = ts.samples.size() / segment_len;
    out.reserve(count);
    for (std::size_t s = 0; s < count; ++s) {
        const auto first = ts.samples.begin() + static_cast<std::ptrdiff_t>(s * segment_len);
        out.push_back(TimeSeries{{first, first + static_cast<std::ptrdiff_t>(segment_len)}, ts.sample_rate});
    }
    return out;
}

TimeSeries notch_filter(const TimeSeries& ts, double center, double quality) {
    require(ts.sample_rate > 0.0, ErrorCode::kInvalidArgument, "time series sample_rate must be positive");
    require(center > 0.0 && center < ts.sample_rate / 2.0, ErrorCode::kInvalidArgument,
            "notch center " + std::to_string(center) + " Hz must lie in (0, Nyquist=" +
                std::to_string(ts.sample_rate / 2.0) + ")");
    require(quality > 0.0, ErrorCode::kInvalidArgument, "notch quality must be positive");

    const double w0 = 2.0 * std::numbers::pi * center / ts.sample_rate;
    const double alpha = std::sin(w0) / (2.0 * quality);
    const double c = std::cos(w0);
    const double a0 = 1.0 + alpha;
    const double b0 = 1.0 / a0;
    const double b1 = -2.0 * c / a0;
    const double b2 = 1.0 / a0;
    const double a1 = -2.0 * c / a0;
    const double a2 = (1.0 - alpha) / a0;

    TimeSeries out{std::vector<float>(ts.samples.size()), ts.sample_rate};
    // Transposed direct form II
    double z1 = 0.0;
    double z2 = 0.0;
    for (std::size_t i = 0; i < ts.samples.size(); ++i) {
        const double x = ts.samples[i];
        const double y = b0 * x + z1;
        z1 = b1 * x - a1 * y + z2;
        z2 = b2 * x - a2 * y;
        out.samples[i] = static_cast<float>(y);
    }
    return out;
}

std::vector<std::byte> encode_raw(const TimeSeries& ts) {
    const double rate = std::round(ts.sample_rate);
    require(rate == ts.sample_rate && rate > 0.0 && rate <= 4294967295.0, ErrorCode::kInvalidArgument,
            "URE1 requires an integral sample rate that fits in 32 bits");
    io::ByteWriter w;
    w.magic("URE1");
    w.u32(static_cast<std::uint32_t>(rate));
    w.u64(ts.samples.size());
    for (float v : ts.samples) {
        w.f32(v);
    }
    return w.take();
}

TimeSeries decode_raw(std::span<const std::byte> bytes) {
    io::ByteReader r(bytes);
    if (bytes.size() < 4 || !r.magic("URE1")) {
        fail(ErrorCode::kBadMagic, "not a URE1 recording (bad magic)");
    }
    TimeSeries ts;
    ts.sample_rate = r.u32();
    const std::uint64_t count = r.u64();
    if (r.remaining() / 4 < count) {
        fail(ErrorCode::kTruncated, "URE1 payload truncated: header declares " + std::to_string(count) +
                                        " samples, file holds " + std::to_string(r.remaining() / 4));
    }
    ts.samples.resize(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        ts.samples[i] = r.f32();
    }
    validate(ts);
    return ts;
}

TimeSeries load_raw_recording(const std::filesystem::path& path) { return decode_raw(io::read_file(path)); }

void write_raw_recording(const std::filesystem::path& path, const TimeSeries& ts) {
    io::write_file(path, encode_raw(ts));
}

}  // namespace ure::signal

#pragma once

// Synthetic steady-state emission recordings: harmonic combs with slow drift,
// optional AM, and white background noise; plus the URE1 raw recording format.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ure::signal {

struct Harmonic {
    double frequency = 0.0;  // Hz
    double amplitude = 0.0;
    double phase = 0.0;  // radians

    bool operator==(const Harmonic&) const = default;
};

struct AmplitudeModulation {
    double rate = 0.0;   // Hz
    double depth = 0.0;  // [0, 1]

    bool operator==(const AmplitudeModulation&) const = default;
};

struct DeviceProfile {
    int class_id = 0;
    std::string name;
    std::vector<Harmonic> harmonics;
    std::optional<AmplitudeModulation> am;
    double drift_ppm = 0.0;
    double noise_floor = 0.0;

    bool operator==(const DeviceProfile&) const = default;
};

/// Checks the profile against a sample rate; throws ure::Error naming the bad field.
void validate(const DeviceProfile& profile, double sample_rate);
/// Class ids must be unique across a profile set.
void validate(std::span<const DeviceProfile> profiles, double sample_rate);

struct TimeSeries {
    std::vector<float> samples;
    double sample_rate = 0.0;

    [[nodiscard]] std::size_t size() const noexcept { return samples.size(); }
    bool operator==(const TimeSeries&) const = default;
};

void validate(const TimeSeries& ts);

/// Sum of drifting (and optionally amplitude-modulated) sinusoids plus white
/// Gaussian noise of std `noise_floor`. A pure function of its arguments.
TimeSeries synthesize_recording(const DeviceProfile& profile, double duration, double sample_rate, std::uint64_t seed);

/// Consecutive non-overlapping windows; the trailing remainder is dropped.
std::vector<TimeSeries> segment(const TimeSeries& ts, std::size_t segment_len);

/// Second-order IIR notch (unity gain at DC and Nyquist), zero initial state.
TimeSeries notch_filter(const TimeSeries& ts, double center, double quality);

// URE1 raw recording: "URE1", u32 sample_rate, u64 count, count x f32 (all little-endian).
std::vector<std::byte> encode_raw(const TimeSeries& ts);
TimeSeries decode_raw(std::span<const std::byte> bytes);
TimeSeries load_raw_recording(const std::filesystem::path& path);
void write_raw_recording(const std::filesystem::path& path, const TimeSeries& ts);

}  // namespace ure::signal

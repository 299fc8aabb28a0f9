#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "support.hpp"
#include "ure/binary_io.hpp"
#include "ure/error.hpp"
#include "ure/signalgen.hpp"

#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>

using namespace ure;
using namespace ure::signal;

namespace {

DeviceProfile single_tone(double f, double a = 1.0, double phase = 0.0) {
    DeviceProfile p;
    p.name = "tone";
    p.harmonics = {{f, a, phase}};
    return p;
}

TimeSeries sine(double f, double rate, std::size_t n, double amp = 1.0) {
    TimeSeries ts;
    ts.sample_rate = rate;
    ts.samples.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        ts.samples[k] = static_cast<float>(amp * std::sin(2.0 * std::numbers::pi * f * k / rate));
    }
    return ts;
}

std::vector<std::byte> raw_bytes(std::uint32_t rate, std::uint64_t count, const std::vector<float>& payload) {
    io::ByteWriter w;
    w.magic("URE1");
    w.u32(rate);
    w.u64(count);
    for (float v : payload) {
        w.f32(v);
    }
    return w.take();
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::kInternal;
}

}  // namespace

TEST_CASE("single noise-free harmonic equals the direct sinusoid") {
    const TimeSeries ts = synthesize_recording(single_tone(100.0), 1.0, 8000.0, 42);
    REQUIRE(ts.size() == 8000);
    CHECK(ts.sample_rate == 8000.0);
    double worst = 0.0;
    for (std::size_t k = 0; k < ts.size(); ++k) {
        worst = std::max(worst, std::abs(ts.samples[k] - std::sin(2.0 * std::numbers::pi * 100.0 * k / 8000.0)));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("phase and amplitude are honoured") {
    const TimeSeries ts = synthesize_recording(single_tone(250.0, 0.5, 1.0), 0.25, 8000.0, 1);
    for (std::size_t k = 0; k < ts.size(); k += 97) {
        CHECK(ts.samples[k] == doctest::Approx(0.5 * std::sin(2.0 * std::numbers::pi * 250.0 * k / 8000.0 + 1.0))
                                   .epsilon(1e-6));
    }
}

TEST_CASE("synthesis is a pure function of profile and seed") {
    DeviceProfile p = single_tone(300.0);
    p.harmonics.push_back({900.0, 0.3, 0.2});
    p.noise_floor = 0.1;
    p.drift_ppm = 80.0;
    p.am = AmplitudeModulation{3.0, 0.4};
    const TimeSeries a = synthesize_recording(p, 0.5, 8192.0, 7);
    const TimeSeries b = synthesize_recording(p, 0.5, 8192.0, 7);
    CHECK(a == b);
    const TimeSeries c = synthesize_recording(p, 0.5, 8192.0, 8);
    CHECK_FALSE(a == c);
}

TEST_CASE("empty harmonics without noise give silence") {
    DeviceProfile p;
    const TimeSeries ts = synthesize_recording(p, 0.1, 8000.0, 3);
    REQUIRE(ts.size() == 800);
    for (float v : ts.samples) {
        CHECK(v == 0.0f);
    }
}

TEST_CASE("noise floor sets the sample standard deviation") {
    DeviceProfile p;
    p.noise_floor = 0.2;
    const TimeSeries ts = synthesize_recording(p, 1.0, 8192.0, 11);
    double m = 0.0;
    double v = 0.0;
    for (float x : ts.samples) {
        m += x;
    }
    m /= ts.size();
    for (float x : ts.samples) {
        v += (x - m) * (x - m);
    }
    v /= ts.size() - 1;
    CHECK(std::sqrt(v) == doctest::Approx(0.2).epsilon(0.03));
}

TEST_CASE("spectral peak sits at the bin nearest the harmonic") {
    const double rate = 8192.0;
    for (double f : {137.0, 440.0, 1234.5, 3000.0}) {
        const TimeSeries ts = synthesize_recording(single_tone(f), 1.0, rate, 5);
        const std::size_t n = 1024;
        std::size_t best = 0;
        double best_mag = -1.0;
        for (std::size_t b = 0; b <= n / 2; ++b) {
            const double mag =
                testing::dft_magnitude(std::span<const float>(ts.samples).first(n), b * rate / n, rate);
            if (mag > best_mag) {
                best_mag = mag;
                best = b;
            }
        }
        CHECK(best == static_cast<std::size_t>(std::lround(f * n / rate)));
    }
}

TEST_CASE("synthesis preconditions") {
    CHECK(code_of([] { synthesize_recording(single_tone(4000.0), 1.0, 8000.0, 1); }) == ErrorCode::kInvalidArgument);
    CHECK(code_of([] { synthesize_recording(single_tone(100.0), 0.0, 8000.0, 1); }) == ErrorCode::kInvalidArgument);
    CHECK(code_of([] { synthesize_recording(single_tone(100.0), -1.0, 8000.0, 1); }) == ErrorCode::kInvalidArgument);
    CHECK(code_of([] { synthesize_recording(single_tone(100.0), 1e-5, 8000.0, 1); }) == ErrorCode::kInvalidArgument);
    CHECK(code_of([] { synthesize_recording(single_tone(100.0, -1.0), 1.0, 8000.0, 1); }) ==
          ErrorCode::kInvalidArgument);
    DeviceProfile am = single_tone(100.0);
    am.am = AmplitudeModulation{2.0, 1.5};
    CHECK(code_of([&] { synthesize_recording(am, 1.0, 8000.0, 1); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("class ids must be unique across a profile set") {
    std::vector<DeviceProfile> set{single_tone(100.0), single_tone(200.0)};
    set[1].class_id = 1;
    CHECK_NOTHROW(validate(std::span<const DeviceProfile>(set), 8000.0));
    set[1].class_id = 0;
    CHECK_THROWS_AS(validate(std::span<const DeviceProfile>(set), 8000.0), Error);
}

TEST_CASE("segmentation examples") {
    TimeSeries ts;
    ts.sample_rate = 10.0;
    SUBCASE("exact multiple") {
        ts.samples.assign(10, 1.0f);
        const auto s = segment(ts, 5);
        REQUIRE(s.size() == 2);
        CHECK(s[0].size() == 5);
        CHECK(s[1].size() == 5);
    }
    SUBCASE("remainder dropped") {
        ts.samples.assign(11, 1.0f);
        CHECK(segment(ts, 5).size() == 2);
    }
    SUBCASE("too short") {
        ts.samples.assign(4, 1.0f);
        CHECK(segment(ts, 5).empty());
    }
    SUBCASE("zero length rejected") {
        ts.samples.assign(4, 1.0f);
        CHECK_THROWS_AS(segment(ts, 0), Error);
    }
}

TEST_CASE("segments concatenate to a prefix of the input") {
    TimeSeries ts;
    ts.sample_rate = 100.0;
    ts.samples = testing::random_values(1003, 9);
    for (std::size_t len : {1u, 7u, 100u, 1003u, 2000u}) {
        const auto segs = segment(ts, len);
        CHECK(segs.size() == ts.size() / len);
        std::vector<float> joined;
        for (const auto& s : segs) {
            CHECK(s.sample_rate == ts.sample_rate);
            joined.insert(joined.end(), s.samples.begin(), s.samples.end());
        }
        CHECK(std::equal(joined.begin(), joined.end(), ts.samples.begin()));
    }
}

TEST_CASE("notch removes its centre frequency") {
    const double rate = 8000.0;
    const TimeSeries in = sine(60.0, rate, 16000);
    const TimeSeries out = notch_filter(in, 60.0, 5.0);
    REQUIRE(out.size() == in.size());
    const std::size_t skip = static_cast<std::size_t>(0.25 * rate);
    const auto tail_in = std::span<const float>(in.samples).subspan(skip);
    const auto tail_out = std::span<const float>(out.samples).subspan(skip);
    const double before = testing::dft_magnitude(tail_in, 60.0, rate);
    const double after = testing::dft_magnitude(tail_out, 60.0, rate);
    CHECK(20.0 * std::log10(before / after) >= 20.0);
}

TEST_CASE("notch leaves distant tones almost untouched") {
    const double rate = 8000.0;
    const TimeSeries in = sine(400.0, rate, 16000);
    const TimeSeries out = notch_filter(in, 60.0, 5.0);
    const std::size_t skip = static_cast<std::size_t>(0.25 * rate);
    const double before = testing::dft_magnitude(std::span<const float>(in.samples).subspan(skip), 400.0, rate);
    const double after = testing::dft_magnitude(std::span<const float>(out.samples).subspan(skip), 400.0, rate);
    CHECK(std::abs(20.0 * std::log10(before / after)) < 1.0);
}

TEST_CASE("notch passes DC") {
    TimeSeries dc;
    dc.sample_rate = 8000.0;
    dc.samples.assign(8000, 1.0f);
    const TimeSeries out = notch_filter(dc, 60.0, 5.0);
    for (std::size_t k = 2000; k < out.size(); ++k) {
        CHECK(std::abs(out.samples[k] - 1.0f) < 0.01f);
    }
}

TEST_CASE("notch preconditions") {
    const TimeSeries in = sine(60.0, 8000.0, 100);
    CHECK_THROWS_AS(notch_filter(in, 4000.0, 5.0), Error);
    CHECK_THROWS_AS(notch_filter(in, 0.0, 5.0), Error);
    CHECK_THROWS_AS(notch_filter(in, 60.0, 0.0), Error);
}

TEST_CASE("raw recording decodes the documented layout") {
    const auto bytes = raw_bytes(8000, 3, {0.0f, 1.0f, -1.0f});
    CHECK(bytes.size() == 16 + 12);
    const TimeSeries ts = decode_raw(bytes);
    CHECK(ts.sample_rate == 8000.0);
    CHECK(ts.samples == std::vector<float>{0.0f, 1.0f, -1.0f});
    CHECK(encode_raw(ts) == bytes);
}

TEST_CASE("raw recording errors are distinct") {
    CHECK(code_of([] { decode_raw(raw_bytes(8000, 3, {0.0f, 1.0f})); }) == ErrorCode::kTruncated);
    auto bad = raw_bytes(8000, 1, {0.5f});
    bad[0] = std::byte{'X'};
    CHECK(code_of([&] { decode_raw(bad); }) == ErrorCode::kBadMagic);
    CHECK(code_of([] { decode_raw(std::vector<std::byte>(5)); }) != ErrorCode::kInternal);
    try {
        decode_raw(raw_bytes(8000, 3, {0.0f, std::numeric_limits<float>::quiet_NaN(), 1.0f}));
        FAIL("NaN accepted");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kNonFinite);
        CHECK(std::string(e.what()).find('1') != std::string::npos);
    }
}

TEST_CASE("raw recording file round-trip is byte exact") {
    const auto dir = std::filesystem::temp_directory_path() / "ure_test_signalgen";
    std::filesystem::create_directories(dir);
    const auto path = dir / "rec.ure";
    const auto original = raw_bytes(8192, 5, {0.25f, -3.5f, 1e-7f, 0.0f, 42.0f});
    io::write_file(path, original);
    const TimeSeries ts = load_raw_recording(path);
    const auto path2 = dir / "rec2.ure";
    write_raw_recording(path2, ts);
    CHECK(io::read_file(path2) == original);
    CHECK(code_of([&] { load_raw_recording(dir / "missing.ure"); }) == ErrorCode::kIo);
    std::filesystem::remove_all(dir);
}

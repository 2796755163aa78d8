#include "tribo/errors.hpp"
#include "tribo/wav.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace tribo;

namespace {

std::filesystem::path tmp(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / "tribo_test_wav";
    std::filesystem::create_directories(dir);
    return dir / name;
}

TwoChannelBuffer rendered()
{
    ImpactSeriesParams a{.mu_interval_s = 0.004, .sigma_interval_s = 0.002, .mu_amp = 0.8, .sigma_amp = 0.3, .seed = 1};
    MaterialPreset m{"m", {{700.0, 0.05, 0.01}, {2100.0, 0.03, 0.008}}};
    return render_stimulus(a, a, &m, 0.5, RenderConfig{});
}

} // namespace

TEST_CASE("silence: byte length is header plus fs * 2ch * bytes")
{
    TwoChannelBuffer b;
    b.audio.samples.assign(44100, 0.0);
    b.tactile.samples.assign(44100, 0.0);
    CHECK(encode_wav(b, 16).size() == 44 + 44100 * 2 * 2);
    CHECK(encode_wav(b, 24).size() == 44 + 44100 * 2 * 3);
    write_wav(b, tmp("silence.wav"));
    CHECK(std::filesystem::file_size(tmp("silence.wav")) == 44 + 44100 * 4);
}

TEST_CASE("round trip within one quantization step")
{
    const auto b = rendered();
    for (int depth : {16, 24}) {
        const auto path = tmp("rt" + std::to_string(depth) + ".wav");
        write_wav(b, path, depth);
        const WavData w = read_wav(path);
        CHECK(w.channels == 2);
        CHECK(w.bit_depth == depth);
        CHECK(w.sample_rate_hz == 44100.0);
        REQUIRE(w.buffer.frames() == b.frames());
        double worst = 0.0;
        for (std::size_t i = 0; i < b.frames(); ++i) {
            worst = std::max(worst, std::abs(w.buffer.audio.samples[i] - b.audio.samples[i]));
            worst = std::max(worst, std::abs(w.buffer.tactile.samples[i] - b.tactile.samples[i]));
        }
        CHECK(worst <= wav_quantization_step(depth));
        if (depth == 16)
            CHECK(worst <= std::ldexp(1.0, -15));
    }
}

TEST_CASE("same input, same bytes")
{
    const auto a = rendered();
    const auto b = rendered();
    CHECK(encode_wav(a) == encode_wav(b));
}

TEST_CASE("channel order: audio first, tactile second")
{
    TwoChannelBuffer b;
    b.audio.samples = {0.5};
    b.tactile.samples = {-0.25};
    const auto bytes = encode_wav(b, 16);
    const auto s0 = static_cast<std::int16_t>(bytes[44] | (bytes[45] << 8));
    const auto s1 = static_cast<std::int16_t>(bytes[46] | (bytes[47] << 8));
    CHECK(s0 == static_cast<std::int16_t>(std::lround(0.5 * 32767)));
    CHECK(s1 == static_cast<std::int16_t>(std::lround(-0.25 * 32767)));
}

TEST_CASE("errors carry the path")
{
    TwoChannelBuffer b;
    b.audio.samples = {0.0};
    b.tactile.samples = {0.0};
    try {
        write_wav(b, "/nonexistent-dir/x.wav");
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("/nonexistent-dir/x.wav") != std::string::npos);
    }
    CHECK_THROWS_AS(write_wav(b, tmp("bad.wav"), 20), std::exception);
    CHECK_THROWS_AS(read_wav("/nonexistent-dir/x.wav"), IoError);
    std::ofstream(tmp("junk.wav")) << "not a wav file";
    CHECK_THROWS(read_wav(tmp("junk.wav")));
}

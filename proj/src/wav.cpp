#include "tribo/wav.hpp"

#include "tribo/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace tribo {

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v)
{
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag)
{
    out.insert(out.end(), tag, tag + 4);
}

std::int32_t quantize(double x, int bit_depth)
{
    const double full = (bit_depth == 16) ? 32767.0 : 8388607.0;
    const double v = std::isfinite(x) ? std::clamp(x, -1.0, 1.0) : 0.0;
    return static_cast<std::int32_t>(std::lround(v * full));
}

std::uint32_t get_u32(const std::uint8_t* p)
{
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t get_u16(const std::uint8_t* p)
{
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

} // namespace

double wav_quantization_step(int bit_depth)
{
    return bit_depth == 16 ? 1.0 / 32767.0 : 1.0 / 8388607.0;
}

std::vector<std::uint8_t> encode_wav(const TwoChannelBuffer& buffer, int bit_depth)
{
    if (bit_depth != 16 && bit_depth != 24)
        throw ParameterError("wav: bit_depth must be 16 or 24");
    if (buffer.audio.samples.size() != buffer.tactile.samples.size())
        throw ParameterError("wav: channels differ in length");

    const std::uint32_t channels = 2;
    const std::uint32_t bytes_per_sample = static_cast<std::uint32_t>(bit_depth / 8);
    const auto rate = static_cast<std::uint32_t>(std::lround(buffer.sample_rate_hz));
    const auto frames = static_cast<std::uint32_t>(buffer.frames());
    const std::uint32_t data_bytes = frames * channels * bytes_per_sample;

    std::vector<std::uint8_t> out;
    out.reserve(44 + data_bytes);
    put_tag(out, "RIFF");
    put_u32(out, 36 + data_bytes);
    put_tag(out, "WAVE");
    put_tag(out, "fmt ");
    put_u32(out, 16);
    put_u16(out, 1); // PCM
    put_u16(out, static_cast<std::uint16_t>(channels));
    put_u32(out, rate);
    put_u32(out, rate * channels * bytes_per_sample);
    put_u16(out, static_cast<std::uint16_t>(channels * bytes_per_sample));
    put_u16(out, static_cast<std::uint16_t>(bit_depth));
    put_tag(out, "data");
    put_u32(out, data_bytes);

    for (std::size_t n = 0; n < frames; ++n) {
        for (const auto* ch : {&buffer.audio.samples, &buffer.tactile.samples}) {
            const auto q = static_cast<std::uint32_t>(quantize((*ch)[n], bit_depth));
            for (std::uint32_t b = 0; b < bytes_per_sample; ++b)
                out.push_back(static_cast<std::uint8_t>((q >> (8 * b)) & 0xff));
        }
    }
    return out;
}

void write_wav(const TwoChannelBuffer& buffer, const std::filesystem::path& path, int bit_depth)
{
    const auto bytes = encode_wav(buffer, bit_depth);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw IoError("cannot open '" + path.string() + "' for writing");
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f)
        throw IoError("write failed for '" + path.string() + "'");
}

WavData read_wav(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw IoError("cannot open '" + path.string() + "'");
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    auto fail = [&](const std::string& why) -> IoError { return IoError("'" + path.string() + "': " + why); };
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw fail("not a RIFF/WAVE file");

    WavData w;
    const std::uint8_t* data = nullptr;
    std::uint32_t data_len = 0;
    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const std::uint8_t* chunk = bytes.data() + pos;
        const std::uint32_t len = get_u32(chunk + 4);
        if (pos + 8 + len > bytes.size())
            throw fail("truncated chunk");
        if (std::memcmp(chunk, "fmt ", 4) == 0) {
            if (len < 16 || get_u16(chunk + 8) != 1)
                throw fail("only PCM is supported");
            w.channels = get_u16(chunk + 10);
            w.sample_rate_hz = get_u32(chunk + 12);
            w.bit_depth = get_u16(chunk + 22);
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            data = chunk + 8;
            data_len = len;
        }
        pos += 8 + len + (len & 1);
    }
    if (!data || w.channels < 1 || w.channels > 2 || (w.bit_depth != 16 && w.bit_depth != 24))
        throw fail("unsupported layout");

    const int bps = w.bit_depth / 8;
    const std::size_t frames = data_len / static_cast<std::size_t>(bps * w.channels);
    const double full = w.bit_depth == 16 ? 32767.0 : 8388607.0;
    w.buffer.sample_rate_hz = w.sample_rate_hz;
    w.buffer.audio.samples.resize(frames);
    if (w.channels == 2)
        w.buffer.tactile.samples.resize(frames);
    const std::uint8_t* p = data;
    for (std::size_t n = 0; n < frames; ++n) {
        for (int c = 0; c < w.channels; ++c) {
            std::int32_t v = 0;
            if (bps == 2) {
                v = static_cast<std::int16_t>(get_u16(p));
            } else {
                v = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
                if (v & 0x800000)
                    v -= 0x1000000;
            }
            p += bps;
            (c == 0 ? w.buffer.audio.samples : w.buffer.tactile.samples)[n] = v / full;
        }
    }
    return w;
}

} // namespace tribo

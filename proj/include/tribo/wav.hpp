#pragma once

#include "tribo/dsp.hpp"

#include <cstdint>
#include <filesystem>

namespace tribo {

/// RIFF/WAVE PCM, two interleaved channels: 0 = audio, 1 = tactile drive.
/// `bit_depth` is 16 or 24. Throws IoError with the path on failure.
void write_wav(const TwoChannelBuffer& buffer, const std::filesystem::path& path, int bit_depth = 16);

/// Byte-exact encoding written by write_wav.
std::vector<std::uint8_t> encode_wav(const TwoChannelBuffer& buffer, int bit_depth = 16);

struct WavData {
    double sample_rate_hz = 0.0;
    int bit_depth = 0;
    int channels = 0;
    TwoChannelBuffer buffer; // a mono file leaves the tactile channel empty
};

WavData read_wav(const std::filesystem::path& path);

/// Quantization step for the given bit depth (1 / (2^(bits-1) - 1)).
double wav_quantization_step(int bit_depth);

} // namespace tribo

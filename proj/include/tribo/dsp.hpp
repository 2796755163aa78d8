#pragma once

// Rendering of impact sequences into sampled signals.
//
// excitation: raised-cosine pulse per impact, overlapping pulses sum
// audio:      excitation through a parallel bank of two-pole resonators
// tactile:    excitation band-passed into the vibrotactile range
//
// Every stage has a one-shot form and a streaming form that carries state
// across blocks; both produce the same samples bit for bit.

#include "tribo/impact_model.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tribo {

struct Mode {
    double freq_hz = 440.0;
    double decay_s = 0.1;
    double gain = 1.0;

    friend bool operator==(const Mode&, const Mode&) = default;
};

inline constexpr std::size_t kMaxModes = 64;

/// Material name that bypasses the modal bank (raw impact train on the audio channel).
inline constexpr std::string_view kBypassMaterial = "none";

struct MaterialPreset {
    std::string name;
    std::vector<Mode> modes;

    friend bool operator==(const MaterialPreset&, const MaterialPreset&) = default;
};

/// Throws ConfigError naming the offending mode (index, field, value).
void validate(const MaterialPreset& material, double sample_rate_hz);

struct TactileBand {
    double f_lo_hz = 40.0;
    double f_hi_hz = 400.0;

    friend bool operator==(const TactileBand&, const TactileBand&) = default;
};

struct RenderConfig {
    double sample_rate_hz = 44100.0;
    std::size_t block_size = 512;
    TactileBand tactile_band;
    double kernel_width_s = 0.001;
    double limiter_ceiling = 0.98;

    friend bool operator==(const RenderConfig&, const RenderConfig&) = default;
};

void validate(const RenderConfig& config);

enum class ChannelRole { audio, tactile, excitation };

struct SampleBuffer {
    std::vector<double> samples;
    ChannelRole role = ChannelRole::excitation;
};

struct TwoChannelBuffer {
    double sample_rate_hz = 44100.0;
    SampleBuffer audio{{}, ChannelRole::audio};
    SampleBuffer tactile{{}, ChannelRole::tactile};

    [[nodiscard]] std::size_t frames() const { return audio.samples.size(); }
};

/// Samples on [0, duration) at the configured rate.
std::size_t sample_count(double duration_s, const RenderConfig& config);

/// Sample index an impact at `time_s` starts on.
std::int64_t impact_start_sample(double time_s, double sample_rate_hz);

// ---------------------------------------------------------------------------
// excitation

/// Raised-cosine table of round(kernel_width_s * fs) samples peaking at index width/2.
class RaisedCosineKernel {
public:
    RaisedCosineKernel(double kernel_width_s, double sample_rate_hz);

    [[nodiscard]] std::span<const double> taps() const { return taps_; }
    [[nodiscard]] std::size_t width() const { return taps_.size(); }
    [[nodiscard]] std::size_t half_width() const { return taps_.size() / 2; }

private:
    std::vector<double> taps_;
};

SampleBuffer render_impact_train(std::span<const ImpactEvent> events, std::size_t num_samples,
                                 const RenderConfig& config);

/// Streaming pulse accumulator. Pulses that straddle a block boundary continue
/// in the next block. Capacity is fixed at construction; overflowing pulses are
/// dropped and counted.
class PulseTrainStream {
public:
    PulseTrainStream(const RenderConfig& config, std::size_t max_active = 4096);

    /// Queues a pulse; must be called before rendering the block containing `start_sample`.
    void add(std::int64_t start_sample, double amplitude);

    /// Writes samples [first_sample, first_sample + out.size()) into `out`.
    void render(std::int64_t first_sample, std::span<double> out);

    void clear() { active_.clear(); }
    [[nodiscard]] std::size_t active() const { return active_.size(); }
    [[nodiscard]] std::uint64_t dropped() const { return dropped_; }

private:
    struct Pulse {
        std::int64_t start;
        double amplitude;
    };
    RaisedCosineKernel kernel_;
    std::vector<Pulse> active_;
    std::size_t capacity_;
    std::uint64_t dropped_ = 0;
};

// ---------------------------------------------------------------------------
// modal bank

/// Two-pole resonator y[n] = 2 r cos(theta) y[n-1] - r^2 y[n-2] + gain r x[n-1],
/// whose unit-impulse response is gain r^n sin(n theta) / sin(theta).
struct ResonatorCoeffs {
    double a1 = 0.0;
    double a2 = 0.0;
    double b1 = 0.0;

    static ResonatorCoeffs from_mode(const Mode& mode, double sample_rate_hz);
};

struct ResonatorState {
    double y1 = 0.0;
    double y2 = 0.0;
    double x1 = 0.0;

    double tick(const ResonatorCoeffs& c, double x)
    {
        const double y = c.a1 * y1 + c.a2 * y2 + c.b1 * x1;
        y2 = y1;
        y1 = y;
        x1 = x;
        return y;
    }
};

/// Stateful parallel resonator bank. Storage for kMaxModes modes is reserved up
/// front, so loading another material never allocates.
class ModalBank {
public:
    ModalBank();
    ModalBank(const MaterialPreset& material, double sample_rate_hz);

    void load(const MaterialPreset& material, double sample_rate_hz);
    /// Installs precomputed coefficients (at most kMaxModes) and clears state.
    void load(std::span<const ResonatorCoeffs> coeffs);
    void reset();

    [[nodiscard]] std::size_t mode_count() const { return coeffs_.size(); }
    [[nodiscard]] std::span<const ResonatorCoeffs> coeffs() const { return coeffs_; }
    [[nodiscard]] std::span<ResonatorState> states() { return states_; }

    /// Serial per-sample kernel used on the real-time path.
    void process(std::span<const double> in, std::span<double> out);

private:
    std::vector<ResonatorCoeffs> coeffs_;
    std::vector<ResonatorState> states_;
};

/// One-shot modal filtering; dispatches to the OpenMP kernel.
SampleBuffer modal_filter(const SampleBuffer& excitation, const MaterialPreset& material,
                          const RenderConfig& config);

// ---------------------------------------------------------------------------
// tactile conditioning

struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0, a1 = 0.0, a2 = 0.0;
    double s1 = 0.0, s2 = 0.0;

    static Biquad butterworth_highpass(double cutoff_hz, double sample_rate_hz);
    static Biquad butterworth_lowpass(double cutoff_hz, double sample_rate_hz);

    double tick(double x)
    {
        const double y = b0 * x + s1;
        s1 = b1 * x - a1 * y + s2;
        s2 = b2 * x - a2 * y;
        return y;
    }
    void reset() { s1 = s2 = 0.0; }
};

/// Fourth-order band-pass: second-order Butterworth high-pass at f_lo cascaded
/// with a second-order Butterworth low-pass at f_hi.
class TactileShaper {
public:
    explicit TactileShaper(const RenderConfig& config);

    void process(std::span<const double> in, std::span<double> out);
    void reset();

private:
    Biquad highpass_;
    Biquad lowpass_;
};

SampleBuffer tactile_shape(const SampleBuffer& excitation, const RenderConfig& config);

// ---------------------------------------------------------------------------
// limiter

/// Identity below half the ceiling, tanh knee above; odd, monotone, |out| <= ceiling.
/// Non-finite input maps to 0 (NaN) or +-ceiling (inf).
double soft_limit(double x, double ceiling);

void soft_limit_in_place(std::span<double> samples, double ceiling);
SampleBuffer soft_limit(const SampleBuffer& buffer, double ceiling);

// ---------------------------------------------------------------------------
// full stimulus

/// `material == nullptr` bypasses the modal bank.
TwoChannelBuffer render_stimulus(const ImpactSeriesParams& audio_params, const ImpactSeriesParams& tactile_params,
                                 const MaterialPreset* material, double duration_s, const RenderConfig& config);

/// Pre-limiter signal taps of a stimulus render, for tests and analysis.
struct StimulusStages {
    std::vector<ImpactEvent> audio_events;
    std::vector<ImpactEvent> tactile_events;
    SampleBuffer audio_excitation;
    SampleBuffer tactile_excitation;
    SampleBuffer audio_prelimit;
    SampleBuffer tactile_prelimit;
};

StimulusStages render_stimulus_stages(const ImpactSeriesParams& audio_params,
                                      const ImpactSeriesParams& tactile_params, const MaterialPreset* material,
                                      double duration_s, const RenderConfig& config);

/// Streaming counterpart of render_stimulus for one voice. Block sizes may vary
/// call to call; output matches the one-shot render sample for sample.
class StreamingRenderer {
public:
    StreamingRenderer(const ImpactSeriesParams& audio_params, const ImpactSeriesParams& tactile_params,
                      const MaterialPreset* material, const RenderConfig& config,
                      std::size_t max_block = 4096);

    void set_audio_params(const ImpactSeriesParams& params) { audio_gen_.set_params(params); }
    void set_tactile_params(const ImpactSeriesParams& params) { tactile_gen_.set_params(params); }
    void set_material(const MaterialPreset* material);
    /// Allocation-free material switch; an empty span bypasses the modal bank.
    void set_material(std::span<const ResonatorCoeffs> coeffs);

    /// Clears filter and pulse state and re-anchors the next impact at the
    /// current stream position.
    void reset_audio();
    void reset_tactile();

    /// Renders the next out.size() frames. Disabled channels are written as zeros
    /// and their voices are reset.
    void render(std::span<double> audio_out, std::span<double> tactile_out, bool audio_on = true,
                bool tactile_on = true);

    [[nodiscard]] std::int64_t position() const { return position_; }
    [[nodiscard]] std::uint64_t dropped_pulses() const { return audio_pulses_.dropped() + tactile_pulses_.dropped(); }

private:
    void feed(ImpactGenerator& gen, PulseTrainStream& pulses, std::int64_t end_sample);
    void render_chunk(std::span<double> audio_out, std::span<double> tactile_out, bool audio_on, bool tactile_on);

    RenderConfig config_;
    ImpactGenerator audio_gen_;
    ImpactGenerator tactile_gen_;
    PulseTrainStream audio_pulses_;
    PulseTrainStream tactile_pulses_;
    ModalBank bank_;
    bool bypass_modal_ = true;
    TactileShaper shaper_;
    std::vector<double> scratch_;
    std::int64_t position_ = 0;
};

} // namespace tribo

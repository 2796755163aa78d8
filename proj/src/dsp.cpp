#include "tribo/dsp.hpp"

#include "tribo/errors.hpp"
#include "tribo/kernels.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>

namespace tribo {

namespace {

[[noreturn]] void config_fail(const std::string& what)
{
    throw ConfigError(what);
}

std::string fmt_num(double v)
{
    std::ostringstream os;
    os << v;
    return os.str();
}

} // namespace

void validate(const MaterialPreset& material, double sample_rate_hz)
{
    const std::string where = "material '" + material.name + "'";
    if (material.name.empty())
        config_fail("material: name must not be empty");
    if (material.name == kBypassMaterial)
        config_fail(where + ": name is reserved for the modal bypass");
    if (material.modes.empty() || material.modes.size() > kMaxModes)
        config_fail(where + ": needs 1.." + std::to_string(kMaxModes) + " modes, has " +
                    std::to_string(material.modes.size()));
    const double nyquist = sample_rate_hz / 2.0;
    for (std::size_t i = 0; i < material.modes.size(); ++i) {
        const Mode& m = material.modes[i];
        const std::string mode = where + " modes[" + std::to_string(i) + "]";
        if (!std::isfinite(m.freq_hz) || m.freq_hz <= 0.0 || m.freq_hz >= nyquist)
            config_fail(mode + ".freq_hz = " + fmt_num(m.freq_hz) + " must lie in (0, " + fmt_num(nyquist) +
                        ") (Nyquist at " + fmt_num(sample_rate_hz) + " Hz)");
        if (!std::isfinite(m.decay_s) || m.decay_s <= 0.0)
            config_fail(mode + ".decay_s = " + fmt_num(m.decay_s) + " must be > 0");
        if (!std::isfinite(m.gain))
            config_fail(mode + ".gain must be finite");
    }
}

void validate(const RenderConfig& c)
{
    if (!(c.sample_rate_hz >= 8000.0 && c.sample_rate_hz <= 384000.0))
        config_fail("render.sample_rate_hz must be in [8000, 384000]");
    if (c.block_size < 64 || c.block_size > 4096 || !std::has_single_bit(c.block_size))
        config_fail("render.block_size = " + std::to_string(c.block_size) + " must be a power of two in [64, 4096]");
    const auto& b = c.tactile_band;
    if (!(std::isfinite(b.f_lo_hz) && std::isfinite(b.f_hi_hz) && b.f_lo_hz > 0.0 && b.f_lo_hz < b.f_hi_hz &&
          b.f_hi_hz < c.sample_rate_hz / 2.0))
        config_fail("render.tactile_band must satisfy 0 < f_lo_hz < f_hi_hz < sample_rate_hz / 2");
    if (!(c.kernel_width_s > 0.0 && c.kernel_width_s <= 0.05) || std::llround(c.kernel_width_s * c.sample_rate_hz) < 2)
        config_fail("render.kernel_width_s must be <= 0.05 s and span at least 2 samples");
    if (!(c.limiter_ceiling > 0.0 && c.limiter_ceiling <= 1.0))
        config_fail("render.limiter_ceiling must be in (0, 1]");
}

std::size_t sample_count(double duration_s, const RenderConfig& config)
{
    if (!std::isfinite(duration_s) || duration_s < 0.0)
        throw ParameterError("duration must be finite and >= 0");
    return static_cast<std::size_t>(std::llround(duration_s * config.sample_rate_hz));
}

std::int64_t impact_start_sample(double time_s, double sample_rate_hz)
{
    return std::llround(time_s * sample_rate_hz);
}

// ---------------------------------------------------------------------------

RaisedCosineKernel::RaisedCosineKernel(double kernel_width_s, double sample_rate_hz)
{
    const auto width = std::llround(kernel_width_s * sample_rate_hz);
    if (width < 2)
        throw ConfigError("impact kernel must span at least 2 samples");
    taps_.resize(static_cast<std::size_t>(width));
    const double half = static_cast<double>(taps_.size() / 2);
    for (std::size_t k = 0; k < taps_.size(); ++k)
        taps_[k] = 0.5 * (1.0 + std::cos(std::numbers::pi * (static_cast<double>(k) - half) / half));
}

SampleBuffer render_impact_train(std::span<const ImpactEvent> events, std::size_t num_samples,
                                 const RenderConfig& config)
{
    const RaisedCosineKernel kernel(config.kernel_width_s, config.sample_rate_hz);
    const auto taps = kernel.taps();
    SampleBuffer out{std::vector<double>(num_samples, 0.0), ChannelRole::excitation};
    const auto n_total = static_cast<std::int64_t>(num_samples);
    for (const auto& e : events) {
        const std::int64_t start = impact_start_sample(e.time_s, config.sample_rate_hz);
        for (std::size_t k = 0; k < taps.size(); ++k) {
            const std::int64_t idx = start + static_cast<std::int64_t>(k);
            if (idx < 0)
                continue;
            if (idx >= n_total)
                break;
            out.samples[static_cast<std::size_t>(idx)] += e.amplitude * taps[k];
        }
    }
    return out;
}

PulseTrainStream::PulseTrainStream(const RenderConfig& config, std::size_t max_active)
    : kernel_(config.kernel_width_s, config.sample_rate_hz), capacity_(max_active)
{
    active_.reserve(capacity_);
}

void PulseTrainStream::add(std::int64_t start_sample, double amplitude)
{
    if (active_.size() >= capacity_) {
        ++dropped_;
        return;
    }
    active_.push_back({start_sample, amplitude});
}

void PulseTrainStream::render(std::int64_t first_sample, std::span<double> out)
{
    std::fill(out.begin(), out.end(), 0.0);
    const auto taps = kernel_.taps();
    const auto width = static_cast<std::int64_t>(taps.size());
    const std::int64_t end = first_sample + static_cast<std::int64_t>(out.size());
    for (const Pulse& p : active_) {
        const std::int64_t k0 = std::max<std::int64_t>(0, first_sample - p.start);
        const std::int64_t k1 = std::min<std::int64_t>(width, end - p.start);
        for (std::int64_t k = k0; k < k1; ++k)
            out[static_cast<std::size_t>(p.start + k - first_sample)] += p.amplitude * taps[static_cast<std::size_t>(k)];
    }
    std::erase_if(active_, [&](const Pulse& p) { return p.start + width <= end; });
}

// ---------------------------------------------------------------------------

ResonatorCoeffs ResonatorCoeffs::from_mode(const Mode& mode, double sample_rate_hz)
{
    const double r = std::exp(-1.0 / (mode.decay_s * sample_rate_hz));
    const double theta = 2.0 * std::numbers::pi * mode.freq_hz / sample_rate_hz;
    return {2.0 * r * std::cos(theta), -r * r, mode.gain * r};
}

ModalBank::ModalBank()
{
    coeffs_.reserve(kMaxModes);
    states_.reserve(kMaxModes);
}

ModalBank::ModalBank(const MaterialPreset& material, double sample_rate_hz) : ModalBank()
{
    load(material, sample_rate_hz);
}

void ModalBank::load(const MaterialPreset& material, double sample_rate_hz)
{
    validate(material, sample_rate_hz);
    coeffs_.clear();
    for (const Mode& m : material.modes)
        coeffs_.push_back(ResonatorCoeffs::from_mode(m, sample_rate_hz));
    states_.assign(coeffs_.size(), ResonatorState{});
}

void ModalBank::load(std::span<const ResonatorCoeffs> coeffs)
{
    if (coeffs.size() > kMaxModes)
        throw ParameterError("ModalBank: too many modes");
    coeffs_.assign(coeffs.begin(), coeffs.end());
    states_.assign(coeffs_.size(), ResonatorState{});
}

void ModalBank::reset()
{
    std::fill(states_.begin(), states_.end(), ResonatorState{});
}

void ModalBank::process(std::span<const double> in, std::span<double> out)
{
    kernels::modal_bank_serial(coeffs_, states_, in, out);
}

SampleBuffer modal_filter(const SampleBuffer& excitation, const MaterialPreset& material, const RenderConfig& config)
{
    ModalBank bank(material, config.sample_rate_hz);
    SampleBuffer out{std::vector<double>(excitation.samples.size(), 0.0), ChannelRole::audio};
    kernels::modal_bank_omp(bank.coeffs(), bank.states(), excitation.samples, out.samples);
    return out;
}

// ---------------------------------------------------------------------------

namespace {

Biquad normalized(double b0, double b1, double b2, double a0, double a1, double a2)
{
    Biquad q;
    q.b0 = b0 / a0;
    q.b1 = b1 / a0;
    q.b2 = b2 / a0;
    q.a1 = a1 / a0;
    q.a2 = a2 / a0;
    return q;
}

} // namespace

Biquad Biquad::butterworth_highpass(double cutoff_hz, double fs)
{
    const double w0 = 2.0 * std::numbers::pi * cutoff_hz / fs;
    const double cw = std::cos(w0);
    const double alpha = std::sin(w0) / std::numbers::sqrt2; // sin(w0) / (2 Q), Q = 1/sqrt(2)
    return normalized((1.0 + cw) / 2.0, -(1.0 + cw), (1.0 + cw) / 2.0, 1.0 + alpha, -2.0 * cw, 1.0 - alpha);
}

Biquad Biquad::butterworth_lowpass(double cutoff_hz, double fs)
{
    const double w0 = 2.0 * std::numbers::pi * cutoff_hz / fs;
    const double cw = std::cos(w0);
    const double alpha = std::sin(w0) / std::numbers::sqrt2;
    return normalized((1.0 - cw) / 2.0, 1.0 - cw, (1.0 - cw) / 2.0, 1.0 + alpha, -2.0 * cw, 1.0 - alpha);
}

TactileShaper::TactileShaper(const RenderConfig& config)
    : highpass_(Biquad::butterworth_highpass(config.tactile_band.f_lo_hz, config.sample_rate_hz)),
      lowpass_(Biquad::butterworth_lowpass(config.tactile_band.f_hi_hz, config.sample_rate_hz))
{
}

void TactileShaper::process(std::span<const double> in, std::span<double> out)
{
    for (std::size_t n = 0; n < in.size(); ++n)
        out[n] = lowpass_.tick(highpass_.tick(in[n]));
}

void TactileShaper::reset()
{
    highpass_.reset();
    lowpass_.reset();
}

SampleBuffer tactile_shape(const SampleBuffer& excitation, const RenderConfig& config)
{
    TactileShaper shaper(config);
    SampleBuffer out{std::vector<double>(excitation.samples.size(), 0.0), ChannelRole::tactile};
    shaper.process(excitation.samples, out.samples);
    return out;
}

// ---------------------------------------------------------------------------

double soft_limit(double x, double ceiling)
{
    if (std::isnan(x))
        return 0.0;
    const double knee = 0.5 * ceiling;
    const double mag = std::abs(x);
    if (mag <= knee)
        return x;
    const double span = ceiling - knee;
    const double y = knee + span * std::tanh((mag - knee) / span);
    return std::copysign(std::min(y, ceiling), x);
}

void soft_limit_in_place(std::span<double> samples, double ceiling)
{
    for (double& s : samples)
        s = soft_limit(s, ceiling);
}

SampleBuffer soft_limit(const SampleBuffer& buffer, double ceiling)
{
    SampleBuffer out = buffer;
    soft_limit_in_place(out.samples, ceiling);
    return out;
}

// ---------------------------------------------------------------------------

StimulusStages render_stimulus_stages(const ImpactSeriesParams& audio_params,
                                      const ImpactSeriesParams& tactile_params, const MaterialPreset* material,
                                      double duration_s, const RenderConfig& config)
{
    validate(config);
    validate(audio_params);
    validate(tactile_params);
    if (material)
        validate(*material, config.sample_rate_hz);
    const std::size_t n = sample_count(duration_s, config);

    StimulusStages st;
    st.audio_events = generate_impact_sequence(audio_params, duration_s);
    st.tactile_events = generate_impact_sequence(tactile_params, duration_s);
    st.audio_excitation = render_impact_train(st.audio_events, n, config);
    st.tactile_excitation = render_impact_train(st.tactile_events, n, config);
    if (material) {
        st.audio_prelimit = modal_filter(st.audio_excitation, *material, config);
    } else {
        st.audio_prelimit = st.audio_excitation;
        st.audio_prelimit.role = ChannelRole::audio;
    }
    st.tactile_prelimit = tactile_shape(st.tactile_excitation, config);
    return st;
}

TwoChannelBuffer render_stimulus(const ImpactSeriesParams& audio_params, const ImpactSeriesParams& tactile_params,
                                 const MaterialPreset* material, double duration_s, const RenderConfig& config)
{
    StimulusStages st = render_stimulus_stages(audio_params, tactile_params, material, duration_s, config);
    TwoChannelBuffer out;
    out.sample_rate_hz = config.sample_rate_hz;
    out.audio = soft_limit(st.audio_prelimit, config.limiter_ceiling);
    out.tactile = soft_limit(st.tactile_prelimit, config.limiter_ceiling);
    return out;
}

// ---------------------------------------------------------------------------

StreamingRenderer::StreamingRenderer(const ImpactSeriesParams& audio_params,
                                     const ImpactSeriesParams& tactile_params, const MaterialPreset* material,
                                     const RenderConfig& config, std::size_t max_block)
    : config_(config), audio_gen_(audio_params), tactile_gen_(tactile_params), audio_pulses_(config),
      tactile_pulses_(config), shaper_(config), scratch_(max_block, 0.0)
{
    validate(config_);
    set_material(material);
}

void StreamingRenderer::set_material(const MaterialPreset* material)
{
    if (material) {
        bank_.load(*material, config_.sample_rate_hz);
        bypass_modal_ = false;
    } else {
        bank_.reset();
        bypass_modal_ = true;
    }
}

void StreamingRenderer::set_material(std::span<const ResonatorCoeffs> coeffs)
{
    bank_.load(coeffs);
    bypass_modal_ = coeffs.empty();
}

void StreamingRenderer::reset_audio()
{
    audio_pulses_.clear();
    bank_.reset();
    audio_gen_.restart_at(static_cast<double>(position_) / config_.sample_rate_hz);
}

void StreamingRenderer::reset_tactile()
{
    tactile_pulses_.clear();
    shaper_.reset();
    tactile_gen_.restart_at(static_cast<double>(position_) / config_.sample_rate_hz);
}

void StreamingRenderer::feed(ImpactGenerator& gen, PulseTrainStream& pulses, std::int64_t end_sample)
{
    const double fs = config_.sample_rate_hz;
    gen.emit_while([&](double t) { return impact_start_sample(t, fs) < end_sample; },
                   [&](const ImpactEvent& e) { pulses.add(impact_start_sample(e.time_s, fs), e.amplitude); });
}

void StreamingRenderer::render(std::span<double> audio_out, std::span<double> tactile_out, bool audio_on,
                               bool tactile_on)
{
    if (tactile_out.size() != audio_out.size())
        throw ParameterError("StreamingRenderer::render: channel spans differ in length");
    for (std::size_t done = 0; done < audio_out.size(); done += scratch_.size()) {
        const std::size_t len = std::min(scratch_.size(), audio_out.size() - done);
        render_chunk(audio_out.subspan(done, len), tactile_out.subspan(done, len), audio_on, tactile_on);
    }
}

void StreamingRenderer::render_chunk(std::span<double> audio_out, std::span<double> tactile_out, bool audio_on,
                                     bool tactile_on)
{
    const std::size_t n = audio_out.size();
    const std::int64_t end = position_ + static_cast<std::int64_t>(n);
    std::span<double> excitation(scratch_.data(), n);

    if (audio_on) {
        feed(audio_gen_, audio_pulses_, end);
        audio_pulses_.render(position_, excitation);
        if (bypass_modal_)
            std::copy(excitation.begin(), excitation.end(), audio_out.begin());
        else
            bank_.process(excitation, audio_out);
        soft_limit_in_place(audio_out, config_.limiter_ceiling);
    } else {
        std::fill(audio_out.begin(), audio_out.end(), 0.0);
    }

    if (tactile_on) {
        feed(tactile_gen_, tactile_pulses_, end);
        tactile_pulses_.render(position_, excitation);
        shaper_.process(excitation, tactile_out);
        soft_limit_in_place(tactile_out, config_.limiter_ceiling);
    } else {
        std::fill(tactile_out.begin(), tactile_out.end(), 0.0);
    }

    position_ = end;
    // A disabled channel restarts cleanly at the next block it is enabled for.
    if (!audio_on)
        reset_audio();
    if (!tactile_on)
        reset_tactile();
}

} // namespace tribo

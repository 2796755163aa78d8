#include "tribo/impact_model.hpp"

#include "tribo/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace tribo {

namespace {

void require(bool ok, const char* what)
{
    if (!ok)
        throw ParameterError(what);
}

// Floor used when a dispersion of zero has to go through a logarithm.
constexpr double kLogSigmaFloor = 1e-9;

double lerp_log(double a, double b, double alpha)
{
    return std::exp((1.0 - alpha) * std::log(a) + alpha * std::log(b));
}

double lerp_lin(double a, double b, double alpha)
{
    return (1.0 - alpha) * a + alpha * b;
}

double lerp_log_sigma(double a, double b, double alpha)
{
    if (a == 0.0 && b == 0.0)
        return 0.0;
    return lerp_log(std::max(a, kLogSigmaFloor), std::max(b, kLogSigmaFloor), alpha);
}

} // namespace

void validate(const ImpactSeriesParams& p)
{
    require(std::isfinite(p.mu_interval_s) && std::isfinite(p.sigma_interval_s) && std::isfinite(p.mu_amp) &&
                std::isfinite(p.sigma_amp) && std::isfinite(p.min_interval_s),
            "impact params: all fields must be finite");
    require(p.min_interval_s > 0.0, "impact params: min_interval_s must be > 0");
    require(p.mu_interval_s >= p.min_interval_s, "impact params: mu_interval_s must be >= min_interval_s");
    require(p.sigma_interval_s >= 0.0, "impact params: sigma_interval_s must be >= 0");
    require(p.mu_amp >= 0.0 && p.mu_amp <= 1.0, "impact params: mu_amp must be in [0, 1]");
    require(p.sigma_amp >= 0.0, "impact params: sigma_amp must be >= 0");
}

void validate(const ActionMapping& m)
{
    validate(m.rub_audio);
    validate(m.scratch_audio);
    validate(m.rub_tactile);
    validate(m.scratch_tactile);
    const double rub_cv = m.rub_audio.sigma_interval_s / m.rub_audio.mu_interval_s;
    const double scratch_cv = m.scratch_audio.sigma_interval_s / m.scratch_audio.mu_interval_s;
    require(scratch_cv > rub_cv, "action mapping: scratch_audio interval CV must exceed rub_audio");
    require(m.scratch_tactile.mu_amp > m.rub_tactile.mu_amp,
            "action mapping: scratch_tactile mu_amp must exceed rub_tactile");
}

ActionMapping default_action_mapping()
{
    ActionMapping m;
    m.rub_audio = {.mu_interval_s = 0.004, .sigma_interval_s = 0.0004, .mu_amp = 0.25, .sigma_amp = 0.03,
                   .min_interval_s = 0.001, .seed = 0};
    m.scratch_audio = {.mu_interval_s = 0.036, .sigma_interval_s = 0.018, .mu_amp = 0.75, .sigma_amp = 0.1,
                       .min_interval_s = 0.001, .seed = 0};
    m.rub_tactile = {.mu_interval_s = 0.012, .sigma_interval_s = 0.003, .mu_amp = 0.15, .sigma_amp = 0.03,
                     .min_interval_s = 0.001, .seed = 0};
    m.scratch_tactile = {.mu_interval_s = 0.012, .sigma_interval_s = 0.003, .mu_amp = 0.85, .sigma_amp = 0.2,
                         .min_interval_s = 0.001, .seed = 0};
    return m;
}

ActionState ActionState::clamped() const
{
    ActionState s;
    s.alpha = std::isnan(alpha) ? 0.0 : std::clamp(alpha, 0.0, 1.0);
    s.velocity_norm = std::isfinite(velocity_norm) ? std::max(velocity_norm, 0.0) : 0.0;
    return s;
}

ImpactGenerator::ImpactGenerator(const ImpactSeriesParams& params, GeneratorOptions options)
    : params_(params), rng_(params.seed)
{
    validate(params_);
    if (options.random_phase) {
        std::uniform_real_distribution<double> phase(0.0, params_.mu_interval_s);
        clock_sum_ = phase(rng_);
    }
}

void ImpactGenerator::set_params(const ImpactSeriesParams& params)
{
    validate(params);
    params_ = params;
}

double ImpactGenerator::draw_interval()
{
    for (;;) {
        const double dt = params_.mu_interval_s + params_.sigma_interval_s * unit_normal_(rng_);
        if (dt >= params_.min_interval_s)
            return dt;
    }
}

double ImpactGenerator::draw_amplitude()
{
    const double a = params_.mu_amp + params_.sigma_amp * unit_normal_(rng_);
    return std::clamp(a, 0.0, 1.0);
}

void ImpactGenerator::advance_clock(double dt)
{
    const double t = clock_sum_ + dt;
    if (std::abs(clock_sum_) >= std::abs(dt))
        clock_comp_ += (clock_sum_ - t) + dt;
    else
        clock_comp_ += (dt - t) + clock_sum_;
    clock_sum_ = t;
}

ImpactEvent ImpactGenerator::next()
{
    ImpactEvent ev{pending_time(), draw_amplitude()};
    advance_clock(draw_interval());
    return ev;
}

void ImpactGenerator::restart_at(double time_s)
{
    clock_sum_ = time_s;
    clock_comp_ = 0.0;
}

std::vector<ImpactEvent> generate_impact_sequence(const ImpactSeriesParams& params, double duration_s,
                                                  GeneratorOptions options)
{
    validate(params);
    if (!std::isfinite(duration_s) || duration_s < 0.0)
        throw ParameterError("duration must be finite and >= 0");
    std::vector<ImpactEvent> events;
    if (duration_s == 0.0)
        return events;
    events.reserve(static_cast<std::size_t>(duration_s / params.mu_interval_s * 1.1) + 4);
    ImpactGenerator gen(params, options);
    gen.emit_until(duration_s, [&](const ImpactEvent& e) { events.push_back(e); });
    return events;
}

MappedParams interpolate_endpoints(double alpha, const ImpactSeriesParams& rub, const ImpactSeriesParams& scratch)
{
    MappedParams out;
    if (std::isnan(alpha)) {
        alpha = 0.0;
        out.saturated = true;
    } else if (alpha < 0.0 || alpha > 1.0) {
        alpha = std::clamp(alpha, 0.0, 1.0);
        out.saturated = true;
    }
    if (alpha == 0.0) {
        out.params = rub;
        return out;
    }
    if (alpha == 1.0) {
        out.params = scratch;
        return out;
    }
    ImpactSeriesParams& p = out.params;
    p.mu_interval_s = lerp_log(rub.mu_interval_s, scratch.mu_interval_s, alpha);
    p.sigma_interval_s = lerp_log_sigma(rub.sigma_interval_s, scratch.sigma_interval_s, alpha);
    p.min_interval_s = lerp_log(rub.min_interval_s, scratch.min_interval_s, alpha);
    // exp/log round-off must not break mu >= min.
    p.mu_interval_s = std::max(p.mu_interval_s, p.min_interval_s);
    p.mu_amp = std::clamp(lerp_lin(rub.mu_amp, scratch.mu_amp, alpha), 0.0, 1.0);
    p.sigma_amp = std::max(lerp_lin(rub.sigma_amp, scratch.sigma_amp, alpha), 0.0);
    p.seed = alpha < 0.5 ? rub.seed : scratch.seed;
    return out;
}

MappedParams action_to_audio_params(double alpha, const ActionMapping& mapping)
{
    return interpolate_endpoints(alpha, mapping.rub_audio, mapping.scratch_audio);
}

MappedParams action_to_tactile_params(double alpha, const ActionMapping& mapping)
{
    return interpolate_endpoints(alpha, mapping.rub_tactile, mapping.scratch_tactile);
}

ImpactSeriesParams scale_rate_by_velocity(const ImpactSeriesParams& params, double velocity_norm, double v_floor)
{
    const double v = std::isfinite(velocity_norm) ? std::max(velocity_norm, v_floor) : v_floor;
    ImpactSeriesParams out = params;
    out.mu_interval_s = std::max(params.mu_interval_s / v, params.min_interval_s);
    out.sigma_interval_s = params.sigma_interval_s / v;
    return out;
}

SequenceStats sequence_statistics(std::span<const ImpactEvent> events)
{
    SequenceStats s;
    s.count = events.size();
    if (events.empty())
        return s;

    double amp_sum = 0.0;
    for (const auto& e : events)
        amp_sum += e.amplitude;
    const double amp_mean = amp_sum / static_cast<double>(events.size());
    double amp_ss = 0.0;
    for (const auto& e : events)
        amp_ss += (e.amplitude - amp_mean) * (e.amplitude - amp_mean);
    s.amp_mean = amp_mean;
    s.amp_std = std::sqrt(amp_ss / static_cast<double>(events.size()));

    if (events.size() < 2)
        return s;

    const auto n = static_cast<double>(events.size() - 1);
    double dt_sum = 0.0;
    for (std::size_t i = 1; i < events.size(); ++i) {
        if (!(events[i].time_s > events[i - 1].time_s))
            throw OrderingError("sequence_statistics: event times must be strictly increasing (index " +
                                std::to_string(i) + ")");
        dt_sum += events[i].time_s - events[i - 1].time_s;
    }
    const double dt_mean = dt_sum / n;
    double dt_ss = 0.0;
    for (std::size_t i = 1; i < events.size(); ++i) {
        const double d = (events[i].time_s - events[i - 1].time_s) - dt_mean;
        dt_ss += d * d;
    }
    s.interval_mean = dt_mean;
    s.interval_std = std::sqrt(dt_ss / n);
    return s;
}

std::uint64_t mix_seed(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view tag)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return mix_seed(master ^ mix_seed(h));
}

} // namespace tribo

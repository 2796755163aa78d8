#include "tribo/control.hpp"

#include <algorithm>
#include <cmath>

namespace tribo {

namespace {

double clamp_unit(double v)
{
    return std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0);
}

} // namespace

ControlFrame ControlFrame::clamped() const
{
    ControlFrame f = *this;
    f.x = clamp_unit(x);
    f.y = clamp_unit(y);
    if (pressure)
        f.pressure = clamp_unit(*pressure);
    return f;
}

double smooth_param(double current, double target, double time_constant_s, double dt_s)
{
    const double k = 1.0 - std::exp(-dt_s / time_constant_s);
    const double next = current + (target - current) * k;
    // Keep the result inside [current, target] even under round-off.
    return current <= target ? std::clamp(next, current, target) : std::clamp(next, target, current);
}

bool VelocityEstimator::push(const ControlFrame& raw)
{
    if (!std::isfinite(raw.t_s) || !std::isfinite(raw.x) || !std::isfinite(raw.y)) {
        ++dropped_;
        return false;
    }
    const ControlFrame frame = raw.clamped();
    if (frames_ == 0) {
        last_ = frame;
        frames_ = 1;
        return true;
    }
    const double dt = frame.t_s - last_.t_s;
    if (dt < 0.0) {
        ++dropped_;
        return false;
    }
    if (dt == 0.0) {
        // Same instant: keep the newer position, no speed sample.
        last_ = frame;
        return true;
    }
    const double speed = std::hypot(frame.x - last_.x, frame.y - last_.y) / dt / settings_.v_ref;
    ema_ = smooth_param(ema_, speed, settings_.velocity_time_constant_s, dt);
    last_ = frame;
    ++frames_;
    return true;
}

double VelocityEstimator::value_at(double now_s) const
{
    if (frames_ < 2 || now_s - last_.t_s > settings_.staleness_timeout_s)
        return 0.0;
    return ema_;
}

std::optional<double> VelocityEstimator::newest_time() const
{
    if (frames_ == 0)
        return std::nullopt;
    return last_.t_s;
}

void VelocityEstimator::reset()
{
    last_ = {};
    ema_ = 0.0;
    frames_ = 0;
    dropped_ = 0;
}

double estimate_velocity(std::span<const ControlFrame> frames, double time_constant_s,
                         const ControlSettings& settings, std::optional<double> now_s)
{
    ControlSettings s = settings;
    s.velocity_time_constant_s = time_constant_s;
    VelocityEstimator est(s);
    for (const auto& f : frames)
        est.push(f);
    return now_s ? est.value_at(*now_s) : est.value();
}

EngineParams initial_engine_params(const ActionMapping& mapping, int material_index)
{
    EngineParams p;
    p.state.material_index = material_index;
    p.state.gate = Gate::silent;
    p.audio = mapping.rub_audio;
    p.tactile = mapping.rub_tactile;
    return p;
}

EngineParams apply_control_at_block_boundary(const SmoothedState* pending, const EngineParams& current,
                                             const ActionMapping& mapping, const ControlSettings& settings)
{
    if (!pending)
        return current;
    EngineParams next;
    next.state = *pending;
    const MappedParams audio = action_to_audio_params(pending->alpha, mapping);
    const MappedParams tactile = action_to_tactile_params(pending->alpha, mapping);
    next.state.alpha = std::clamp(std::isnan(pending->alpha) ? 0.0 : pending->alpha, 0.0, 1.0);
    next.state.alpha_saturated = pending->alpha_saturated || audio.saturated;
    next.audio = scale_rate_by_velocity(audio.params, pending->velocity_norm, settings.v_floor);
    next.tactile = scale_rate_by_velocity(tactile.params, pending->velocity_norm, settings.v_floor);
    if (velocity_gate_silent(pending->velocity_norm, settings.v_floor))
        next.state.gate = Gate::silent;
    next.revision = current.revision + 1;
    return next;
}

SmoothedState resolve_control(const ControlSnapshot& snap, std::int64_t now_ns, const ControlSettings& settings)
{
    SmoothedState s;
    s.alpha = snap.alpha;
    s.alpha_saturated = snap.alpha_saturated;
    s.material_index = snap.material_index;
    s.audio_on = snap.audio_on;
    s.tactile_on = snap.tactile_on;
    s.velocity_norm = snap.velocity_norm;

    bool stale = false;
    if (!snap.fixed_velocity) {
        const auto timeout_ns = static_cast<std::int64_t>(settings.staleness_timeout_s * 1e9);
        stale = snap.last_pointer_ns < 0 || now_ns - snap.last_pointer_ns > timeout_ns;
    }
    if (stale)
        s.velocity_norm = 0.0;
    s.gate = (stale || velocity_gate_silent(s.velocity_norm, settings.v_floor)) ? Gate::silent : Gate::open;
    return s;
}

ControlPublisher::ControlPublisher(ControlSettings settings, ControlSnapshot initial)
    : settings_(settings), velocity_(settings), state_(initial), exchange_(initial)
{
    publish_locked();
}

void ControlPublisher::publish_locked()
{
    exchange_.publish(state_);
}

void ControlPublisher::on_pointer(const ControlFrame& frame, std::int64_t receipt_ns)
{
    std::lock_guard lock(mutex_);
    if (!velocity_.push(frame))
        return;
    if (!state_.fixed_velocity)
        state_.velocity_norm = velocity_.value();
    state_.last_pointer_ns = receipt_ns;
    publish_locked();
}

std::pair<double, bool> ControlPublisher::set_alpha(double alpha)
{
    const double clamped = clamp_unit(alpha);
    const bool saturated = std::isnan(alpha) || clamped != alpha;
    std::lock_guard lock(mutex_);
    state_.alpha = clamped;
    state_.alpha_saturated = saturated;
    publish_locked();
    return {clamped, saturated};
}

void ControlPublisher::set_material(int index)
{
    std::lock_guard lock(mutex_);
    state_.material_index = index;
    publish_locked();
}

void ControlPublisher::set_modality(bool audio_on, bool tactile_on)
{
    std::lock_guard lock(mutex_);
    state_.audio_on = audio_on;
    state_.tactile_on = tactile_on;
    publish_locked();
}

void ControlPublisher::set_fixed_velocity(std::optional<double> velocity_norm)
{
    std::lock_guard lock(mutex_);
    state_.fixed_velocity = velocity_norm.has_value();
    state_.velocity_norm = velocity_norm ? std::max(*velocity_norm, 0.0) : velocity_.value();
    publish_locked();
}

ControlSnapshot ControlPublisher::current() const
{
    std::lock_guard lock(mutex_);
    return state_;
}

std::uint64_t ControlPublisher::dropped_frames() const
{
    std::lock_guard lock(mutex_);
    return velocity_.dropped();
}

} // namespace tribo

#pragma once

// Stochastic impact-series model of continuous friction.
//
// A friction interaction is represented as a renewal process of impacts:
// inter-impact intervals are drawn from a Gaussian truncated below at a
// floor (rejection resampling), amplitudes from a Gaussian clamped to [0, 1].
// The four statistics (interval mean/std, amplitude mean/std) are the only
// knobs; an action parameter alpha in [0, 1] (0 = rub, 1 = scratch) maps onto
// them separately for the audio and the tactile channel.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace tribo {

struct ImpactEvent {
    double time_s = 0.0;
    double amplitude = 0.0;

    friend bool operator==(const ImpactEvent&, const ImpactEvent&) = default;
};

struct ImpactSeriesParams {
    double mu_interval_s = 0.01;
    double sigma_interval_s = 0.0;
    double mu_amp = 0.5;
    double sigma_amp = 0.0;
    double min_interval_s = 0.001;
    std::uint64_t seed = 0;

    friend bool operator==(const ImpactSeriesParams&, const ImpactSeriesParams&) = default;
};

/// Throws ParameterError naming the first violated invariant.
void validate(const ImpactSeriesParams& params);

struct ActionMapping {
    ImpactSeriesParams rub_audio;
    ImpactSeriesParams scratch_audio;
    ImpactSeriesParams rub_tactile;
    ImpactSeriesParams scratch_tactile;

    friend bool operator==(const ActionMapping&, const ActionMapping&) = default;
};

/// Checks every endpoint plus the ordering constraints: scratch audio has a
/// strictly larger interval CV than rub audio, scratch tactile a strictly
/// larger mean amplitude than rub tactile.
void validate(const ActionMapping& mapping);

/// Shipped defaults; identical to the mapping in config/default.json.
ActionMapping default_action_mapping();

struct ActionState {
    double alpha = 0.0;         // 0 = rub, 1 = scratch
    double velocity_norm = 1.0; // pointer speed / reference speed

    /// Clamps alpha to [0, 1] and velocity to a finite non-negative value.
    [[nodiscard]] ActionState clamped() const;
};

struct GeneratorOptions {
    /// Start at a uniform random phase in [0, mu_interval) instead of t = 0.
    bool random_phase = false;
};

/// Streaming form of the renewal process. The pending event time carries over
/// between calls, so splitting a horizon into pieces never changes the
/// sequence. Parameter changes apply from the next drawn interval onward.
class ImpactGenerator {
public:
    explicit ImpactGenerator(const ImpactSeriesParams& params, GeneratorOptions options = {});

    void set_params(const ImpactSeriesParams& params);
    [[nodiscard]] const ImpactSeriesParams& params() const { return params_; }

    [[nodiscard]] double pending_time() const { return clock_sum_ + clock_comp_; }

    /// Pops the pending event and schedules the next one.
    ImpactEvent next();

    /// Re-anchors the pending event at `time_s`; the RNG stream continues.
    void restart_at(double time_s);

    /// Emits every event with time strictly below `horizon_s`.
    template <class Sink>
    void emit_until(double horizon_s, Sink&& sink)
    {
        while (pending_time() < horizon_s)
            sink(next());
    }

    /// Emits events while `keep(pending_time())` holds.
    template <class Pred, class Sink>
    void emit_while(Pred&& keep, Sink&& sink)
    {
        while (keep(pending_time()))
            sink(next());
    }

private:
    double draw_interval();
    double draw_amplitude();
    void advance_clock(double dt);

    ImpactSeriesParams params_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> unit_normal_{0.0, 1.0};
    // Neumaier-compensated running time, so zero-variance trains land on k * mu.
    double clock_sum_ = 0.0;
    double clock_comp_ = 0.0;
};

/// Events in [0, duration_s), first at t = 0 unless options request a random phase.
std::vector<ImpactEvent> generate_impact_sequence(const ImpactSeriesParams& params, double duration_s,
                                                  GeneratorOptions options = {});

struct MappedParams {
    ImpactSeriesParams params;
    bool saturated = false; // alpha was outside [0, 1] and got clamped
};

/// Log-linear interpolation of interval fields, linear interpolation of
/// amplitude fields. The seed comes from the nearer endpoint.
MappedParams interpolate_endpoints(double alpha, const ImpactSeriesParams& rub,
                                   const ImpactSeriesParams& scratch);

MappedParams action_to_audio_params(double alpha, const ActionMapping& mapping);
MappedParams action_to_tactile_params(double alpha, const ActionMapping& mapping);

inline constexpr double kDefaultVelocityFloor = 0.05;

/// Divides interval mean and std by max(velocity_norm, v_floor); the mean is
/// floored at min_interval_s. Amplitudes are untouched.
ImpactSeriesParams scale_rate_by_velocity(const ImpactSeriesParams& params, double velocity_norm,
                                          double v_floor = kDefaultVelocityFloor);

/// True when the pointer is too slow to excite the surface.
[[nodiscard]] inline bool velocity_gate_silent(double velocity_norm, double v_floor = kDefaultVelocityFloor)
{
    return !(velocity_norm >= v_floor);
}

struct SequenceStats {
    std::optional<double> interval_mean; // absent below two events
    std::optional<double> interval_std;
    std::optional<double> amp_mean;      // absent for an empty sequence
    std::optional<double> amp_std;
    std::size_t count = 0;
};

/// Population moments; throws OrderingError when times are not strictly increasing.
SequenceStats sequence_statistics(std::span<const ImpactEvent> events);

/// splitmix64 finalizer, used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t value);

/// Stable hash of a label folded into a master seed (FNV-1a then splitmix).
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag);

} // namespace tribo

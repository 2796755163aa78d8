#pragma once

// Pointer frames -> smoothed velocity and action state, handed to the render
// thread once per block through a wait-free snapshot exchange.

#include "tribo/impact_model.hpp"

#include <array>
#include <atomic>
#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <type_traits>
#include <utility>

namespace tribo {

struct ControlFrame {
    double t_s = 0.0; // source clock, non-decreasing within a session
    double x = 0.0;   // normalized surface coordinates
    double y = 0.0;
    std::optional<double> pressure;

    [[nodiscard]] ControlFrame clamped() const;
};

enum class Gate : std::uint8_t { open, silent };

inline constexpr int kBypassMaterialIndex = -1;

/// What the render thread installs at a block boundary. The material is an
/// index into EngineConfig::materials (kBypassMaterialIndex for no modal bank).
struct SmoothedState {
    double velocity_norm = 0.0;
    double alpha = 0.0;
    int material_index = kBypassMaterialIndex;
    Gate gate = Gate::silent;
    bool audio_on = true;
    bool tactile_on = true;
    bool alpha_saturated = false;

    friend bool operator==(const SmoothedState&, const SmoothedState&) = default;
};

struct ControlSettings {
    double v_ref = 0.5;                    // surface widths per second
    double velocity_time_constant_s = 0.03;
    double staleness_timeout_s = 0.1;
    double v_floor = kDefaultVelocityFloor;

    friend bool operator==(const ControlSettings&, const ControlSettings&) = default;
};

/// One-pole slew: current + (target - current) * (1 - exp(-dt / tau)).
double smooth_param(double current, double target, double time_constant_s, double dt_s);

/// Time-aware EMA of finite-difference pointer speed, normalized by v_ref.
class VelocityEstimator {
public:
    explicit VelocityEstimator(ControlSettings settings = {}) : settings_(settings) {}

    /// Returns false when the frame went backwards in time (dropped, counted).
    bool push(const ControlFrame& frame);

    /// Smoothed speed as of the newest frame.
    [[nodiscard]] double value() const { return frames_ >= 2 ? ema_ : 0.0; }

    /// As value(), but 0 when the newest frame is older than the staleness timeout.
    [[nodiscard]] double value_at(double now_s) const;

    [[nodiscard]] std::uint64_t dropped() const { return dropped_; }
    [[nodiscard]] std::uint64_t frames() const { return frames_; }
    [[nodiscard]] std::optional<double> newest_time() const;

    void reset();

private:
    ControlSettings settings_;
    ControlFrame last_{};
    double ema_ = 0.0;
    std::uint64_t frames_ = 0;
    std::uint64_t dropped_ = 0;
};

/// Batch form over a window of frames; `now_s` enables the staleness check.
double estimate_velocity(std::span<const ControlFrame> frames, double time_constant_s,
                         const ControlSettings& settings = {}, std::optional<double> now_s = std::nullopt);

/// Parameters installed for one block.
struct EngineParams {
    SmoothedState state;
    ImpactSeriesParams audio;
    ImpactSeriesParams tactile;
    std::uint64_t revision = 0; // bumped on every install

    [[nodiscard]] bool gate_open() const { return state.gate == Gate::open; }
};

/// Initial parameters before any control arrived: silent, alpha = 0.
EngineParams initial_engine_params(const ActionMapping& mapping, int material_index);

/// With no pending state returns `current` untouched. Otherwise maps alpha per
/// modality, scales by velocity and forces the gate silent below v_floor.
EngineParams apply_control_at_block_boundary(const SmoothedState* pending, const EngineParams& current,
                                             const ActionMapping& mapping, const ControlSettings& settings);

/// Single-producer / single-consumer triple buffer. publish() and consume()
/// never block and never allocate; the consumer sees the latest complete value.
template <class T>
class SnapshotExchange {
    static_assert(std::is_trivially_copyable_v<T>);

public:
    SnapshotExchange() = default;
    explicit SnapshotExchange(const T& initial) { slots_.fill(initial); }

    void publish(const T& value)
    {
        slots_[back_] = value;
        back_ = middle_.exchange(static_cast<std::uint8_t>(back_ | kDirty), std::memory_order_acq_rel) & kIndex;
    }

    /// Copies the newest snapshot into `out` if one arrived since the last call.
    bool consume(T& out)
    {
        if ((middle_.load(std::memory_order_acquire) & kDirty) == 0)
            return false;
        front_ = middle_.exchange(front_, std::memory_order_acq_rel) & kIndex;
        out = slots_[front_];
        return true;
    }

private:
    static constexpr std::uint8_t kDirty = 0x4;
    static constexpr std::uint8_t kIndex = 0x3;

    std::array<T, 3> slots_{};
    std::atomic<std::uint8_t> middle_{1};
    std::uint8_t back_ = 0;  // producer-owned
    std::uint8_t front_ = 2; // consumer-owned
};

/// Everything the protocol side publishes; the render side turns it into a
/// SmoothedState once per block (see resolve_control).
struct ControlSnapshot {
    double alpha = 0.0;
    bool alpha_saturated = false;
    double velocity_norm = 0.0;
    std::int64_t last_pointer_ns = -1; // engine clock at which the newest pointer frame arrived
    bool fixed_velocity = false;       // ignore pointer staleness (experiment playback)
    int material_index = kBypassMaterialIndex;
    bool audio_on = true;
    bool tactile_on = true;
};

/// Render-side resolution of a snapshot against the engine clock.
SmoothedState resolve_control(const ControlSnapshot& snapshot, std::int64_t now_ns, const ControlSettings& settings);

/// Producer side: serializes all control writers (last writer wins) and
/// publishes complete snapshots into the exchange.
class ControlPublisher {
public:
    ControlPublisher(ControlSettings settings, ControlSnapshot initial);

    void on_pointer(const ControlFrame& frame, std::int64_t receipt_ns);
    /// Clamps and publishes; returns {clamped alpha, saturated}.
    std::pair<double, bool> set_alpha(double alpha);
    void set_material(int index);
    void set_modality(bool audio_on, bool tactile_on);
    void set_fixed_velocity(std::optional<double> velocity_norm);

    [[nodiscard]] ControlSnapshot current() const;
    [[nodiscard]] std::uint64_t dropped_frames() const;

    /// Consumer end; only the render thread may call this.
    bool consume(ControlSnapshot& out) { return exchange_.consume(out); }

private:
    void publish_locked();

    mutable std::mutex mutex_;
    ControlSettings settings_;
    VelocityEstimator velocity_;
    ControlSnapshot state_;
    SnapshotExchange<ControlSnapshot> exchange_;
};

} // namespace tribo

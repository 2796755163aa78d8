#pragma once

// Block engine and its configuration.
//
// Engine is the deterministic core: given the sequence of states installed at
// block boundaries it always produces the same samples. RealtimeEngine wraps
// it with a paced render thread, a control publisher and an output sink.

#include "tribo/control.hpp"
#include "tribo/dsp.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace tribo {

struct OutputSinkConfig {
    std::string device; // live sink name ("null", "stdout")
    std::string file;   // offline WAV path
};

struct EngineConfig {
    RenderConfig render;
    ControlSettings control;
    ActionMapping mapping = default_action_mapping();
    std::vector<MaterialPreset> materials;
    std::string default_material = std::string(kBypassMaterial);
    std::uint16_t protocol_port = 9002;
    OutputSinkConfig output{"null", ""};
};

/// The shipped defaults (identical to config/default.json): three 8-mode
/// materials, wood selected, null output device.
EngineConfig default_engine_config();

/// Checks every invariant; throws ConfigError naming the offending field.
void validate(const EngineConfig& config);

/// Parses and validates JSON text. Syntax errors report line and column;
/// semantic errors report the JSON path of the field. `source` labels messages.
EngineConfig parse_config(const std::string& text, const std::string& source = "<config>");
EngineConfig load_config(const std::filesystem::path& path);

std::string config_to_json(const EngineConfig& config);

/// Index of a material by name; kBypassMaterialIndex for "none", nullopt if unknown.
std::optional<int> find_material(const EngineConfig& config, std::string_view name);
std::string material_name(const EngineConfig& config, int index);

/// Serialized trace record: the state installed at a given block.
struct TraceRecord {
    std::uint64_t block = 0;
    SmoothedState state;
};

std::string trace_record_to_json(const TraceRecord& record, const EngineConfig& config);
TraceRecord trace_record_from_json(const std::string& line, const EngineConfig& config);
std::vector<TraceRecord> load_trace(const std::filesystem::path& path, const EngineConfig& config);
void save_trace(const std::vector<TraceRecord>& trace, const std::filesystem::path& path, const EngineConfig& config);

class Engine {
public:
    Engine(const EngineConfig& config, std::uint64_t seed);

    /// Renders one block of config.render.block_size frames. `pending` (may be
    /// null) is installed before any sample of this block is produced.
    void process_block(const SmoothedState* pending, std::span<double> audio, std::span<double> tactile);

    [[nodiscard]] const EngineParams& installed() const { return installed_; }
    [[nodiscard]] std::uint64_t blocks_rendered() const { return blocks_; }
    [[nodiscard]] std::size_t block_size() const { return block_size_; }
    [[nodiscard]] double last_peak_audio() const { return peak_audio_; }
    [[nodiscard]] double last_peak_tactile() const { return peak_tactile_; }
    [[nodiscard]] const EngineConfig& config() const { return config_; }

private:
    void install_material(int index);

    EngineConfig config_;
    std::size_t block_size_;
    std::vector<std::vector<ResonatorCoeffs>> material_coeffs_;
    StreamingRenderer renderer_;
    EngineParams installed_;
    int active_material_ = kBypassMaterialIndex;
    std::uint64_t blocks_ = 0;
    double peak_audio_ = 0.0;
    double peak_tactile_ = 0.0;
};

/// Offline render with a fixed action state (gate open, velocity fixed).
TwoChannelBuffer render_offline_fixed(const EngineConfig& config, std::uint64_t seed, double alpha,
                                      double velocity_norm, int material_index, double duration_s);

/// Offline re-render of a block trace (states installed at recorded blocks).
TwoChannelBuffer render_offline_trace(const EngineConfig& config, std::uint64_t seed,
                                      std::span<const TraceRecord> trace, std::uint64_t blocks);

// ---------------------------------------------------------------------------

/// Live output device. write() receives interleaved float frames (audio, tactile).
class AudioSink {
public:
    virtual ~AudioSink() = default;
    virtual void open(double sample_rate_hz, std::size_t block_size) = 0;
    virtual void write(std::span<const float> interleaved) = 0;
    virtual void close() = 0;
    [[nodiscard]] virtual std::string name() const = 0;
};

/// "null" discards samples; "stdout" streams raw float32 little-endian interleaved
/// frames. Throws ConfigError for unknown names.
std::unique_ptr<AudioSink> make_audio_sink(const std::string& device);

struct EngineDiagnostics {
    double alpha = 0.0;
    bool alpha_saturated = false;
    double velocity_norm = 0.0;
    bool gate_open = false;
    int material_index = kBypassMaterialIndex;
    bool audio_on = true;
    bool tactile_on = true;
    std::uint64_t underruns = 0;
    std::uint64_t blocks = 0;
    std::uint64_t revision = 0;
    double peak_audio = 0.0;
    double peak_tactile = 0.0;
    std::uint64_t dropped_frames = 0;
};

struct RealtimeOptions {
    std::uint64_t seed = 1;
    /// Stop after this many seconds of output (0 = until stop()).
    double duration_s = 0.0;
    /// Blocks the device buffers ahead of playback.
    std::size_t latency_blocks = 2;
    /// Keep the rendered output in memory (requires duration_s > 0).
    bool capture = false;
    /// Record installed states for deterministic replay.
    bool record_trace = false;
    /// Pace against the wall clock. When false blocks render back to back.
    bool paced = true;
};

class RealtimeEngine {
public:
    RealtimeEngine(EngineConfig config, std::unique_ptr<AudioSink> sink, RealtimeOptions options);
    ~RealtimeEngine();

    RealtimeEngine(const RealtimeEngine&) = delete;
    RealtimeEngine& operator=(const RealtimeEngine&) = delete;

    void start();
    void stop();
    /// Blocks until the render thread exits (duration reached or stop()).
    void wait();
    [[nodiscard]] bool running() const { return running_.load(); }

    ControlPublisher& control() { return publisher_; }
    [[nodiscard]] const EngineConfig& config() const { return config_; }
    [[nodiscard]] EngineDiagnostics diagnostics() const;

    /// Engine clock (steady clock, ns since construction).
    [[nodiscard]] std::int64_t now_ns() const;

    /// Valid after wait().
    [[nodiscard]] const TwoChannelBuffer& captured() const { return captured_; }
    [[nodiscard]] std::vector<TraceRecord> trace() const;

    /// Test hook: executed on the render thread right before process_block.
    void set_block_hook(std::function<void(std::uint64_t block)> hook) { block_hook_ = std::move(hook); }

private:
    void render_loop();

    EngineConfig config_;
    std::unique_ptr<AudioSink> sink_;
    RealtimeOptions options_;
    ControlPublisher publisher_;
    Engine engine_;
    std::chrono::steady_clock::time_point epoch_;

    std::thread thread_;
    std::atomic<bool> running_{false};
    std::atomic<bool> stop_requested_{false};

    // Render-thread-owned scratch, allocated up front.
    std::vector<double> audio_block_;
    std::vector<double> tactile_block_;
    std::vector<float> interleaved_;
    std::vector<TraceRecord> trace_;
    TwoChannelBuffer captured_;
    std::function<void(std::uint64_t)> block_hook_;

    struct AtomicDiagnostics {
        std::atomic<double> alpha{0.0};
        std::atomic<bool> alpha_saturated{false};
        std::atomic<double> velocity_norm{0.0};
        std::atomic<bool> gate_open{false};
        std::atomic<int> material_index{kBypassMaterialIndex};
        std::atomic<bool> audio_on{true};
        std::atomic<bool> tactile_on{true};
        std::atomic<std::uint64_t> underruns{0};
        std::atomic<std::uint64_t> blocks{0};
        std::atomic<std::uint64_t> revision{0};
        std::atomic<double> peak_audio{0.0};
        std::atomic<double> peak_tactile{0.0};
    } diag_;
};

} // namespace tribo

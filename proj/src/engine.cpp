#include "tribo/engine.hpp"

#include "tribo/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace tribo {

namespace {

constexpr std::size_t kTraceCapacity = 1 << 16;

EngineParams seeded_initial_params(const EngineConfig& config, std::uint64_t seed)
{
    const int material = find_material(config, config.default_material).value_or(kBypassMaterialIndex);
    EngineParams p = initial_engine_params(config.mapping, material);
    p.audio.seed = derive_seed(seed, "audio");
    p.tactile.seed = derive_seed(seed, "tactile");
    return p;
}

double peak_of(std::span<const double> x)
{
    double p = 0.0;
    for (double v : x)
        p = std::max(p, std::abs(v));
    return p;
}

} // namespace

Engine::Engine(const EngineConfig& config, std::uint64_t seed)
    : config_((validate(config), config)), block_size_(config.render.block_size),
      renderer_(seeded_initial_params(config, seed).audio, seeded_initial_params(config, seed).tactile, nullptr,
                config.render, config.render.block_size),
      installed_(seeded_initial_params(config, seed))
{
    material_coeffs_.reserve(config_.materials.size());
    for (const auto& m : config_.materials) {
        std::vector<ResonatorCoeffs> coeffs;
        for (const auto& mode : m.modes)
            coeffs.push_back(ResonatorCoeffs::from_mode(mode, config_.render.sample_rate_hz));
        material_coeffs_.push_back(std::move(coeffs));
    }
    install_material(installed_.state.material_index);
}

void Engine::install_material(int index)
{
    if (index < 0 || static_cast<std::size_t>(index) >= material_coeffs_.size()) {
        renderer_.set_material(std::span<const ResonatorCoeffs>{});
        active_material_ = kBypassMaterialIndex;
    } else {
        renderer_.set_material(std::span<const ResonatorCoeffs>(material_coeffs_[static_cast<std::size_t>(index)]));
        active_material_ = index;
    }
}

void Engine::process_block(const SmoothedState* pending, std::span<double> audio, std::span<double> tactile)
{
    if (audio.size() != block_size_ || tactile.size() != block_size_)
        throw ParameterError("Engine::process_block: spans must hold exactly one block");

    if (pending) {
        EngineParams next = apply_control_at_block_boundary(pending, installed_, config_.mapping, config_.control);
        if (next.state.material_index < 0 ||
            static_cast<std::size_t>(next.state.material_index) >= material_coeffs_.size())
            next.state.material_index = kBypassMaterialIndex;
        if (next.state.material_index != active_material_)
            install_material(next.state.material_index);
        renderer_.set_audio_params(next.audio);
        renderer_.set_tactile_params(next.tactile);
        installed_ = next;
    }

    const bool open = installed_.gate_open();
    renderer_.render(audio, tactile, open && installed_.state.audio_on, open && installed_.state.tactile_on);
    peak_audio_ = peak_of(audio);
    peak_tactile_ = peak_of(tactile);
    ++blocks_;
}

TwoChannelBuffer render_offline_fixed(const EngineConfig& config, std::uint64_t seed, double alpha,
                                      double velocity_norm, int material_index, double duration_s)
{
    Engine engine(config, seed);
    const std::size_t frames = sample_count(duration_s, config.render);
    const std::size_t bs = config.render.block_size;
    const std::size_t blocks = (frames + bs - 1) / bs;

    SmoothedState state;
    state.alpha = std::clamp(std::isnan(alpha) ? 0.0 : alpha, 0.0, 1.0);
    state.alpha_saturated = state.alpha != alpha;
    state.velocity_norm = velocity_norm;
    state.material_index = material_index;
    state.gate = Gate::open;

    TwoChannelBuffer out;
    out.sample_rate_hz = config.render.sample_rate_hz;
    out.audio.samples.resize(blocks * bs);
    out.tactile.samples.resize(blocks * bs);
    for (std::size_t b = 0; b < blocks; ++b)
        engine.process_block(b == 0 ? &state : nullptr, std::span(out.audio.samples).subspan(b * bs, bs),
                             std::span(out.tactile.samples).subspan(b * bs, bs));
    out.audio.samples.resize(frames);
    out.tactile.samples.resize(frames);
    return out;
}

TwoChannelBuffer render_offline_trace(const EngineConfig& config, std::uint64_t seed,
                                      std::span<const TraceRecord> trace, std::uint64_t blocks)
{
    Engine engine(config, seed);
    const std::size_t bs = config.render.block_size;
    TwoChannelBuffer out;
    out.sample_rate_hz = config.render.sample_rate_hz;
    out.audio.samples.resize(blocks * bs);
    out.tactile.samples.resize(blocks * bs);
    std::size_t next = 0;
    for (std::uint64_t b = 0; b < blocks; ++b) {
        const SmoothedState* pending = nullptr;
        while (next < trace.size() && trace[next].block <= b) {
            if (trace[next].block == b)
                pending = &trace[next].state;
            ++next;
        }
        engine.process_block(pending, std::span(out.audio.samples).subspan(b * bs, bs),
                             std::span(out.tactile.samples).subspan(b * bs, bs));
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

class NullSink final : public AudioSink {
public:
    void open(double, std::size_t) override {}
    void write(std::span<const float>) override {}
    void close() override {}
    [[nodiscard]] std::string name() const override { return "null"; }
};

class StdoutSink final : public AudioSink {
public:
    void open(double, std::size_t) override {}
    void write(std::span<const float> frames) override
    {
        std::fwrite(frames.data(), sizeof(float), frames.size(), stdout);
    }
    void close() override { std::fflush(stdout); }
    [[nodiscard]] std::string name() const override { return "stdout"; }
};

} // namespace

std::unique_ptr<AudioSink> make_audio_sink(const std::string& device)
{
    if (device == "null")
        return std::make_unique<NullSink>();
    if (device == "stdout")
        return std::make_unique<StdoutSink>();
    throw ConfigError("unknown output device '" + device + "' (available: null, stdout)");
}

RealtimeEngine::RealtimeEngine(EngineConfig config, std::unique_ptr<AudioSink> sink, RealtimeOptions options)
    : config_(std::move(config)), sink_(std::move(sink)), options_(options),
      publisher_(config_.control,
                 ControlSnapshot{.material_index =
                                     find_material(config_, config_.default_material).value_or(kBypassMaterialIndex)}),
      engine_(config_, options.seed), epoch_(std::chrono::steady_clock::now())
{
    if (!sink_)
        throw ConfigError("RealtimeEngine: no output sink");
    if (options_.capture && !(options_.duration_s > 0.0))
        throw ConfigError("RealtimeEngine: capture requires a duration");
    const std::size_t bs = config_.render.block_size;
    audio_block_.assign(bs, 0.0);
    tactile_block_.assign(bs, 0.0);
    interleaved_.assign(2 * bs, 0.0f);
    if (options_.record_trace)
        trace_.reserve(kTraceCapacity);
    if (options_.capture) {
        const std::size_t frames = sample_count(options_.duration_s, config_.render);
        const std::size_t blocks = (frames + bs - 1) / bs;
        captured_.sample_rate_hz = config_.render.sample_rate_hz;
        captured_.audio.samples.assign(blocks * bs, 0.0);
        captured_.tactile.samples.assign(blocks * bs, 0.0);
    }
}

RealtimeEngine::~RealtimeEngine()
{
    stop();
    wait();
}

std::int64_t RealtimeEngine::now_ns() const
{
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - epoch_).count();
}

void RealtimeEngine::start()
{
    if (running_.exchange(true))
        return;
    stop_requested_ = false;
    sink_->open(config_.render.sample_rate_hz, config_.render.block_size);
    thread_ = std::thread([this] { render_loop(); });
}

void RealtimeEngine::stop()
{
    stop_requested_ = true;
}

void RealtimeEngine::wait()
{
    if (thread_.joinable())
        thread_.join();
}

std::vector<TraceRecord> RealtimeEngine::trace() const
{
    return trace_;
}

EngineDiagnostics RealtimeEngine::diagnostics() const
{
    EngineDiagnostics d;
    d.alpha = diag_.alpha.load();
    d.alpha_saturated = diag_.alpha_saturated.load();
    d.velocity_norm = diag_.velocity_norm.load();
    d.gate_open = diag_.gate_open.load();
    d.material_index = diag_.material_index.load();
    d.audio_on = diag_.audio_on.load();
    d.tactile_on = diag_.tactile_on.load();
    d.underruns = diag_.underruns.load();
    d.blocks = diag_.blocks.load();
    d.revision = diag_.revision.load();
    d.peak_audio = diag_.peak_audio.load();
    d.peak_tactile = diag_.peak_tactile.load();
    d.dropped_frames = publisher_.dropped_frames();
    return d;
}

void RealtimeEngine::render_loop()
{
    using clock = std::chrono::steady_clock;
    const std::size_t bs = config_.render.block_size;
    const auto period = std::chrono::duration<double>(static_cast<double>(bs) / config_.render.sample_rate_hz);
    const std::uint64_t total_blocks =
        options_.duration_s > 0.0 ? (sample_count(options_.duration_s, config_.render) + bs - 1) / bs : 0;
    const auto latency = static_cast<std::uint64_t>(options_.latency_blocks);
    const auto t0 = clock::now();
    auto slot = [&](std::uint64_t b) {
        return t0 + std::chrono::duration_cast<clock::duration>(period * static_cast<double>(b));
    };

    ControlSnapshot snapshot = publisher_.current();
    SmoothedState last_input{};
    bool have_input = false;

    for (std::uint64_t b = 0; !stop_requested_.load(std::memory_order_relaxed) && (total_blocks == 0 || b < total_blocks);
         ++b) {
        if (options_.paced && b >= latency)
            std::this_thread::sleep_until(slot(b - latency));

        if (block_hook_)
            block_hook_(b);

        publisher_.consume(snapshot);
        const SmoothedState input = resolve_control(snapshot, now_ns(), config_.control);
        const SmoothedState* pending = nullptr;
        if (!have_input || !(input == last_input)) {
            last_input = input;
            have_input = true;
            pending = &last_input;
            if (options_.record_trace && trace_.size() < trace_.capacity())
                trace_.push_back({b, input});
        }

        engine_.process_block(pending, audio_block_, tactile_block_);

        // Capture what the engine rendered; a late block is muted at the device only.
        if (options_.capture) {
            std::copy(audio_block_.begin(), audio_block_.end(), captured_.audio.samples.begin() + b * bs);
            std::copy(tactile_block_.begin(), tactile_block_.end(), captured_.tactile.samples.begin() + b * bs);
        }

        // The device plays block b at slot(b + latency); missing it mutes the block.
        const bool late = options_.paced && clock::now() > slot(b + latency);
        if (late) {
            diag_.underruns.fetch_add(1, std::memory_order_relaxed);
            std::fill(audio_block_.begin(), audio_block_.end(), 0.0);
            std::fill(tactile_block_.begin(), tactile_block_.end(), 0.0);
        }
        for (std::size_t n = 0; n < bs; ++n) {
            interleaved_[2 * n] = static_cast<float>(audio_block_[n]);
            interleaved_[2 * n + 1] = static_cast<float>(tactile_block_[n]);
        }
        sink_->write(interleaved_);

        const EngineParams& p = engine_.installed();
        diag_.alpha.store(p.state.alpha, std::memory_order_relaxed);
        diag_.alpha_saturated.store(p.state.alpha_saturated, std::memory_order_relaxed);
        diag_.velocity_norm.store(p.state.velocity_norm, std::memory_order_relaxed);
        diag_.gate_open.store(p.gate_open(), std::memory_order_relaxed);
        diag_.material_index.store(p.state.material_index, std::memory_order_relaxed);
        diag_.audio_on.store(p.state.audio_on, std::memory_order_relaxed);
        diag_.tactile_on.store(p.state.tactile_on, std::memory_order_relaxed);
        diag_.peak_audio.store(engine_.last_peak_audio(), std::memory_order_relaxed);
        diag_.peak_tactile.store(engine_.last_peak_tactile(), std::memory_order_relaxed);
        diag_.revision.store(p.revision, std::memory_order_relaxed);
        diag_.blocks.store(b + 1, std::memory_order_release);
    }
    sink_->close();
    running_ = false;
}

} // namespace tribo

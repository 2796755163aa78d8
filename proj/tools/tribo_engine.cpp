// Engine binary. Live mode serves the WebSocket control protocol and streams
// blocks to a device sink; with --outfile it renders offline to WAV.

#include "tribo/engine.hpp"
#include "tribo/errors.hpp"
#include "tribo/protocol.hpp"
#include "tribo/wav.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <thread>

using namespace tribo;

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int)
{
    g_interrupted = true;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Impact-series synthesis engine"};

    std::string config_path, device, outfile, replay, record_trace, capture, material;
    std::optional<unsigned> port;
    std::uint64_t seed = 1;
    double duration = 0.0;
    double alpha = 0.0;
    double velocity = 1.0;
    int bit_depth = 16;

    app.add_option("--config", config_path, "Engine config JSON (shipped defaults otherwise)");
    app.add_option("--port", port, "WebSocket control port (overrides config)")->check(CLI::Range(0u, 65535u));
    auto* dev = app.add_option("--device", device, "Live output sink: null | stdout");
    auto* out = app.add_option("--outfile", outfile, "Render offline to this WAV file");
    dev->excludes(out);
    out->excludes(dev);
    app.add_option("--seed", seed, "Seed");
    app.add_option("--duration", duration, "Seconds to render (live: 0 runs until interrupted)");
    app.add_option("--alpha", alpha, "Offline: fixed action position");
    app.add_option("--velocity", velocity, "Offline: fixed normalized velocity");
    app.add_option("--material", material, "Offline: material name (config default otherwise)");
    app.add_option("--replay", replay, "Offline: re-render a recorded block trace (JSONL)");
    app.add_option("--record-trace", record_trace, "Live: write the installed-state trace here on exit");
    app.add_option("--capture", capture, "Live: write the rendered output to this WAV (needs --duration)");
    app.add_option("--bit-depth", bit_depth, "16 or 24")->check(CLI::IsMember({16, 24}));

    CLI11_PARSE(app, argc, argv);

    try {
        EngineConfig config = config_path.empty() ? default_engine_config() : load_config(config_path);
        if (port)
            config.protocol_port = static_cast<std::uint16_t>(*port);
        if (!device.empty())
            config.output = {device, ""};
        if (!outfile.empty())
            config.output = {"", outfile};
        validate(config);

        if (!config.output.file.empty()) {
            if (!(duration > 0.0))
                throw ParameterError("duration must be > 0");
            TwoChannelBuffer buf;
            if (!replay.empty()) {
                const auto trace = load_trace(replay, config);
                const std::size_t bs = config.render.block_size;
                const std::uint64_t blocks = (sample_count(duration, config.render) + bs - 1) / bs;
                buf = render_offline_trace(config, seed, trace, blocks);
            } else {
                const std::string name = material.empty() ? config.default_material : material;
                const auto index = find_material(config, name);
                if (!index)
                    throw ConfigError("unknown material '" + name + "'");
                buf = render_offline_fixed(config, seed, alpha, velocity, *index, duration);
            }
            write_wav(buf, config.output.file, bit_depth);
            std::cerr << "wrote " << config.output.file << '\n';
            return 0;
        }

        RealtimeOptions opts;
        opts.seed = seed;
        opts.duration_s = duration;
        opts.capture = !capture.empty();
        opts.record_trace = !record_trace.empty();
        RealtimeEngine engine(config, make_audio_sink(config.output.device), opts);
        ProtocolHandler handler(
            engine.control(), engine.config(), [&engine] { return engine.diagnostics(); },
            [&engine] { return engine.now_ns(); });
        ControlServer server(handler, config.protocol_port);

        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        server.start();
        std::cerr << "listening on ws://127.0.0.1:" << server.port() << ", output " << config.output.device << '\n';
        engine.start();
        while (engine.running() && !g_interrupted)
            std::this_thread::sleep_for(std::chrono::milliseconds(20));
        engine.stop();
        engine.wait();
        server.stop();

        const EngineDiagnostics d = engine.diagnostics();
        std::cerr << "blocks " << d.blocks << ", underruns " << d.underruns << ", protocol errors "
                  << handler.errors() << '\n';
        if (opts.record_trace)
            save_trace(engine.trace(), record_trace, config);
        if (opts.capture)
            write_wav(engine.captured(), capture, bit_depth);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}

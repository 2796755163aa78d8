#pragma once

// JSON control protocol carried over WebSocket text frames.
//
//   {"type":"pointer","t_s":1.25,"x":0.4,"y":0.6,"pressure":0.8}   no reply
//   {"type":"set_alpha","alpha":0.7}        -> {"type":"ack","alpha":0.7,"saturated":false}
//   {"type":"set_material","name":"wood"}   -> {"type":"ack","material":"wood"}
//   {"type":"set_modality","audio_on":true,"tactile_on":false}
//                                           -> {"type":"ack","audio_on":true,"tactile_on":false}
//   {"type":"ping"}                         -> {"type":"ack"}
//   {"type":"get_diagnostics"}              -> {"type":"diagnostics", ...}
//   anything else                           -> {"type":"error","reason":"..."}
//
// An optional "id" member is echoed back in the reply. See docs/protocol.md.

#include "tribo/control.hpp"
#include "tribo/engine.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace tribo {

namespace msg {
struct Pointer {
    ControlFrame frame;
};
struct SetAlpha {
    double alpha = 0.0;
};
struct SetMaterial {
    std::string name;
};
struct SetModality {
    bool audio_on = true;
    bool tactile_on = true;
};
struct Ping {};
struct GetDiagnostics {};
} // namespace msg

using ControlMessage =
    std::variant<msg::Pointer, msg::SetAlpha, msg::SetMaterial, msg::SetModality, msg::Ping, msg::GetDiagnostics>;

struct ParsedMessage {
    std::optional<ControlMessage> message; // empty on error
    std::string error;
    std::optional<std::string> id; // raw JSON of the "id" member, echoed back
};

ParsedMessage parse_control_message(std::string_view text);

std::string diagnostics_to_json(const EngineDiagnostics& diag, const EngineConfig& config);

class ProtocolHandler {
public:
    ProtocolHandler(ControlPublisher& publisher, const EngineConfig& config,
                    std::function<EngineDiagnostics()> diagnostics, std::function<std::int64_t()> clock_ns);

    /// Handles one text frame; returns the reply, if the message gets one.
    /// Never throws.
    std::optional<std::string> handle(std::string_view text);

    [[nodiscard]] std::uint64_t errors() const { return errors_; }

private:
    ControlPublisher& publisher_;
    const EngineConfig& config_;
    std::function<EngineDiagnostics()> diagnostics_;
    std::function<std::int64_t()> clock_ns_;
    std::uint64_t errors_ = 0;
};

/// WebSocket server on address:port feeding a ProtocolHandler. Runs its own
/// I/O thread; handler calls are serialized on it. Port 0 picks a free port.
class ControlServer {
public:
    ControlServer(ProtocolHandler& handler, std::uint16_t port, std::string address = "127.0.0.1");
    ~ControlServer();

    ControlServer(const ControlServer&) = delete;
    ControlServer& operator=(const ControlServer&) = delete;

    void start();
    void stop();
    [[nodiscard]] std::uint16_t port() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace tribo

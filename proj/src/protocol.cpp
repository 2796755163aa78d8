#include "tribo/protocol.hpp"

#include <json.hpp>

#include <cmath>

namespace tribo {

using nlohmann::json;

namespace {

ParsedMessage error_msg(std::string reason, std::optional<std::string> id = std::nullopt)
{
    ParsedMessage p;
    p.error = std::move(reason);
    p.id = std::move(id);
    return p;
}

std::optional<double> number_field(const json& j, const char* key)
{
    const auto it = j.find(key);
    if (it == j.end() || !it->is_number())
        return std::nullopt;
    const double v = it->get<double>();
    if (!std::isfinite(v))
        return std::nullopt;
    return v;
}

std::optional<bool> bool_field(const json& j, const char* key)
{
    const auto it = j.find(key);
    if (it == j.end() || !it->is_boolean())
        return std::nullopt;
    return it->get<bool>();
}

std::string finish(json reply, const std::optional<std::string>& id)
{
    if (id)
        reply["id"] = json::parse(*id);
    return reply.dump();
}

} // namespace

ParsedMessage parse_control_message(std::string_view text)
{
    const json j = json::parse(text, nullptr, false);
    if (j.is_discarded())
        return error_msg("malformed JSON");
    if (!j.is_object())
        return error_msg("message must be a JSON object");

    std::optional<std::string> id;
    if (const auto it = j.find("id"); it != j.end())
        id = it->dump();

    const auto type_it = j.find("type");
    if (type_it == j.end() || !type_it->is_string())
        return error_msg("missing string field 'type'", id);
    const std::string type = type_it->get<std::string>();

    ParsedMessage out;
    out.id = id;
    if (type == "pointer") {
        const auto t = number_field(j, "t_s");
        const auto x = number_field(j, "x");
        const auto y = number_field(j, "y");
        if (!t || !x || !y)
            return error_msg("pointer needs numeric t_s, x, y", id);
        msg::Pointer p;
        p.frame.t_s = *t;
        p.frame.x = *x;
        p.frame.y = *y;
        if (j.contains("pressure")) {
            const auto pr = number_field(j, "pressure");
            if (!pr)
                return error_msg("pointer pressure must be a number", id);
            p.frame.pressure = *pr;
        }
        out.message = p;
    } else if (type == "set_alpha") {
        const auto a = number_field(j, "alpha");
        if (!a)
            return error_msg("set_alpha needs numeric alpha", id);
        out.message = msg::SetAlpha{*a};
    } else if (type == "set_material") {
        const auto it = j.find("name");
        if (it == j.end() || !it->is_string())
            return error_msg("set_material needs string name", id);
        out.message = msg::SetMaterial{it->get<std::string>()};
    } else if (type == "set_modality") {
        const auto a = bool_field(j, "audio_on");
        const auto t = bool_field(j, "tactile_on");
        if (!a || !t)
            return error_msg("set_modality needs boolean audio_on and tactile_on", id);
        out.message = msg::SetModality{*a, *t};
    } else if (type == "ping") {
        out.message = msg::Ping{};
    } else if (type == "get_diagnostics") {
        out.message = msg::GetDiagnostics{};
    } else {
        return error_msg("unknown message type '" + type + "'", id);
    }
    return out;
}

std::string diagnostics_to_json(const EngineDiagnostics& d, const EngineConfig& config)
{
    const json j = {{"type", "diagnostics"},
                    {"alpha", d.alpha},
                    {"saturated", d.alpha_saturated},
                    {"velocity_norm", d.velocity_norm},
                    {"gate", d.gate_open ? "open" : "silent"},
                    {"material", material_name(config, d.material_index)},
                    {"audio_on", d.audio_on},
                    {"tactile_on", d.tactile_on},
                    {"underruns", d.underruns},
                    {"blocks", d.blocks},
                    {"revision", d.revision},
                    {"peak_audio", d.peak_audio},
                    {"peak_tactile", d.peak_tactile},
                    {"dropped_frames", d.dropped_frames}};
    return j.dump();
}

ProtocolHandler::ProtocolHandler(ControlPublisher& publisher, const EngineConfig& config,
                                 std::function<EngineDiagnostics()> diagnostics,
                                 std::function<std::int64_t()> clock_ns)
    : publisher_(publisher), config_(config), diagnostics_(std::move(diagnostics)), clock_ns_(std::move(clock_ns))
{
}

std::optional<std::string> ProtocolHandler::handle(std::string_view text)
{
    try {
        ParsedMessage parsed = parse_control_message(text);
        if (!parsed.message) {
            ++errors_;
            return finish({{"type", "error"}, {"reason", parsed.error}}, parsed.id);
        }
        const auto& id = parsed.id;
        return std::visit(
            [&](const auto& m) -> std::optional<std::string> {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, msg::Pointer>) {
                    publisher_.on_pointer(m.frame, clock_ns_());
                    return std::nullopt;
                } else if constexpr (std::is_same_v<T, msg::SetAlpha>) {
                    const auto [alpha, saturated] = publisher_.set_alpha(m.alpha);
                    return finish({{"type", "ack"}, {"alpha", alpha}, {"saturated", saturated}}, id);
                } else if constexpr (std::is_same_v<T, msg::SetMaterial>) {
                    const auto index = find_material(config_, m.name);
                    if (!index) {
                        ++errors_;
                        return finish({{"type", "error"}, {"reason", "unknown material '" + m.name + "'"}}, id);
                    }
                    publisher_.set_material(*index);
                    return finish({{"type", "ack"}, {"material", m.name}}, id);
                } else if constexpr (std::is_same_v<T, msg::SetModality>) {
                    publisher_.set_modality(m.audio_on, m.tactile_on);
                    return finish({{"type", "ack"}, {"audio_on", m.audio_on}, {"tactile_on", m.tactile_on}}, id);
                } else if constexpr (std::is_same_v<T, msg::Ping>) {
                    return finish({{"type", "ack"}}, id);
                } else {
                    json reply = json::parse(diagnostics_to_json(diagnostics_(), config_));
                    return finish(std::move(reply), id);
                }
            },
            *parsed.message);
    } catch (const std::exception& e) {
        ++errors_;
        return json{{"type", "error"}, {"reason", std::string("internal error: ") + e.what()}}.dump();
    }
}

} // namespace tribo

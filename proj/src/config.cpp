#include "tribo/engine.hpp"

#include "tribo/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

namespace tribo {

using nlohmann::json;

namespace {

// Tracks the JSON path for semantic error messages.
class Reader {
public:
    Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {}

    [[noreturn]] void fail(const std::string& what) const
    {
        throw ConfigError(path_ + ": " + what);
    }

    [[nodiscard]] const std::string& path() const { return path_; }
    [[nodiscard]] const json& node() const { return node_; }

    void require_object() const
    {
        if (!node_.is_object())
            fail("expected an object");
    }

    void allow_keys(std::initializer_list<const char*> keys) const
    {
        require_object();
        std::set<std::string> allowed(keys.begin(), keys.end());
        for (const auto& [k, v] : node_.items())
            if (!allowed.contains(k))
                Reader(v, path_ + "." + k).fail("unknown field");
    }

    [[nodiscard]] bool has(const char* key) const { return node_.contains(key); }

    [[nodiscard]] Reader child(const char* key) const
    {
        if (!node_.contains(key))
            fail(std::string("missing field '") + key + "'");
        return Reader(node_.at(key), path_ + "." + key);
    }

    [[nodiscard]] Reader at(std::size_t i) const
    {
        return Reader(node_.at(i), path_ + "[" + std::to_string(i) + "]");
    }

    [[nodiscard]] double number() const
    {
        if (!node_.is_number())
            fail("expected a number");
        return node_.get<double>();
    }

    [[nodiscard]] std::uint64_t unsigned_integer() const
    {
        if (!node_.is_number_unsigned() && !(node_.is_number_integer() && node_.get<std::int64_t>() >= 0))
            fail("expected a non-negative integer");
        return node_.get<std::uint64_t>();
    }

    [[nodiscard]] std::string string() const
    {
        if (!node_.is_string())
            fail("expected a string");
        return node_.get<std::string>();
    }

    [[nodiscard]] bool boolean() const
    {
        if (!node_.is_boolean())
            fail("expected a boolean");
        return node_.get<bool>();
    }

    double number_or(const char* key, double fallback) const { return has(key) ? child(key).number() : fallback; }

private:
    const json& node_;
    std::string path_;
};

// Re-throws a validation failure with the JSON path prepended.
template <class F>
void checked(const Reader& r, F&& f)
{
    try {
        f();
    } catch (const ConfigError& e) {
        r.fail(e.what());
    } catch (const ParameterError& e) {
        r.fail(e.what());
    }
}

RenderConfig read_render(const Reader& r)
{
    r.allow_keys({"sample_rate_hz", "block_size", "tactile_band", "kernel_width_s", "limiter_ceiling"});
    RenderConfig c;
    c.sample_rate_hz = r.number_or("sample_rate_hz", c.sample_rate_hz);
    if (r.has("block_size"))
        c.block_size = static_cast<std::size_t>(r.child("block_size").unsigned_integer());
    if (r.has("tactile_band")) {
        const Reader b = r.child("tactile_band");
        b.allow_keys({"f_lo_hz", "f_hi_hz"});
        c.tactile_band.f_lo_hz = b.number_or("f_lo_hz", c.tactile_band.f_lo_hz);
        c.tactile_band.f_hi_hz = b.number_or("f_hi_hz", c.tactile_band.f_hi_hz);
    }
    c.kernel_width_s = r.number_or("kernel_width_s", c.kernel_width_s);
    c.limiter_ceiling = r.number_or("limiter_ceiling", c.limiter_ceiling);
    checked(r, [&] { validate(c); });
    return c;
}

ControlSettings read_control(const Reader& r)
{
    r.allow_keys({"v_ref", "velocity_time_constant_s", "staleness_timeout_s", "v_floor"});
    ControlSettings c;
    c.v_ref = r.number_or("v_ref", c.v_ref);
    c.velocity_time_constant_s = r.number_or("velocity_time_constant_s", c.velocity_time_constant_s);
    c.staleness_timeout_s = r.number_or("staleness_timeout_s", c.staleness_timeout_s);
    c.v_floor = r.number_or("v_floor", c.v_floor);
    if (!(c.v_ref > 0.0) || !(c.velocity_time_constant_s > 0.0) || !(c.staleness_timeout_s > 0.0) ||
        !(c.v_floor >= 0.0))
        r.fail("v_ref, velocity_time_constant_s and staleness_timeout_s must be > 0, v_floor >= 0");
    return c;
}

ImpactSeriesParams read_params(const Reader& r)
{
    r.allow_keys({"mu_interval_s", "sigma_interval_s", "mu_amp", "sigma_amp", "min_interval_s", "seed"});
    ImpactSeriesParams p;
    p.mu_interval_s = r.child("mu_interval_s").number();
    p.sigma_interval_s = r.child("sigma_interval_s").number();
    p.mu_amp = r.child("mu_amp").number();
    p.sigma_amp = r.child("sigma_amp").number();
    p.min_interval_s = r.number_or("min_interval_s", p.min_interval_s);
    if (r.has("seed"))
        p.seed = r.child("seed").unsigned_integer();
    checked(r, [&] { validate(p); });
    return p;
}

ActionMapping read_mapping(const Reader& r)
{
    r.allow_keys({"rub_audio", "scratch_audio", "rub_tactile", "scratch_tactile"});
    ActionMapping m;
    m.rub_audio = read_params(r.child("rub_audio"));
    m.scratch_audio = read_params(r.child("scratch_audio"));
    m.rub_tactile = read_params(r.child("rub_tactile"));
    m.scratch_tactile = read_params(r.child("scratch_tactile"));
    checked(r, [&] { validate(m); });
    return m;
}

MaterialPreset read_material(const Reader& r)
{
    r.allow_keys({"name", "modes", "comment"});
    MaterialPreset mat;
    mat.name = r.child("name").string();
    const Reader modes = r.child("modes");
    if (!modes.node().is_array())
        modes.fail("expected an array");
    for (std::size_t i = 0; i < modes.node().size(); ++i) {
        const Reader m = modes.at(i);
        m.allow_keys({"freq_hz", "decay_s", "gain"});
        mat.modes.push_back({m.child("freq_hz").number(), m.child("decay_s").number(), m.child("gain").number()});
    }
    return mat;
}

std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t byte)
{
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

json params_json(const ImpactSeriesParams& p)
{
    return {{"mu_interval_s", p.mu_interval_s}, {"sigma_interval_s", p.sigma_interval_s}, {"mu_amp", p.mu_amp},
            {"sigma_amp", p.sigma_amp},         {"min_interval_s", p.min_interval_s},     {"seed", p.seed}};
}

} // namespace

EngineConfig default_engine_config()
{
    EngineConfig c;
    c.materials = {
        {"wood",
         {
             {820.0, 0.012, 0.003},
             {1340.0, 0.01, 0.0025},
             {1960.0, 0.008, 0.00225},
             {2650.0, 0.007, 0.002},
             {3310.0, 0.006, 0.00175},
             {4120.0, 0.005, 0.0015},
             {5030.0, 0.004, 0.00125},
             {6100.0, 0.003, 0.001}}},
        {"metal",
         {
             {520.0, 0.4, 0.00025},
             {1310.0, 0.3, 0.0002},
             {2270.0, 0.22, 0.000175},
             {3480.0, 0.16, 0.00015},
             {4890.0, 0.12, 0.000125},
             {6420.0, 0.09, 0.0001},
             {8130.0, 0.07, 7.5e-05},
             {9950.0, 0.05, 6.25e-05}}},
        {"glass",
         {
             {1250.0, 0.15, 0.003},
             {2010.0, 0.12, 0.0025},
             {3420.0, 0.1, 0.002},
             {4780.0, 0.08, 0.0016},
             {6330.0, 0.06, 0.0012},
             {7910.0, 0.05, 0.001},
             {9600.0, 0.04, 0.0008},
             {11800.0, 0.03, 0.0006}}},
    };
    c.default_material = "wood";
    return c;
}

void validate(const EngineConfig& c)
{
    validate(c.render);
    validate(c.mapping);
    const double period = 1.0 / c.render.sample_rate_hz;
    for (const auto* p : {&c.mapping.rub_audio, &c.mapping.scratch_audio, &c.mapping.rub_tactile,
                          &c.mapping.scratch_tactile})
        if (p->min_interval_s < period)
            throw ConfigError("mapping: min_interval_s = " + std::to_string(p->min_interval_s) +
                              " is shorter than one sample period");
    std::set<std::string> names;
    for (std::size_t i = 0; i < c.materials.size(); ++i) {
        try {
            validate(c.materials[i], c.render.sample_rate_hz);
        } catch (const ConfigError& e) {
            throw ConfigError("materials[" + std::to_string(i) + "]: " + e.what());
        }
        if (!names.insert(c.materials[i].name).second)
            throw ConfigError("materials[" + std::to_string(i) + "].name: duplicate material name '" +
                              c.materials[i].name + "'");
    }
    if (!find_material(c, c.default_material))
        throw ConfigError("default_material: unknown material '" + c.default_material + "'");
    const bool has_device = !c.output.device.empty();
    const bool has_file = !c.output.file.empty();
    if (has_device == has_file)
        throw ConfigError("output: exactly one of 'device' or 'file' must be set");
}

EngineConfig parse_config(const std::string& text, const std::string& source)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        const auto [line, col] = line_col(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": JSON parse error: " +
                          e.what());
    }

    EngineConfig c;
    try {
        const Reader root(doc, "$");
        root.allow_keys({"render", "control", "mapping", "materials", "default_material", "protocol_port",
                         "output", "comment"});
        if (root.has("render"))
            c.render = read_render(root.child("render"));
        if (root.has("control"))
            c.control = read_control(root.child("control"));
        if (root.has("mapping"))
            c.mapping = read_mapping(root.child("mapping"));
        if (root.has("materials")) {
            const Reader mats = root.child("materials");
            if (!mats.node().is_array())
                mats.fail("expected an array");
            for (std::size_t i = 0; i < mats.node().size(); ++i)
                c.materials.push_back(read_material(mats.at(i)));
        }
        if (root.has("default_material"))
            c.default_material = root.child("default_material").string();
        if (root.has("protocol_port")) {
            const auto port = root.child("protocol_port").unsigned_integer();
            if (port > 65535)
                root.child("protocol_port").fail("must be <= 65535");
            c.protocol_port = static_cast<std::uint16_t>(port);
        }
        if (root.has("output")) {
            const Reader out = root.child("output");
            out.allow_keys({"device", "file"});
            c.output = {};
            if (out.has("device"))
                c.output.device = out.child("device").string();
            if (out.has("file"))
                c.output.file = out.child("file").string();
        }
        validate(c);
    } catch (const ConfigError& e) {
        throw ConfigError(source + ": " + e.what());
    } catch (const json::exception& e) {
        throw ConfigError(source + ": " + e.what());
    }
    return c;
}

EngineConfig load_config(const std::filesystem::path& path)
{
    std::ifstream f(path);
    if (!f)
        throw IoError("cannot open config '" + path.string() + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::string config_to_json(const EngineConfig& c)
{
    json mats = json::array();
    for (const auto& m : c.materials) {
        json modes = json::array();
        for (const auto& mode : m.modes)
            modes.push_back({{"freq_hz", mode.freq_hz}, {"decay_s", mode.decay_s}, {"gain", mode.gain}});
        mats.push_back({{"name", m.name}, {"modes", modes}});
    }
    json out_sink = json::object();
    if (!c.output.device.empty())
        out_sink["device"] = c.output.device;
    if (!c.output.file.empty())
        out_sink["file"] = c.output.file;
    json doc = {
        {"render",
         {{"sample_rate_hz", c.render.sample_rate_hz},
          {"block_size", c.render.block_size},
          {"tactile_band", {{"f_lo_hz", c.render.tactile_band.f_lo_hz}, {"f_hi_hz", c.render.tactile_band.f_hi_hz}}},
          {"kernel_width_s", c.render.kernel_width_s},
          {"limiter_ceiling", c.render.limiter_ceiling}}},
        {"control",
         {{"v_ref", c.control.v_ref},
          {"velocity_time_constant_s", c.control.velocity_time_constant_s},
          {"staleness_timeout_s", c.control.staleness_timeout_s},
          {"v_floor", c.control.v_floor}}},
        {"mapping",
         {{"rub_audio", params_json(c.mapping.rub_audio)},
          {"scratch_audio", params_json(c.mapping.scratch_audio)},
          {"rub_tactile", params_json(c.mapping.rub_tactile)},
          {"scratch_tactile", params_json(c.mapping.scratch_tactile)}}},
        {"materials", mats},
        {"default_material", c.default_material},
        {"protocol_port", c.protocol_port},
        {"output", out_sink},
    };
    return doc.dump(2);
}

std::optional<int> find_material(const EngineConfig& config, std::string_view name)
{
    if (name == kBypassMaterial)
        return kBypassMaterialIndex;
    for (std::size_t i = 0; i < config.materials.size(); ++i)
        if (config.materials[i].name == name)
            return static_cast<int>(i);
    return std::nullopt;
}

std::string material_name(const EngineConfig& config, int index)
{
    if (index < 0 || static_cast<std::size_t>(index) >= config.materials.size())
        return std::string(kBypassMaterial);
    return config.materials[static_cast<std::size_t>(index)].name;
}

// ---------------------------------------------------------------------------

std::string trace_record_to_json(const TraceRecord& r, const EngineConfig& config)
{
    const json j = {{"block", r.block},
                    {"alpha", r.state.alpha},
                    {"alpha_saturated", r.state.alpha_saturated},
                    {"velocity_norm", r.state.velocity_norm},
                    {"gate", r.state.gate == Gate::open ? "open" : "silent"},
                    {"material", material_name(config, r.state.material_index)},
                    {"audio_on", r.state.audio_on},
                    {"tactile_on", r.state.tactile_on}};
    return j.dump();
}

TraceRecord trace_record_from_json(const std::string& line, const EngineConfig& config)
{
    try {
        const json j = json::parse(line);
        TraceRecord r;
        r.block = j.at("block").get<std::uint64_t>();
        r.state.alpha = j.at("alpha").get<double>();
        r.state.alpha_saturated = j.value("alpha_saturated", false);
        r.state.velocity_norm = j.at("velocity_norm").get<double>();
        r.state.gate = j.at("gate").get<std::string>() == "open" ? Gate::open : Gate::silent;
        const auto mat = find_material(config, j.at("material").get<std::string>());
        if (!mat)
            throw ConfigError("trace references unknown material '" + j.at("material").get<std::string>() + "'");
        r.state.material_index = *mat;
        r.state.audio_on = j.value("audio_on", true);
        r.state.tactile_on = j.value("tactile_on", true);
        return r;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("trace record: ") + e.what());
    }
}

std::vector<TraceRecord> load_trace(const std::filesystem::path& path, const EngineConfig& config)
{
    std::ifstream f(path);
    if (!f)
        throw IoError("cannot open trace '" + path.string() + "'");
    std::vector<TraceRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty())
            continue;
        try {
            out.push_back(trace_record_from_json(line, config));
        } catch (const ConfigError& e) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void save_trace(const std::vector<TraceRecord>& trace, const std::filesystem::path& path, const EngineConfig& config)
{
    std::ofstream f(path, std::ios::trunc);
    if (!f)
        throw IoError("cannot open '" + path.string() + "' for writing");
    for (const auto& r : trace)
        f << trace_record_to_json(r, config) << '\n';
    if (!f)
        throw IoError("write failed for '" + path.string() + "'");
}

} // namespace tribo

// Offline tools: render one stimulus, build the stimulus grid, run a rating
// session, analyze ratings.

#include "tribo/engine.hpp"
#include "tribo/errors.hpp"
#include "tribo/experiment.hpp"
#include "tribo/wav.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>

using namespace tribo;
using nlohmann::json;

namespace {

EngineConfig config_or_default(const std::string& path)
{
    return path.empty() ? default_engine_config() : load_config(path);
}

json params_json(const ImpactSeriesParams& p)
{
    return {{"mu_interval_s", p.mu_interval_s}, {"sigma_interval_s", p.sigma_interval_s}, {"mu_amp", p.mu_amp},
            {"sigma_amp", p.sigma_amp},         {"min_interval_s", p.min_interval_s},     {"seed", p.seed}};
}

json stats_json(const SequenceStats& s)
{
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json j = {{"count", s.count},
              {"interval_mean_s", opt(s.interval_mean)},
              {"interval_std_s", opt(s.interval_std)},
              {"amp_mean", opt(s.amp_mean)},
              {"amp_std", opt(s.amp_std)},
              {"interval_cv", nullptr}};
    if (s.interval_mean && s.interval_std && *s.interval_mean > 0.0)
        j["interval_cv"] = *s.interval_std / *s.interval_mean;
    return j;
}

struct RenderArgs {
    std::string config;
    double alpha = 0.0;
    double velocity = 1.0;
    std::optional<double> mu_interval, sigma_interval, mu_amp, sigma_amp;
    double min_interval = 0.001;
    std::string material;
    double duration = 2.0;
    std::uint64_t seed = 1;
    std::string out = "stimulus.wav";
    int bit_depth = 16;
};

int cmd_render(const RenderArgs& a, const CLI::App& app)
{
    if (!(a.duration > 0.0)) {
        std::cerr << "error: duration must be > 0\n" << app.help();
        return 2;
    }
    const EngineConfig config = config_or_default(a.config);
    const std::string mat_name = a.material.empty() ? config.default_material : a.material;
    const auto mat_index = find_material(config, mat_name);
    if (!mat_index)
        throw ConfigError("unknown material '" + mat_name + "'");
    const MaterialPreset* material =
        *mat_index >= 0 ? &config.materials[static_cast<std::size_t>(*mat_index)] : nullptr;

    MappedParams audio = action_to_audio_params(a.alpha, config.mapping);
    MappedParams tactile = action_to_tactile_params(a.alpha, config.mapping);
    audio.params = scale_rate_by_velocity(audio.params, a.velocity);
    tactile.params = scale_rate_by_velocity(tactile.params, a.velocity);
    const bool explicit_params = a.mu_interval || a.sigma_interval || a.mu_amp || a.sigma_amp;
    if (explicit_params) {
        if (!(a.mu_interval && a.sigma_interval && a.mu_amp && a.sigma_amp))
            throw ParameterError("explicit parameters need all of --mu-interval, --sigma-interval, --mu-amp, --sigma-amp");
        ImpactSeriesParams p{.mu_interval_s = *a.mu_interval,
                             .sigma_interval_s = *a.sigma_interval,
                             .mu_amp = *a.mu_amp,
                             .sigma_amp = *a.sigma_amp,
                             .min_interval_s = a.min_interval};
        validate(p);
        audio = {p, false};
        tactile = {p, false};
    }
    audio.params.seed = derive_seed(a.seed, "audio");
    tactile.params.seed = derive_seed(a.seed, "tactile");

    const TwoChannelBuffer buf = render_stimulus(audio.params, tactile.params, material, a.duration, config.render);
    write_wav(buf, a.out, a.bit_depth);

    const auto ae = generate_impact_sequence(audio.params, a.duration);
    const auto te = generate_impact_sequence(tactile.params, a.duration);
    const json report = {{"file", a.out},
                         {"alpha", explicit_params ? json(nullptr) : json(a.alpha)},
                         {"saturated", audio.saturated},
                         {"material", mat_name},
                         {"duration_s", a.duration},
                         {"audio", {{"params", params_json(audio.params)}, {"stats", stats_json(sequence_statistics(ae))}}},
                         {"tactile",
                          {{"params", params_json(tactile.params)}, {"stats", stats_json(sequence_statistics(te))}}}};
    std::cout << report.dump(2) << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Impact-series stimulus tools"};
    app.require_subcommand(1);

    RenderArgs ra;
    auto* render = app.add_subcommand("render", "Render one two-channel stimulus to WAV");
    render->add_option("--config", ra.config, "Engine config JSON (shipped defaults otherwise)");
    render->add_option("--alpha", ra.alpha, "Action position, 0 = rub, 1 = scratch");
    render->add_option("--velocity", ra.velocity, "Normalized pointer speed");
    render->add_option("--mu-interval", ra.mu_interval, "Explicit mean interval (s), overrides --alpha");
    render->add_option("--sigma-interval", ra.sigma_interval, "Explicit interval std (s)");
    render->add_option("--mu-amp", ra.mu_amp, "Explicit mean amplitude");
    render->add_option("--sigma-amp", ra.sigma_amp, "Explicit amplitude std");
    render->add_option("--min-interval", ra.min_interval, "Minimum interval for explicit parameters (s)");
    render->add_option("--material", ra.material, "Material name, or 'none' to bypass the modal bank");
    render->add_option("--duration", ra.duration, "Duration in seconds");
    render->add_option("--seed", ra.seed, "Seed");
    render->add_option("-o,--out", ra.out, "Output WAV path");
    render->add_option("--bit-depth", ra.bit_depth, "16 or 24")->check(CLI::IsMember({16, 24}));

    std::string grid_design, grid_out = "stimuli", grid_config;
    bool grid_serial = false;
    int grid_depth = 16;
    auto* grid = app.add_subcommand("grid", "Render the factorial stimulus grid and its manifest");
    grid->add_option("design", grid_design, "Design JSON")->required();
    grid->add_option("-o,--out", grid_out, "Output directory");
    grid->add_option("--config", grid_config, "Engine config JSON (materials, render settings)");
    grid->add_flag("--serial", grid_serial, "Render cells on one thread");
    grid->add_option("--bit-depth", grid_depth, "16 or 24")->check(CLI::IsMember({16, 24}));

    std::string ex_manifest, ex_subject, ex_csv, ex_ratings, ex_play;
    std::uint64_t ex_seed = 1;
    auto* experiment = app.add_subcommand("experiment", "Run (or resume) a rating session");
    experiment->add_option("manifest", ex_manifest, "Grid manifest JSON")->required();
    experiment->add_option("--subject", ex_subject, "Subject id")->required();
    experiment->add_option("-o,--out", ex_csv, "Response CSV (appended, resumable)")->required();
    experiment->add_option("--ratings", ex_ratings, "Scripted responder: file of stimulus_id,rating lines");
    experiment->add_option("--play", ex_play, "Player command; {} is replaced by the WAV path");
    experiment->add_option("--seed", ex_seed, "Presentation-order seed");

    std::string an_csv, an_manifest, an_json, an_format = "table";
    AnalysisOptions an_opts;
    bool an_serial = false;
    auto* analyze = app.add_subcommand("analyze", "Per-factor effect analysis of a response CSV");
    analyze->add_option("csv", an_csv, "Response CSV")->required();
    analyze->add_option("manifest", an_manifest, "Grid manifest JSON")->required();
    analyze->add_option("--permutations", an_opts.permutations, "Permutation count")->check(CLI::PositiveNumber);
    analyze->add_option("--seed", an_opts.seed, "Permutation seed");
    analyze->add_option("--json", an_json, "Also write the JSON report to this path");
    analyze->add_option("--format", an_format, "Standard output format")->check(CLI::IsMember({"table", "json"}));
    analyze->add_flag("--serial", an_serial, "Run permutations on one thread");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*render)
            return cmd_render(ra, *render);

        if (*grid) {
            const Design design = load_design(grid_design);
            const EngineConfig config = config_or_default(grid_config);
            const GridResult r = run_grid(design, config, grid_out, !grid_serial, grid_depth);
            for (const auto& w : r.warnings)
                std::cerr << "warning: " << w << '\n';
            std::cout << "wrote " << r.manifest.stimuli.size() << " stimuli and "
                      << (std::filesystem::path(grid_out) / "manifest.json").string() << '\n';
            return 0;
        }

        if (*experiment) {
            const Manifest manifest = load_manifest(ex_manifest);
            const Responder responder =
                ex_ratings.empty()
                    ? interactive_responder(ex_play, std::filesystem::path(ex_manifest).parent_path(), std::cin, std::cout)
                    : scripted_responder(ex_ratings);
            const SessionResult r = run_session(manifest, ex_subject, ex_csv, responder, ex_seed);
            std::cerr << "subject " << ex_subject << ": " << r.already_done << " already rated, " << r.presented
                      << " presented" << (r.interrupted ? ", interrupted" : "") << '\n';
            return 0;
        }

        if (*analyze) {
            an_opts.parallel = !an_serial;
            const Manifest manifest = load_manifest(an_manifest);
            const AnalysisReport report = analyze_responses(read_responses(an_csv), manifest, an_opts);
            if (!an_json.empty()) {
                std::ofstream f(an_json);
                if (!f)
                    throw IoError("cannot write '" + an_json + "'");
                f << report_to_json(report) << '\n';
            }
            std::cout << (an_format == "json" ? report_to_json(report) + "\n" : report_to_table(report));
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

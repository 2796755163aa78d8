#include "tribo/experiment.hpp"

#include "tribo/errors.hpp"
#include "tribo/kernels.hpp"
#include "tribo/wav.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace tribo {

using nlohmann::json;

namespace {

constexpr double kMaxStimulusSeconds = 600.0;
constexpr double kMinIntervalFloor = 1e-5;


std::string read_file(const std::filesystem::path& path, const char* what)
{
    std::ifstream f(path);
    if (!f)
        throw IoError(std::string("cannot open ") + what + " '" + path.string() + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

json parse_json(const std::string& text, const std::string& source)
{
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(source + ": JSON parse error: " + e.what());
    }
}

std::vector<double> number_list(const json& j, const std::string& path)
{
    if (!j.is_array() || j.empty())
        throw ConfigError(path + ": expected a non-empty array of numbers");
    std::vector<double> out;
    for (const auto& v : j) {
        if (!v.is_number())
            throw ConfigError(path + ": expected numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

bool plain_label(const std::string& s)
{
    return !s.empty() && s.find_first_of(",\"\r\n") == std::string::npos;
}

double factor_value(const ImpactSeriesParams& p, std::size_t k)
{
    switch (k) {
    case 0: return p.mu_interval_s;
    case 1: return p.sigma_interval_s;
    case 2: return p.mu_amp;
    default: return p.sigma_amp;
    }
}

std::string utc_timestamp()
{
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%S") << '.' << std::setw(3) << std::setfill('0') << ms << 'Z';
    return os.str();
}

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace

std::string to_string(Modality m)
{
    return m == Modality::audio ? "audio" : "tactile";
}

Modality modality_from_string(const std::string& s)
{
    if (s == "audio")
        return Modality::audio;
    if (s == "tactile")
        return Modality::tactile;
    throw ConfigError("unknown modality '" + s + "' (expected audio or tactile)");
}

// ---------------------------------------------------------------------------

Design parse_design(const std::string& text, const std::string& source)
{
    const json j = parse_json(text, source);
    try {
        if (!j.is_object())
            throw ConfigError("expected an object");
        static const std::set<std::string> known = {"name",           "comment",   "declared_count", "master_seed",
                                                    "duration_s",     "material",  "modalities",     "levels",
                                                    "min_interval_s"};
        for (const auto& [k, v] : j.items())
            if (!known.contains(k))
                throw ConfigError(k + ": unknown key");
        Design d;
        d.name = j.value("name", d.name);
        d.duration_s = j.value("duration_s", d.duration_s);
        d.min_interval_s = j.value("min_interval_s", d.min_interval_s);
        d.master_seed = j.value("master_seed", d.master_seed);
        d.material = j.value("material", d.material);
        if (j.contains("declared_count"))
            d.declared_count = j.at("declared_count").get<std::size_t>();
        if (!j.contains("modalities") || !j.at("modalities").is_array() || j.at("modalities").empty())
            throw ConfigError("modalities: expected a non-empty array");
        for (const auto& m : j.at("modalities"))
            d.modalities.push_back(modality_from_string(m.get<std::string>()));
        if (!j.contains("levels") || !j.at("levels").is_object())
            throw ConfigError("levels: expected an object");
        const json& lv = j.at("levels");
        for (const auto& [k, v] : lv.items())
            if (std::find_if(kFactorNames.begin(), kFactorNames.end(), [&](const char* n) { return k == n; }) ==
                kFactorNames.end())
                throw ConfigError("levels." + k + ": unknown factor");
        auto list = [&](const char* key) {
            if (!lv.contains(key))
                throw ConfigError(std::string("levels.") + key + ": missing");
            return number_list(lv.at(key), std::string("levels.") + key);
        };
        d.levels.mu_interval_s = list("mu_interval_s");
        d.levels.sigma_interval_s = list("sigma_interval_s");
        d.levels.mu_amp = list("mu_amp");
        d.levels.sigma_amp = list("sigma_amp");
        if (!(d.duration_s > 0.0 && d.duration_s <= kMaxStimulusSeconds))
            throw ConfigError("duration_s must be in (0, " + std::to_string(int(kMaxStimulusSeconds)) + "]");
        if (!(d.min_interval_s >= kMinIntervalFloor))
            throw ConfigError("min_interval_s must be >= 1e-5");
        return d;
    } catch (const ConfigError& e) {
        throw ConfigError(source + ": " + e.what());
    } catch (const json::exception& e) {
        throw ConfigError(source + ": " + e.what());
    }
}

Design load_design(const std::filesystem::path& path)
{
    return parse_design(read_file(path, "design"), path.string());
}

GridExpansion expand_grid(const Design& d)
{
    GridExpansion out;
    const auto& L = d.levels;
    for (auto m : d.modalities) {
        for (std::size_t i = 0; i < L.mu_interval_s.size(); ++i)
            for (std::size_t j = 0; j < L.sigma_interval_s.size(); ++j)
                for (std::size_t k = 0; k < L.mu_amp.size(); ++k)
                    for (std::size_t l = 0; l < L.sigma_amp.size(); ++l) {
                        StimulusSpec s;
                        s.modality = m;
                        s.levels = {i, j, k, l};
                        s.id = to_string(m) + "-mt" + std::to_string(i) + "-st" + std::to_string(j) + "-ma" +
                               std::to_string(k) + "-sa" + std::to_string(l);
                        s.params = {.mu_interval_s = L.mu_interval_s[i],
                                    .sigma_interval_s = L.sigma_interval_s[j],
                                    .mu_amp = L.mu_amp[k],
                                    .sigma_amp = L.sigma_amp[l],
                                    .min_interval_s = d.min_interval_s,
                                    .seed = derive_seed(d.master_seed, s.id)};
                        try {
                            validate(s.params);
                        } catch (const ParameterError& e) {
                            throw ConfigError("design '" + d.name + "' cell " + s.id + ": " + e.what());
                        }
                        if (m == Modality::audio)
                            s.material = d.material;
                        s.duration_s = d.duration_s;
                        s.file = s.id + ".wav";
                        out.stimuli.push_back(std::move(s));
                    }
    }
    if (d.declared_count && *d.declared_count != out.stimuli.size())
        out.warnings.push_back("design '" + d.name + "' declares " + std::to_string(*d.declared_count) +
                               " cells but the factorial cross has " + std::to_string(out.stimuli.size()));
    return out;
}

// ---------------------------------------------------------------------------

const StimulusSpec* Manifest::find(const std::string& id) const
{
    for (const auto& s : stimuli)
        if (s.id == id)
            return &s;
    return nullptr;
}

std::string manifest_to_json(const Manifest& m)
{
    json stimuli = json::array();
    for (const auto& s : m.stimuli) {
        json factors = json::object();
        json levels = json::object();
        for (std::size_t k = 0; k < 4; ++k) {
            factors[kFactorNames[k]] = factor_value(s.params, k);
            levels[kFactorNames[k]] = s.levels[k];
        }
        stimuli.push_back({{"id", s.id},
                           {"modality", to_string(s.modality)},
                           {"factors", factors},
                           {"levels", levels},
                           {"min_interval_s", s.params.min_interval_s},
                           {"seed", s.params.seed},
                           {"material", s.material ? json(*s.material) : json(nullptr)},
                           {"duration_s", s.duration_s},
                           {"file", s.file}});
    }
    const json doc = {{"design", m.design},
                      {"master_seed", m.master_seed},
                      {"sample_rate_hz", m.sample_rate_hz},
                      {"count", m.stimuli.size()},
                      {"stimuli", stimuli}};
    return doc.dump(2);
}

Manifest parse_manifest(const std::string& text, const std::string& source)
{
    const json j = parse_json(text, source);
    Manifest m;
    try {
        m.design = j.value("design", std::string());
        m.master_seed = j.value("master_seed", std::uint64_t{0});
        m.sample_rate_hz = j.value("sample_rate_hz", 44100.0);
        std::set<std::string> ids;
        const json& list = j.at("stimuli");
        for (std::size_t i = 0; i < list.size(); ++i) {
            const json& e = list.at(i);
            StimulusSpec s;
            s.id = e.at("id").get<std::string>();
            if (!plain_label(s.id))
                throw ConfigError("stimuli[" + std::to_string(i) + "].id must be non-empty without , \" or newlines");
            if (!ids.insert(s.id).second)
                throw ConfigError("stimuli[" + std::to_string(i) + "]: duplicate stimulus id '" + s.id + "'");
            s.modality = modality_from_string(e.at("modality").get<std::string>());
            const json& f = e.at("factors");
            s.params.mu_interval_s = f.at("mu_interval_s").get<double>();
            s.params.sigma_interval_s = f.at("sigma_interval_s").get<double>();
            s.params.mu_amp = f.at("mu_amp").get<double>();
            s.params.sigma_amp = f.at("sigma_amp").get<double>();
            s.params.min_interval_s = e.value("min_interval_s", 0.001);
            s.params.seed = e.at("seed").get<std::uint64_t>();
            if (e.contains("levels"))
                for (std::size_t k = 0; k < 4; ++k)
                    s.levels[k] = e.at("levels").value(kFactorNames[k], std::size_t{0});
            if (e.contains("material") && !e.at("material").is_null())
                s.material = e.at("material").get<std::string>();
            s.duration_s = e.at("duration_s").get<double>();
            if (!(s.duration_s > 0.0 && s.duration_s <= kMaxStimulusSeconds))
                throw ConfigError("stimuli[" + std::to_string(i) + "].duration_s out of range");
            if (!(s.params.min_interval_s >= kMinIntervalFloor))
                throw ConfigError("stimuli[" + std::to_string(i) + "].min_interval_s must be >= 1e-5");
            s.file = e.value("file", s.id + ".wav");
            try {
                validate(s.params);
            } catch (const ParameterError& err) {
                throw ConfigError("stimuli[" + std::to_string(i) + "]: " + err.what());
            }
            m.stimuli.push_back(std::move(s));
        }
    } catch (const ConfigError& e) {
        throw ConfigError(source + ": " + e.what());
    } catch (const json::exception& e) {
        throw ConfigError(source + ": " + e.what());
    }
    return m;
}

Manifest load_manifest(const std::filesystem::path& path)
{
    return parse_manifest(read_file(path, "manifest"), path.string());
}

TwoChannelBuffer render_stimulus_spec(const StimulusSpec& spec, const EngineConfig& config)
{
    const MaterialPreset* material = nullptr;
    if (spec.modality == Modality::audio && spec.material) {
        const auto index = find_material(config, *spec.material);
        if (!index)
            throw ConfigError("stimulus " + spec.id + ": unknown material '" + *spec.material + "'");
        if (*index >= 0)
            material = &config.materials[static_cast<std::size_t>(*index)];
    }
    const RenderConfig& rc = config.render;
    const std::size_t n = sample_count(spec.duration_s, rc);
    const auto events = generate_impact_sequence(spec.params, spec.duration_s);
    const SampleBuffer excitation = render_impact_train(events, n, rc);

    TwoChannelBuffer out;
    out.sample_rate_hz = rc.sample_rate_hz;
    if (spec.modality == Modality::audio) {
        out.audio = soft_limit(material ? modal_filter(excitation, *material, rc) : excitation, rc.limiter_ceiling);
        out.audio.role = ChannelRole::audio;
        out.tactile.samples.assign(n, 0.0);
    } else {
        out.tactile = soft_limit(tactile_shape(excitation, rc), rc.limiter_ceiling);
        out.audio.samples.assign(n, 0.0);
    }
    return out;
}

GridResult run_grid(const Design& design, const EngineConfig& config, const std::filesystem::path& out_dir,
                    bool parallel, int bit_depth)
{
    GridExpansion grid = expand_grid(design);
    if (!find_material(config, design.material))
        throw ConfigError("design '" + design.name + "': unknown material '" + design.material + "'");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec)
        throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());

    GridResult result;
    result.warnings = grid.warnings;
    result.manifest.design = design.name;
    result.manifest.master_seed = design.master_seed;
    result.manifest.sample_rate_hz = config.render.sample_rate_hz;
    result.manifest.stimuli = grid.stimuli;

    const auto& cells = result.manifest.stimuli;
    std::vector<std::string> errors(cells.size());
    const auto count = static_cast<std::ptrdiff_t>(cells.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        const auto& cell = cells[static_cast<std::size_t>(i)];
        try {
            write_wav(render_stimulus_spec(cell, config), out_dir / cell.file, bit_depth);
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(i)] = cell.id + ": " + e.what();
        }
    }
    for (const auto& e : errors)
        if (!e.empty())
            throw IoError("grid render failed for " + e);

    std::ofstream f(out_dir / "manifest.json", std::ios::trunc);
    if (!f)
        throw IoError("cannot write '" + (out_dir / "manifest.json").string() + "'");
    f << manifest_to_json(result.manifest) << '\n';
    return result;
}

// ---------------------------------------------------------------------------

std::string format_response_row(const ResponseRecord& r)
{
    std::ostringstream os;
    os << r.subject_id << ',' << r.stimulus_id << ',' << std::setprecision(17) << r.rating << ','
       << r.presentation_index << ',' << r.timestamp;
    return os.str();
}

std::vector<ResponseRecord> read_responses(const std::filesystem::path& csv)
{
    std::ifstream f(csv);
    if (!f)
        throw IoError("cannot open responses '" + csv.string() + "'");
    std::vector<ResponseRecord> out;
    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line.front() == '#')
            continue;
        if (!header_seen) {
            if (line != kResponseCsvHeader)
                throw ConfigError(csv.string() + ":" + std::to_string(lineno) + ": expected header '" +
                                  kResponseCsvHeader + "'");
            header_seen = true;
            continue;
        }
        const auto fields = split_csv_line(line);
        auto fail = [&](const std::string& why) {
            return ConfigError(csv.string() + ":" + std::to_string(lineno) + ": " + why);
        };
        if (fields.size() != 5)
            throw fail("expected 5 columns, got " + std::to_string(fields.size()));
        ResponseRecord r;
        r.subject_id = fields[0];
        r.stimulus_id = fields[1];
        try {
            std::size_t used = 0;
            r.rating = std::stod(fields[2], &used);
            if (used != fields[2].size())
                throw std::invalid_argument("trailing characters");
            r.presentation_index = static_cast<std::size_t>(std::stoull(fields[3]));
        } catch (const std::exception&) {
            throw fail("malformed rating or presentation_index");
        }
        if (!(r.rating >= 0.0 && r.rating <= 1.0))
            throw fail("rating " + fields[2] + " outside [0, 1]");
        r.timestamp = fields[4];
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<std::size_t> presentation_order(const Manifest& manifest, const std::string& subject_id,
                                            std::uint64_t seed)
{
    std::vector<std::size_t> order(manifest.stimuli.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(seed, "order:" + subject_id));
    for (std::size_t i = order.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(order[i - 1], order[pick(rng)]);
    }
    return order;
}

Responder scripted_responder(const std::filesystem::path& ratings_file)
{
    std::ifstream f(ratings_file);
    if (!f)
        throw IoError("cannot open ratings '" + ratings_file.string() + "'");
    auto ratings = std::make_shared<std::map<std::string, double>>();
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line.front() == '#' || line == "stimulus_id,rating")
            continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 2)
            throw ConfigError(ratings_file.string() + ":" + std::to_string(lineno) + ": expected stimulus_id,rating");
        double v = 0.0;
        try {
            v = std::stod(fields[1]);
        } catch (const std::exception&) {
            throw ConfigError(ratings_file.string() + ":" + std::to_string(lineno) + ": malformed rating");
        }
        (*ratings)[fields[0]] = v;
    }
    return [ratings](const StimulusSpec& s, std::size_t) -> std::optional<double> {
        const auto it = ratings->find(s.id);
        if (it == ratings->end())
            return std::nullopt;
        return std::clamp(it->second, 0.0, 1.0);
    };
}

Responder interactive_responder(std::string play_command, std::filesystem::path manifest_dir, std::istream& in,
                                std::ostream& out)
{
    return [cmd = std::move(play_command), dir = std::move(manifest_dir), &in, &out](
               const StimulusSpec& s, std::size_t index) -> std::optional<double> {
        const std::string path = (dir / s.file).string();
        if (!cmd.empty()) {
            std::string c = cmd;
            const auto pos = c.find("{}");
            const std::string quoted = "'" + path + "'";
            if (pos != std::string::npos)
                c.replace(pos, 2, quoted);
            else
                c += " " + quoted;
            if (std::system(c.c_str()) != 0)
                out << "warning: player command failed for " << path << '\n';
        } else {
            out << "play: " << path << '\n';
        }
        for (;;) {
            out << "[" << index + 1 << "] rating 0 = gratter (scratch) .. 1 = frotter (rub), q to stop: " << std::flush;
            std::string line;
            if (!std::getline(in, line) || line == "q")
                return std::nullopt;
            try {
                const double v = std::stod(line);
                if (v >= 0.0 && v <= 1.0)
                    return v;
            } catch (const std::exception&) {
            }
            out << "please enter a number in [0, 1]\n";
        }
    };
}

SessionResult run_session(const Manifest& manifest, const std::string& subject_id, const std::filesystem::path& csv,
                          const Responder& responder, std::uint64_t seed)
{
    if (!plain_label(subject_id))
        throw ConfigError("subject id must be non-empty without , \" or newlines");

    std::set<std::string> done;
    std::size_t next_index = 0;
    const bool exists = std::filesystem::exists(csv) && std::filesystem::file_size(csv) > 0;
    if (exists) {
        for (const auto& r : read_responses(csv)) {
            if (r.subject_id != subject_id)
                continue;
            if (!manifest.find(r.stimulus_id))
                throw ConfigError(csv.string() + ": stimulus '" + r.stimulus_id + "' is not in the manifest");
            done.insert(r.stimulus_id);
            next_index = std::max(next_index, r.presentation_index + 1);
        }
    }

    std::ofstream f(csv, std::ios::app);
    if (!f)
        throw IoError("cannot open '" + csv.string() + "' for appending");
    if (!exists)
        f << kResponseCsvPolarity << '\n' << kResponseCsvHeader << '\n' << std::flush;

    SessionResult result;
    result.already_done = done.size();
    for (std::size_t idx : presentation_order(manifest, subject_id, seed)) {
        const StimulusSpec& s = manifest.stimuli[idx];
        if (done.contains(s.id))
            continue;
        const auto rating = responder(s, next_index);
        if (!rating) {
            result.interrupted = true;
            break;
        }
        ResponseRecord r{subject_id, s.id, std::clamp(*rating, 0.0, 1.0), next_index, utc_timestamp()};
        f << format_response_row(r) << '\n' << std::flush;
        if (!f)
            throw IoError("write failed for '" + csv.string() + "'");
        ++next_index;
        ++result.presented;
    }
    return result;
}

// ---------------------------------------------------------------------------

std::optional<std::vector<double>> zscore(std::span<const double> x)
{
    if (x.empty())
        return std::nullopt;
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x)
        ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / n);
    if (!(sd > 1e-12 * (std::abs(mean) + 1.0)))
        return std::nullopt;
    std::vector<double> z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        z[i] = (x[i] - mean) / sd;
    return z;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y)
{
    const auto zx = zscore(x);
    const auto zy = zscore(y);
    if (!zx || !zy || x.size() != y.size())
        return std::nullopt;
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        acc += (*zx)[i] * (*zy)[i];
    return std::clamp(acc / static_cast<double>(x.size()), -1.0, 1.0);
}

std::vector<double> ols_fit(const std::vector<std::vector<double>>& columns, std::span<const double> y)
{
    const auto n = static_cast<Eigen::Index>(y.size());
    const auto k = static_cast<Eigen::Index>(columns.size());
    Eigen::MatrixXd X(n, k + 1);
    Eigen::VectorXd Y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        X(i, 0) = 1.0;
        Y(i) = y[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < k; ++j)
            X(i, j + 1) = columns[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
    }
    const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(Y);
    return {beta.data(), beta.data() + beta.size()};
}

AnalysisReport analyze_responses(const std::vector<ResponseRecord>& records, const Manifest& manifest,
                                 const AnalysisOptions& options)
{
    if (records.empty())
        throw ConfigError("no responses to analyze");

    AnalysisReport report;
    report.permutations = options.permutations;
    std::set<std::string> missing;
    std::map<Modality, std::vector<std::pair<const StimulusSpec*, double>>> by_modality;
    for (const auto& r : records) {
        const StimulusSpec* s = manifest.find(r.stimulus_id);
        if (!s) {
            missing.insert(r.stimulus_id);
            continue;
        }
        by_modality[s->modality].push_back({s, r.rating});
        ++report.rows_used;
    }
    report.missing_ids.assign(missing.begin(), missing.end());
    if (report.rows_used == 0)
        throw ConfigError("no response rows reference stimuli in the manifest");

    for (auto& [modality, rows] : by_modality) {
        // canonical row order: the report does not depend on CSV order
        std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
            return a.first->id != b.first->id ? a.first->id < b.first->id : a.second < b.second;
        });
        ModalityReport mr;
        mr.modality = modality;
        mr.rows = rows.size();
        std::vector<double> y(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i)
            y[i] = rows[i].second;

        std::vector<std::vector<double>> z_columns;
        std::vector<std::size_t> z_factor;
        mr.factors.resize(4);
        for (std::size_t k = 0; k < 4; ++k) {
            mr.factors[k].factor = kFactorNames[k];
            std::vector<double> col(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i)
                col[i] = factor_value(rows[i].first->params, k);
            mr.factors[k].pearson_r = pearson(col, y);
            if (auto z = zscore(col)) {
                z_columns.push_back(std::move(*z));
                z_factor.push_back(k);
            }
        }

        const auto beta = ols_fit(z_columns, y);
        mr.intercept = beta[0];
        for (std::size_t j = 0; j < z_factor.size(); ++j)
            mr.factors[z_factor[j]].std_coefficient = beta[j + 1];

        if (!z_columns.empty() && zscore(y) && options.permutations > 0) {
            std::vector<double> flat;
            for (const auto& c : z_columns)
                flat.insert(flat.end(), c.begin(), c.end());
            const std::uint64_t seed = derive_seed(options.seed, to_string(modality));
            const auto hits =
                options.parallel
                    ? kernels::permutation_hits_omp(flat, z_columns.size(), y, options.permutations, seed)
                    : kernels::permutation_hits_serial(flat, z_columns.size(), y, options.permutations, seed);
            for (std::size_t j = 0; j < z_factor.size(); ++j)
                mr.factors[z_factor[j]].p_value =
                    static_cast<double>(hits[j] + 1) / static_cast<double>(options.permutations + 1);
        }

        double best = -1.0;
        for (const auto& f : mr.factors)
            if (f.std_coefficient && std::abs(*f.std_coefficient) > best) {
                best = std::abs(*f.std_coefficient);
                mr.dominant_factor = f.factor;
            }
        report.modalities.push_back(std::move(mr));
    }
    return report;
}

std::string report_to_json(const AnalysisReport& report)
{
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json mods = json::array();
    for (const auto& m : report.modalities) {
        json factors = json::array();
        for (const auto& f : m.factors)
            factors.push_back({{"factor", f.factor},
                               {"pearson_r", opt(f.pearson_r)},
                               {"std_coefficient", opt(f.std_coefficient)},
                               {"p_value", opt(f.p_value)}});
        mods.push_back({{"modality", to_string(m.modality)},
                        {"rows", m.rows},
                        {"intercept", m.intercept},
                        {"factors", factors},
                        {"dominant_factor", m.dominant_factor ? json(*m.dominant_factor) : json(nullptr)}});
    }
    const json doc = {{"modalities", mods},
                      {"missing_ids", report.missing_ids},
                      {"rows_used", report.rows_used},
                      {"permutations", report.permutations}};
    return doc.dump(2);
}

std::string report_to_table(const AnalysisReport& report)
{
    std::ostringstream os;
    auto cell = [&](const std::optional<double>& v, int prec) {
        std::ostringstream c;
        if (v)
            c << std::fixed << std::setprecision(prec) << *v;
        else
            c << "-";
        return c.str();
    };
    for (const auto& m : report.modalities) {
        os << to_string(m.modality) << " (" << m.rows << " ratings, dominant: " << m.dominant_factor.value_or("-")
           << ")\n";
        os << "  " << std::left << std::setw(18) << "factor" << std::right << std::setw(10) << "r" << std::setw(12)
           << "std coef" << std::setw(10) << "p" << '\n';
        for (const auto& f : m.factors)
            os << "  " << std::left << std::setw(18) << f.factor << std::right << std::setw(10)
               << cell(f.pearson_r, 3) << std::setw(12) << cell(f.std_coefficient, 4) << std::setw(10)
               << cell(f.p_value, 4) << '\n';
    }
    if (!report.missing_ids.empty()) {
        os << "excluded rows with unknown stimulus ids:";
        for (const auto& id : report.missing_ids)
            os << ' ' << id;
        os << '\n';
    }
    return os.str();
}

} // namespace tribo

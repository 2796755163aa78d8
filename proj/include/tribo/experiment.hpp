#pragma once

// Stimulus bank, rating sessions and per-factor effect analysis.

#include "tribo/dsp.hpp"
#include "tribo/engine.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace tribo {

enum class Modality { audio, tactile };

std::string to_string(Modality m);
Modality modality_from_string(const std::string& s);

inline constexpr std::array<const char*, 4> kFactorNames = {"mu_interval_s", "sigma_interval_s", "mu_amp",
                                                             "sigma_amp"};

struct FactorLevels {
    std::vector<double> mu_interval_s;
    std::vector<double> sigma_interval_s;
    std::vector<double> mu_amp;
    std::vector<double> sigma_amp;
};

struct Design {
    std::string name = "design";
    std::vector<Modality> modalities;
    FactorLevels levels;
    double duration_s = 2.0;
    double min_interval_s = 0.001;
    std::uint64_t master_seed = 1;
    std::optional<std::size_t> declared_count;
    std::string material = "wood"; // used by audio cells; "none" bypasses the modal bank
};

Design parse_design(const std::string& text, const std::string& source = "<design>");
Design load_design(const std::filesystem::path& path);

struct StimulusSpec {
    std::string id;
    Modality modality = Modality::audio;
    ImpactSeriesParams params;
    std::optional<std::string> material;
    double duration_s = 1.0;
    std::array<std::size_t, 4> levels{}; // level index per factor
    std::string file;                    // relative to the manifest directory
};

struct GridExpansion {
    std::vector<StimulusSpec> stimuli;
    std::vector<std::string> warnings;
};

/// Full factorial cross: modality x mu_T x sigma_T x mu_A x sigma_A. Seeds come
/// from hashing each id into the master seed. Invalid levels throw ConfigError;
/// a mismatch with declared_count is a warning.
GridExpansion expand_grid(const Design& design);

struct Manifest {
    std::string design;
    std::uint64_t master_seed = 0;
    double sample_rate_hz = 44100.0;
    std::vector<StimulusSpec> stimuli;

    [[nodiscard]] const StimulusSpec* find(const std::string& id) const;
};

std::string manifest_to_json(const Manifest& manifest);
/// Throws ConfigError on schema violations and duplicate stimulus ids.
Manifest parse_manifest(const std::string& text, const std::string& source = "<manifest>");
Manifest load_manifest(const std::filesystem::path& path);

/// Single-modality stimulus: the other channel is silent.
TwoChannelBuffer render_stimulus_spec(const StimulusSpec& spec, const EngineConfig& config);

struct GridResult {
    Manifest manifest;
    std::vector<std::string> warnings;
};

/// Renders every cell into out_dir and writes out_dir/manifest.json. Cells are
/// rendered in parallel when `parallel` is set; output does not depend on it.
GridResult run_grid(const Design& design, const EngineConfig& config, const std::filesystem::path& out_dir,
                    bool parallel = true, int bit_depth = 16);

// ---------------------------------------------------------------------------

/// rating: 0 = "gratter" (scratch), 1 = "frotter" (rub).
struct ResponseRecord {
    std::string subject_id;
    std::string stimulus_id;
    double rating = 0.5;
    std::size_t presentation_index = 0;
    std::string timestamp;

    friend bool operator==(const ResponseRecord&, const ResponseRecord&) = default;
};

inline constexpr const char* kResponseCsvHeader = "subject_id,stimulus_id,rating,presentation_index,timestamp";
inline constexpr const char* kResponseCsvPolarity = "# rating: 0 = gratter (scratch), 1 = frotter (rub)";

std::vector<ResponseRecord> read_responses(const std::filesystem::path& csv);
std::string format_response_row(const ResponseRecord& record);

/// Seeded presentation order for a subject.
std::vector<std::size_t> presentation_order(const Manifest& manifest, const std::string& subject_id,
                                            std::uint64_t seed);

/// Returns a rating in [0, 1], or nullopt to interrupt the session.
using Responder = std::function<std::optional<double>(const StimulusSpec& stimulus, std::size_t presentation_index)>;

/// Responder replaying "stimulus_id,rating" lines from a file.
Responder scripted_responder(const std::filesystem::path& ratings_file);

/// Responder that plays each file with `play_command` ("{}" is replaced by the
/// path) and reads a rating from `in`.
Responder interactive_responder(std::string play_command, std::filesystem::path manifest_dir, std::istream& in,
                                std::ostream& out);

struct SessionResult {
    std::size_t already_done = 0;
    std::size_t presented = 0;
    bool interrupted = false;
};

/// Appends one row per presented stimulus, flushing after each. An existing CSV
/// for the subject is resumed: answered stimuli are skipped.
SessionResult run_session(const Manifest& manifest, const std::string& subject_id, const std::filesystem::path& csv,
                          const Responder& responder, std::uint64_t seed = 1);

// ---------------------------------------------------------------------------

struct FactorEffect {
    std::string factor;
    std::optional<double> pearson_r;       // absent when the factor is constant
    std::optional<double> std_coefficient; // OLS coefficient on the z-scored factor
    std::optional<double> p_value;         // permutation test on |r|
};

struct ModalityReport {
    Modality modality = Modality::audio;
    std::size_t rows = 0;
    double intercept = 0.0;
    std::vector<FactorEffect> factors;
    std::optional<std::string> dominant_factor;
};

struct AnalysisReport {
    std::vector<ModalityReport> modalities;
    std::vector<std::string> missing_ids;
    std::size_t rows_used = 0;
    std::size_t permutations = 0;
};

struct AnalysisOptions {
    std::size_t permutations = 10000;
    std::uint64_t seed = 1;
    bool parallel = true;
};

/// Population z-score; nullopt when the column has zero variance.
std::optional<std::vector<double>> zscore(std::span<const double> column);

/// Pearson correlation; nullopt when either side is constant.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

/// Least-squares fit of y on [1, columns...] (Householder QR). Returns
/// intercept followed by one coefficient per column.
std::vector<double> ols_fit(const std::vector<std::vector<double>>& columns, std::span<const double> y);

/// Throws ConfigError when no usable rows remain.
AnalysisReport analyze_responses(const std::vector<ResponseRecord>& records, const Manifest& manifest,
                                 const AnalysisOptions& options = {});

std::string report_to_json(const AnalysisReport& report);
std::string report_to_table(const AnalysisReport& report);

} // namespace tribo

#include "tribo/experiment.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <sys/wait.h>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kBin = TRIBO_BINARY_DIR;
const fs::path kSrc = TRIBO_SOURCE_DIR;

struct Run {
    int status = -1;
    std::string out;
    std::string err;
};

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("tribo_cli_" + name))
    {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), {}};
}

Run run(const std::string& args, const fs::path& dir, const std::string& exe = "tribo")
{
    const fs::path out = dir / "stdout.txt", err = dir / "stderr.txt";
    const std::string cmd = "cd '" + dir.string() + "' && '" + (kBin / exe).string() + "' " + args + " >'" +
                            out.string() + "' 2>'" + err.string() + "'";
    const int raw = std::system(cmd.c_str());
    Run r;
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

} // namespace

TEST_CASE("render at alpha 0 reports rub statistics")
{
    TempDir d("render");
    const Run r = run("render --alpha 0 --duration 2 --seed 1 -o rub.wav", d.path);
    REQUIRE(r.status == 0);
    const json j = json::parse(r.out);
    CHECK(j["file"] == "rub.wav");
    CHECK(j["saturated"] == false);
    CHECK(j["material"] == "wood");
    CHECK(fs::exists(d.path / "rub.wav"));
    const double cv = j["audio"]["stats"]["interval_cv"].get<double>();
    CHECK(cv == doctest::Approx(0.1).epsilon(0.1));
    CHECK(j["audio"]["stats"]["interval_mean_s"].get<double>() == doctest::Approx(0.004).epsilon(0.05));

    const Run again = run("render --alpha 0 --duration 2 --seed 1 -o rub2.wav", d.path);
    REQUIRE(again.status == 0);
    CHECK(slurp(d.path / "rub.wav") == slurp(d.path / "rub2.wav"));

    const Run other = run("render --alpha 0 --duration 2 --seed 2 -o rub3.wav", d.path);
    CHECK(slurp(d.path / "rub.wav") != slurp(d.path / "rub3.wav"));
}

TEST_CASE("render argument errors")
{
    TempDir d("render_err");
    const Run zero = run("render --duration 0", d.path);
    CHECK(zero.status != 0);
    CHECK(zero.err.find("duration must be > 0") != std::string::npos);
    CHECK(zero.err.find("Usage") != std::string::npos);
    CHECK(!fs::exists(d.path / "stimulus.wav"));

    const Run sat = run("render --alpha 1.5 --duration 0.2", d.path);
    REQUIRE(sat.status == 0);
    CHECK(json::parse(sat.out)["saturated"] == true);

    CHECK(run("render --material plastic --duration 0.2", d.path).status == 1);
    CHECK(run("render --mu-interval 0.01 --duration 0.2", d.path).status == 1);
    CHECK(run("render --bit-depth 12", d.path).status != 0);
    const Run expl = run("render --mu-interval 0.01 --sigma-interval 0.002 --mu-amp 0.5 --sigma-amp 0.1 "
                         "--material none --duration 0.5 -o e.wav",
                         d.path);
    REQUIRE(expl.status == 0);
    CHECK(json::parse(expl.out)["audio"]["params"]["mu_interval_s"] == 0.01);
}

TEST_CASE("help for every subcommand")
{
    TempDir d("help");
    for (const char* sub : {"render", "grid", "experiment", "analyze"}) {
        const Run r = run(std::string(sub) + " --help", d.path);
        CHECK(r.status == 0);
        CHECK(r.out.find("Usage") != std::string::npos);
    }
    CHECK(run("--help", d.path, "tribo_engine").status == 0);
    CHECK(run("", d.path).status != 0);
}

TEST_CASE("grid, scripted experiment and analysis end to end")
{
    TempDir d("pipeline");
    std::ofstream(d.path / "design.json") << R"({
  "name": "small", "master_seed": 3, "duration_s": 0.2, "modalities": ["audio", "tactile"],
  "levels": {"mu_interval_s": [0.004, 0.016], "sigma_interval_s": [0.0, 0.002],
             "mu_amp": [0.3, 0.7], "sigma_amp": [0.02, 0.15]}, "declared_count": 40})";
    const Run g = run("grid design.json -o stim", d.path);
    REQUIRE(g.status == 0);
    CHECK(g.err.find("warning") != std::string::npos);
    const auto manifest = tribo::load_manifest(d.path / "stim" / "manifest.json");
    REQUIRE(manifest.stimuli.size() == 32);

    {
        std::ofstream rf(d.path / "ratings.csv");
        for (const auto& s : manifest.stimuli)
            rf << s.id << ',' << (s.params.mu_interval_s < 0.01 ? 0.9 : 0.1) << '\n';
    }
    const Run e = run("experiment stim/manifest.json --subject p01 -o p01.csv --ratings ratings.csv", d.path);
    REQUIRE(e.status == 0);
    CHECK(tribo::read_responses(d.path / "p01.csv").size() == 32);

    const Run a = run("analyze p01.csv stim/manifest.json --permutations 500 --format json --json report.json",
                      d.path);
    REQUIRE(a.status == 0);
    const json rep = json::parse(a.out);
    CHECK(rep == json::parse(slurp(d.path / "report.json")));
    for (const auto& m : rep["modalities"]) {
        CHECK(m["dominant_factor"] == "mu_interval_s");
        CHECK(m["factors"][0]["pearson_r"].get<double>() == doctest::Approx(-1.0).epsilon(1e-9));
    }
    const Run serial = run("analyze p01.csv stim/manifest.json --permutations 500 --format json --serial", d.path);
    CHECK(json::parse(serial.out) == rep);

    const Run table = run("analyze p01.csv stim/manifest.json --permutations 100", d.path);
    CHECK(table.status == 0);
    CHECK(table.out.find("mu_interval_s") != std::string::npos);

    CHECK(run("analyze missing.csv stim/manifest.json", d.path).status == 1);
}

TEST_CASE("engine offline render and replay")
{
    TempDir d("engine");
    const Run r = run("--outfile a.wav --duration 0.5 --alpha 0.3 --seed 4 --material glass", d.path, "tribo_engine");
    REQUIRE(r.status == 0);
    const Run r2 = run("--outfile b.wav --duration 0.5 --alpha 0.3 --seed 4 --material glass", d.path, "tribo_engine");
    REQUIRE(r2.status == 0);
    CHECK(slurp(d.path / "a.wav") == slurp(d.path / "b.wav"));
    CHECK(slurp(d.path / "a.wav").size() > 44);

    CHECK(run("--outfile c.wav", d.path, "tribo_engine").status == 1);
    CHECK(run("--outfile c.wav --device null", d.path, "tribo_engine").status != 0);

    // live for a short fixed duration, then replay the recorded trace
    const Run live = run("--device null --port 0 --duration 0.3 --seed 9 --record-trace t.jsonl --capture live.wav",
                         d.path, "tribo_engine");
    REQUIRE(live.status == 0);
    CHECK(live.err.find("underruns") != std::string::npos);
    const Run rep = run("--outfile replay.wav --replay t.jsonl --duration 0.3 --seed 9", d.path, "tribo_engine");
    REQUIRE(rep.status == 0);
    CHECK(slurp(d.path / "live.wav") == slurp(d.path / "replay.wav"));
}

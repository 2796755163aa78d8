#include "tribo/dsp.hpp"
#include "tribo/errors.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace tribo;

namespace {

const RenderConfig kCfg{};

MaterialPreset single_mode(double f, double decay, double gain)
{
    return {"test", {{f, decay, gain}}};
}

MaterialPreset eight_modes()
{
    MaterialPreset m{"eight", {}};
    for (int i = 0; i < 8; ++i)
        m.modes.push_back({400.0 + 700.0 * i, 0.03 + 0.01 * i, 0.001 * (8 - i)});
    return m;
}

SampleBuffer impulse(std::size_t n, double amp = 1.0)
{
    SampleBuffer b;
    b.samples.assign(n, 0.0);
    b.samples[0] = amp;
    return b;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b)
{
    REQUIRE(a.size() == b.size());
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

double sine_rms_gain(double f, const RenderConfig& cfg)
{
    const double fs = cfg.sample_rate_hz;
    SampleBuffer in;
    const std::size_t n = static_cast<std::size_t>(4 * fs);
    in.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        in.samples[i] = std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / fs);
    const auto out = tactile_shape(in, cfg);
    const std::span<const double> tail_in(in.samples.data() + n / 2, n / 2);
    const std::span<const double> tail_out(out.samples.data() + n / 2, n / 2);
    return oracle::rms(tail_out) / oracle::rms(tail_in);
}

} // namespace

TEST_CASE("raised-cosine kernel: 44 taps peaking at 1.0")
{
    const RaisedCosineKernel k(0.001, 44100.0);
    REQUIRE(k.width() == 44);
    CHECK(k.half_width() == 22);
    CHECK(k.taps()[22] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(k.taps()[0] == doctest::Approx(0.0));
    for (std::size_t i = 0; i < 44; ++i) {
        const double expected = 0.5 * (1.0 + std::cos(std::numbers::pi * (static_cast<double>(i) - 22.0) / 22.0));
        CHECK(k.taps()[i] == doctest::Approx(expected).epsilon(1e-14));
    }
}

TEST_CASE("impact train examples")
{
    const std::vector<ImpactEvent> one{{0.0, 1.0}};
    const auto b = render_impact_train(one, 100, kCfg);
    auto peak = std::max_element(b.samples.begin(), b.samples.end());
    CHECK(*peak == doctest::Approx(1.0));
    CHECK(peak - b.samples.begin() == 22);
    CHECK(std::all_of(b.samples.begin() + 44, b.samples.end(), [](double v) { return v == 0.0; }));

    const auto empty = render_impact_train({}, 100, kCfg);
    CHECK(std::all_of(empty.samples.begin(), empty.samples.end(), [](double v) { return v == 0.0; }));

    const std::vector<ImpactEvent> both{{0.01, 0.3}, {0.01, 0.4}};
    const auto c = render_impact_train(both, 1000, kCfg);
    CHECK(*std::max_element(c.samples.begin(), c.samples.end()) == doctest::Approx(0.7));

    // beyond the end: truncated silently
    const std::vector<ImpactEvent> late{{99.0 / 44100.0, 1.0}};
    const auto d = render_impact_train(late, 100, kCfg);
    CHECK(d.samples.size() == 100);
    CHECK(*std::max_element(d.samples.begin(), d.samples.end()) < 1e-2);
}

TEST_CASE("superposition of event lists (pre-limiter)")
{
    ImpactSeriesParams p{.mu_interval_s = 0.005, .sigma_interval_s = 0.003, .mu_amp = 0.5, .sigma_amp = 0.2, .seed = 2};
    const auto a = generate_impact_sequence(p, 1.0);
    p.seed = 3;
    const auto b = generate_impact_sequence(p, 1.0);
    std::vector<ImpactEvent> ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    const std::size_t n = 44100;
    const auto ra = render_impact_train(a, n, kCfg);
    const auto rb = render_impact_train(b, n, kCfg);
    const auto rab = render_impact_train(ab, n, kCfg);
    std::vector<double> sum(n);
    for (std::size_t i = 0; i < n; ++i)
        sum[i] = ra.samples[i] + rb.samples[i];
    CHECK(max_abs_diff(sum, rab.samples) < 1e-12);

    const MaterialPreset m = eight_modes();
    const auto ma = modal_filter(ra, m, kCfg);
    const auto mb = modal_filter(rb, m, kCfg);
    const auto mab = modal_filter(rab, m, kCfg);
    for (std::size_t i = 0; i < n; ++i)
        sum[i] = ma.samples[i] + mb.samples[i];
    CHECK(max_abs_diff(sum, mab.samples) < 1e-12);
}

TEST_CASE("single-mode impulse response matches the closed form")
{
    const double fs = 44100.0;
    const std::size_t n = static_cast<std::size_t>(0.5 * fs);
    const auto out = modal_filter(impulse(n), single_mode(1000.0, 0.1, 1.0), kCfg);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        worst = std::max(worst, std::abs(out.samples[i] - oracle::resonator_impulse(1000.0, 0.1, 1.0, fs, static_cast<int>(i))));
    CHECK(worst <= 1e-9);
}

TEST_CASE("modal filter is linear")
{
    const MaterialPreset m = eight_modes();
    SampleBuffer zero;
    zero.samples.assign(5000, 0.0);
    const auto z = modal_filter(zero, m, kCfg);
    CHECK(std::all_of(z.samples.begin(), z.samples.end(), [](double v) { return v == 0.0; }));

    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    SampleBuffer x;
    x.samples.resize(10000);
    for (auto& v : x.samples)
        v = nd(rng);
    SampleBuffer x2 = x;
    for (auto& v : x2.samples)
        v *= 2.0;
    const auto y = modal_filter(x, m, kCfg);
    const auto y2 = modal_filter(x2, m, kCfg);
    for (std::size_t i = 0; i < y.samples.size(); ++i)
        REQUIRE(y2.samples[i] == 2.0 * y.samples[i]);
}

TEST_CASE("impulse response energy decays")
{
    for (const auto& m : {single_mode(200.0, 0.05, 1.0), eight_modes(), single_mode(15000.0, 0.002, 0.3)}) {
        const std::size_t n = 22050;
        const auto y = modal_filter(impulse(n), m, kCfg);
        const std::size_t w = n / 10;
        const double first = oracle::rms(std::span(y.samples).first(w));
        const double last = oracle::rms(std::span(y.samples).last(w));
        CHECK(last < first);
    }
}

TEST_CASE("material validation")
{
    CHECK_THROWS_AS(validate(single_mode(30000.0, 0.1, 1.0), 44100.0), ConfigError);
    try {
        validate(single_mode(30000.0, 0.1, 1.0), 44100.0);
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("modes[0].freq_hz") != std::string::npos);
    }
    CHECK_THROWS_AS(validate(single_mode(22050.0, 0.1, 1.0), 44100.0), ConfigError);
    CHECK_THROWS_AS(validate(single_mode(1000.0, 0.0, 1.0), 44100.0), ConfigError);
    CHECK_THROWS_AS(validate(MaterialPreset{"empty", {}}, 44100.0), ConfigError);
    MaterialPreset big{"big", std::vector<Mode>(65, Mode{})};
    CHECK_THROWS_AS(validate(big, 44100.0), ConfigError);
    CHECK_THROWS_AS(validate(MaterialPreset{"none", {{100.0, 0.1, 1.0}}}, 44100.0), ConfigError);
    CHECK_THROWS_AS(modal_filter(impulse(10), single_mode(30000.0, 0.1, 1.0), kCfg), ConfigError);
    CHECK_NOTHROW(validate(eight_modes(), 44100.0));
}

TEST_CASE("render config validation")
{
    RenderConfig c;
    CHECK_NOTHROW(validate(c));
    c.block_size = 500;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = {};
    c.block_size = 8192;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = {};
    c.tactile_band = {400.0, 40.0};
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = {};
    c.tactile_band.f_hi_hz = 30000.0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = {};
    c.limiter_ceiling = 1.5;
    CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("tactile band-pass response")
{
    const double center = std::sqrt(40.0 * 400.0);
    const double g = sine_rms_gain(center, kCfg);
    CHECK(std::abs(20.0 * std::log10(g)) <= 1.0);

    // DC rejection: steady-state response to a step
    SampleBuffer dc;
    dc.samples.assign(static_cast<std::size_t>(2 * kCfg.sample_rate_hz), 1.0);
    const auto y = tactile_shape(dc, kCfg);
    const double tail = oracle::rms(std::span(y.samples).last(4410));
    CHECK(20.0 * std::log10(tail / 1.0) <= -40.0);

    // high audio content rejected
    CHECK(20.0 * std::log10(sine_rms_gain(5000.0, kCfg)) < -20.0);

    SampleBuffer zero;
    zero.samples.assign(1000, 0.0);
    const auto z = tactile_shape(zero, kCfg);
    CHECK(std::all_of(z.samples.begin(), z.samples.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("soft limiter")
{
    const double c = 0.98;
    CHECK(soft_limit(0.0, c) == 0.0);
    CHECK(std::abs(soft_limit(10.0, c)) <= c);
    CHECK(std::abs(soft_limit(-10.0, c)) <= c);
    CHECK(soft_limit(1e300, c) <= c);
    CHECK(soft_limit(INFINITY, c) == c);
    CHECK(soft_limit(-INFINITY, c) == -c);
    CHECK(soft_limit(std::nan(""), c) == 0.0);
    double prev = -INFINITY;
    for (int i = 0; i <= 1000; ++i) {
        const double x = -2.0 + 4.0 * i / 1000.0;
        const double y = soft_limit(x, c);
        CHECK(y >= prev);
        CHECK(soft_limit(-x, c) == -y);
        CHECK(std::abs(y) <= c);
        if (std::abs(x) <= 0.5 * c)
            CHECK(std::abs(y - x) <= 0.01 * c);
        prev = y;
    }
}

TEST_CASE("render_stimulus: deterministic, finite, bounded, both channels same length")
{
    ImpactSeriesParams a{.mu_interval_s = 0.004, .sigma_interval_s = 0.002, .mu_amp = 0.9, .sigma_amp = 0.3, .seed = 1};
    ImpactSeriesParams t{.mu_interval_s = 0.012, .sigma_interval_s = 0.003, .mu_amp = 0.85, .sigma_amp = 0.2, .seed = 2};
    const MaterialPreset m = eight_modes();
    const auto x = render_stimulus(a, t, &m, 1.5, kCfg);
    const auto y = render_stimulus(a, t, &m, 1.5, kCfg);
    CHECK(x.audio.samples == y.audio.samples);
    CHECK(x.tactile.samples == y.tactile.samples);
    CHECK(x.audio.samples.size() == 66150);
    CHECK(x.tactile.samples.size() == 66150);
    for (double v : x.audio.samples)
        REQUIRE((std::isfinite(v) && std::abs(v) <= kCfg.limiter_ceiling));
    for (double v : x.tactile.samples)
        REQUIRE((std::isfinite(v) && std::abs(v) <= kCfg.limiter_ceiling));

    // channel composition
    const auto st = render_stimulus_stages(a, t, &m, 1.5, kCfg);
    const auto audio = soft_limit(modal_filter(render_impact_train(generate_impact_sequence(a, 1.5), 66150, kCfg), m, kCfg),
                                  kCfg.limiter_ceiling);
    CHECK(audio.samples == x.audio.samples);
    CHECK(st.audio_events == generate_impact_sequence(a, 1.5));

    // bypass path: channel 0 is the limited raw train
    const auto raw = render_stimulus(a, t, nullptr, 1.5, kCfg);
    const auto expect = soft_limit(render_impact_train(generate_impact_sequence(a, 1.5), 66150, kCfg), kCfg.limiter_ceiling);
    CHECK(raw.audio.samples == expect.samples);
}

TEST_CASE("streaming render equals one-shot render for any block schedule")
{
    ImpactSeriesParams a{.mu_interval_s = 0.003, .sigma_interval_s = 0.002, .mu_amp = 0.6, .sigma_amp = 0.3, .seed = 11};
    ImpactSeriesParams t{.mu_interval_s = 0.01, .sigma_interval_s = 0.004, .mu_amp = 0.5, .sigma_amp = 0.2, .seed = 12};
    const MaterialPreset m = eight_modes();
    const double dur = 1.0;
    const auto ref = render_stimulus(a, t, &m, dur, kCfg);
    const std::size_t n = ref.frames();

    for (std::size_t bs : {64u, 128u, 512u, 4096u, 0u}) {
        StreamingRenderer r(a, t, &m, kCfg, 4096);
        std::vector<double> ao(n), to(n);
        std::mt19937 rng(static_cast<unsigned>(bs));
        std::size_t pos = 0;
        while (pos < n) {
            std::size_t len = bs ? bs : std::uniform_int_distribution<std::size_t>(1, 3000)(rng);
            len = std::min(len, n - pos);
            r.render(std::span(ao).subspan(pos, len), std::span(to).subspan(pos, len));
            pos += len;
        }
        CHECK_MESSAGE(ao == ref.audio.samples, "block " << bs);
        CHECK_MESSAGE(to == ref.tactile.samples, "block " << bs);
    }
}

TEST_CASE("streaming renderer accepts blocks larger than its scratch")
{
    ImpactSeriesParams a{.mu_interval_s = 0.005, .sigma_interval_s = 0.001, .mu_amp = 0.5, .sigma_amp = 0.1, .seed = 1};
    const auto ref = render_stimulus(a, a, nullptr, 0.5, kCfg);
    StreamingRenderer r(a, a, nullptr, kCfg, 256);
    std::vector<double> ao(ref.frames()), to(ref.frames());
    r.render(ao, to);
    CHECK(ao == ref.audio.samples);
    CHECK(to == ref.tactile.samples);
    std::vector<double> shorter(10);
    CHECK_THROWS(r.render(ao, shorter));
}

TEST_CASE("disabled channel renders zeros")
{
    ImpactSeriesParams a{.mu_interval_s = 0.005, .sigma_interval_s = 0.001, .mu_amp = 0.5, .sigma_amp = 0.1, .seed = 1};
    StreamingRenderer r(a, a, nullptr, kCfg);
    std::vector<double> ao(512), to(512);
    r.render(ao, to, false, true);
    CHECK(std::all_of(ao.begin(), ao.end(), [](double v) { return v == 0.0; }));
    CHECK(std::any_of(to.begin(), to.end(), [](double v) { return v != 0.0; }));
}

TEST_CASE("sample counting")
{
    CHECK(sample_count(1.0, kCfg) == 44100);
    CHECK(sample_count(0.0, kCfg) == 0);
    CHECK_THROWS_AS(sample_count(-1.0, kCfg), ParameterError);
    CHECK(impact_start_sample(0.01, 44100.0) == 441);
}

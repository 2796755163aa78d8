#include "tribo/control.hpp"

#include <doctest.h>

#include <cmath>
#include <thread>

using namespace tribo;

namespace {

std::vector<ControlFrame> uniform_motion(double speed, double rate_hz, double duration_s, double t0 = 0.0)
{
    std::vector<ControlFrame> f;
    const int n = static_cast<int>(duration_s * rate_hz);
    for (int i = 0; i <= n; ++i) {
        const double t = i / rate_hz;
        f.push_back({t0 + t, std::fmod(speed * t, 1.0), 0.5, std::nullopt});
    }
    return f;
}

} // namespace

TEST_CASE("smooth_param examples and bounds")
{
    CHECK(smooth_param(0.3, 0.3, 0.03, 0.01) == 0.3);
    CHECK(smooth_param(0.0, 1.0, 0.03, 30.0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(smooth_param(0.0, 1.0, 0.03, 0.03) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
    CHECK(smooth_param(0.0, 1.0, 0.03, 0.03) == doctest::Approx(0.632121).epsilon(1e-6));
    for (double cur : {-1.0, 0.0, 0.7})
        for (double tgt : {-2.0, 0.2, 5.0})
            for (double dt : {0.0, 1e-6, 0.01, 1.0, 1e6}) {
                const double v = smooth_param(cur, tgt, 0.03, dt);
                CHECK(v >= std::min(cur, tgt));
                CHECK(v <= std::max(cur, tgt));
            }
}

TEST_CASE("velocity estimate: stationary, single frame, uniform motion")
{
    const ControlSettings s;
    std::vector<ControlFrame> still;
    for (int i = 0; i < 50; ++i)
        still.push_back({i / 120.0, 0.3, 0.3, std::nullopt});
    CHECK(estimate_velocity(still, 0.03, s) == 0.0);

    const std::vector<ControlFrame> one{{0.0, 0.1, 0.1, std::nullopt}};
    CHECK(estimate_velocity(one, 0.03, s) == 0.0);

    // exactly v_ref for 10 time constants, without wrapping
    std::vector<ControlFrame> move;
    for (int i = 0; i <= 36; ++i) {
        const double t = i / 120.0;
        move.push_back({t, 0.1 + s.v_ref * t, 0.5, std::nullopt});
    }
    CHECK(estimate_velocity(move, 0.03, s) == doctest::Approx(1.0).epsilon(0.01));
    // twice the reference speed reads 2
    for (auto& f : move)
        f.x = 0.1 + 2.0 * s.v_ref * f.t_s;
    CHECK(estimate_velocity(move, 0.03, s) == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("velocity goes to zero once the newest frame is stale")
{
    const ControlSettings s;
    std::vector<ControlFrame> move;
    for (int i = 0; i <= 36; ++i)
        move.push_back({i / 120.0, 0.1 + 0.5 * i / 120.0, 0.5, std::nullopt});
    const double last = move.back().t_s;
    CHECK(estimate_velocity(move, 0.03, s, last + 0.05) > 0.9);
    CHECK(estimate_velocity(move, 0.03, s, last + 0.11) == 0.0);
}

TEST_CASE("timestamps going backwards are dropped and counted")
{
    VelocityEstimator est;
    CHECK(est.push({0.0, 0.1, 0.1, std::nullopt}));
    CHECK(est.push({0.01, 0.11, 0.1, std::nullopt}));
    CHECK(!est.push({0.005, 0.9, 0.9, std::nullopt}));
    CHECK(!est.push({NAN, 0.5, 0.5, std::nullopt}));
    CHECK(est.dropped() == 2);
    CHECK(est.frames() == 2);
    CHECK(est.value() > 0.0);
}

TEST_CASE("shifted timestamps give identical velocities")
{
    // dyadic frame times keep every subtraction exact
    const auto a = uniform_motion(0.3, 128.0, 1.0);
    for (double shift : {1.0, 1000.0, 65536.0}) {
        auto b = a;
        for (auto& f : b)
            f.t_s += shift;
        CHECK(estimate_velocity(a, 0.03) == estimate_velocity(b, 0.03));
    }
    // arbitrary rate: equal up to round-off in the differences
    const auto c = uniform_motion(0.3, 120.0, 1.0);
    auto d = c;
    for (auto& f : d)
        f.t_s += 12.345;
    CHECK(estimate_velocity(c, 0.03) == doctest::Approx(estimate_velocity(d, 0.03)).epsilon(1e-9));
}

TEST_CASE("frames are clamped to the unit square")
{
    const auto f = ControlFrame{0.0, 1.5, -0.2, 3.0}.clamped();
    CHECK(f.x == 1.0);
    CHECK(f.y == 0.0);
    CHECK(*f.pressure == 1.0);
}

TEST_CASE("block-boundary application")
{
    const ActionMapping m = default_action_mapping();
    const ControlSettings s;
    const EngineParams init = initial_engine_params(m, 0);
    CHECK(!init.gate_open());

    // no pending update: unchanged
    const EngineParams same = apply_control_at_block_boundary(nullptr, init, m, s);
    CHECK(same.revision == init.revision);
    CHECK(same.audio == init.audio);

    SmoothedState st;
    st.alpha = 0.5;
    st.velocity_norm = 2.0;
    st.gate = Gate::open;
    st.material_index = 1;
    const EngineParams p = apply_control_at_block_boundary(&st, init, m, s);
    CHECK(p.gate_open());
    CHECK(p.revision == init.revision + 1);
    CHECK(p.audio.mu_interval_s == doctest::Approx(0.012 / 2.0).epsilon(1e-12));
    CHECK(p.tactile.mu_amp == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p.state.material_index == 1);

    // below the floor: silent, mean interval at the floor rule
    st.velocity_norm = 0.0;
    const EngineParams q = apply_control_at_block_boundary(&st, p, m, s);
    CHECK(!q.gate_open());
    CHECK(q.audio.mu_interval_s == doctest::Approx(0.012 / 0.05).epsilon(1e-12));

    // out-of-range alpha is clamped and flagged
    st.velocity_norm = 1.0;
    st.alpha = 1.4;
    const EngineParams r = apply_control_at_block_boundary(&st, p, m, s);
    CHECK(r.state.alpha == 1.0);
    CHECK(r.state.alpha_saturated);
    CHECK(r.audio.mu_interval_s == doctest::Approx(m.scratch_audio.mu_interval_s).epsilon(1e-12));
    CHECK(r.audio.mu_amp == doctest::Approx(m.scratch_audio.mu_amp).epsilon(1e-12));
}

TEST_CASE("resolve_control: staleness and fixed velocity")
{
    const ControlSettings s;
    ControlSnapshot snap;
    snap.alpha = 0.4;
    snap.velocity_norm = 1.0;
    // no pointer ever: stale
    CHECK(resolve_control(snap, 0, s).gate == Gate::silent);
    snap.last_pointer_ns = 1'000'000'000;
    CHECK(resolve_control(snap, 1'050'000'000, s).gate == Gate::open);
    CHECK(resolve_control(snap, 1'100'000'000, s).gate == Gate::open);
    const SmoothedState stale = resolve_control(snap, 1'100'000'001, s);
    CHECK(stale.gate == Gate::silent);
    CHECK(stale.velocity_norm == 0.0);
    CHECK(stale.alpha == 0.4);
    snap.velocity_norm = 0.01;
    CHECK(resolve_control(snap, 1'050'000'000, s).gate == Gate::silent);
    snap.fixed_velocity = true;
    snap.velocity_norm = 1.0;
    snap.last_pointer_ns = -1;
    CHECK(resolve_control(snap, 99'000'000'000, s).gate == Gate::open);
}

TEST_CASE("snapshot exchange: consumer sees the latest complete value")
{
    SnapshotExchange<ControlSnapshot> ex;
    ControlSnapshot out;
    CHECK(!ex.consume(out));
    for (int i = 0; i < 10; ++i) {
        ControlSnapshot s;
        s.alpha = i / 10.0;
        ex.publish(s);
    }
    CHECK(ex.consume(out));
    CHECK(out.alpha == 0.9);
    CHECK(!ex.consume(out));
}

TEST_CASE("snapshot exchange under concurrency never tears")
{
    struct Pair {
        std::uint64_t a = 0;
        std::uint64_t b = 0;
    };
    SnapshotExchange<Pair> ex;
    std::atomic<bool> done{false};
    std::thread producer([&] {
        for (std::uint64_t i = 1; i <= 200000; ++i)
            ex.publish({i, ~i});
        done = true;
    });
    Pair p;
    std::uint64_t last = 0, reads = 0;
    bool ok = true;
    for (;;) {
        const bool finished = done.load();
        const bool got = ex.consume(p);
        if (got) {
            ok &= p.b == ~p.a;
            ok &= p.a >= last;
            last = p.a;
            ++reads;
        }
        if (finished && !got)
            break;
    }
    producer.join();
    CHECK(ok);
    CHECK(last == 200000);
    CHECK(reads > 0);
}

TEST_CASE("publisher: last writer wins, alpha clamps")
{
    ControlPublisher pub(ControlSettings{}, ControlSnapshot{});
    ControlSnapshot s;
    CHECK(pub.consume(s));
    const auto [a, sat] = pub.set_alpha(1.7);
    CHECK(a == 1.0);
    CHECK(sat);
    pub.set_alpha(0.25);
    pub.set_material(2);
    pub.set_modality(true, false);
    CHECK(pub.consume(s));
    CHECK(s.alpha == 0.25);
    CHECK(!s.alpha_saturated);
    CHECK(s.material_index == 2);
    CHECK(!s.tactile_on);

    pub.on_pointer({0.0, 0.1, 0.5, std::nullopt}, 100);
    pub.on_pointer({0.01, 0.105, 0.5, std::nullopt}, 200);
    pub.on_pointer({0.005, 0.9, 0.5, std::nullopt}, 300); // backwards: dropped
    CHECK(pub.dropped_frames() == 1);
    CHECK(pub.consume(s));
    CHECK(s.last_pointer_ns == 200);
    CHECK(s.velocity_norm > 0.0);

    pub.set_fixed_velocity(1.0);
    CHECK(pub.current().fixed_velocity);
    CHECK(pub.current().velocity_norm == 1.0);
    pub.on_pointer({0.02, 0.5, 0.5, std::nullopt}, 400);
    CHECK(pub.current().velocity_norm == 1.0);
}

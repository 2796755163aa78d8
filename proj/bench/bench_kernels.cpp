// Serial vs OpenMP kernel timings, plus the per-block real-time render cost.

#include "tribo/engine.hpp"
#include "tribo/kernels.hpp"

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <random>

using namespace tribo;
using clk = std::chrono::steady_clock;

namespace {

template <class F>
double best_of(int reps, F&& f)
{
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = clk::now();
        f();
        best = std::min(best, std::chrono::duration<double>(clk::now() - t0).count());
    }
    return best;
}

} // namespace

int main()
{
    std::printf("threads: %d\n", omp_get_max_threads());
    const EngineConfig config = default_engine_config();
    const double fs = config.render.sample_rate_hz;

    // modal bank, 10 s of noise through 32 modes
    std::vector<ResonatorCoeffs> coeffs;
    for (int m = 0; m < 32; ++m)
        coeffs.push_back(ResonatorCoeffs::from_mode({300.0 + 250.0 * m, 0.05, 0.001}, fs));
    std::vector<double> in(static_cast<std::size_t>(10 * fs)), out(in.size());
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    for (auto& v : in)
        v = nd(rng);
    std::vector<ResonatorState> st(coeffs.size());
    const double ts = best_of(3, [&] {
        std::fill(st.begin(), st.end(), ResonatorState{});
        kernels::modal_bank_serial(coeffs, st, in, out);
    });
    const double tp = best_of(3, [&] {
        std::fill(st.begin(), st.end(), ResonatorState{});
        kernels::modal_bank_omp(coeffs, st, in, out);
    });
    std::printf("modal bank 32 modes x 10 s: serial %.2f ms, omp %.2f ms\n", ts * 1e3, tp * 1e3);

    // permutation test, 96 rows x 4 predictors
    std::vector<double> x(4 * 96), y(96);
    for (auto& v : x)
        v = nd(rng);
    for (auto& v : y)
        v = nd(rng);
    const double ps = best_of(3, [&] { kernels::permutation_hits_serial(x, 4, y, 20000, 7); });
    const double pp = best_of(3, [&] { kernels::permutation_hits_omp(x, 4, y, 20000, 7); });
    std::printf("permutations 20000 x 96 rows: serial %.2f ms, omp %.2f ms\n", ps * 1e3, pp * 1e3);

    // real-time block: 8-mode material, both channels
    Engine engine(config, 1);
    std::vector<double> a(config.render.block_size), t(config.render.block_size);
    SmoothedState s;
    s.alpha = 0.0;
    s.velocity_norm = 1.0;
    s.material_index = 0;
    s.gate = Gate::open;
    engine.process_block(&s, a, t);
    const int n = 2000;
    const auto t0 = clk::now();
    for (int i = 0; i < n; ++i)
        engine.process_block(nullptr, a, t);
    const double per = std::chrono::duration<double>(clk::now() - t0).count() / n;
    const double period = static_cast<double>(config.render.block_size) / fs;
    std::printf("block %zu frames: %.4f ms (period %.3f ms, %.2f%%)\n", config.render.block_size, per * 1e3,
                period * 1e3, 100.0 * per / period);
}

#include "tribo/kernels.hpp"

#include <doctest.h>

#include <omp.h>

#include <random>

using namespace tribo;

namespace {

std::vector<ResonatorCoeffs> bank(int modes)
{
    std::vector<ResonatorCoeffs> c;
    for (int m = 0; m < modes; ++m)
        c.push_back(ResonatorCoeffs::from_mode({150.0 + 613.0 * m, 0.02 + 0.05 * (m % 5), 0.01 / (m + 1)}, 44100.0));
    return c;
}

std::vector<double> noise(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    std::vector<double> x(n);
    for (auto& v : x)
        v = nd(rng);
    return x;
}

} // namespace

TEST_CASE("modal bank: OpenMP kernel equals the serial reference bit for bit")
{
    for (int threads : {1, 2, 4}) {
        omp_set_num_threads(threads);
        for (int modes : {1, 3, 8, 64}) {
            for (std::size_t chunk : {1u, 100u, 8192u}) {
                const auto c = bank(modes);
                const auto x = noise(30000, static_cast<std::uint64_t>(modes));
                std::vector<ResonatorState> s1(c.size()), s2(c.size());
                std::vector<double> y1(x.size()), y2(x.size());
                // two calls, so carried state is compared too
                const std::span<const double> xs(x);
                kernels::modal_bank_serial(c, s1, xs.first(12345), std::span(y1).first(12345));
                kernels::modal_bank_serial(c, s1, xs.subspan(12345), std::span(y1).subspan(12345));
                kernels::modal_bank_omp(c, s2, xs.first(12345), std::span(y2).first(12345), chunk);
                kernels::modal_bank_omp(c, s2, xs.subspan(12345), std::span(y2).subspan(12345), chunk);
                CHECK_MESSAGE(y1 == y2, "threads " << threads << " modes " << modes << " chunk " << chunk);
                for (std::size_t m = 0; m < c.size(); ++m) {
                    CHECK(s1[m].y1 == s2[m].y1);
                    CHECK(s1[m].y2 == s2[m].y2);
                    CHECK(s1[m].x1 == s2[m].x1);
                }
            }
        }
    }
}

TEST_CASE("modal bank: ModalBank::process uses the serial kernel")
{
    MaterialPreset m{"x", {{500.0, 0.1, 0.01}, {1800.0, 0.05, 0.02}}};
    ModalBank b(m, 44100.0);
    const auto x = noise(5000, 3);
    std::vector<double> y(x.size()), ref(x.size());
    b.process(x, y);
    std::vector<ResonatorState> s(2);
    kernels::modal_bank_serial(b.coeffs(), s, x, ref);
    CHECK(y == ref);
}

TEST_CASE("permutation counts do not depend on the thread count")
{
    const std::size_t n = 96;
    auto x = noise(3 * n, 5);
    auto y = noise(n, 6);
    for (std::size_t j = 0; j < 3; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            mean += x[j * n + i];
        mean /= n;
        for (std::size_t i = 0; i < n; ++i)
            x[j * n + i] -= mean;
    }
    const auto ref = kernels::permutation_hits_serial(x, 3, y, 5000, 42);
    for (int threads : {1, 2, 3, 8}) {
        omp_set_num_threads(threads);
        CHECK(kernels::permutation_hits_omp(x, 3, y, 5000, 42) == ref);
    }
    CHECK(kernels::permutation_hits_serial(x, 3, y, 5000, 43) != ref);
    for (auto h : ref)
        CHECK(h <= 5000);
}

TEST_CASE("permutation hits: perfect dependence is never beaten, no dependence often is")
{
    const std::size_t n = 48;
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = static_cast<double>(i) - (n - 1) / 2.0;
        y[i] = 3.0 * x[i] + 1.0;
    }
    const auto hits = kernels::permutation_hits_serial(x, 1, y, 2000, 1);
    CHECK(hits[0] == 0);

    // a response that does not vary: every permutation ties the observed statistic
    std::vector<double> flat(n, 0.5);
    CHECK(kernels::permutation_hits_serial(x, 1, flat, 100, 1)[0] == 100);
}

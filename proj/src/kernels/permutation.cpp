#include "tribo/kernels.hpp"

#include "tribo/impact_model.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <vector>

namespace tribo::kernels {

namespace {

struct PermutationProblem {
    std::span<const double> predictors;
    std::size_t n_predictors;
    std::span<const double> y;
    std::vector<double> thresholds;

    PermutationProblem(std::span<const double> x, std::size_t k, std::span<const double> response)
        : predictors(x), n_predictors(k), y(response), thresholds(k)
    {
        for (std::size_t j = 0; j < k; ++j) {
            const double obs = std::abs(dot(j, y));
            thresholds[j] = obs - 1e-12 * (obs + 1.0);
        }
    }

    [[nodiscard]] double dot(std::size_t column, std::span<const double> v) const
    {
        const double* x = predictors.data() + column * y.size();
        double acc = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i)
            acc += x[i] * v[i];
        return acc;
    }

    // Fisher-Yates from a per-permutation stream.
    void shuffle_into(std::size_t k, std::uint64_t seed, std::vector<double>& buf) const
    {
        buf.assign(y.begin(), y.end());
        std::mt19937_64 rng(mix_seed(seed ^ mix_seed(static_cast<std::uint64_t>(k))));
        for (std::size_t i = buf.size(); i > 1; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            std::swap(buf[i - 1], buf[pick(rng)]);
        }
    }
};

} // namespace

std::vector<std::uint64_t> permutation_hits_serial(std::span<const double> predictors, std::size_t n_predictors,
                                                   std::span<const double> y, std::size_t n_permutations,
                                                   std::uint64_t seed)
{
    const PermutationProblem problem(predictors, n_predictors, y);
    std::vector<std::uint64_t> hits(n_predictors, 0);
    std::vector<double> buf;
    for (std::size_t k = 0; k < n_permutations; ++k) {
        problem.shuffle_into(k, seed, buf);
        for (std::size_t j = 0; j < n_predictors; ++j)
            if (std::abs(problem.dot(j, buf)) >= problem.thresholds[j])
                ++hits[j];
    }
    return hits;
}

std::vector<std::uint64_t> permutation_hits_omp(std::span<const double> predictors, std::size_t n_predictors,
                                                std::span<const double> y, std::size_t n_permutations,
                                                std::uint64_t seed)
{
    const PermutationProblem problem(predictors, n_predictors, y);
    std::vector<std::uint64_t> hits(n_predictors, 0);
    const auto perms = static_cast<std::ptrdiff_t>(n_permutations);

#pragma omp parallel
    {
        std::vector<std::uint64_t> local(n_predictors, 0);
        std::vector<double> buf;
#pragma omp for schedule(static) nowait
        for (std::ptrdiff_t k = 0; k < perms; ++k) {
            problem.shuffle_into(static_cast<std::size_t>(k), seed, buf);
            for (std::size_t j = 0; j < n_predictors; ++j)
                if (std::abs(problem.dot(j, buf)) >= problem.thresholds[j])
                    ++local[j];
        }
#pragma omp critical
        for (std::size_t j = 0; j < n_predictors; ++j)
            hits[j] += local[j];
    }
    return hits;
}

} // namespace tribo::kernels

#pragma once

// Data-parallel inner loops. Each kernel has a serial reference and an OpenMP
// variant; the two are required to agree bit for bit (tests/test_kernels.cpp).

#include "tribo/dsp.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace tribo::kernels {

/// out[n] = sum over modes of resonator m driven by in[n], modes summed in index order.
void modal_bank_serial(std::span<const ResonatorCoeffs> coeffs, std::span<ResonatorState> states,
                       std::span<const double> in, std::span<double> out);

/// Same result as modal_bank_serial. Modes run in parallel over time chunks of
/// `chunk` samples, each into its own lane; lanes are then summed in mode order.
void modal_bank_omp(std::span<const ResonatorCoeffs> coeffs, std::span<ResonatorState> states,
                    std::span<const double> in, std::span<double> out, std::size_t chunk = 8192);

/// Permutation counts for several predictors sharing one response.
///
/// `predictors` holds `n_predictors` centered columns of length y.size()
/// (column-major). For each permutation of y, a predictor scores a hit when
/// |x . y_perm| >= |x . y| (up to a relative 1e-12 tie margin). Permutation k
/// is drawn from its own stream seeded by (seed, k), so the counts do not
/// depend on the thread count.
std::vector<std::uint64_t> permutation_hits_serial(std::span<const double> predictors, std::size_t n_predictors,
                                                   std::span<const double> y, std::size_t n_permutations,
                                                   std::uint64_t seed);

std::vector<std::uint64_t> permutation_hits_omp(std::span<const double> predictors, std::size_t n_predictors,
                                                std::span<const double> y, std::size_t n_permutations,
                                                std::uint64_t seed);

} // namespace tribo::kernels

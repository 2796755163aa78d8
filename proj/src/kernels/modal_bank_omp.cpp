#include "tribo/kernels.hpp"

#include <algorithm>
#include <vector>

namespace tribo::kernels {

void modal_bank_omp(std::span<const ResonatorCoeffs> coeffs, std::span<ResonatorState> states,
                    std::span<const double> in, std::span<double> out, std::size_t chunk)
{
    const auto modes = static_cast<std::ptrdiff_t>(coeffs.size());
    chunk = std::max<std::size_t>(chunk, 1);
    std::vector<double> lanes(static_cast<std::size_t>(modes) * chunk);

    for (std::size_t begin = 0; begin < in.size(); begin += chunk) {
        const std::size_t len = std::min(chunk, in.size() - begin);

#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t m = 0; m < modes; ++m) {
            ResonatorState s = states[m];
            const ResonatorCoeffs c = coeffs[m];
            double* lane = lanes.data() + static_cast<std::size_t>(m) * chunk;
            for (std::size_t n = 0; n < len; ++n)
                lane[n] = s.tick(c, in[begin + n]);
            states[m] = s;
        }

        const auto len_i = static_cast<std::ptrdiff_t>(len);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t n = 0; n < len_i; ++n) {
            double acc = 0.0;
            for (std::ptrdiff_t m = 0; m < modes; ++m)
                acc += lanes[static_cast<std::size_t>(m) * chunk + static_cast<std::size_t>(n)];
            out[begin + static_cast<std::size_t>(n)] = acc;
        }
    }
}

} // namespace tribo::kernels

#include "tribo/kernels.hpp"

namespace tribo::kernels {

void modal_bank_serial(std::span<const ResonatorCoeffs> coeffs, std::span<ResonatorState> states,
                       std::span<const double> in, std::span<double> out)
{
    const std::size_t modes = coeffs.size();
    for (std::size_t n = 0; n < in.size(); ++n) {
        const double x = in[n];
        double acc = 0.0;
        for (std::size_t m = 0; m < modes; ++m)
            acc += states[m].tick(coeffs[m], x);
        out[n] = acc;
    }
}

} // namespace tribo::kernels

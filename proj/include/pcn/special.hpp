#ifndef PCN_SPECIAL_HPP
#define PCN_SPECIAL_HPP

#include <cmath>
#include <cstdint>

#include "pcn/errors.hpp"

namespace pcn {

// ln C(t, i). Accurate to better than 1e-12 relative error for t up to 1e6.
//
// For a small min(i, t-i) the log-gamma difference cancels catastrophically
// (lgamma grows like t*ln t while the result can be as small as ln t), so
// those cases are summed term by term instead; every term ln((t-i+k)/k) is
// positive, which keeps the accumulated rounding near machine precision.
inline double log_binomial(std::uint64_t t, std::uint64_t i) {
    if (i > t) {
        throw DomainError("log_binomial: i=" + std::to_string(i) +
                          " exceeds t=" + std::to_string(t));
    }
    const std::uint64_t k = (i < t - i) ? i : t - i;
    if (k == 0) return 0.0;
    if (k <= 1024) {
        double sum = 0.0;
        for (std::uint64_t j = 1; j <= k; ++j) {
            sum += std::log(static_cast<double>(t - k + j) /
                            static_cast<double>(j));
        }
        return sum;
    }
    return std::lgamma(static_cast<double>(t) + 1.0) -
           std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(t - k) + 1.0);
}

// ln(i!)
inline double log_factorial(std::uint64_t i) {
    return std::lgamma(static_cast<double>(i) + 1.0);
}

}  // namespace pcn

#endif  // PCN_SPECIAL_HPP

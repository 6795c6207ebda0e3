#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace tailshape {

/// Zero-based index of the empirical q-quantile of n sorted values under the
/// ceiling rank rule: ceil(q (n - 1)).
inline std::size_t quantile_index(std::size_t n, double q) {
    if (n == 0) throw std::invalid_argument("quantile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile level outside [0, 1]");
    const double pos = q * static_cast<double>(n - 1);
    // Guard against 0.9 * 9 = 8.100000000000001 style round-off pushing the
    // ceiling one rank up.
    const double snapped = std::abs(pos - std::round(pos)) < 1e-9 ? std::round(pos) : pos;
    return std::min(n - 1, static_cast<std::size_t>(std::ceil(snapped)));
}

inline double quantile_sorted(std::span<const double> sorted, double q) {
    return sorted[quantile_index(sorted.size(), q)];
}

inline double quantile(std::vector<double> values, double q) {
    const std::size_t k = quantile_index(values.size(), q);
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
    return values[k];
}

}  // namespace tailshape

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace tailshape {

struct CcdfPoint {
    double b = 0.0;
    double p = 0.0;               // fraction of samples strictly greater than b
    std::size_t exceedances = 0;  // count of samples strictly greater than b
};

struct Ccdf {
    std::vector<CcdfPoint> points;  // one per distinct sample value, ascending
    std::size_t n = 0;

    /// P(B > b) of the empirical distribution at an arbitrary b.
    double at(double b) const;
};

Ccdf empirical_ccdf(std::span<const double> samples);

struct SlopeFit {
    double alpha = 0.0;  // minus the log-log slope
    double intercept = 0.0;
    std::size_t points = 0;
};

/// OLS of log p on log b over CCDF points with b >= b_min, p > 0 and at least
/// three exceedances.
SlopeFit fit_slope(const Ccdf& ccdf, double b_min);

/// Precomputed suffix sums so refits at many cutoffs cost O(log n) each.
class SlopeFitter {
public:
    explicit SlopeFitter(const Ccdf& ccdf);
    /// Points usable at cutoff b_min.
    std::size_t usable(double b_min) const;
    SlopeFit fit(double b_min) const;

private:
    std::vector<double> b_;
    std::vector<double> sx_, sy_, sxx_, sxy_;
};

struct BminSelection {
    double b_min = 0.0;
    double alpha = 0.0;
    double intercept = 0.0;
    std::size_t points = 0;
    double quantile_b = 0.0;      // cutoff of the upper-quantile rule
    double quantile_alpha = 0.0;  // slope at that cutoff
    std::size_t quantile_points = 0;
    bool unreliable = false;      // fewer than 10 tail points at the quantile rule
};

/// Upper-quantile cutoff, then stepped down five order statistics at a time
/// while the slope stays within `stability` (relative) of the quantile-rule
/// slope. The descent needs at least 50 samples.
BminSelection select_bmin(std::span<const double> samples, double q_b = 0.9, double stability = 0.05);

struct BootstrapCi {
    double level = 0.95;
    double lo = 0.0;
    double hi = 0.0;
    std::size_t replicates = 0;
    std::size_t skipped = 0;
};

/// Percentile bootstrap of the slope estimate. Replicate r resamples with
/// the stream (seed, r, bootstrap), reruns select_bmin and refits. The
/// interval is widened if needed so that it contains `estimate`.
BootstrapCi bootstrap_ci(std::span<const double> samples, double estimate, std::size_t replicates, double level,
                         std::uint64_t seed, double q_b = 0.9, double stability = 0.05);

struct TailIndex {
    double value = 0.0;
    bool active = false;  // false: gamma <= 0, no growth channel
    std::string note;
};

TailIndex theoretical_index(double lambda_u, double gamma_u);

struct TruncationBound {
    bool available = false;
    double log_value = 0.0;  // natural log of M_T; -inf when M_T = 0
    double value = 0.0;      // M_T, +inf when it overflows a double
    std::size_t rounds = 0;
    std::string note;
};

/// Worst-case round iteration: ceil(T / min_dwell) rounds, each a growth
/// u -> e^{A T} (u + T f) followed by contraction u -> rho u + (M_c / kappa) f.
/// M_T is the largest value seen, including the pre-contraction peaks.
TruncationBound truncation_bound(double a_star, double rho, double kappa, double m_c, double horizon,
                                 double min_dwell, double x0_norm, double f_sup);

}  // namespace tailshape

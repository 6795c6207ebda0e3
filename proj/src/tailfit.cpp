#include "tailshape/tailfit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tailshape/errors.hpp"
#include "tailshape/quantile.hpp"
#include "tailshape/rng.hpp"

namespace tailshape {

namespace {

Ccdf ccdf_from_sorted(std::span<const double> sorted) {
    Ccdf c;
    c.n = sorted.size();
    const double n = static_cast<double>(c.n);
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        const std::size_t above = sorted.size() - j - 1;
        c.points.push_back({sorted[i], static_cast<double>(above) / n, above});
        i = j + 1;
    }
    return c;
}

double log_add_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

BminSelection select_from_sorted(std::span<const double> sorted, double q_b, double stability) {
    if (sorted.empty()) throw ParameterError("select_bmin: empty sample");
    const Ccdf ccdf = ccdf_from_sorted(sorted);
    const SlopeFitter fitter(ccdf);
    BminSelection sel;
    const std::size_t k0 = quantile_index(sorted.size(), q_b);
    sel.quantile_b = sorted[k0];
    sel.quantile_points = fitter.usable(sel.quantile_b);
    sel.unreliable = sel.quantile_points < 10;
    if (sel.quantile_points < 2) {
        // Too few exceedances above the quantile: fall back to the highest
        // cutoff that still leaves two fit points.
        std::size_t k = k0;
        while (k > 0 && fitter.usable(sorted[k]) < 2) --k;
        sel.quantile_b = sorted[k];
        sel.quantile_points = fitter.usable(sel.quantile_b);
    }
    const SlopeFit base = fitter.fit(sel.quantile_b);
    sel.quantile_alpha = base.alpha;
    sel.b_min = sel.quantile_b;
    sel.alpha = base.alpha;
    sel.intercept = base.intercept;
    sel.points = base.points;
    if (sorted.size() < 50) return sel;
    std::size_t start = k0;
    while (start > 0 && sorted[start] > sel.quantile_b) --start;
    for (std::size_t k = start; k >= 5;) {
        k -= 5;
        const double b = sorted[k];
        if (fitter.usable(b) < 2) continue;
        const SlopeFit f = fitter.fit(b);
        if (std::abs(f.alpha - base.alpha) > stability * std::abs(base.alpha)) break;
        sel.b_min = b;
        sel.alpha = f.alpha;
        sel.intercept = f.intercept;
        sel.points = f.points;
    }
    return sel;
}

}  // namespace

double Ccdf::at(double b) const {
    auto it = std::upper_bound(points.begin(), points.end(), b, [](double v, const CcdfPoint& p) { return v < p.b; });
    if (it == points.begin()) return 1.0;
    return std::prev(it)->p;
}

Ccdf empirical_ccdf(std::span<const double> samples) {
    if (samples.empty()) throw ParameterError("empirical_ccdf: empty sample");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    return ccdf_from_sorted(sorted);
}

SlopeFitter::SlopeFitter(const Ccdf& ccdf) {
    for (const auto& p : ccdf.points) {
        if (p.p > 0.0 && p.exceedances >= 3 && p.b > 0.0) b_.push_back(p.b);
    }
    const std::size_t m = b_.size();
    sx_.assign(m + 1, 0.0);
    sy_.assign(m + 1, 0.0);
    sxx_.assign(m + 1, 0.0);
    sxy_.assign(m + 1, 0.0);
    std::size_t idx = m;
    for (auto it = ccdf.points.rbegin(); it != ccdf.points.rend(); ++it) {
        if (!(it->p > 0.0 && it->exceedances >= 3 && it->b > 0.0)) continue;
        --idx;
        const double x = std::log(it->b);
        const double y = std::log(it->p);
        sx_[idx] = sx_[idx + 1] + x;
        sy_[idx] = sy_[idx + 1] + y;
        sxx_[idx] = sxx_[idx + 1] + x * x;
        sxy_[idx] = sxy_[idx + 1] + x * y;
    }
}

std::size_t SlopeFitter::usable(double b_min) const {
    return static_cast<std::size_t>(b_.end() - std::lower_bound(b_.begin(), b_.end(), b_min));
}

SlopeFit SlopeFitter::fit(double b_min) const {
    const std::size_t start = static_cast<std::size_t>(std::lower_bound(b_.begin(), b_.end(), b_min) - b_.begin());
    const std::size_t m = b_.size() - start;
    if (m < 2) throw ParameterError("fit_slope: fewer than two usable tail points above b_min");
    const double n = static_cast<double>(m);
    // Center before combining the sums to limit cancellation.
    const double mx = sx_[start] / n;
    const double my = sy_[start] / n;
    const double vxx = sxx_[start] - n * mx * mx;
    const double vxy = sxy_[start] - n * mx * my;
    if (!(vxx > 0.0)) throw ParameterError("fit_slope: tail points share one abscissa");
    const double slope = vxy / vxx;
    return {-slope, my - slope * mx, m};
}

SlopeFit fit_slope(const Ccdf& ccdf, double b_min) {
    bool any_positive = false;
    for (const auto& p : ccdf.points)
        if (p.b >= b_min && p.p > 0.0) any_positive = true;
    if (!any_positive) throw ParameterError("fit_slope: all tail probabilities are zero");
    return SlopeFitter(ccdf).fit(b_min);
}

BminSelection select_bmin(std::span<const double> samples, double q_b, double stability) {
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    return select_from_sorted(sorted, q_b, stability);
}

BootstrapCi bootstrap_ci(std::span<const double> samples, double estimate, std::size_t replicates, double level,
                         std::uint64_t seed, double q_b, double stability) {
    if (samples.empty()) throw ParameterError("bootstrap_ci: empty sample");
    if (!(level > 0.0 && level < 1.0)) throw ParameterError("bootstrap_ci: level must lie in (0, 1)");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();

    BootstrapCi ci;
    ci.level = level;
    std::vector<double> alphas;
    alphas.reserve(replicates);
    std::vector<std::uint32_t> counts(n);
    std::vector<double> resample(n);
    for (std::size_t r = 0; r < replicates; ++r) {
        StreamRng rng(seed, r, Stream::bootstrap);
        // Resampling the sorted data by multiplicity keeps the replicate sorted.
        std::fill(counts.begin(), counts.end(), 0u);
        for (std::size_t i = 0; i < n; ++i) ++counts[rng.below(n)];
        std::size_t k = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::uint32_t c = 0; c < counts[i]; ++c) resample[k++] = sorted[i];
        if (resample.front() == resample.back()) {
            ++ci.skipped;
            continue;
        }
        try {
            alphas.push_back(select_from_sorted(resample, q_b, stability).alpha);
        } catch (const ParameterError&) {
            ++ci.skipped;
        }
    }
    ci.replicates = alphas.size();
    if (alphas.empty()) {
        ci.lo = ci.hi = estimate;
        return ci;
    }
    std::sort(alphas.begin(), alphas.end());
    ci.lo = quantile_sorted(alphas, (1.0 - level) / 2.0);
    ci.hi = quantile_sorted(alphas, (1.0 + level) / 2.0);
    ci.lo = std::min(ci.lo, estimate);
    ci.hi = std::max(ci.hi, estimate);
    return ci;
}

TailIndex theoretical_index(double lambda_u, double gamma_u) {
    TailIndex t;
    if (!(gamma_u > 0.0)) {
        t.active = false;
        t.value = std::numeric_limits<double>::quiet_NaN();
        t.note = "no growth channel; heavy-tail mechanism inactive";
        return t;
    }
    t.active = true;
    t.value = lambda_u / gamma_u;
    return t;
}

TruncationBound truncation_bound(double a_star, double rho, double kappa, double m_c, double horizon,
                                 double min_dwell, double x0_norm, double f_sup) {
    TruncationBound tb;
    if (!(rho < 1.0) || !(rho >= 0.0) || !(kappa > 0.0)) {
        tb.note = "rho >= 1: truncation unavailable, exponent improvement only";
        return tb;
    }
    if (!(horizon > 0.0) || !(min_dwell > 0.0)) throw ParameterError("truncation_bound: horizon and dwell must be positive");
    tb.available = true;
    tb.rounds = static_cast<std::size_t>(std::ceil(horizon / min_dwell));
    const double ninf = -std::numeric_limits<double>::infinity();
    auto safe_log = [&](double v) { return v > 0.0 ? std::log(v) : ninf; };

    const double log_growth = a_star * horizon;
    const double log_forced_peak = safe_log(horizon * f_sup);
    const double log_inflow = safe_log(m_c / kappa * f_sup);
    const double log_rho = safe_log(rho);

    double log_u = safe_log(x0_norm);
    double log_max = log_u;
    for (std::size_t k = 0; k < tb.rounds; ++k) {
        const double log_pre = log_add_exp(log_u, log_forced_peak);
        const double log_peak = log_pre == ninf ? ninf : log_pre + log_growth;
        log_max = std::max(log_max, log_peak);
        log_u = log_add_exp(log_peak == ninf ? ninf : log_rho + log_peak, log_inflow);
        log_max = std::max(log_max, log_u);
    }
    tb.log_value = log_max;
    tb.value = std::exp(log_max);
    return tb;
}

}  // namespace tailshape

#include "tailshape/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "tailshape/quantile.hpp"

namespace tailshape {

namespace {

struct Run {
    double t0, t1;
    double norm0, norm1;
};

// Maximal runs of consecutive samples labeled (regime, normal). A run ends at
// the switch sample that carries the next labels; the state is continuous
// there, so its norm closes the run.
std::vector<Run> runs_of(const Trajectory& traj, std::uint32_t regime) {
    std::vector<Run> out;
    const auto& s = traj.samples;
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i].regime != regime || s[i].mode != Mode::normal) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < s.size() && s[j + 1].regime == regime && s[j + 1].mode == Mode::normal) ++j;
        Run r{s[i].t, s[j].t, s[i].state_norm, s[j].state_norm};
        if (j + 1 < s.size()) {
            r.t1 = s[j + 1].t;
            r.norm1 = s[j + 1].state_norm;
        }
        if (r.t1 > r.t0) out.push_back(r);
        i = j + 1;
    }
    return out;
}

}  // namespace

std::vector<DwellInterval> detect_uncontrolled_dwells(const Trajectory& traj, std::uint32_t regime, double min_len,
                                                      std::size_t trajectory_id) {
    std::vector<DwellInterval> out;
    for (const auto& r : runs_of(traj, regime)) {
        if (r.t1 - r.t0 >= min_len) out.push_back({trajectory_id, r.t0, r.t1, regime, Mode::normal, r.norm0, r.norm1});
    }
    return out;
}

QuantileSummary summarize_quantile(std::vector<double> samples, double q) {
    QuantileSummary s;
    s.level = q;
    s.samples = std::move(samples);
    if (!s.samples.empty()) {
        s.available = true;
        s.value = quantile(s.samples, q);
    }
    return s;
}

QuantileSummary gamma_dwell(const std::vector<DwellInterval>& intervals, double q) {
    std::vector<double> rates;
    std::size_t skipped = 0;
    for (const auto& iv : intervals) {
        if (!(iv.norm0 > 0.0) || !(iv.norm1 > 0.0)) {
            ++skipped;
            continue;
        }
        rates.push_back(std::log(iv.norm1 / iv.norm0) / (iv.t1 - iv.t0));
    }
    auto s = summarize_quantile(std::move(rates), q);
    s.skipped = skipped;
    return s;
}

double gamma_operator(const LiftedOperator& op_u0) { return op_u0.susceptibility(); }

std::optional<double> alignment_ratio(std::span<const double> x, std::span<const double> v) {
    const double nx = norm2(x);
    if (!(nx > 0.0)) return std::nullopt;
    return std::clamp(dot(x, v) / nx, -1.0, 1.0);
}

std::vector<double> cone_window_rates(const Trajectory& traj, std::uint32_t regime, double alpha,
                                      std::size_t window_steps) {
    std::vector<double> out;
    if (window_steps == 0) return out;
    const auto runs = runs_of(traj, regime);
    if (runs.empty()) return out;
    std::vector<const Sample*> grid;
    for (const auto& s : traj.samples)
        if (s.grid_index >= 0) grid.push_back(&s);

    std::size_t r = 0;
    for (std::size_t j = 0; j + window_steps < grid.size(); ++j) {
        const Sample& a = *grid[j];
        const Sample& b = *grid[j + window_steps];
        while (r < runs.size() && runs[r].t1 < b.t) ++r;
        if (r == runs.size()) break;
        if (!(runs[r].t0 <= a.t && b.t <= runs[r].t1)) continue;
        if (!(a.alignment >= alpha)) continue;  // NaN alignment never qualifies
        if (!(a.state_norm > 0.0) || !(b.state_norm > 0.0)) continue;
        out.push_back(std::log(b.state_norm / a.state_norm) / (b.t - a.t));
    }
    return out;
}

QuantileSummary gamma_cone(const std::vector<const Trajectory*>& trajs, std::uint32_t regime, double alpha,
                           std::size_t window_steps, double q) {
    std::vector<double> pooled;
    for (const Trajectory* tr : trajs) {
        auto rates = cone_window_rates(*tr, regime, alpha, window_steps);
        pooled.insert(pooled.end(), rates.begin(), rates.end());
    }
    return summarize_quantile(std::move(pooled), q);
}

ProjectionDiagnostic forcing_projection_diagnostic(const Forcing& forcing, std::span<const double> v, double horizon,
                                                   std::size_t points) {
    ProjectionDiagnostic d{std::numeric_limits<double>::infinity(), 0.0};
    const double weight = forcing.node < v.size() ? v[forcing.node] : 0.0;
    points = std::max<std::size_t>(points, 2);
    for (std::size_t i = 0; i < points; ++i) {
        const double t = horizon * static_cast<double>(i) / static_cast<double>(points - 1);
        const double p = weight * forcing.value(t);
        d.min = std::min(d.min, p);
        d.mean += p;
    }
    d.mean /= static_cast<double>(points);
    return d;
}

}  // namespace tailshape

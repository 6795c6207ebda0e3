#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "tailshape/integrator.hpp"

namespace tailshape {

struct DwellInterval {
    std::size_t trajectory = 0;
    double t0 = 0.0;
    double t1 = 0.0;
    std::uint32_t regime = 0;
    Mode mode = Mode::normal;
    double norm0 = 0.0;  // ||X(t0)||
    double norm1 = 0.0;  // ||X(t1)||
};

/// Maximal intervals with z = regime and m = 0 throughout, of length >= min_len.
std::vector<DwellInterval> detect_uncontrolled_dwells(const Trajectory& traj, std::uint32_t regime, double min_len,
                                                      std::size_t trajectory_id = 0);

struct QuantileSummary {
    std::vector<double> samples;
    double level = 0.9;
    double value = 0.0;
    std::size_t skipped = 0;  // intervals starting from a zero state
    bool available = false;
};

/// Per-interval log growth rate log(||X(t1)|| / ||X(t0)||) / (t1 - t0) and its
/// q-quantile.
QuantileSummary gamma_dwell(const std::vector<DwellInterval>& intervals, double q = 0.9);

/// mu_2 of the (U, normal) operator.
double gamma_operator(const LiftedOperator& op_u0);

/// v^T X / ||X||, or nothing for the zero state.
std::optional<double> alignment_ratio(std::span<const double> x, std::span<const double> v);

/// Growth rates (1/D) log(||X(t+D)|| / ||X(t)||) over output-grid windows of
/// `window_steps` intervals that lie inside one uninterrupted (regime, mode 0)
/// stay and start with alignment >= alpha. The trajectory must carry the
/// alignment column for the probe direction.
std::vector<double> cone_window_rates(const Trajectory& traj, std::uint32_t regime, double alpha,
                                      std::size_t window_steps);

/// q-quantile of the pooled cone window rates.
QuantileSummary gamma_cone(const std::vector<const Trajectory*>& trajs, std::uint32_t regime, double alpha,
                           std::size_t window_steps, double q = 0.9);
QuantileSummary summarize_quantile(std::vector<double> samples, double q);

struct ProjectionDiagnostic {
    double min = 0.0;
    double mean = 0.0;
};

/// min and mean of v^T f(t) on a uniform grid of `points` times over [0, T].
ProjectionDiagnostic forcing_projection_diagnostic(const Forcing& forcing, std::span<const double> v, double horizon,
                                                   std::size_t points = 2001);

struct GammaEstimates {
    double op = 0.0;
    QuantileSummary dwell;
    QuantileSummary cone;
    double cone_alpha = 0.0;
    std::size_t cone_window_steps = 0;
    /// min{op, cone} when the cone estimate exists, otherwise op.
    double hybrid() const { return cone.available ? std::min(op, cone.value) : op; }
};

}  // namespace tailshape

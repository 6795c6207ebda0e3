#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "tailshape/controller.hpp"
#include "tailshape/model.hpp"
#include "tailshape/regime.hpp"

namespace tailshape {

struct SolverConfig {
    double rtol = 1e-8;
    double atol = 1e-10;
    double max_step = 0.1;
    std::size_t output_intervals = 2000;

    void validate() const;
};

struct Sample {
    double t = 0.0;
    double energy = 0.0;       // E = ||x||
    double load = 0.0;         // L = sum_k ||y_k||
    double susceptibility = 0.0;
    double state_norm = 0.0;   // ||X||
    double alignment = 0.0;    // v^T X / ||X||; NaN when X = 0 or no probe
    std::uint32_t regime = 0;
    Mode mode = Mode::normal;
    std::int32_t grid_index = -1;  // -1 for samples taken at switch times
};

struct Snapshot {
    double t = 0.0;
    std::uint32_t regime = 0;
    Mode mode = Mode::normal;
    Vector state;
};

struct Trajectory {
    std::vector<Sample> samples;      // time-ordered; grid points and switch times
    std::vector<Snapshot> snapshots;  // t = 0, every switch, and t = T
    std::vector<ModeEvent> events;
    double burst = 0.0;               // B_T
    double horizon = 0.0;
    std::size_t accepted_steps = 0;
    std::size_t rejected_steps = 0;

    const Vector& final_state() const { return snapshots.back().state; }
};

struct TrajectoryOptions {
    /// Direction used for the alignment column, typically v_U.
    std::optional<Vector> probe;
    bool keep_snapshots = true;
};

/// Integrates the switched lifted system along a pre-sampled regime path
/// under the given policy.
Trajectory integrate_trajectory(const OperatorTable& ops, const Forcing& forcing, const RegimePath& path,
                                const PolicyConfig& policy, const Vector& x0, const SolverConfig& cfg,
                                const TrajectoryOptions& options = {});

/// Single-operator table (every regime and mode share `op`).
OperatorTable constant_table(const LiftedOperator& op);

double memory_load(std::span<const double> state, std::size_t n);
double energy(std::span<const double> state, std::size_t n);
inline double susceptibility(const LiftedOperator& op) { return op.susceptibility(); }

struct EnergyAudit {
    double max_violation = 0.0;  // in units of d/dt ||X||
    double tolerance = 0.0;
    bool passed = true;
};

/// Checks ||X(t_j+1)|| <= e^{S h} ||X(t_j)|| + int e^{S (t_j+1 - s)} ||f(s)|| ds on
/// every pair of consecutive samples, which is the integrated form of
/// d/dt ||X|| <= S ||X|| + ||f||. Violations are divided by h so they are
/// derivative-sized. `s_offset` perturbs the recorded S trace.
EnergyAudit energy_inequality_audit(const Trajectory& traj, const Forcing& forcing, double s_offset = 0.0);

/// sup ||X|| <= (||X0|| + T f_sup) e^{A_star T}, compared in log space with
/// 1e-9 relative slack for integration error.
bool pathwise_bound_audit(const Trajectory& traj, double a_star, double f_sup, double x0_norm, double horizon);

/// Rows "t,E,L,S,z,m".
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

}  // namespace tailshape

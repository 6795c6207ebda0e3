#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tailshape/estimators.hpp"
#include "tailshape/integrator.hpp"
#include "tailshape/regime.hpp"
#include "tailshape/soe_kernel.hpp"
#include "tailshape/tailfit.hpp"

namespace tailshape {

enum class Preset { plain, dddas, memory_off, safe_in_u };

const char* preset_name(Preset p);
Preset parse_preset(const std::string& name);

struct KernelConfig {
    KernelTarget::Kind target = PowerLawKernel{1.5, 1.0};
    std::string table_path;  // set when the target was read from a file
    int terms = 8;
    std::optional<double> r_min;  // default 1 / T
    std::optional<double> r_max;  // default 2 / max_step
    double weight_scale = 1.0;    // multiplies every fitted weight
    std::size_t design_points = 400;
    std::size_t check_points = 2001;
};

struct EstimatorConfig {
    double q_gamma = 0.9;
    double q_b = 0.9;
    std::size_t bootstrap = 1000;
    double ci_level = 0.95;
    double cone_alpha = 0.5;
    std::size_t cone_window = 10;
    double stability = 0.05;
    /// Shortest U-dwell used by the dwell estimator.
    double min_dwell = 0.5;
};

struct ScenarioConfig {
    std::string name = "scenario";
    Preset preset = Preset::plain;
    NetworkSpec network;
    KernelConfig kernel;
    GeneratorSpec generator;
    std::string unfavorable = "U";
    PolicyConfig policy;
    ModeDesign design;
    double horizon = 100.0;
    std::size_t ensemble = 2000;
    std::uint64_t seed = 1;
    std::size_t workers = 0;  // 0: hardware concurrency
    SolverConfig solver;
    EstimatorConfig estimators;
    double band_tolerance = 0.15;
    /// Offset added to every recorded susceptibility. Negative control for
    /// the energy audit; zero in real runs.
    double corrupt_susceptibility = 0.0;

    /// Cross-field checks; throws ParameterError.
    void validate() const;
};

/// Desk-scale presets: n = 20 star network with constant forcing at the hub,
/// K = 8, T = 100, N = 2000.
ScenarioConfig make_preset(Preset preset);

/// Everything derived once per scenario before simulation.
struct Scenario {
    ScenarioConfig config;
    SOEKernel soe;
    double r_min = 0.0;
    double r_max = 0.0;
    OperatorTable ops;
    std::uint32_t unfavorable = 1;
    double a_star = 0.0;
    double rho_w = 0.0;
    ContractionCheck contraction;  // of the (U, mitigate) operator
    Vector v_u;                    // top direction of the (U, normal) operator
    double gamma_op = 0.0;

    std::size_t dim() const { return ops.dim(); }
};

Scenario build_scenario(const ScenarioConfig& cfg);
SOEKernel fit_kernel(const ScenarioConfig& cfg, double* r_min = nullptr, double* r_max = nullptr);

/// Largest steady forced response max_t ||x(t)|| over the regimes, each
/// under its mode-0 operator: the constant-forcing fixed point or the
/// amplitude of the periodic orbit. Infinite when some regime is unstable.
double forced_response_amplitude(const Scenario& sc);

/// Per-trajectory raw output kept by an ensemble run.
struct TrajectoryRecord {
    std::size_t index = 0;
    bool failed = false;
    std::string failure;
    double burst = 0.0;
    double max_state_norm = 0.0;
    double energy_violation = 0.0;
    double energy_tolerance = 0.0;
    bool energy_ok = true;
    bool pathwise_ok = true;
    std::size_t chattering = 0;
    std::size_t release_violations = 0;
    std::size_t mode_changes = 0;
    double time_mitigating = 0.0;
    std::size_t regime_dwell_count[2] = {0, 0};  // completed dwells in S and U
    double regime_dwell_time[2] = {0.0, 0.0};
    std::vector<DwellInterval> dwells;  // uncontrolled U-dwells
    std::vector<double> cone_rates;
    std::vector<double> grid_energy;    // E on the output grid; not persisted
};

struct Bands {
    std::vector<double> t, mean, median, q90, q99;
};

/// Raw ensemble output; everything reported is a function of this plus the
/// scenario.
struct EnsembleRaw {
    std::vector<TrajectoryRecord> records;
    Bands bands;
};

struct AuditSummary {
    std::size_t trajectories = 0;
    std::size_t failed = 0;
    std::size_t energy_pass = 0;
    std::size_t pathwise_pass = 0;
    std::size_t chattering = 0;
    std::size_t release_violations = 0;
    double max_energy_violation_ratio = 0.0;  // violation / tolerance
    bool all_passed() const {
        return failed == 0 && energy_pass == trajectories && pathwise_pass == trajectories && chattering == 0 &&
               release_violations == 0;
    }
};

struct TailSummary {
    bool available = false;
    std::string note;
    BminSelection selection;
    BootstrapCi ci;
    double lambda_u = 0.0;
    double lambda_u_se = 0.0;
    double gamma_used = 0.0;
    std::string gamma_source;
    TailIndex alpha_th;
};

struct EnsembleResult {
    std::string name;
    Preset preset = Preset::plain;
    std::vector<double> bursts;  // successful trajectories, by index
    Bands bands;
    GammaEstimates gamma;
    std::vector<DwellRateEstimate> dwell_rates;
    Ccdf ccdf;
    TailSummary tail;
    AuditSummary audits;
    TruncationBound truncation;
    ProjectionDiagnostic projection;
    double intervention_rate = 0.0;  // mode changes per trajectory
    double mitigate_fraction = 0.0;  // fraction of time in mitigate mode
};

/// Simulates and post-processes one trajectory.
TrajectoryRecord run_trajectory(const Scenario& sc, std::size_t index, bool keep_grid = true);

/// Full trajectory for inspection (the simulate command).
Trajectory simulate_trajectory(const Scenario& sc, std::size_t index, RegimePath* path_out = nullptr);

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Runs the ensemble on a worker pool. Results are merged by trajectory
/// index, so the output does not depend on the worker count. `stop` lets a
/// caller abandon the run between trajectories.
EnsembleRaw run_ensemble_raw(const Scenario& sc, std::size_t workers = 0, const std::atomic<bool>* stop = nullptr,
                             const ProgressFn& progress = {});

/// Per output-grid time: mean, median, q0.9, q0.99 of E across trajectories.
Bands quantile_bands(const std::vector<std::vector<double>>& grid_energy, const std::vector<double>& times);

EnsembleResult analyze(const Scenario& sc, const EnsembleRaw& raw);

/// Convenience: build, run, analyze.
EnsembleResult run_ensemble(const ScenarioConfig& cfg);

struct ScenarioComparison {
    std::string a, b;
    bool dominance = true;  // CCDF of b <= CCDF of a beyond b's b_min, within 2 binomial SE
    double worst_excess = 0.0;
    double median_band_distortion = 0.0;  // max relative gap of median bands
    bool typical_preserved = true;
};

struct ComparisonReport {
    std::vector<ScenarioComparison> pairs;
    std::optional<bool> memory_ordering;  // OFF q0.999 < ON q0.9, when both are present
    double off_q999 = 0.0;
    double on_q90 = 0.0;
    bool passed() const;
};

/// Refuses scenarios that differ in horizon, network, forcing or regime rates.
void check_comparable(const ScenarioConfig& a, const ScenarioConfig& b);

ScenarioComparison compare_pair(const EnsembleResult& a, const EnsembleResult& b, double band_tolerance);

/// Pairs each mitigated scenario (dddas, safe_in_u) with the plain one and
/// checks the memory-OFF ordering.
ComparisonReport compare_scenarios(const std::vector<EnsembleResult>& results, double band_tolerance);

enum class SweepAxis { soe_k, regime_rates, network_nonnormality, forcing, dddas_thresholds, mitigate_damping };

const char* sweep_axis_name(SweepAxis a);
SweepAxis parse_sweep_axis(const std::string& name);

struct SweepRow {
    double value = 0.0;
    bool ok = true;
    std::string error;
    double eps_rel = 0.0;
    double gamma_op = 0.0;
    double lambda_u = 0.0;
    double alpha_hat = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double alpha_th = 0.0;
    double log_prefactor = 0.0;  // CCDF intercept
    double q90_burst = 0.0;
    double intervention_rate = 0.0;
    double band_distortion = 0.0;
    bool tail_present = false;
};

struct SweepTable {
    SweepAxis axis = SweepAxis::soe_k;
    std::vector<SweepRow> rows;
    /// Slope of alpha_hat against lambda_U (regime_rates axis).
    double linear_slope = 0.0;
    double linear_r2 = 0.0;
    double rank_correlation = 0.0;  // Spearman of alpha_hat vs the axis value
};

/// Applies one axis value to a base config.
ScenarioConfig apply_sweep_value(const ScenarioConfig& base, SweepAxis axis, double value);

/// One ensemble per grid value with the base seed (paired regime paths).
/// The dddas_thresholds axis also runs a policy-disabled baseline to measure
/// band distortion.
SweepTable sensitivity_sweep(SweepAxis axis, const std::vector<double>& grid, const ScenarioConfig& base);

double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace tailshape

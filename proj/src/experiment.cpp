#include "tailshape/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <numeric>
#include <thread>

#include "tailshape/errors.hpp"
#include "tailshape/nnls.hpp"
#include "tailshape/quantile.hpp"

namespace tailshape {

const char* preset_name(Preset p) {
    switch (p) {
        case Preset::plain: return "plain";
        case Preset::dddas: return "dddas";
        case Preset::memory_off: return "memory_off";
        case Preset::safe_in_u: return "safe_in_u";
    }
    return "?";
}

Preset parse_preset(const std::string& name) {
    for (Preset p : {Preset::plain, Preset::dddas, Preset::memory_off, Preset::safe_in_u})
        if (name == preset_name(p)) return p;
    throw ParameterError("unknown preset '" + name + "' (plain, dddas, memory_off, safe_in_u)");
}

void ScenarioConfig::validate() const {
    if (ensemble == 0) throw ParameterError("ensemble size N must be positive");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ParameterError("horizon must be positive and finite");
    network.validate();
    generator.validate(true);
    if (generator.size() != network.regimes.size())
        throw ParameterError("regime generator and network disagree on the number of regimes");
    for (std::size_t i = 0; i < generator.size(); ++i) {
        if (generator.states[i] != network.regimes[i].label)
            throw ParameterError("regime '" + generator.states[i] + "' is listed in a different order in the network");
    }
    generator.index(unfavorable);
    solver.validate();
    design.validate();
    if (policy.enabled != (preset == Preset::dddas))
        throw ParameterError("the policy is enabled exactly when the preset is dddas");
    if (policy.enabled) policy.validate();
    if (preset != Preset::memory_off) {
        if (kernel.terms < 1) throw ParameterError("kernel needs at least one term (use the memory_off preset instead)");
        if (!(kernel.weight_scale > 0.0)) throw ParameterError("kernel weight_scale must be positive");
        if (kernel.r_min && kernel.r_max && !(*kernel.r_min < *kernel.r_max))
            throw ParameterError("kernel r_min must be below r_max");
        KernelTarget(kernel.target, horizon);
    }
    const auto& e = estimators;
    auto level = [](double q, const char* what) {
        if (!(q > 0.0 && q < 1.0)) throw ParameterError(std::string(what) + " must lie in (0, 1)");
    };
    level(e.q_gamma, "q_gamma");
    level(e.q_b, "q_b");
    level(e.ci_level, "ci_level");
    if (!(e.cone_alpha >= 0.0 && e.cone_alpha <= 1.0)) throw ParameterError("cone alpha must lie in [0, 1]");
    if (e.cone_window == 0) throw ParameterError("cone window must be at least one grid step");
    if (!(e.stability > 0.0)) throw ParameterError("b_min stability tolerance must be positive");
    if (!(e.min_dwell >= 0.0)) throw ParameterError("estimator min_dwell must be nonnegative");
    if (!(band_tolerance >= 0.0)) throw ParameterError("band tolerance must be nonnegative");
}

ScenarioConfig make_preset(Preset preset) {
    ScenarioConfig c;
    c.preset = preset;
    c.name = preset == Preset::plain ? "heavy_tail" : preset_name(preset);
    c.horizon = 100.0;
    c.ensemble = 2000;
    c.seed = 20240611;

    auto& net = c.network;
    net.n = 20;
    net.W = Matrix(net.n, net.n);
    for (std::size_t i = 1; i < net.n; ++i) net.W(i, 0) = 1.0;  // hub 0 drives every other node
    net.regimes = {{"S", 40.0, 120.0}, {"U", 5.0, 1.0}};
    net.forcing = Forcing{Forcing::Kind::constant, 0, 1.0, 0.0};

    c.kernel.target = PowerLawKernel{1.5, 1.0};
    c.kernel.terms = 8;
    c.kernel.r_min = 1.0;
    c.kernel.r_max = 20.0;
    c.kernel.weight_scale = 12.0;

    c.generator = GeneratorSpec::two_state(0.15, 1.0, "U");
    c.design = ModeDesign{0.5, 20.0, 5.0};
    c.policy = PolicyConfig{5.0, 10.0, 1000.0, 2000.0, 0.5, preset == Preset::dddas};
    c.estimators.min_dwell = 0.5;
    c.estimators.cone_alpha = 0.5;
    c.estimators.cone_window = 10;
    return c;
}

SOEKernel fit_kernel(const ScenarioConfig& cfg, double* r_min_out, double* r_max_out) {
    const double r_min = cfg.kernel.r_min.value_or(1.0 / cfg.horizon);
    const double r_max = cfg.kernel.r_max.value_or(2.0 / cfg.solver.max_step);
    if (r_min_out) *r_min_out = r_min;
    if (r_max_out) *r_max_out = r_max;
    if (cfg.preset == Preset::memory_off) return {};
    const KernelTarget target(cfg.kernel.target, cfg.horizon);
    const auto rates = make_log_grid(r_min, r_max, cfg.kernel.terms);
    const auto design = default_design_times(cfg.horizon, cfg.kernel.design_points);
    const auto check = default_check_times(cfg.horizon, cfg.kernel.check_points);
    SOEKernel soe = fit_nnls(target, rates, design, check);
    // The fit is linear in the target, so scaling the weights is the same as
    // fitting the scaled kernel; eps_rel is unchanged.
    for (double& w : soe.weights) w *= cfg.kernel.weight_scale;
    soe.residual_norm *= cfg.kernel.weight_scale;
    return soe;
}

namespace {

bool spectral_abscissa_positive(const Matrix& a) {
    // Stable iff e^{A t} contracts eventually; the log norm is only an upper
    // bound, so test the growth of e^{A t} directly.
    const double t = 50.0 / std::max(1.0, frobenius_norm(a));
    Vector v(a.rows(), 1.0 / std::sqrt(static_cast<double>(a.rows())));
    for (int k = 0; k < 200; ++k) {
        v = expm_apply(a, v, t);
        const double nv = norm2(v);
        if (!std::isfinite(nv) || nv > 1e12) return true;
        if (nv < 1e-12) return false;
    }
    return true;
}

}  // namespace

Scenario build_scenario(const ScenarioConfig& cfg) {
    cfg.validate();
    Scenario sc;
    sc.config = cfg;
    sc.soe = fit_kernel(cfg, &sc.r_min, &sc.r_max);
    sc.ops = build_operator_table(cfg.network, sc.soe, cfg.design);
    sc.unfavorable = static_cast<std::uint32_t>(cfg.generator.index(cfg.unfavorable));
    const auto u = sc.unfavorable;

    sc.gamma_op = gamma_operator(sc.ops.at(u, Mode::normal));
    sc.v_u = sc.ops.at(u, Mode::normal).top_direction();
    sc.contraction = check_mitigation_contraction(sc.ops.at(u, Mode::mitigate));
    if (cfg.preset == Preset::safe_in_u) {
        if (!sc.contraction.certified)
            throw ParameterError("safe_in_u needs a mitigate design with negative susceptibility in U");
        const LiftedOperator safe = sc.ops.at(u, Mode::mitigate);
        sc.ops.at(u, Mode::normal) = safe;
        sc.ops.at(u, Mode::verify) = safe;
    }
    if (cfg.corrupt_susceptibility != 0.0) {
        for (std::size_t z = 0; z < sc.ops.regimes(); ++z)
            for (int m = 0; m < kModeCount; ++m)
                sc.ops.at(z, static_cast<Mode>(m)).corrupt_susceptibility(cfg.corrupt_susceptibility);
    }
    sc.a_star = sc.ops.max_operator_norm();
    sc.rho_w = spectral_radius(cfg.network.W);
    return sc;
}

double forced_response_amplitude(const Scenario& sc) {
    const auto& f = sc.config.network.forcing;
    const std::size_t d = sc.dim();
    const std::size_t n = sc.ops.n();
    double amp = 0.0;
    for (std::size_t z = 0; z < sc.ops.regimes(); ++z) {
        const Matrix& a = sc.ops.at(z, Mode::normal).matrix();
        if (spectral_abscissa_positive(a)) return std::numeric_limits<double>::infinity();
        if (f.kind == Forcing::Kind::none) continue;
        if (f.kind == Forcing::Kind::constant) {
            // A X = -f
            Matrix m = a;
            Vector rhs(d, 0.0);
            rhs[f.node] = -f.amplitude;
            const Vector x = least_squares(m, rhs);
            amp = std::max(amp, norm2(std::span<const double>(x).subspan(0, n)));
            continue;
        }
        // x(t) = Re(c) sin(wt) + Im(c) cos(wt) with (i w - A) c = e_node A:
        // the real block system [[-A, -w I], [w I, -A]] (p, q) = (e A, 0).
        Matrix m(2 * d, 2 * d);
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                m(i, j) = -a(i, j);
                m(d + i, d + j) = -a(i, j);
            }
            m(i, d + i) = -f.omega;
            m(d + i, i) = f.omega;
        }
        Vector rhs(2 * d, 0.0);
        rhs[f.node] = f.amplitude;
        const Vector pq = least_squares(m, rhs);
        for (int k = 0; k < 720; ++k) {
            const double th = 2.0 * std::numbers::pi * k / 720.0;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double v = pq[i] * std::sin(th) + pq[d + i] * std::cos(th);
                acc += v * v;
            }
            amp = std::max(amp, std::sqrt(acc));
        }
    }
    return amp;
}

namespace {

TrajectoryOptions trajectory_options(const Scenario& sc, bool keep_snapshots) {
    TrajectoryOptions opt;
    opt.probe = sc.v_u;
    opt.keep_snapshots = keep_snapshots;
    return opt;
}

}  // namespace

Trajectory simulate_trajectory(const Scenario& sc, std::size_t index, RegimePath* path_out) {
    const auto& cfg = sc.config;
    const RegimePath path = sample_path(cfg.generator, cfg.horizon, cfg.seed, index);
    if (path_out) *path_out = path;
    const Vector x0(sc.dim(), 0.0);
    return integrate_trajectory(sc.ops, cfg.network.forcing, path, cfg.policy, x0, cfg.solver,
                                trajectory_options(sc, true));
}

TrajectoryRecord run_trajectory(const Scenario& sc, std::size_t index, bool keep_grid) {
    const auto& cfg = sc.config;
    TrajectoryRecord rec;
    rec.index = index;
    const RegimePath path = sample_path(cfg.generator, cfg.horizon, cfg.seed, index);
    for (std::size_t s = 0; s < 2 && s < cfg.generator.size(); ++s) {
        for (double d : completed_dwells(path, s)) {
            ++rec.regime_dwell_count[s];
            rec.regime_dwell_time[s] += d;
        }
    }
    Trajectory traj;
    try {
        const Vector x0(sc.dim(), 0.0);
        traj = integrate_trajectory(sc.ops, cfg.network.forcing, path, cfg.policy, x0, cfg.solver,
                                    trajectory_options(sc, false));
    } catch (const StiffnessError& e) {
        rec.failed = true;
        rec.failure = e.what();
        return rec;
    } catch (const DivergenceError& e) {
        rec.failed = true;
        rec.failure = e.what();
        return rec;
    }

    rec.burst = traj.burst;
    for (const auto& s : traj.samples) rec.max_state_norm = std::max(rec.max_state_norm, s.state_norm);
    const auto audit = energy_inequality_audit(traj, cfg.network.forcing);
    rec.energy_violation = audit.max_violation;
    rec.energy_tolerance = audit.tolerance;
    rec.energy_ok = audit.passed;
    rec.pathwise_ok = pathwise_bound_audit(traj, sc.a_star, cfg.network.forcing.sup_norm(), 0.0, cfg.horizon);
    if (cfg.policy.enabled) {
        const auto hyg = audit_hygiene(traj.events, cfg.policy);
        rec.chattering = hyg.chattering;
        rec.release_violations = hyg.release_violations;
    }
    rec.mode_changes = traj.events.size();
    for (std::size_t i = 0; i + 1 < traj.samples.size(); ++i) {
        const auto& a = traj.samples[i];
        if (a.mode == Mode::mitigate) rec.time_mitigating += traj.samples[i + 1].t - a.t;
    }
    rec.dwells = detect_uncontrolled_dwells(traj, sc.unfavorable, cfg.estimators.min_dwell, index);
    rec.cone_rates = cone_window_rates(traj, sc.unfavorable, cfg.estimators.cone_alpha, cfg.estimators.cone_window);
    if (keep_grid) {
        rec.grid_energy.reserve(cfg.solver.output_intervals + 1);
        for (const auto& s : traj.samples)
            if (s.grid_index >= 0) rec.grid_energy.push_back(s.energy);
    }
    return rec;
}

EnsembleRaw run_ensemble_raw(const Scenario& sc, std::size_t workers, const std::atomic<bool>* stop,
                             const ProgressFn& progress) {
    const std::size_t n = sc.config.ensemble;
    if (n == 0) throw ParameterError("ensemble size N must be positive");
    if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, n);

    std::vector<TrajectoryRecord> records(n);
    std::vector<char> done(n, 0);
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> finished{0};
    std::mutex progress_mutex;
    std::exception_ptr error;
    std::mutex error_mutex;

    auto work = [&] {
        for (;;) {
            if (stop && stop->load()) return;
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                records[i] = run_trajectory(sc, i, true);
                done[i] = 1;
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
            const std::size_t f = finished.fetch_add(1) + 1;
            if (progress) {
                std::lock_guard lock(progress_mutex);
                progress(f, n);
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);

    EnsembleRaw raw;
    for (std::size_t i = 0; i < n; ++i)
        if (done[i]) raw.records.push_back(std::move(records[i]));

    std::vector<std::vector<double>> grid;
    for (auto& r : raw.records) {
        if (!r.failed) grid.push_back(std::move(r.grid_energy));
        r.grid_energy.clear();
    }
    if (!grid.empty()) {
        const std::size_t m = sc.config.solver.output_intervals;
        std::vector<double> times(m + 1);
        for (std::size_t j = 0; j <= m; ++j) times[j] = sc.config.horizon * static_cast<double>(j) / static_cast<double>(m);
        raw.bands = quantile_bands(grid, times);
    }
    return raw;
}

Bands quantile_bands(const std::vector<std::vector<double>>& grid_energy, const std::vector<double>& times) {
    if (grid_energy.empty()) throw ParameterError("quantile bands need at least one trajectory");
    const std::size_t m = times.size();
    for (const auto& g : grid_energy)
        if (g.size() != m) throw DimensionError("trajectory energy is not on the common output grid");
    Bands b;
    b.t = times;
    b.mean.resize(m);
    b.median.resize(m);
    b.q90.resize(m);
    b.q99.resize(m);
    std::vector<double> col(grid_energy.size());
    for (std::size_t j = 0; j < m; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < grid_energy.size(); ++i) {
            col[i] = grid_energy[i][j];
            acc += col[i];
        }
        b.mean[j] = acc / static_cast<double>(col.size());
        std::sort(col.begin(), col.end());
        b.median[j] = quantile_sorted(col, 0.5);
        b.q90[j] = quantile_sorted(col, 0.9);
        b.q99[j] = quantile_sorted(col, 0.99);
    }
    return b;
}

EnsembleResult analyze(const Scenario& sc, const EnsembleRaw& raw) {
    const auto& cfg = sc.config;
    const auto& est = cfg.estimators;
    EnsembleResult res;
    res.name = cfg.name;
    res.preset = cfg.preset;
    res.bands = raw.bands;

    std::vector<DwellInterval> dwells;
    std::vector<double> cone;
    std::size_t count[2] = {0, 0};
    double time[2] = {0.0, 0.0};
    double mode_changes = 0.0;
    double mitigating = 0.0;
    auto& au = res.audits;
    for (const auto& r : raw.records) {
        ++au.trajectories;
        for (int s = 0; s < 2; ++s) {
            count[s] += r.regime_dwell_count[s];
            time[s] += r.regime_dwell_time[s];
        }
        if (r.failed) {
            ++au.failed;
            continue;
        }
        res.bursts.push_back(r.burst);
        dwells.insert(dwells.end(), r.dwells.begin(), r.dwells.end());
        cone.insert(cone.end(), r.cone_rates.begin(), r.cone_rates.end());
        au.energy_pass += r.energy_ok ? 1 : 0;
        au.pathwise_pass += r.pathwise_ok ? 1 : 0;
        au.chattering += r.chattering;
        au.release_violations += r.release_violations;
        if (r.energy_tolerance > 0.0)
            au.max_energy_violation_ratio = std::max(au.max_energy_violation_ratio, r.energy_violation / r.energy_tolerance);
        mode_changes += static_cast<double>(r.mode_changes);
        mitigating += r.time_mitigating;
    }
    res.gamma.op = sc.gamma_op;
    res.gamma.dwell = gamma_dwell(dwells, est.q_gamma);
    res.gamma.cone = summarize_quantile(std::move(cone), est.q_gamma);
    res.gamma.cone_alpha = est.cone_alpha;
    res.gamma.cone_window_steps = est.cone_window;

    for (std::size_t s = 0; s < cfg.generator.size() && s < 2; ++s) {
        DwellRateEstimate d;
        d.state = cfg.generator.states[s];
        d.count = count[s];
        d.total_time = time[s];
        if (count[s] > 0 && time[s] > 0.0) {
            d.available = true;
            d.rate = static_cast<double>(count[s]) / time[s];
            d.standard_error = d.rate / std::sqrt(static_cast<double>(count[s]));
        }
        res.dwell_rates.push_back(d);
    }

    const std::size_t ok = res.bursts.size();
    if (ok > 0) {
        res.intervention_rate = mode_changes / static_cast<double>(ok);
        res.mitigate_fraction = mitigating / (static_cast<double>(ok) * cfg.horizon);
        res.ccdf = empirical_ccdf(res.bursts);
    }

    auto& tail = res.tail;
    if (sc.unfavorable < res.dwell_rates.size()) {
        tail.lambda_u = res.dwell_rates[sc.unfavorable].rate;
        tail.lambda_u_se = res.dwell_rates[sc.unfavorable].standard_error;
    }
    tail.gamma_used = res.gamma.hybrid();
    tail.gamma_source = res.gamma.cone.available && res.gamma.cone.value < res.gamma.op ? "cone" : "operator";
    tail.alpha_th = theoretical_index(tail.lambda_u, tail.gamma_used);
    if (ok >= 10) {
        try {
            tail.selection = select_bmin(res.bursts, est.q_b, est.stability);
            if (tail.selection.points >= 2) {
                tail.ci = bootstrap_ci(res.bursts, tail.selection.alpha, est.bootstrap, est.ci_level, cfg.seed,
                                       est.q_b, est.stability);
                tail.available = true;
            } else {
                tail.note = "too few distinct tail points for a slope fit";
            }
        } catch (const ParameterError& e) {
            tail = TailSummary{false, std::string("no slope fit: ") + e.what(), {}, {}, tail.lambda_u, tail.lambda_u_se,
                               tail.gamma_used, tail.gamma_source, tail.alpha_th};
        }
        if (tail.selection.unreliable && tail.note.empty()) tail.note = "fewer than 10 tail points at the quantile cutoff";
    } else {
        tail.note = "fewer than 10 successful trajectories";
    }

    if (sc.contraction.certified) {
        const double rho = std::exp(-sc.contraction.kappa * cfg.policy.min_dwell);
        res.truncation = truncation_bound(sc.a_star, rho, sc.contraction.kappa, 1.0, cfg.horizon, cfg.policy.min_dwell,
                                          0.0, cfg.network.forcing.sup_norm());
    } else {
        res.truncation.note = "mitigate-mode contraction not certified";
    }
    res.projection = forcing_projection_diagnostic(cfg.network.forcing, sc.v_u, cfg.horizon);
    return res;
}

EnsembleResult run_ensemble(const ScenarioConfig& cfg) {
    const Scenario sc = build_scenario(cfg);
    return analyze(sc, run_ensemble_raw(sc, cfg.workers));
}

bool ComparisonReport::passed() const {
    for (const auto& p : pairs)
        if (!p.dominance || !p.typical_preserved) return false;
    return memory_ordering.value_or(true);
}

void check_comparable(const ScenarioConfig& a, const ScenarioConfig& b) {
    auto refuse = [&](const std::string& what) {
        throw ParameterError("scenarios '" + a.name + "' and '" + b.name + "' differ in " + what);
    };
    if (a.horizon != b.horizon) refuse("horizon");
    if (a.network.n != b.network.n || !(a.network.W == b.network.W)) refuse("network");
    const auto& fa = a.network.forcing;
    const auto& fb = b.network.forcing;
    if (fa.kind != fb.kind || fa.node != fb.node || fa.amplitude != fb.amplitude || fa.omega != fb.omega)
        refuse("forcing");
    if (a.generator.states != b.generator.states || !(a.generator.rates == b.generator.rates) ||
        a.generator.initial != b.generator.initial)
        refuse("regime statistics");
    if (a.seed != b.seed) refuse("master seed");
}

ScenarioComparison compare_pair(const EnsembleResult& a, const EnsembleResult& b, double band_tolerance) {
    ScenarioComparison c;
    c.a = a.name;
    c.b = b.name;
    // Tail dominance of b under a beyond a's cutoff, at every sample value of
    // either ensemble, allowing two binomial standard errors of the difference.
    const double b_min = a.tail.available ? a.tail.selection.b_min : 0.0;
    std::vector<double> grid;
    for (const auto& p : a.ccdf.points) grid.push_back(p.b);
    for (const auto& p : b.ccdf.points) grid.push_back(p.b);
    std::sort(grid.begin(), grid.end());
    const double na = static_cast<double>(a.ccdf.n);
    const double nb = static_cast<double>(b.ccdf.n);
    for (double x : grid) {
        if (x < b_min) continue;
        const double pa = a.ccdf.at(x);
        const double pb = b.ccdf.at(x);
        const double se = std::sqrt(pa * (1.0 - pa) / na + pb * (1.0 - pb) / nb);
        const double excess = pb - pa - 2.0 * se;
        if (excess > 0.0) {
            c.dominance = false;
            c.worst_excess = std::max(c.worst_excess, excess);
        }
    }
    if (!a.bands.median.empty() && a.bands.median.size() == b.bands.median.size()) {
        double peak = 0.0;
        for (double v : a.bands.median) peak = std::max(peak, std::abs(v));
        double gap = 0.0;
        for (std::size_t j = 0; j < a.bands.median.size(); ++j)
            gap = std::max(gap, std::abs(a.bands.median[j] - b.bands.median[j]));
        c.median_band_distortion = peak > 0.0 ? gap / peak : gap;
        c.typical_preserved = c.median_band_distortion <= band_tolerance;
    }
    return c;
}

ComparisonReport compare_scenarios(const std::vector<EnsembleResult>& results, double band_tolerance) {
    ComparisonReport rep;
    const EnsembleResult* plain = nullptr;
    const EnsembleResult* off = nullptr;
    for (const auto& r : results) {
        if (r.preset == Preset::plain && !plain) plain = &r;
        if (r.preset == Preset::memory_off && !off) off = &r;
    }
    if (!plain) {
        // Without a no-DDDAS reference, compare everything against the first entry.
        if (results.empty()) return rep;
        plain = &results.front();
    }
    for (const auto& r : results) {
        if (&r == plain) {
            if (results.size() == 1) rep.pairs.push_back(compare_pair(r, r, band_tolerance));
            continue;
        }
        if (r.preset == Preset::dddas || r.preset == Preset::safe_in_u || r.preset == plain->preset) {
            auto c = compare_pair(*plain, r, band_tolerance);
            // The typical-behavior tolerance is a DDDAS claim; SAFE-in-U replaces
            // the U operator outright.
            if (r.preset != Preset::dddas) c.typical_preserved = true;
            rep.pairs.push_back(c);
        }
    }
    if (plain->preset == Preset::plain && off && !off->bursts.empty() && !plain->bursts.empty()) {
        rep.off_q999 = quantile(off->bursts, 0.999);
        rep.on_q90 = quantile(plain->bursts, 0.9);
        rep.memory_ordering = rep.off_q999 < rep.on_q90;
    }
    return rep;
}

const char* sweep_axis_name(SweepAxis a) {
    switch (a) {
        case SweepAxis::soe_k: return "soe_K";
        case SweepAxis::regime_rates: return "regime_rates";
        case SweepAxis::network_nonnormality: return "network_nonnormality";
        case SweepAxis::forcing: return "forcing";
        case SweepAxis::dddas_thresholds: return "dddas_thresholds";
        case SweepAxis::mitigate_damping: return "mitigate_damping";
    }
    return "?";
}

SweepAxis parse_sweep_axis(const std::string& name) {
    for (SweepAxis a : {SweepAxis::soe_k, SweepAxis::regime_rates, SweepAxis::network_nonnormality, SweepAxis::forcing,
                        SweepAxis::dddas_thresholds, SweepAxis::mitigate_damping})
        if (name == sweep_axis_name(a)) return a;
    throw ParameterError("unknown sweep axis '" + name + "'");
}

ScenarioConfig apply_sweep_value(const ScenarioConfig& base, SweepAxis axis, double value) {
    ScenarioConfig c = base;
    switch (axis) {
        case SweepAxis::soe_k:
            if (value < 1.0 || value != std::floor(value)) throw ParameterError("soe_K values must be positive integers");
            c.kernel.terms = static_cast<int>(value);
            break;
        case SweepAxis::regime_rates: {
            // lambda_U: exit rate of the unfavorable regime, spread over its
            // targets in the base proportions.
            const std::size_t u = c.generator.index(c.unfavorable);
            const double exit = c.generator.exit_rate(u);
            if (!(value > 0.0) || !(exit > 0.0)) throw ParameterError("regime rate values must be positive");
            for (std::size_t j = 0; j < c.generator.size(); ++j)
                if (j != u) c.generator.rates(u, j) *= value / exit;
            break;
        }
        case SweepAxis::network_nonnormality:
            // Coupling strength of every regime with beta > 0.
            if (!(value >= 0.0)) throw ParameterError("coupling values must be nonnegative");
            for (auto& r : c.network.regimes)
                if (r.beta > 0.0) r.beta = value;
            break;
        case SweepAxis::forcing:
            if (!(value >= 0.0)) throw ParameterError("forcing amplitude must be nonnegative");
            c.network.forcing.amplitude = value;
            break;
        case SweepAxis::dddas_thresholds: {
            // Multiplies both load thresholds.
            if (!(value > 0.0)) throw ParameterError("threshold scale must be positive");
            c.policy.tau_l1 *= value;
            c.policy.tau_l2 *= value;
            break;
        }
        case SweepAxis::mitigate_damping:
            if (!(value >= 0.0)) throw ParameterError("mitigate damping must be nonnegative");
            c.design.delta = value;
            break;
    }
    return c;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw DimensionError("spearman: length mismatch");
    const std::size_t n = x.size();
    if (n < 2) return 0.0;
    auto ranks = [n](const std::vector<double>& v) {
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
        std::vector<double> r(n);
        for (std::size_t i = 0; i < n;) {
            std::size_t j = i;
            while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
            const double avg = 0.5 * static_cast<double>(i + j);
            for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    const auto rx = ranks(x);
    const auto ry = ranks(y);
    const double mean = 0.5 * static_cast<double>(n - 1);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (rx[i] - mean) * (ry[i] - mean);
        sxx += (rx[i] - mean) * (rx[i] - mean);
        syy += (ry[i] - mean) * (ry[i] - mean);
    }
    return sxx > 0.0 && syy > 0.0 ? sxy / std::sqrt(sxx * syy) : 0.0;
}

SweepTable sensitivity_sweep(SweepAxis axis, const std::vector<double>& grid, const ScenarioConfig& base) {
    if (grid.empty()) throw ParameterError("sweep grid is empty");
    SweepTable table;
    table.axis = axis;
    std::optional<EnsembleResult> baseline;
    if (axis == SweepAxis::dddas_thresholds) {
        ScenarioConfig b = base;
        b.preset = Preset::plain;
        b.policy.enabled = false;
        b.name = base.name + "_baseline";
        baseline = run_ensemble(b);
    }
    for (double v : grid) {
        SweepRow row;
        row.value = v;
        try {
            const ScenarioConfig cfg = apply_sweep_value(base, axis, v);
            const Scenario sc = build_scenario(cfg);
            const EnsembleResult r = analyze(sc, run_ensemble_raw(sc, cfg.workers));
            row.eps_rel = sc.soe.eps_rel;
            row.gamma_op = r.gamma.op;
            row.lambda_u = r.tail.lambda_u;
            row.alpha_hat = r.tail.selection.alpha;
            row.ci_lo = r.tail.ci.lo;
            row.ci_hi = r.tail.ci.hi;
            row.alpha_th = r.tail.alpha_th.value;
            row.log_prefactor = r.tail.selection.intercept;
            row.q90_burst = r.bursts.empty() ? 0.0 : quantile(r.bursts, 0.9);
            row.intervention_rate = r.intervention_rate;
            row.tail_present = r.tail.available && r.gamma.op > 0.0;
            row.ok = r.tail.available;
            if (!row.ok) row.error = r.tail.note;
            if (baseline) row.band_distortion = compare_pair(*baseline, r, base.band_tolerance).median_band_distortion;
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
        }
        table.rows.push_back(row);
    }
    std::vector<double> xs, ys;
    for (const auto& r : table.rows) {
        if (!r.ok) continue;
        xs.push_back(axis == SweepAxis::regime_rates ? r.lambda_u : r.value);
        ys.push_back(r.alpha_hat);
    }
    table.rank_correlation = spearman(xs, ys);
    if (xs.size() >= 2) {
        const double n = static_cast<double>(xs.size());
        const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
        const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
        double sxy = 0.0, sxx = 0.0, syy = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            sxy += (xs[i] - mx) * (ys[i] - my);
            sxx += (xs[i] - mx) * (xs[i] - mx);
            syy += (ys[i] - my) * (ys[i] - my);
        }
        if (sxx > 0.0) {
            table.linear_slope = sxy / sxx;
            table.linear_r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
        }
    }
    return table;
}

}  // namespace tailshape

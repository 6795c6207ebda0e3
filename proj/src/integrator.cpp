#include "tailshape/integrator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "tailshape/errors.hpp"

namespace tailshape {

void SolverConfig::validate() const {
    if (!(rtol > 0.0) || !(atol > 0.0)) throw ParameterError("solver tolerances must be positive");
    if (!(max_step > 0.0)) throw ParameterError("solver max_step must be positive");
    if (output_intervals < 1) throw ParameterError("output grid needs at least one interval");
}

double memory_load(std::span<const double> state, std::size_t n) {
    double acc = 0.0;
    for (std::size_t off = n; off + n <= state.size(); off += n) acc += norm2(state.subspan(off, n));
    return acc;
}

double energy(std::span<const double> state, std::size_t n) { return norm2(state.subspan(0, n)); }

OperatorTable constant_table(const LiftedOperator& op) {
    return OperatorTable({{op, op, op}});
}

namespace {

// Dormand-Prince 5(4) tableau with the FSAL stage as the seventh row.
constexpr std::array<double, 7> kC{0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA[6][6] = {
    {1.0 / 5, 0, 0, 0, 0, 0},
    {3.0 / 40, 9.0 / 40, 0, 0, 0, 0},
    {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0},
    {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84},  // order-5 weights
};
constexpr std::array<double, 7> kE{-71.0 / 57600, 0, 71.0 / 16695, -71.0 / 1920, 17253.0 / 339200, -22.0 / 525,
                                   1.0 / 40};
// Continuous extension (Shampine): y(t + s h) = y + h sum_i k_i sum_j P[i][j] s^(j+1).
constexpr double kP[7][4] = {
    {1, -8048581381.0 / 2820520608, 8663915743.0 / 2820520608, -12715105075.0 / 11282082432},
    {0, 0, 0, 0},
    {0, 131558114200.0 / 32700410799, -68118460800.0 / 10900136933, 87487479700.0 / 32700410799},
    {0, -1754552775.0 / 470086768, 14199869525.0 / 1410260304, -10690763975.0 / 1880347072},
    {0, 127303824393.0 / 49829197408, -318862633887.0 / 49829197408, 701980252875.0 / 199316789632},
    {0, -282668133.0 / 205662961, 2019193451.0 / 616988883, -1453857185.0 / 822651844},
    {0, 40617522.0 / 29380423, -110615467.0 / 29380423, 69997945.0 / 29380423},
};

class DormandPrince {
public:
    DormandPrince(std::size_t dim, const Forcing& forcing) : y_new(dim), forcing_(forcing), tmp_(dim), dense_(dim) {
        for (auto& k : k_) k.assign(dim, 0.0);
    }

    void set_operator(const LiftedOperator& op) { op_ = &op; }

    void rhs(double t, std::span<const double> x, std::span<double> out) const {
        op_->apply(x, out);
        forcing_.add_to(t, out);
    }

    /// k_[0] must hold f(t, y). Leaves the new state in y_new and f(t+h, y_new)
    /// in k_[6]; returns the scaled RMS error estimate.
    double step(double t, const Vector& y, double h, double rtol, double atol) {
        const std::size_t d = y.size();
        for (int s = 1; s < 7; ++s) {
            for (std::size_t i = 0; i < d; ++i) {
                double acc = 0.0;
                for (int j = 0; j < s; ++j) acc += kA[s - 1][j] * k_[j][i];
                tmp_[i] = y[i] + h * acc;
            }
            if (s == 6) {
                std::copy(tmp_.begin(), tmp_.end(), y_new.begin());
            }
            rhs(t + kC[s] * h, tmp_, k_[s]);
        }
        double acc = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            double e = 0.0;
            for (int s = 0; s < 7; ++s) e += kE[s] * k_[s][i];
            e *= h;
            const double sc = atol + rtol * std::max(std::abs(y[i]), std::abs(y_new[i]));
            acc += (e / sc) * (e / sc);
        }
        return std::sqrt(acc / static_cast<double>(d));
    }

    /// Dense output at t + theta h of the last step taken from y.
    const Vector& dense(const Vector& y, double h, double theta) {
        const double p[4] = {theta, theta * theta, theta * theta * theta, theta * theta * theta * theta};
        double coef[7];
        for (int s = 0; s < 7; ++s) coef[s] = h * (kP[s][0] * p[0] + kP[s][1] * p[1] + kP[s][2] * p[2] + kP[s][3] * p[3]);
        for (std::size_t i = 0; i < y.size(); ++i) {
            double acc = 0.0;
            for (int s = 0; s < 7; ++s) acc += coef[s] * k_[s][i];
            dense_[i] = y[i] + acc;
        }
        return dense_;
    }

    Vector& k0() { return k_[0]; }
    void fsal() { k_[0].swap(k_[6]); }

    Vector y_new;

private:
    const Forcing& forcing_;
    const LiftedOperator* op_ = nullptr;
    std::array<Vector, 7> k_;
    Vector tmp_;
    Vector dense_;
};

double rms_scaled(std::span<const double> v, std::span<const double> y, double rtol, double atol) {
    double acc = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double sc = atol + rtol * std::abs(y[i]);
        acc += (v[i] / sc) * (v[i] / sc);
    }
    return std::sqrt(acc / static_cast<double>(v.size()));
}

// Starting step heuristic of Hairer, Norsett and Wanner (II.4).
double initial_step(DormandPrince& rk, double t, const Vector& y, double rtol, double atol, double max_step) {
    const Vector& f0 = rk.k0();
    const double d0 = rms_scaled(y, y, rtol, atol);
    const double d1 = rms_scaled(f0, y, rtol, atol);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, max_step);
    Vector y1(y.size()), f1(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) y1[i] = y[i] + h0 * f0[i];
    rk.rhs(t + h0, y1, f1);
    for (std::size_t i = 0; i < y.size(); ++i) f1[i] -= f0[i];
    const double d2 = rms_scaled(f1, y, rtol, atol) / h0;
    const double h1 = (d1 <= 1e-15 && d2 <= 1e-15) ? std::max(1e-6, h0 * 1e-3)
                                                    : std::pow(0.01 / std::max(d1, d2), 1.0 / 5.0);
    return std::min({100 * h0, h1, max_step});
}

}  // namespace

Trajectory integrate_trajectory(const OperatorTable& ops, const Forcing& forcing, const RegimePath& path,
                                const PolicyConfig& policy, const Vector& x0, const SolverConfig& cfg,
                                const TrajectoryOptions& options) {
    cfg.validate();
    const std::size_t d = ops.dim();
    const std::size_t n = ops.n();
    const double horizon = path.horizon;
    if (x0.size() != d) throw DimensionError("initial state has the wrong dimension");
    if (!(horizon > 0.0)) throw ParameterError("regime path has no horizon");
    if (options.probe && options.probe->size() != d) throw DimensionError("alignment probe has the wrong dimension");
    for (std::size_t s : path.states)
        if (s >= ops.regimes()) throw ParameterError("regime path visits a regime missing from the operator table");

    Trajectory tr;
    tr.horizon = horizon;
    const std::size_t grid = cfg.output_intervals;
    tr.samples.reserve(grid + 1 + 2 * path.jump_times.size() + 16);
    auto grid_time = [&](std::size_t j) { return j == grid ? horizon : horizon * static_cast<double>(j) / grid; };

    std::uint32_t z = static_cast<std::uint32_t>(path.states.front());
    ControllerState ctrl;
    auto active = [&]() -> const LiftedOperator& { return ops.at(z, ctrl.mode); };

    auto record = [&](double t, std::span<const double> x, std::int32_t grid_index) {
        Sample s;
        s.t = t;
        s.energy = energy(x, n);
        s.load = memory_load(x, n);
        s.susceptibility = active().susceptibility();
        s.state_norm = norm2(x);
        s.alignment = std::numeric_limits<double>::quiet_NaN();
        if (options.probe && s.state_norm > 0.0) s.alignment = dot(*options.probe, x) / s.state_norm;
        s.regime = z;
        s.mode = ctrl.mode;
        s.grid_index = grid_index;
        tr.burst = std::max(tr.burst, s.energy);
        tr.samples.push_back(s);
    };
    auto snapshot = [&](double t, const Vector& x) {
        if (options.keep_snapshots || t == 0.0 || t == horizon) tr.snapshots.push_back({t, z, ctrl.mode, x});
    };
    auto evaluate = [&](double t, double load) {
        const Decision dec = decide(ctrl, t, load, active().susceptibility(), policy);
        if (dec.changed) {
            tr.events.push_back({t, ctrl.mode, dec.state.mode, dec.trigger, load, active().susceptibility()});
        }
        ctrl = dec.state;
        return dec.changed;
    };

    Vector x = x0;
    double t = 0.0;
    record(0.0, x, 0);
    snapshot(0.0, x);
    if (evaluate(0.0, memory_load(x, n))) {
        record(0.0, x, -1);
        if (options.keep_snapshots) snapshot(0.0, x);
    }
    std::size_t next_grid = 1;
    std::size_t next_jump = 0;

    DormandPrince rk(d, forcing);
    rk.set_operator(active());
    rk.rhs(t, x, rk.k0());
    double h = initial_step(rk, t, x, cfg.rtol, cfg.atol, cfg.max_step);
    bool fresh = true;
    const double crossing_tol = 1e-9 * horizon;

    while (t < horizon) {
        const double seg_end = next_jump < path.jump_times.size() ? path.jump_times[next_jump] : horizon;
        double bound = seg_end;
        if (policy.enabled) {
            const double ready = ctrl.t_last + policy.min_dwell;
            if (ready > t && ready < bound) bound = ready;
        }
        if (!fresh) {
            rk.set_operator(active());
            rk.rhs(t, x, rk.k0());
            fresh = true;
        }

        h = std::min({h, cfg.max_step, bound - t});
        // Avoid leaving a sliver before the boundary.
        if (bound - (t + h) < 1e-3 * h) h = bound - t;
        const double min_step = 10.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
        if (h < min_step) {
            std::ostringstream msg;
            msg << "step size underflow at t = " << t << " (h = " << h << ", |X| = " << norm2(x)
                << ", S = " << active().susceptibility() << ")";
            throw StiffnessError(msg.str(), t, norm2(x), active().susceptibility());
        }

        const double err = rk.step(t, x, h, cfg.rtol, cfg.atol);
        if (!(err <= 1.0)) {
            ++tr.rejected_steps;
            if (!std::isfinite(err) && h <= cfg.max_step * 1e-12) {
                throw DivergenceError("state became non-finite at t = " + std::to_string(t), t);
            }
            h *= std::isfinite(err) ? std::max(0.2, 0.9 * std::pow(err, -0.2)) : 0.2;
            continue;
        }
        const double factor = err == 0.0 ? 10.0 : std::min(10.0, std::max(0.2, 0.9 * std::pow(err, -0.2)));
        double t_new = (h == bound - t) ? bound : t + h;
        double step_h = h;

        // Localize an escalating L up-crossing inside the step.
        double crossing_load = -1.0;
        if (policy.enabled && ctrl.mode != Mode::mitigate && t >= ctrl.t_last + policy.min_dwell) {
            const double l_end = memory_load(rk.y_new, n);
            double thresholds[2];
            int count = 0;
            if (ctrl.mode == Mode::normal) thresholds[count++] = policy.tau_l1;
            thresholds[count++] = policy.tau_l2;
            double first = t_new;
            for (int c = 0; c < count; ++c) {
                if (!(l_end > thresholds[c])) continue;
                auto load_at = [&](double s) {
                    if (s >= t_new) return l_end;
                    return memory_load(rk.dense(x, step_h, (s - t) / step_h), n);
                };
                const auto hits = crossing_times(load_at, t, t_new, thresholds[c], crossing_tol, 4);
                if (!hits.empty() && hits.front() < first) {
                    first = hits.front();
                    crossing_load = load_at(first);
                }
            }
            if (first < t_new) {
                step_h = first - t;
                rk.step(t, x, step_h, cfg.rtol, cfg.atol);
                t_new = first;
            } else {
                crossing_load = -1.0;
            }
        }

        for (; next_grid <= grid && grid_time(next_grid) <= t_new; ++next_grid) {
            const double tg = grid_time(next_grid);
            if (tg >= t_new) record(tg, rk.y_new, static_cast<std::int32_t>(next_grid));
            else record(tg, rk.dense(x, step_h, (tg - t) / step_h), static_cast<std::int32_t>(next_grid));
        }

        for (double v : rk.y_new) {
            if (!std::isfinite(v)) throw DivergenceError("state became non-finite at t = " + std::to_string(t_new), t_new);
        }
        x.swap(rk.y_new);
        rk.fsal();
        t = t_new;
        ++tr.accepted_steps;
        h = step_h == h ? h * factor : h;
        tr.burst = std::max(tr.burst, energy(x, n));

        bool switched = false;
        if (next_jump < path.jump_times.size() && t == path.jump_times[next_jump]) {
            z = static_cast<std::uint32_t>(path.states[next_jump + 1]);
            ++next_jump;
            switched = true;
        }
        if (t < horizon) {
            const double load = crossing_load >= 0.0 ? crossing_load : memory_load(x, n);
            switched = evaluate(t, load) || switched;
        }
        if (switched) {
            record(t, x, -1);
            snapshot(t, x);
            fresh = false;
        }
    }
    if (tr.snapshots.empty() || tr.snapshots.back().t != horizon) tr.snapshots.push_back({horizon, z, ctrl.mode, x});
    return tr;
}

EnergyAudit energy_inequality_audit(const Trajectory& traj, const Forcing& forcing, double s_offset) {
    EnergyAudit audit;
    double max_norm = 0.0;
    for (const auto& s : traj.samples) max_norm = std::max(max_norm, s.state_norm);
    audit.tolerance = 1e-4 * (1.0 + max_norm);
    audit.max_violation = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j + 1 < traj.samples.size(); ++j) {
        const auto& a = traj.samples[j];
        const auto& b = traj.samples[j + 1];
        const double h = b.t - a.t;
        if (!(h > 0.0)) continue;
        const double rate = a.susceptibility + s_offset;
        const double bound = std::exp(rate * h) * a.state_norm + forcing.growth_integral(rate, a.t, b.t);
        audit.max_violation = std::max(audit.max_violation, (b.state_norm - bound) / h);
    }
    if (!std::isfinite(audit.max_violation)) audit.max_violation = 0.0;
    audit.passed = audit.max_violation <= audit.tolerance;
    return audit;
}

bool pathwise_bound_audit(const Trajectory& traj, double a_star, double f_sup, double x0_norm, double horizon) {
    double sup = 0.0;
    for (const auto& s : traj.samples) sup = std::max(sup, s.state_norm);
    for (const auto& s : traj.snapshots) sup = std::max(sup, norm2(s.state));
    const double base = x0_norm + horizon * f_sup;
    if (base == 0.0) return sup == 0.0;
    if (sup == 0.0) return true;
    return std::log(sup) <= std::log(base) + a_star * horizon + 1e-9;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    out << "t,E,L,S,z,m\n" << std::setprecision(17);
    for (const auto& s : traj.samples) {
        out << s.t << ',' << s.energy << ',' << s.load << ',' << s.susceptibility << ',' << s.regime << ','
            << static_cast<int>(s.mode) << '\n';
    }
}

}  // namespace tailshape

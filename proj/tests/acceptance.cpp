// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "tailshape/config.hpp"
#include "tailshape/experiment.hpp"
#include "tailshape/integrator.hpp"
#include "tailshape/nnls.hpp"
#include "tailshape/regime.hpp"
#include "tailshape/report.hpp"
#include "tailshape/rng.hpp"
#include "tailshape/tailfit.hpp"

using namespace tailshape;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
    std::printf("CRITERION %2d %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

template <typename... Args>
std::string fmt(const char* f, Args... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

// Controller hygiene accumulates over every ensemble run below.
std::size_t hygiene_ensembles = 0, hygiene_trajectories = 0, chattering = 0, release = 0;

EnsembleResult ensemble(const ScenarioConfig& cfg) {
    const Scenario sc = build_scenario(cfg);
    EnsembleResult r = analyze(sc, run_ensemble_raw(sc, cfg.workers));
    ++hygiene_ensembles;
    hygiene_trajectories += r.audits.trajectories;
    chattering += r.audits.chattering;
    release += r.audits.release_violations;
    return r;
}

RegimePath single_regime(double horizon) {
    RegimePath p;
    p.horizon = horizon;
    p.states = {0};
    return p;
}

// ---------------------------------------------------------------- 1

void integrator_correctness() {
    const auto t0 = Clock::now();
    SolverConfig cfg;
    cfg.rtol = 1e-10;
    cfg.atol = 1e-12;
    cfg.output_intervals = 4;
    const Forcing none{Forcing::Kind::none, 0, 0.0, 0.0};
    std::mt19937_64 gen(7);
    std::uniform_int_distribution<std::size_t> dim(1, 12);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t d = dim(gen);
        std::normal_distribution<double> nd(0.0, 1.0);
        Eigen::MatrixXd a(d, d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) a(i, j) = nd(gen) / std::sqrt(static_cast<double>(d));
        // shift the spectrum left of -0.1
        const double abscissa = a.eigenvalues().real().maxCoeff();
        a.diagonal().array() -= std::max(0.0, abscissa) + 0.1;
        Eigen::VectorXd x0(d);
        for (std::size_t i = 0; i < d; ++i) x0(i) = nd(gen);
        const Eigen::VectorXd want = a.exp() * x0;

        Matrix m(d, d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) m(i, j) = a(i, j);
        const Vector x(x0.data(), x0.data() + d);
        const auto tr = integrate_trajectory(constant_table(LiftedOperator::from_matrix(m)), none, single_regime(1.0),
                                             PolicyConfig{}, x, cfg);
        const Vector& got = tr.final_state();
        double err = 0.0;
        for (std::size_t i = 0; i < d; ++i) err += std::pow(got[i] - want(i), 2);
        worst = std::max(worst, std::sqrt(err) / want.norm());
    }

    double scalar = 0.0;
    const auto decay = integrate_trajectory(constant_table(LiftedOperator::from_matrix(Matrix{{-1}})), none,
                                            single_regime(1.0), PolicyConfig{}, Vector{1.0}, cfg);
    const Forcing one{Forcing::Kind::constant, 0, 1.0, 0.0};
    const auto charge = integrate_trajectory(constant_table(LiftedOperator::from_matrix(Matrix{{-1}})), one,
                                             single_regime(1.0), PolicyConfig{}, Vector{0.0}, cfg);
    for (const auto& s : decay.samples)
        scalar = std::max(scalar, std::abs(s.state_norm - std::exp(-s.t)) / std::exp(-s.t));
    for (const auto& s : charge.samples)
        if (s.t > 0) scalar = std::max(scalar, std::abs(s.state_norm - (1 - std::exp(-s.t))) / (1 - std::exp(-s.t)));

    const double secs = seconds_since(t0);
    report(1, worst <= 1e-8 && scalar <= 1e-8 && secs < 10.0,
           fmt("integrator: max rel err %.2e over 50 operators, %.2e on e^-t / 1-e^-t (tol 1e-8); %.2f s (< 10 s)", worst,
               scalar, secs));
}

// ---------------------------------------------------------------- 4

void nnls_correctness() {
    const auto t0 = Clock::now();
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> nd(0.0, 1.0);
    bool nonneg = true;

    // representable targets: b = A x* with x* >= 0 and some exact zeros
    double worst_residual = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t m = 40, k = 8;
        Matrix a(m, k);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < k; ++j) a(i, j) = std::exp(-(0.1 + j) * (i / 10.0)) + 0.1 * u(gen);
        Vector x(k);
        for (std::size_t j = 0; j < k; ++j) x[j] = u(gen) < 0.3 ? 0.0 : u(gen);
        Vector b(m, 0.0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < k; ++j) b[i] += a(i, j) * x[j];
        const auto r = nnls(a, b);
        for (double v : r.x) nonneg = nonneg && v >= 0.0;
        double res = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double ax = 0.0;
            for (std::size_t j = 0; j < k; ++j) ax += a(i, j) * r.x[j];
            res += (ax - b[i]) * (ax - b[i]);
        }
        worst_residual = std::max(worst_residual, std::sqrt(res));
    }

    // KKT on random targets, recomputed here from the returned x
    double worst_kkt = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t m = 30, k = 10;
        Matrix a(m, k);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < k; ++j) a(i, j) = nd(gen);
        Vector b(m);
        for (double& v : b) v = nd(gen);
        const auto r = nnls(a, b);
        Vector resid(m, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < k; ++j) resid[i] += a(i, j) * r.x[j];
            resid[i] -= b[i];
        }
        for (std::size_t j = 0; j < k; ++j) {
            nonneg = nonneg && r.x[j] >= 0.0;
            double g = 0.0;
            for (std::size_t i = 0; i < m; ++i) g += a(i, j) * resid[i];
            worst_kkt = std::max(worst_kkt, r.x[j] > 0.0 ? std::abs(g) : std::max(0.0, -g));
        }
    }
    const double secs = seconds_since(t0);
    report(4, worst_residual <= 1e-10 && worst_kkt <= 1e-8 && nonneg && secs < 5.0,
           fmt("nnls: exact-recovery residual %.2e (tol 1e-10), KKT %.2e on 100 targets (tol 1e-8), weights %s; %.2f s "
               "(< 5 s)",
               worst_residual, worst_kkt, nonneg ? "nonnegative" : "NEGATIVE", secs));
}

// ---------------------------------------------------------------- 5

void ctmc_statistics() {
    const double lambda_us = 1.0;
    const GeneratorSpec gen = GeneratorSpec::two_state(0.5, lambda_us, "S");
    std::vector<double> dwells;
    std::vector<RegimePath> paths;
    for (std::uint64_t i = 0; dwells.size() < 10000; ++i) {
        paths.push_back(sample_path(gen, 100.0, 555, i));
        for (double d : completed_dwells(paths.back(), 1)) dwells.push_back(d);
    }
    const auto est = estimate_dwell_rates(paths, gen.states);
    const double rel = std::abs(est[1].rate - lambda_us) / lambda_us;

    std::sort(dwells.begin(), dwells.end());
    const double n = static_cast<double>(dwells.size());
    double ks = 0.0;
    for (std::size_t i = 0; i < dwells.size(); ++i) {
        const double model = std::exp(-lambda_us * dwells[i]);
        ks = std::max({ks, std::abs((n - i) / n - model), std::abs((n - i - 1) / n - model)});
    }
    report(5, rel <= 0.02 && ks <= 0.02,
           fmt("ctmc: lambda_US MLE %.4f vs 1 (rel err %.4f, tol 0.02) from %zu dwells; KS %.4f (tol 0.02)",
               est[1].rate, rel, est[1].count, ks));
}

// ---------------------------------------------------------------- 6

std::vector<double> pareto(std::size_t n, double alpha, std::uint64_t seed, std::uint64_t index) {
    StreamRng rng(seed, index, Stream::synthetic);
    std::vector<double> out(n);
    for (double& v : out) v = std::pow(rng.uniform(), -1.0 / alpha);
    return out;
}

void tail_recovery() {
    const auto t0 = Clock::now();
    const auto big = pareto(100000, 2.0, 99, 0);
    const auto sel = select_bmin(big);
    std::size_t covered = 0;
    const std::size_t reps = 50;
    for (std::size_t m = 0; m < reps; ++m) {
        const auto s = pareto(100000, 2.0, 99, m + 1);
        const auto fit = select_bmin(s);
        const auto ci = bootstrap_ci(s, fit.alpha, 100, 0.95, 1000 + m);
        if (ci.lo <= 2.0 && 2.0 <= ci.hi) ++covered;
    }
    const double secs = seconds_since(t0);
    report(6, sel.alpha >= 1.9 && sel.alpha <= 2.1 && covered >= 45 && secs < 60.0,
           fmt("pareto(2): alpha_hat %.4f at N=1e5 (range [1.9, 2.1]); 95%% CI covers 2 in %zu/50 meta-repetitions "
               "(N=1e5, B=100; need >= 45); %.1f s (< 60 s)",
               sel.alpha, covered, secs));
}

// ---------------------------------------------------------------- 13

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void determinism() {
    RunConfig rc = parse_config(preset_yaml(Preset::dddas));
    rc.scenario.ensemble = 64;
    const fs::path root = fs::temp_directory_path() / "tailshape_acceptance_det";
    fs::remove_all(root);
    std::vector<fs::path> dirs;
    std::vector<std::vector<std::string>> written;
    for (std::size_t workers : {1, 8, 1}) {
        const Scenario sc = build_scenario(rc.scenario);
        const EnsembleRaw raw = run_ensemble_raw(sc, workers);
        const EnsembleResult res = analyze(sc, raw);
        dirs.push_back(root / ("w" + std::to_string(workers) + "_" + std::to_string(dirs.size())));
        fs::create_directories(dirs.back());
        written.push_back(write_ensemble_dir(dirs.back(), rc, sc, raw, res));
    }
    bool same = written[0] == written[1] && written[0] == written[2];
    std::size_t bytes = 0;
    for (const auto& f : written[0]) {
        const std::string ref = slurp(dirs[0] / f);
        bytes += ref.size();
        same = same && ref == slurp(dirs[1] / f) && ref == slurp(dirs[2] / f);
    }
    fs::remove_all(root);
    report(13, same && !written[0].empty(),
           fmt("determinism: %zu persisted files (%zu bytes) byte-identical across workers 1, 8 and a rerun", written[0].size(),
               bytes));
}

}  // namespace

int main() {
    const auto start = Clock::now();

    integrator_correctness();

    // 2, 3: all four presets at N = 200
    {
        const auto t0 = Clock::now();
        std::size_t energy_ok = 0, path_ok = 0, total = 0, failed = 0;
        double worst_ratio = 0.0;
        for (Preset p : {Preset::plain, Preset::dddas, Preset::memory_off, Preset::safe_in_u}) {
            auto c = make_preset(p);
            c.ensemble = 200;
            const auto r = ensemble(c);
            total += r.audits.trajectories;
            energy_ok += r.audits.energy_pass;
            path_ok += r.audits.pathwise_pass;
            failed += r.audits.failed;
            worst_ratio = std::max(worst_ratio, r.audits.max_energy_violation_ratio);
        }
        const double secs = seconds_since(t0);
        report(2, energy_ok == total && failed == 0 && secs < 120.0,
               fmt("energy inequality: %zu/%zu trajectories within 1e-4 (1 + max|X|) (worst violation/tolerance %.3g); "
                   "%.1f s (< 120 s)",
                   energy_ok, total, worst_ratio, secs));
        report(3, path_ok == total && failed == 0, fmt("pathwise bound: %zu/%zu trajectories, 0 violations required", path_ok, total));
    }

    nnls_correctness();
    ctmc_statistics();
    tail_recovery();

    // 7
    const auto t7 = Clock::now();
    const ScenarioConfig plain_cfg = make_preset(Preset::plain);
    const EnsembleResult plain = ensemble(plain_cfg);
    {
        const double secs = seconds_since(t7);
        const auto& t = plain.tail;
        const double a = t.selection.alpha, th = t.alpha_th.value;
        const bool ok = t.available && t.alpha_th.active && a <= 2 * th && a >= th / 2 && !(t.ci.lo <= 3 * th && 3 * th <= t.ci.hi) &&
                        !(t.ci.lo <= th / 3 && th / 3 <= t.ci.hi) && secs < 600.0;
        report(7, ok,
               fmt("mechanism: alpha_hat %.4f CI [%.4f, %.4f] vs alpha_th %.4f = lambda_U %.4f / gamma %.4f (%s); ratio "
                   "%.3f (within [0.5, 2]); CI excludes %.4f and %.4f; %.1f s (< 600 s)",
                   a, t.ci.lo, t.ci.hi, th, t.lambda_u, t.gamma_used, t.gamma_source.c_str(), a / th, 3 * th, th / 3, secs));
    }

    // 8
    {
        std::vector<double> alpha{plain.tail.selection.alpha};
        for (double rate : {2.0, 4.0}) alpha.push_back(ensemble(apply_sweep_value(plain_cfg, SweepAxis::regime_rates, rate)).tail.selection.alpha);
        const bool increasing = alpha[0] < alpha[1] && alpha[1] < alpha[2];
        const double rho = spearman({1, 2, 4}, alpha);
        report(8, increasing && rho == 1.0,
               fmt("lambda_US in {1, 2, 4}: alpha_hat %.4f, %.4f, %.4f; Spearman %.3f (need strictly increasing, 1)", alpha[0],
                   alpha[1], alpha[2], rho));
    }

    // 9
    const ScenarioConfig dddas_cfg = make_preset(Preset::dddas);
    const EnsembleResult dddas = ensemble(dddas_cfg);
    {
        const Scenario sc = build_scenario(dddas_cfg);
        const double rho = std::exp(-sc.contraction.kappa * dddas_cfg.policy.min_dwell);
        const auto& m = dddas.truncation;
        const std::size_t below = std::count_if(dddas.bursts.begin(), dddas.bursts.end(),
                                                [&](double b) { return std::log(b) <= m.log_value; });
        const std::size_t above = std::count_if(plain.bursts.begin(), plain.bursts.end(),
                                                [&](double b) { return std::log(b) > m.log_value; });
        const double frac = static_cast<double>(above) / static_cast<double>(plain.bursts.size());
        const bool ok = sc.contraction.certified && rho < 1.0 && m.available && below == dddas.bursts.size() &&
                        dddas.audits.failed == 0 && frac >= 0.01;
        report(9, ok,
               fmt("truncation: mu2(A_U^(2)) = %.4f (kappa %.4f, rho %.4f); ln M_T = %.4g; DDDAS %zu/%zu bursts <= M_T; "
                   "no-DDDAS fraction above M_T %.4f (need >= 0.01, max burst %.4g)",
                   -sc.contraction.kappa, sc.contraction.kappa, rho, m.log_value, below, dddas.bursts.size(), frac,
                   *std::max_element(plain.bursts.begin(), plain.bursts.end())));
    }

    // 10: delta = 0 is the policy-free ensemble, the mitigate operator needs delta > 0
    {
        const EnsembleResult mid = ensemble(apply_sweep_value(dddas_cfg, SweepAxis::mitigate_damping, 10.0));
        const std::vector<const EnsembleResult*> grid{&plain, &mid, &dddas};
        bool ok = true;
        std::string detail = "delta 0 / 10 / 20: alpha_hat";
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const auto& t = grid[i]->tail;
            ok = ok && t.available;
            detail += fmt(" %.4f [%.4f, %.4f]", t.selection.alpha, t.ci.lo, t.ci.hi);
            if (i == 0) continue;
            const auto& p = grid[i - 1]->tail;
            // a decrease counts only when each estimate lies outside the other's CI
            if (t.selection.alpha < p.ci.lo && p.selection.alpha > t.ci.hi) ok = false;
        }
        report(10, ok, detail + "; no decrease beyond bootstrap noise");
    }

    // 11
    {
        auto off_cfg = make_preset(Preset::memory_off);
        const EnsembleResult off = ensemble(off_cfg);
        const double amp = forced_response_amplitude(build_scenario(off_cfg));
        const auto& g = off.gamma.dwell.samples;
        const bool negative = !g.empty() && std::all_of(g.begin(), g.end(), [](double v) { return v < 0.0; });
        const double max_burst = *std::max_element(off.bursts.begin(), off.bursts.end());
        constexpr double kMultiple = 4.0;

        const EnsembleResult safe = ensemble(make_preset(Preset::safe_in_u));
        const auto cmp = compare_pair(plain, safe, plain_cfg.band_tolerance);
        const auto ref = compare_pair(plain, dddas, plain_cfg.band_tolerance);
        const bool ok = negative && max_burst < kMultiple * amp && cmp.dominance && off.audits.failed == 0;
        report(11, ok,
               fmt("controls: memory-OFF %zu gamma_dwell samples, max %.4g (< 0 required); max burst %.4f < %.0f x "
                   "response %.4f; SAFE-in-U dominance %s (worst excess %.3g), DDDAS dominance %s",
                   g.size(), g.empty() ? NAN : *std::max_element(g.begin(), g.end()), max_burst, kMultiple, amp,
                   cmp.dominance ? "yes" : "no", cmp.worst_excess, ref.dominance ? "yes" : "no"));
    }

    report(12, chattering == 0 && release == 0,
           fmt("controller hygiene: %zu chattering and %zu release violations over %zu ensembles / %zu trajectories",
               chattering, release, hygiene_ensembles, hygiene_trajectories));

    determinism();

    std::printf("acceptance: %d failed, %.0f s total\n", failures, seconds_since(start));
    return failures == 0 ? 0 : 1;
}

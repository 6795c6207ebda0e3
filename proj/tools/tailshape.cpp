// tailshape: command-line front end.
//
// Exit codes: 0 success, 2 configuration error, 3 audit or acceptance
// failure, 4 runtime divergence, 130 interrupted.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "tailshape/config.hpp"
#include "tailshape/errors.hpp"
#include "tailshape/report.hpp"

namespace fs = std::filesystem;
using namespace tailshape;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitAudit = 3;
constexpr int kExitDivergence = 4;
constexpr int kExitInterrupted = 130;

std::atomic<bool> g_stop{false};

extern "C" void on_sigint(int) { g_stop.store(true); }

struct Interrupted {};

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> ensemble;
    std::optional<std::size_t> workers;
    std::string out;
    bool quiet = false;
};

RunConfig load(const std::string& path, const Overrides& ov) {
    RunConfig rc = load_config(path);
    auto& c = rc.scenario;
    if (ov.seed) c.seed = *ov.seed;
    if (ov.ensemble) c.ensemble = *ov.ensemble;
    if (ov.workers) c.workers = *ov.workers;
    try {
        c.validate();
    } catch (const ParameterError& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return rc;
}

Json overrides_json(const Overrides& ov) {
    Json j = Json::object();
    if (ov.seed) j["seed"] = *ov.seed;
    if (ov.ensemble) j["ensemble"] = *ov.ensemble;
    return j;
}

fs::path out_dir(const Overrides& ov, const std::string& fallback) { return ov.out.empty() ? fs::path(fallback) : fs::path(ov.out); }

ProgressFn progress_printer(const Overrides& ov, const std::string& name) {
    if (ov.quiet) return {};
    return [name, last = std::size_t{0}](std::size_t done, std::size_t total) mutable {
        const std::size_t pct = 100 * done / total;
        if (pct != last || done == total) {
            last = pct;
            std::fprintf(stderr, "\r%s: %zu/%zu trajectories", name.c_str(), done, total);
            if (done == total) std::fputc('\n', stderr);
        }
    };
}

/// Ensemble run plus the persisted directory.
struct EnsembleRun {
    Scenario scenario;
    EnsembleResult result;
    std::vector<std::string> files;
};

EnsembleRun run_and_persist(const RunConfig& rc, const Overrides& ov, const fs::path& dir, const std::string& command) {
    ManifestInfo info;
    info.command = command;
    info.config_sha256 = sha256_hex(rc.text);
    info.seed = rc.scenario.seed;
    info.started = utc_timestamp();

    EnsembleRun run{build_scenario(rc.scenario), {}, {}};
    const EnsembleRaw raw =
        run_ensemble_raw(run.scenario, rc.scenario.workers, &g_stop, progress_printer(ov, rc.scenario.name));
    if (g_stop.load()) {
        fs::create_directories(dir);
        write_text_atomic(dir / "config.yaml", rc.text);
        info.finished = utc_timestamp();
        info.complete = false;
        write_manifest(dir, info, {"config.yaml"});
        throw Interrupted{};
    }
    run.result = analyze(run.scenario, raw);
    run.files = write_ensemble_dir(dir, rc, run.scenario, raw, run.result);
    write_text_atomic(dir / "overrides.json", overrides_json(ov).dump(2) + "\n");
    run.files.push_back("overrides.json");
    info.finished = utc_timestamp();
    write_manifest(dir, info, run.files);
    return run;
}

int audit_exit(const std::vector<EnsembleRun>& runs, const std::vector<std::string>& extra = {}) {
    Json failures = Json::array();
    bool divergence = false;
    for (const auto& r : runs) {
        for (const auto& f : audit_failures(r.result)) failures.push_back(f);
        const bool claims_truncation = r.scenario.contraction.certified &&
                                       (r.result.preset == Preset::dddas || r.result.preset == Preset::safe_in_u);
        if (r.result.audits.failed > 0 && claims_truncation) divergence = true;
    }
    for (const auto& f : extra) failures.push_back(f);
    if (divergence) {
        std::cerr << Json{{"status", "divergence"}, {"failures", failures}}.dump() << '\n';
        return kExitDivergence;
    }
    if (!failures.empty()) {
        std::cerr << Json{{"status", "audit_failure"}, {"failures", failures}}.dump() << '\n';
        return kExitAudit;
    }
    return 0;
}

void summarize(const EnsembleRun& r) {
    const auto& t = r.result.tail;
    std::printf("%s: N=%zu alpha_hat=%.4g CI=[%.4g, %.4g] alpha_th=%.4g gamma_op=%.4g lambda_U=%.4g audits=%s\n",
                r.result.name.c_str(), r.result.bursts.size(), t.selection.alpha, t.ci.lo, t.ci.hi, t.alpha_th.value,
                r.result.gamma.op, t.lambda_u, r.result.audits.all_passed() ? "pass" : "FAIL");
}

int cmd_fit_kernel(const std::string& path, const Overrides& ov) {
    const RunConfig rc = load(path, ov);
    if (!rc.has_kernel) throw ConfigError(path + ": missing required key 'kernel'");
    ScenarioConfig c = rc.scenario;
    if (c.preset == Preset::memory_off) c.preset = Preset::plain;  // fit the declared kernel anyway
    double r_min = 0.0, r_max = 0.0;
    const SOEKernel soe = fit_kernel(c, &r_min, &r_max);
    const KernelTarget target(c.kernel.target, c.horizon);
    const fs::path dir = out_dir(ov, "kernel_fit");
    fs::create_directories(dir);

    std::ostringstream k;
    k << "k,weight,rate\n";
    for (std::size_t i = 0; i < soe.size(); ++i) k << i << ',' << fmt17(soe.weights[i]) << ',' << fmt17(soe.rates[i]) << '\n';
    std::ostringstream res;
    res << "t,g,soe,error\n";
    const double scale = c.kernel.weight_scale;
    for (double t : default_check_times(c.horizon, c.kernel.check_points)) {
        const double g = scale * target(t);
        const double s = evaluate_soe(soe, t);
        res << fmt17(t) << ',' << fmt17(g) << ',' << fmt17(s) << ',' << fmt17(s - g) << '\n';
    }
    Json j;
    j["target"] = target.describe();
    j["weight_scale"] = scale;
    j["K"] = soe.size();
    j["r_min"] = r_min;
    j["r_max"] = r_max;
    j["eps_rel"] = soe.eps_rel;
    j["residual_norm"] = soe.residual_norm;
    j["kkt_violation"] = soe.kkt_violation;
    j["non_unique"] = soe.non_unique;
    j["weights"] = soe.weights;
    j["rates"] = soe.rates;

    ManifestInfo info{"fit-kernel", sha256_hex(rc.text), c.seed, utc_timestamp(), "", true};
    write_text_atomic(dir / "config.yaml", rc.text);
    write_text_atomic(dir / "kernel.csv", k.str());
    write_text_atomic(dir / "fit_residuals.csv", res.str());
    write_text_atomic(dir / "kernel.json", j.dump(2) + "\n");
    info.finished = utc_timestamp();
    write_manifest(dir, info, {"config.yaml", "kernel.csv", "fit_residuals.csv", "kernel.json"});
    std::printf("K=%zu eps_rel=%.6g residual=%.3g\n", soe.size(), soe.eps_rel, soe.residual_norm);
    return 0;
}

int cmd_simulate(const std::string& path, std::size_t index, const Overrides& ov) {
    const RunConfig rc = load(path, ov);
    if (index >= rc.scenario.ensemble)
        throw ConfigError("trajectory index " + std::to_string(index) + " is outside the ensemble (N = " +
                          std::to_string(rc.scenario.ensemble) + ")");
    const Scenario sc = build_scenario(rc.scenario);
    RegimePath rp;
    const Trajectory traj = simulate_trajectory(sc, index, &rp);
    const fs::path dir = out_dir(ov, "trajectory_" + std::to_string(index));
    fs::create_directories(dir);
    ManifestInfo info{"simulate", sha256_hex(rc.text), rc.scenario.seed, utc_timestamp(), "", true};
    std::ostringstream t, e, p;
    write_trajectory_csv(t, traj);
    write_event_log_csv(e, traj.events);
    write_path_csv(p, rp, rc.scenario.generator.states);
    write_text_atomic(dir / "config.yaml", rc.text);
    write_text_atomic(dir / "trajectory.csv", t.str());
    write_text_atomic(dir / "events.csv", e.str());
    write_text_atomic(dir / "regime_path.csv", p.str());
    info.finished = utc_timestamp();
    write_manifest(dir, info, {"config.yaml", "trajectory.csv", "events.csv", "regime_path.csv"});
    std::printf("trajectory %zu: burst=%.6g mode changes=%zu accepted steps=%zu\n", index, traj.burst,
                traj.events.size(), traj.accepted_steps);
    return 0;
}

int cmd_ensemble(const std::string& path, const Overrides& ov) {
    const RunConfig rc = load(path, ov);
    const auto run = run_and_persist(rc, ov, out_dir(ov, rc.scenario.name), "ensemble");
    summarize(run);
    return audit_exit({run});
}

int cmd_compare(const std::vector<std::string>& paths, const Overrides& ov) {
    std::vector<RunConfig> cfgs;
    for (const auto& p : paths) cfgs.push_back(load(p, ov));
    for (std::size_t i = 0; i < cfgs.size(); ++i) {
        for (std::size_t j = i + 1; j < cfgs.size(); ++j) {
            try {
                check_comparable(cfgs[i].scenario, cfgs[j].scenario);
            } catch (const ParameterError& e) {
                throw ConfigError(std::string("comparison refused: ") + e.what());
            }
            if (cfgs[i].scenario.name == cfgs[j].scenario.name)
                throw ConfigError("comparison refused: two scenarios are named '" + cfgs[i].scenario.name + "'");
        }
    }
    const fs::path dir = out_dir(ov, "comparison");
    fs::create_directories(dir);
    ManifestInfo info{"compare", "", cfgs.empty() ? 0 : cfgs.front().scenario.seed, utc_timestamp(), "", true};
    std::string hashes;
    std::vector<EnsembleRun> runs;
    std::vector<std::string> files;
    for (const auto& rc : cfgs) {
        hashes += sha256_hex(rc.text);
        Overrides sub = ov;
        sub.out.clear();
        runs.push_back(run_and_persist(rc, sub, dir / rc.scenario.name, "compare"));
        for (const auto& f : runs.back().files) files.push_back(rc.scenario.name + "/" + f);
        summarize(runs.back());
    }
    info.config_sha256 = sha256_hex(hashes);
    std::vector<EnsembleResult> results;
    for (const auto& r : runs) results.push_back(r.result);
    const double tol = cfgs.front().scenario.band_tolerance;
    const ComparisonReport cmp = compare_scenarios(results, tol);

    std::ostringstream overlay;
    overlay << "scenario,b,p\n";
    for (const auto& r : results)
        for (const auto& pt : r.ccdf.points) overlay << r.name << ',' << fmt17(pt.b) << ',' << fmt17(pt.p) << '\n';
    write_text_atomic(dir / "ccdf_overlay.csv", overlay.str());
    write_text_atomic(dir / "comparison.json", comparison_report(cmp, results).dump(2) + "\n");
    files.push_back("ccdf_overlay.csv");
    files.push_back("comparison.json");
    info.finished = utc_timestamp();
    write_manifest(dir, info, files);

    std::vector<std::string> extra;
    for (const auto& p : cmp.pairs) {
        if (!p.dominance) extra.push_back(p.b + ": tail not dominated by " + p.a);
        if (!p.typical_preserved) extra.push_back(p.b + ": median band distorted by " + fmt17(p.median_band_distortion));
    }
    if (cmp.memory_ordering && !*cmp.memory_ordering) extra.push_back("memory OFF q0.999 is not below memory ON q0.9");
    return audit_exit(runs, extra);
}

int cmd_sweep(const std::string& path, const Overrides& ov) {
    const RunConfig rc = load(path, ov);
    if (!rc.sweep) throw ConfigError(path + ": missing required key 'sweep'");
    ManifestInfo info{"sweep", sha256_hex(rc.text), rc.scenario.seed, utc_timestamp(), "", true};
    const SweepTable table = sensitivity_sweep(rc.sweep->axis, rc.sweep->grid, rc.scenario);
    const fs::path dir = out_dir(ov, rc.scenario.name + "_sweep");
    fs::create_directories(dir);
    std::ostringstream csv;
    csv << "value,ok,eps_rel,gamma_op,lambda_u,alpha_hat,ci_lo,ci_hi,alpha_th,log_prefactor,q90_burst,"
           "intervention_rate,band_distortion,tail_present\n";
    for (const auto& r : table.rows)
        csv << fmt17(r.value) << ',' << (r.ok ? 1 : 0) << ',' << fmt17(r.eps_rel) << ',' << fmt17(r.gamma_op) << ','
            << fmt17(r.lambda_u) << ',' << fmt17(r.alpha_hat) << ',' << fmt17(r.ci_lo) << ',' << fmt17(r.ci_hi) << ','
            << fmt17(r.alpha_th) << ',' << fmt17(r.log_prefactor) << ',' << fmt17(r.q90_burst) << ','
            << fmt17(r.intervention_rate) << ',' << fmt17(r.band_distortion) << ',' << (r.tail_present ? 1 : 0) << '\n';
    write_text_atomic(dir / "config.yaml", rc.text);
    write_text_atomic(dir / "sweep.csv", csv.str());
    write_text_atomic(dir / "sweep.json", sweep_report(table, rc.scenario.name).dump(2) + "\n");
    info.finished = utc_timestamp();
    write_manifest(dir, info, {"config.yaml", "sweep.csv", "sweep.json"});
    for (const auto& r : table.rows)
        std::printf("%s=%g alpha_hat=%.4g CI=[%.4g, %.4g] %s\n", sweep_axis_name(table.axis), r.value, r.alpha_hat,
                    r.ci_lo, r.ci_hi, r.ok ? "" : r.error.c_str());
    std::printf("rank correlation %.3f\n", table.rank_correlation);
    return 0;
}

int cmd_report(const std::string& dir_str, const std::string& out, bool quiet) {
    const fs::path dir(dir_str);
    RunConfig rc = load_config(dir / "config.yaml");
    if (fs::exists(dir / "overrides.json")) {
        std::ifstream in(dir / "overrides.json");
        const Json ov = Json::parse(in);
        if (ov.contains("seed")) rc.scenario.seed = ov["seed"].get<std::uint64_t>();
        if (ov.contains("ensemble")) rc.scenario.ensemble = ov["ensemble"].get<std::size_t>();
    }
    const Scenario sc = build_scenario(rc.scenario);
    const EnsembleRaw raw = read_ensemble_raw(dir);
    const EnsembleResult res = analyze(sc, raw);
    const std::string text = scenario_report(sc, res, sha256_hex(rc.text)).dump(2) + "\n";
    const fs::path target = out.empty() ? dir / "report.json" : fs::path(out);
    bool same = false;
    if (fs::exists(target)) {
        std::ifstream in(target, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        same = ss.str() == text;
    }
    write_text_atomic(target, text);
    if (!quiet) std::printf("%s %s\n", target.string().c_str(), same ? "unchanged" : "written");
    return audit_exit({EnsembleRun{sc, res, {}}});
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Heavy-tailed burst statistics of regime-switching networks with memory"};
    app.require_subcommand(1);
    Overrides ov;
    std::uint64_t seed = 0;
    std::size_t n = 0, workers = 0, trajectory = 0;
    std::vector<std::string> configs;
    std::string config, dir, out;

    auto common = [&](CLI::App* sub, bool with_n) {
        sub->add_option("--seed", seed, "master seed override");
        sub->add_option("--out", ov.out, "output directory");
        if (with_n) {
            sub->add_option("--N", n, "ensemble size override");
            sub->add_option("--workers", workers, "worker threads (0: all cores)");
        }
        sub->add_flag("--quiet", ov.quiet, "no progress output");
    };
    auto* fit = app.add_subcommand("fit-kernel", "fit the sum-of-exponentials kernel");
    fit->add_option("config", config)->required();
    common(fit, false);
    auto* sim = app.add_subcommand("simulate", "integrate one trajectory of the ensemble");
    sim->add_option("config", config)->required();
    sim->add_option("--trajectory", trajectory, "trajectory index")->required();
    common(sim, true);
    auto* ens = app.add_subcommand("ensemble", "run and persist one Monte Carlo ensemble");
    ens->add_option("config", config)->required();
    common(ens, true);
    auto* cmp = app.add_subcommand("compare", "run several scenarios with paired seeds and compare their tails");
    cmp->add_option("configs", configs)->required()->expected(1, -1);
    common(cmp, true);
    auto* swp = app.add_subcommand("sweep", "sensitivity sweep along the configured axis");
    swp->add_option("config", config)->required();
    common(swp, true);
    auto* rep = app.add_subcommand("report", "regenerate report.json from a persisted ensemble directory");
    rep->add_option("dir", dir)->required();
    rep->add_option("--out", out, "write the report here instead of <dir>/report.json");
    rep->add_flag("--quiet", ov.quiet, "no summary line");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    for (auto* sub : {fit, sim, ens, cmp, swp}) {
        if (sub->count("--seed")) ov.seed = seed;
        if (sub->get_option_no_throw("--N") && sub->count("--N")) ov.ensemble = n;
        if (sub->get_option_no_throw("--workers") && sub->count("--workers")) ov.workers = workers;
    }
    std::signal(SIGINT, on_sigint);

    try {
        if (*fit) return cmd_fit_kernel(config, ov);
        if (*sim) return cmd_simulate(config, trajectory, ov);
        if (*ens) return cmd_ensemble(config, ov);
        if (*cmp) return cmd_compare(configs, ov);
        if (*swp) return cmd_sweep(config, ov);
        if (*rep) return cmd_report(dir, out, ov.quiet);
    } catch (const Interrupted&) {
        std::cerr << "interrupted; partial manifest written\n";
        return kExitInterrupted;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const ParameterError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DimensionError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const StiffnessError& e) {
        std::cerr << "divergence: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

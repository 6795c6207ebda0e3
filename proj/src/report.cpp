#include "tailshape/report.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <sstream>

#include "tailshape/errors.hpp"
#include "tailshape/quantile.hpp"

namespace tailshape {

namespace fs = std::filesystem;

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("SHA-256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json quantile_json(const QuantileSummary& q) {
    Json j;
    j["available"] = q.available;
    j["q"] = q.level;
    j["value"] = q.available ? number(q.value) : Json(nullptr);
    j["samples"] = q.samples.size();
    std::size_t nonneg = 0;
    for (double v : q.samples) nonneg += v >= 0.0 ? 1 : 0;
    j["nonnegative_samples"] = nonneg;
    if (!q.samples.empty()) {
        j["min"] = *std::min_element(q.samples.begin(), q.samples.end());
        j["max"] = *std::max_element(q.samples.begin(), q.samples.end());
    }
    j["skipped"] = q.skipped;
    return j;
}

}  // namespace

std::string sha256_file(const fs::path& path) { return sha256_hex(read_file(path)); }

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::vector<std::string> audit_failures(const EnsembleResult& res) {
    std::vector<std::string> out;
    const auto& a = res.audits;
    const std::string tag = res.name + ": ";
    if (a.failed) out.push_back(tag + std::to_string(a.failed) + " trajectories diverged");
    const std::size_t ok = a.trajectories - a.failed;
    if (a.energy_pass != ok) out.push_back(tag + "energy inequality violated on " + std::to_string(ok - a.energy_pass) + " trajectories");
    if (a.pathwise_pass != ok) out.push_back(tag + "pathwise bound violated on " + std::to_string(ok - a.pathwise_pass) + " trajectories");
    if (a.chattering) out.push_back(tag + std::to_string(a.chattering) + " chattering violations");
    if (a.release_violations) out.push_back(tag + std::to_string(a.release_violations) + " release violations");
    return out;
}

Json scenario_report(const Scenario& sc, const EnsembleResult& res, const std::string& config_sha256) {
    const auto& c = sc.config;
    Json j;
    j["scenario"] = c.name;
    j["preset"] = preset_name(c.preset);
    j["config_sha256"] = config_sha256;
    j["seed"] = c.seed;
    j["ensemble"] = c.ensemble;
    j["horizon"] = c.horizon;

    Json reg;
    reg["states"] = c.generator.states;
    Json rates = Json::object();
    for (std::size_t i = 0; i < c.generator.size(); ++i)
        for (std::size_t k = 0; k < c.generator.size(); ++k)
            if (i != k && c.generator.rates(i, k) > 0.0)
                rates[c.generator.states[i] + "->" + c.generator.states[k]] = c.generator.rates(i, k);
    reg["configured_rates"] = rates;
    reg["unfavorable"] = c.unfavorable;
    Json dwell = Json::array();
    for (const auto& d : res.dwell_rates)
        dwell.push_back({{"state", d.state}, {"completed_dwells", d.count}, {"total_time", d.total_time},
                         {"rate", d.available ? number(d.rate) : Json(nullptr)},
                         {"standard_error", d.available ? number(d.standard_error) : Json(nullptr)}});
    reg["dwell_rate_estimates"] = dwell;
    reg["lambda_u"] = number(res.tail.lambda_u);
    reg["lambda_u_se"] = number(res.tail.lambda_u_se);
    j["regimes"] = reg;

    Json net;
    net["n"] = c.network.n;
    net["spectral_radius_W"] = sc.rho_w;
    Json regs = Json::array();
    for (const auto& r : c.network.regimes) regs.push_back({{"label", r.label}, {"gamma", r.gamma}, {"beta", r.beta}});
    net["regimes"] = regs;
    net["forced_nodes"] = Json::array({c.network.forcing.node});
    const char* fk = c.network.forcing.kind == Forcing::Kind::sinusoid   ? "sinusoid"
                     : c.network.forcing.kind == Forcing::Kind::constant ? "constant"
                                                                          : "none";
    net["forcing"] = {{"kind", fk}, {"amplitude", c.network.forcing.amplitude}, {"omega", c.network.forcing.omega}};
    j["network"] = net;

    Json ker;
    ker["memory"] = c.preset != Preset::memory_off;
    ker["K"] = sc.soe.size();
    ker["r_min"] = sc.r_min;
    ker["r_max"] = sc.r_max;
    ker["eps_rel"] = sc.soe.eps_rel;
    ker["weights"] = sc.soe.weights;
    ker["rates"] = sc.soe.rates;
    ker["target"] = c.preset == Preset::memory_off ? "none" : KernelTarget(c.kernel.target, c.horizon).describe();
    ker["weight_scale"] = c.kernel.weight_scale;
    j["kernel"] = ker;

    Json g;
    g["gamma_op"] = res.gamma.op;
    g["dwell"] = quantile_json(res.gamma.dwell);
    g["dwell"]["min_length"] = c.estimators.min_dwell;
    g["cone"] = quantile_json(res.gamma.cone);
    g["cone"]["alpha"] = res.gamma.cone_alpha;
    g["cone"]["window_steps"] = res.gamma.cone_window_steps;
    g["gamma_hat"] = res.tail.gamma_used;
    g["gamma_hat_source"] = res.tail.gamma_source;
    j["gamma"] = g;

    Json t;
    const auto& sel = res.tail.selection;
    t["available"] = res.tail.available;
    t["alpha_hat"] = res.tail.available ? number(sel.alpha) : Json(nullptr);
    t["intercept"] = number(sel.intercept);
    t["b_min"] = sel.b_min;
    t["points"] = sel.points;
    t["quantile_b"] = sel.quantile_b;
    t["quantile_alpha"] = number(sel.quantile_alpha);
    t["unreliable"] = sel.unreliable;
    t["ci"] = {{"level", res.tail.ci.level},
               {"lo", number(res.tail.ci.lo)},
               {"hi", number(res.tail.ci.hi)},
               {"replicates", res.tail.ci.replicates},
               {"skipped", res.tail.ci.skipped}};
    t["alpha_th"] = number(res.tail.alpha_th.value);
    t["alpha_th_active"] = res.tail.alpha_th.active;
    t["alpha_ratio"] = res.tail.available && res.tail.alpha_th.active ? number(sel.alpha / res.tail.alpha_th.value)
                                                                        : Json(nullptr);
    t["note"] = res.tail.note.empty() ? res.tail.alpha_th.note : res.tail.note;
    j["tail"] = t;

    Json b;
    if (!res.bursts.empty()) {
        std::vector<double> s = res.bursts;
        std::sort(s.begin(), s.end());
        b = {{"samples", s.size()},
             {"q50", quantile_sorted(s, 0.5)},
             {"q90", quantile_sorted(s, 0.9)},
             {"q99", quantile_sorted(s, 0.99)},
             {"q999", quantile_sorted(s, 0.999)},
             {"max", s.back()}};
    } else {
        b = {{"samples", 0}};
    }
    j["bursts"] = b;

    Json tr;
    tr["contraction_certified"] = sc.contraction.certified;
    tr["kappa"] = sc.contraction.kappa;
    tr["a_star"] = sc.a_star;
    tr["available"] = res.truncation.available;
    tr["log_M_T"] = number(res.truncation.log_value);
    tr["M_T"] = number(res.truncation.value);
    tr["rounds"] = res.truncation.rounds;
    std::size_t above = 0;
    if (res.truncation.available)
        for (double v : res.bursts) above += std::log(v) > res.truncation.log_value ? 1 : 0;
    tr["bursts_above_M_T"] = above;
    tr["note"] = res.truncation.note;
    j["truncation"] = tr;

    j["forcing_projection"] = {{"min", res.projection.min}, {"mean", res.projection.mean}};
    j["controller"] = {{"enabled", c.policy.enabled},
                       {"tau_l", {c.policy.tau_l1, c.policy.tau_l2}},
                       {"tau_s", {c.policy.tau_s1, c.policy.tau_s2}},
                       {"min_dwell", c.policy.min_dwell},
                       {"mode_changes_per_trajectory", res.intervention_rate},
                       {"mitigate_time_fraction", res.mitigate_fraction}};
    const auto& a = res.audits;
    j["audits"] = {{"trajectories", a.trajectories},
                   {"failed", a.failed},
                   {"energy_pass", a.energy_pass},
                   {"pathwise_pass", a.pathwise_pass},
                   {"chattering", a.chattering},
                   {"release_violations", a.release_violations},
                   {"max_energy_violation_ratio", a.max_energy_violation_ratio},
                   {"passed", a.all_passed()}};
    j["failures"] = audit_failures(res);
    return j;
}

Json comparison_report(const ComparisonReport& cmp, const std::vector<EnsembleResult>& results) {
    Json j;
    Json sc = Json::array();
    for (const auto& r : results) {
        sc.push_back({{"scenario", r.name},
                      {"preset", preset_name(r.preset)},
                      {"alpha_hat", r.tail.available ? number(r.tail.selection.alpha) : Json(nullptr)},
                      {"ci", {number(r.tail.ci.lo), number(r.tail.ci.hi)}},
                      {"alpha_th", number(r.tail.alpha_th.value)},
                      {"b_min", r.tail.selection.b_min}});
    }
    j["scenarios"] = sc;
    Json pairs = Json::array();
    for (const auto& p : cmp.pairs)
        pairs.push_back({{"reference", p.a},
                         {"candidate", p.b},
                         {"tail_dominance", p.dominance},
                         {"worst_excess", p.worst_excess},
                         {"median_band_distortion", p.median_band_distortion},
                         {"typical_preserved", p.typical_preserved}});
    j["pairs"] = pairs;
    if (cmp.memory_ordering) {
        j["memory_ordering"] = {{"off_q999", cmp.off_q999}, {"on_q90", cmp.on_q90}, {"holds", *cmp.memory_ordering}};
    }
    j["passed"] = cmp.passed();
    return j;
}

Json sweep_report(const SweepTable& table, const std::string& scenario) {
    Json j;
    j["scenario"] = scenario;
    j["axis"] = sweep_axis_name(table.axis);
    Json rows = Json::array();
    for (const auto& r : table.rows)
        rows.push_back({{"value", r.value},
                        {"ok", r.ok},
                        {"error", r.error},
                        {"eps_rel", r.eps_rel},
                        {"gamma_op", r.gamma_op},
                        {"lambda_u", number(r.lambda_u)},
                        {"alpha_hat", number(r.alpha_hat)},
                        {"ci", {number(r.ci_lo), number(r.ci_hi)}},
                        {"alpha_th", number(r.alpha_th)},
                        {"log_prefactor", number(r.log_prefactor)},
                        {"q90_burst", r.q90_burst},
                        {"intervention_rate", r.intervention_rate},
                        {"band_distortion", r.band_distortion},
                        {"tail_present", r.tail_present}});
    j["rows"] = rows;
    j["rank_correlation"] = table.rank_correlation;
    j["linear_slope"] = table.linear_slope;
    j["linear_r2"] = table.linear_r2;
    return j;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << text;
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::vector<std::string> write_ensemble_dir(const fs::path& dir, const RunConfig& rc, const Scenario& sc,
                                            const EnsembleRaw& raw, const EnsembleResult& res) {
    fs::create_directories(dir);
    std::vector<std::string> files;
    auto put = [&](const std::string& name, const std::string& text) {
        write_text_atomic(dir / name, text);
        files.push_back(name);
    };
    put("config.yaml", rc.text);

    std::ostringstream k;
    k << "k,weight,rate\n";
    for (std::size_t i = 0; i < sc.soe.size(); ++i) k << i << ',' << fmt17(sc.soe.weights[i]) << ',' << fmt17(sc.soe.rates[i]) << '\n';
    put("kernel.csv", k.str());

    std::ostringstream bursts, dwell, cone, regime, audits, bands, ccdf;
    bursts << "trajectory,burst,max_state_norm,failed\n";
    dwell << "trajectory,t0,t1,norm0,norm1\n";
    cone << "trajectory,rate\n";
    regime << "trajectory,state,count,total_time\n";
    audits << "trajectory,failed,energy_violation,energy_tolerance,energy_ok,pathwise_ok,chattering,release_violations,"
              "mode_changes,time_mitigating,failure\n";
    for (const auto& r : raw.records) {
        bursts << r.index << ',' << fmt17(r.burst) << ',' << fmt17(r.max_state_norm) << ',' << (r.failed ? 1 : 0) << '\n';
        for (const auto& d : r.dwells)
            dwell << r.index << ',' << fmt17(d.t0) << ',' << fmt17(d.t1) << ',' << fmt17(d.norm0) << ',' << fmt17(d.norm1) << '\n';
        for (double v : r.cone_rates) cone << r.index << ',' << fmt17(v) << '\n';
        for (std::size_t s = 0; s < 2; ++s)
            regime << r.index << ',' << s << ',' << r.regime_dwell_count[s] << ',' << fmt17(r.regime_dwell_time[s]) << '\n';
        std::string failure = r.failure;
        std::replace(failure.begin(), failure.end(), '\n', ' ');
        audits << r.index << ',' << (r.failed ? 1 : 0) << ',' << fmt17(r.energy_violation) << ','
               << fmt17(r.energy_tolerance) << ',' << (r.energy_ok ? 1 : 0) << ',' << (r.pathwise_ok ? 1 : 0) << ','
               << r.chattering << ',' << r.release_violations << ',' << r.mode_changes << ','
               << fmt17(r.time_mitigating) << ',' << failure << '\n';
    }
    bands << "t,mean,median,q90,q99\n";
    for (std::size_t j = 0; j < raw.bands.t.size(); ++j)
        bands << fmt17(raw.bands.t[j]) << ',' << fmt17(raw.bands.mean[j]) << ',' << fmt17(raw.bands.median[j]) << ','
              << fmt17(raw.bands.q90[j]) << ',' << fmt17(raw.bands.q99[j]) << '\n';
    ccdf << "b,p,exceedances\n";
    for (const auto& p : res.ccdf.points) ccdf << fmt17(p.b) << ',' << fmt17(p.p) << ',' << p.exceedances << '\n';

    put("bursts.csv", bursts.str());
    put("dwell.csv", dwell.str());
    put("cone.csv", cone.str());
    put("regime_dwells.csv", regime.str());
    put("audits.csv", audits.str());
    put("bands.csv", bands.str());
    put("ccdf.csv", ccdf.str());
    put("report.json", scenario_report(sc, res, sha256_hex(rc.text)).dump(2) + "\n");
    return files;
}

namespace {

/// Data rows of a CSV with a header, split on commas. The last field keeps
/// any further commas when `max_fields` is set.
std::vector<std::vector<std::string>> read_csv(const fs::path& path, std::size_t max_fields = 0) {
    std::ifstream in(path);
    if (!in) throw ParameterError("missing raw output " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::size_t pos = 0;
        for (;;) {
            if (max_fields && f.size() + 1 == max_fields) {
                f.push_back(line.substr(pos));
                break;
            }
            const auto comma = line.find(',', pos);
            f.push_back(line.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
            if (comma == std::string::npos) break;
            pos = comma + 1;
        }
        rows.push_back(std::move(f));
    }
    return rows;
}

double num(const std::string& s) { return std::strtod(s.c_str(), nullptr); }
std::size_t idx(const std::string& s) { return static_cast<std::size_t>(std::stoull(s)); }

}  // namespace

EnsembleRaw read_ensemble_raw(const fs::path& dir) {
    EnsembleRaw raw;
    std::map<std::size_t, TrajectoryRecord> recs;
    for (const auto& f : read_csv(dir / "audits.csv", 11)) {
        if (f.size() < 11) throw ParameterError("malformed audits.csv");
        TrajectoryRecord r;
        r.index = idx(f[0]);
        r.failed = f[1] == "1";
        r.energy_violation = num(f[2]);
        r.energy_tolerance = num(f[3]);
        r.energy_ok = f[4] == "1";
        r.pathwise_ok = f[5] == "1";
        r.chattering = idx(f[6]);
        r.release_violations = idx(f[7]);
        r.mode_changes = idx(f[8]);
        r.time_mitigating = num(f[9]);
        r.failure = f[10];
        recs[r.index] = std::move(r);
    }
    auto rec = [&](const std::string& s) -> TrajectoryRecord& {
        auto it = recs.find(idx(s));
        if (it == recs.end()) throw ParameterError("raw outputs reference an unknown trajectory " + s);
        return it->second;
    };
    for (const auto& f : read_csv(dir / "bursts.csv")) {
        auto& r = rec(f.at(0));
        r.burst = num(f.at(1));
        r.max_state_norm = num(f.at(2));
    }
    for (const auto& f : read_csv(dir / "dwell.csv")) {
        auto& r = rec(f.at(0));
        DwellInterval d;
        d.trajectory = r.index;
        d.t0 = num(f.at(1));
        d.t1 = num(f.at(2));
        d.norm0 = num(f.at(3));
        d.norm1 = num(f.at(4));
        r.dwells.push_back(d);
    }
    for (const auto& f : read_csv(dir / "cone.csv")) rec(f.at(0)).cone_rates.push_back(num(f.at(1)));
    for (const auto& f : read_csv(dir / "regime_dwells.csv")) {
        auto& r = rec(f.at(0));
        const auto s = idx(f.at(1));
        if (s > 1) throw ParameterError("regime_dwells.csv: state index out of range");
        r.regime_dwell_count[s] = idx(f.at(2));
        r.regime_dwell_time[s] = num(f.at(3));
    }
    for (const auto& f : read_csv(dir / "bands.csv")) {
        raw.bands.t.push_back(num(f.at(0)));
        raw.bands.mean.push_back(num(f.at(1)));
        raw.bands.median.push_back(num(f.at(2)));
        raw.bands.q90.push_back(num(f.at(3)));
        raw.bands.q99.push_back(num(f.at(4)));
    }
    for (auto& [i, r] : recs) raw.records.push_back(std::move(r));
    return raw;
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_manifest(const fs::path& dir, const ManifestInfo& info, const std::vector<std::string>& files) {
    Json j;
    j["tool"] = "tailshape";
    j["version"] = kToolVersion;
    j["command"] = info.command;
    j["config_sha256"] = info.config_sha256;
    j["seed"] = info.seed;
    j["started"] = info.started;
    j["finished"] = info.finished;
    j["complete"] = info.complete;
    Json list = Json::array();
    for (const auto& f : files) {
        const fs::path p = dir / f;
        list.push_back({{"path", f}, {"bytes", fs::file_size(p)}, {"sha256", sha256_file(p)}});
    }
    j["files"] = list;
    write_text_atomic(dir / "manifest.json", j.dump(2) + "\n");
}

std::vector<std::string> verify_manifest(const fs::path& dir) {
    const Json j = Json::parse(read_file(dir / "manifest.json"));
    std::vector<std::string> bad;
    for (const auto& f : j.at("files")) {
        const std::string path = f.at("path");
        const fs::path p = dir / path;
        if (!fs::exists(p) || sha256_file(p) != f.at("sha256").get<std::string>()) bad.push_back(path);
    }
    return bad;
}

}  // namespace tailshape

#include "tailshape/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "tailshape/errors.hpp"

namespace tailshape {

namespace {

[[noreturn]] void fail(const YAML::Node& node, const std::string& msg) {
    const auto m = node.Mark();
    if (m.is_null()) throw ConfigError(msg);
    throw ConfigError(msg, m.line + 1, m.column + 1);
}

/// Map node whose keys are checked against an allow-list.
class Section {
public:
    Section(const YAML::Node& node, std::string path, std::set<std::string> allowed)
        : node_(node), path_(std::move(path)) {
        if (!node_.IsMap()) fail(node_, "'" + path_ + "' must be a mapping");
        for (const auto& kv : node_) {
            const auto key = kv.first.as<std::string>();
            if (!allowed.count(key)) fail(kv.first, "unknown key '" + key + "' in '" + path_ + "'");
        }
    }

    bool has(const std::string& key) const { return static_cast<bool>(node_[key]); }
    YAML::Node operator[](const std::string& key) const { return node_[key]; }
    const YAML::Node& node() const { return node_; }
    std::string path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    YAML::Node require(const std::string& key) const {
        const YAML::Node v = node_[key];
        if (!v) fail(node_, "missing required key '" + path(key) + "'");
        return v;
    }

    template <class T>
    T get(const std::string& key) const {
        return convert<T>(require(key), path(key));
    }

    template <class T>
    void maybe(const std::string& key, T& out) const {
        if (const YAML::Node v = node_[key]) out = convert<T>(v, path(key));
    }

    template <class T>
    static T convert(const YAML::Node& v, const std::string& where) {
        if (!v.IsScalar()) fail(v, "'" + where + "' must be a scalar");
        try {
            return v.as<T>();
        } catch (const YAML::Exception&) {
            fail(v, "'" + where + "' has an invalid value '" + v.Scalar() + "'");
        }
    }

private:
    YAML::Node node_;
    std::string path_;
};

std::vector<double> number_list(const YAML::Node& v, const std::string& where) {
    if (!v.IsSequence()) fail(v, "'" + where + "' must be a list of numbers");
    std::vector<double> out;
    for (const auto& e : v) out.push_back(Section::convert<double>(e, where));
    return out;
}

Matrix adjacency(const Section& sec, std::size_t n, const std::filesystem::path& base) {
    const auto kind = sec.get<std::string>("kind");
    double weight = 1.0;
    sec.maybe("weight", weight);
    Matrix w(n, n);
    if (kind == "star") {
        std::size_t hub = 0;
        sec.maybe("hub", hub);
        if (hub >= n) fail(sec["hub"], "star hub outside the network");
        for (std::size_t i = 0; i < n; ++i)
            if (i != hub) w(i, hub) = weight;
    } else if (kind == "chain") {
        for (std::size_t i = 0; i + 1 < n; ++i) w(i + 1, i) = weight;
    } else if (kind == "ring") {
        for (std::size_t i = 0; i < n; ++i) w((i + 1) % n, i) = weight;
    } else if (kind == "edges") {
        const auto p = std::filesystem::path(sec.get<std::string>("path"));
        try {
            w = read_edge_list(p.is_absolute() ? p : base / p, n);
        } catch (const std::exception& e) {
            fail(sec["path"], e.what());
        }
    } else if (kind == "dense") {
        const YAML::Node rows = sec.require("rows");
        if (!rows.IsSequence() || rows.size() != n) fail(rows, "dense adjacency needs n rows");
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = number_list(rows[i], sec.path("rows"));
            if (row.size() != n) fail(rows[i], "dense adjacency row has the wrong length");
            for (std::size_t j = 0; j < n; ++j) w(i, j) = row[j];
        }
    } else {
        fail(sec["kind"], "unknown adjacency kind '" + kind + "' (star, chain, ring, edges, dense)");
    }
    return w;
}

Forcing forcing(const Section& sec) {
    Forcing f;
    const auto kind = sec.get<std::string>("kind");
    if (kind == "sinusoid") f.kind = Forcing::Kind::sinusoid;
    else if (kind == "constant") f.kind = Forcing::Kind::constant;
    else if (kind == "none") f.kind = Forcing::Kind::none;
    else fail(sec["kind"], "unknown forcing kind '" + kind + "' (sinusoid, constant, none)");
    sec.maybe("node", f.node);
    sec.maybe("amplitude", f.amplitude);
    sec.maybe("omega", f.omega);
    return f;
}

KernelTarget::Kind kernel_target(const Section& sec, const std::filesystem::path& base, std::string& table_path) {
    const auto kind = sec.get<std::string>("kind");
    if (kind == "power_law") {
        Section s(sec.node(), "kernel.target", {"kind", "exponent", "offset"});
        PowerLawKernel k;
        s.maybe("exponent", k.exponent);
        s.maybe("offset", k.offset);
        return k;
    }
    if (kind == "exp_sum") {
        Section s(sec.node(), "kernel.target", {"kind", "terms"});
        ExpSumKernel k;
        const YAML::Node terms = s.require("terms");
        if (!terms.IsSequence()) fail(terms, "exp_sum terms must be a list of [weight, rate] pairs");
        for (const auto& t : terms) {
            const auto pair = number_list(t, "kernel.target.terms");
            if (pair.size() != 2) fail(t, "exp_sum term must be [weight, rate]");
            k.terms.emplace_back(pair[0], pair[1]);
        }
        return k;
    }
    if (kind == "tabulated") {
        Section s(sec.node(), "kernel.target", {"kind", "path"});
        const auto p = std::filesystem::path(s.get<std::string>("path"));
        const auto full = p.is_absolute() ? p : base / p;
        table_path = full.string();
        try {
            return read_tabulated_kernel(full);
        } catch (const std::exception& e) {
            fail(s["path"], e.what());
        }
    }
    fail(sec["kind"], "unknown kernel kind '" + kind + "' (power_law, exp_sum, tabulated)");
}

void regimes_section(const Section& sec, ScenarioConfig& c) {
    const YAML::Node states = sec.require("states");
    if (!states.IsSequence() || states.size() == 0) fail(states, "'regimes.states' must be a nonempty list");
    auto& g = c.generator;
    g.states.clear();
    for (const auto& s : states) g.states.push_back(Section::convert<std::string>(s, "regimes.states"));
    const std::size_t m = g.states.size();
    auto index_of = [&](const YAML::Node& node, const std::string& label) {
        for (std::size_t i = 0; i < m; ++i)
            if (g.states[i] == label) return i;
        fail(node, "unknown regime '" + label + "'");
    };
    g.rates = Matrix(m, m);
    const YAML::Node rates = sec.require("rates");
    if (!rates.IsMap()) fail(rates, "'regimes.rates' must map each regime to its targets");
    for (const auto& from : rates) {
        const auto i = index_of(from.first, from.first.as<std::string>());
        if (!from.second.IsMap()) fail(from.second, "rates of a regime must map target regimes to rates");
        for (const auto& to : from.second) {
            const auto j = index_of(to.first, to.first.as<std::string>());
            if (i == j) fail(to.first, "self-transition rates are not allowed");
            g.rates(i, j) = Section::convert<double>(to.second, "regimes.rates");
        }
    }
    g.initial.assign(m, 0.0);
    if (const YAML::Node init = sec["initial"]) {
        if (init.IsScalar()) {
            g.initial[index_of(init, init.as<std::string>())] = 1.0;
        } else if (init.IsMap()) {
            for (const auto& kv : init)
                g.initial[index_of(kv.first, kv.first.as<std::string>())] = Section::convert<double>(kv.second, "regimes.initial");
        } else {
            fail(init, "'regimes.initial' must be a regime label or a distribution");
        }
    } else {
        g.initial[0] = 1.0;
    }
    sec.maybe("unfavorable", c.unfavorable);
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir, const std::string& source_name) {
    RunConfig rc;
    rc.text = text;
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(source_name + ": " + e.msg, e.mark.line + 1, e.mark.column + 1);
    }
    if (!root || root.IsNull()) throw ConfigError(source_name + ": empty configuration");

    try {
        const Section top(root, "",
                          {"name", "preset", "horizon", "ensemble", "seed", "workers", "network", "kernel", "regimes",
                           "policy", "modes", "solver", "estimators", "compare", "sweep", "test_hooks"});
        ScenarioConfig& c = rc.scenario;
        c.preset = Preset::plain;
        if (top.has("preset")) {
            try {
                c.preset = parse_preset(top.get<std::string>("preset"));
            } catch (const ParameterError& e) {
                fail(top["preset"], e.what());
            }
        }
        c.name = preset_name(c.preset);
        top.maybe("name", c.name);
        top.maybe("horizon", c.horizon);
        top.maybe("ensemble", c.ensemble);
        top.maybe("seed", c.seed);
        top.maybe("workers", c.workers);

        const Section net(top.require("network"), "network", {"n", "adjacency", "regimes", "forcing"});
        c.network.n = net.get<std::size_t>("n");
        if (c.network.n == 0) fail(net["n"], "network.n must be positive");
        c.network.W = adjacency(Section(net.require("adjacency"), "network.adjacency",
                                        {"kind", "hub", "weight", "path", "rows"}),
                                c.network.n, base_dir);
        const YAML::Node regs = net.require("regimes");
        if (!regs.IsSequence() || regs.size() == 0) fail(regs, "'network.regimes' must be a nonempty list");
        c.network.regimes.clear();
        for (const auto& r : regs) {
            const Section s(r, "network.regimes[]", {"label", "gamma", "beta"});
            c.network.regimes.push_back({s.get<std::string>("label"), s.get<double>("gamma"), s.get<double>("beta")});
        }
        c.network.forcing = forcing(Section(net.require("forcing"), "network.forcing", {"kind", "node", "amplitude", "omega"}));

        regimes_section(Section(top.require("regimes"), "regimes", {"states", "rates", "initial", "unfavorable"}), c);

        if (top.has("kernel")) {
            rc.has_kernel = true;
            const Section k(top["kernel"], "kernel",
                            {"target", "terms", "r_min", "r_max", "weight_scale", "design_points", "check_points"});
            const Section target(k.require("target"), "kernel.target", {"kind", "exponent", "offset", "terms", "path"});
            c.kernel.target = kernel_target(target, base_dir, c.kernel.table_path);
            k.maybe("terms", c.kernel.terms);
            if (k.has("r_min")) c.kernel.r_min = k.get<double>("r_min");
            if (k.has("r_max")) c.kernel.r_max = k.get<double>("r_max");
            k.maybe("weight_scale", c.kernel.weight_scale);
            k.maybe("design_points", c.kernel.design_points);
            k.maybe("check_points", c.kernel.check_points);
        } else if (c.preset != Preset::memory_off) {
            fail(root, "missing required key 'kernel'");
        }

        c.policy.enabled = c.preset == Preset::dddas;
        if (top.has("policy")) {
            const Section p(top["policy"], "policy", {"tau_l", "tau_s", "min_dwell"});
            auto pair = [&](const char* key, double& lo, double& hi) {
                if (!p.has(key)) return;
                const auto v = number_list(p[key], p.path(key));
                if (v.size() != 2) fail(p[key], std::string("'policy.") + key + "' must be [level1, level2]");
                lo = v[0];
                hi = v[1];
            };
            pair("tau_l", c.policy.tau_l1, c.policy.tau_l2);
            pair("tau_s", c.policy.tau_s1, c.policy.tau_s2);
            p.maybe("min_dwell", c.policy.min_dwell);
        } else if (c.policy.enabled) {
            fail(root, "the dddas preset needs a 'policy' section");
        }

        if (top.has("modes")) {
            const Section m(top["modes"], "modes", {"alpha", "delta", "delta_r"});
            m.maybe("alpha", c.design.alpha);
            m.maybe("delta", c.design.delta);
            m.maybe("delta_r", c.design.delta_r);
        }
        if (top.has("solver")) {
            const Section s(top["solver"], "solver", {"rtol", "atol", "max_step", "output_intervals"});
            s.maybe("rtol", c.solver.rtol);
            s.maybe("atol", c.solver.atol);
            s.maybe("max_step", c.solver.max_step);
            s.maybe("output_intervals", c.solver.output_intervals);
        }
        if (top.has("estimators")) {
            const Section e(top["estimators"], "estimators",
                            {"q_gamma", "q_b", "bootstrap", "ci_level", "cone_alpha", "cone_window", "stability",
                             "min_dwell"});
            auto& est = c.estimators;
            e.maybe("q_gamma", est.q_gamma);
            e.maybe("q_b", est.q_b);
            e.maybe("bootstrap", est.bootstrap);
            e.maybe("ci_level", est.ci_level);
            e.maybe("cone_alpha", est.cone_alpha);
            e.maybe("cone_window", est.cone_window);
            e.maybe("stability", est.stability);
            e.maybe("min_dwell", est.min_dwell);
        }
        if (top.has("compare")) {
            const Section s(top["compare"], "compare", {"band_tolerance"});
            s.maybe("band_tolerance", c.band_tolerance);
        }
        if (top.has("sweep")) {
            const Section s(top["sweep"], "sweep", {"axis", "grid"});
            SweepSpec sw;
            try {
                sw.axis = parse_sweep_axis(s.get<std::string>("axis"));
            } catch (const ParameterError& e) {
                fail(s["axis"], e.what());
            }
            sw.grid = number_list(s.require("grid"), "sweep.grid");
            if (sw.grid.empty()) fail(s["grid"], "'sweep.grid' is empty");
            rc.sweep = sw;
        }
        if (top.has("test_hooks")) {
            const Section s(top["test_hooks"], "test_hooks", {"corrupt_susceptibility"});
            s.maybe("corrupt_susceptibility", c.corrupt_susceptibility);
        }

        try {
            c.validate();
            if (c.kernel.terms < 1 && c.preset != Preset::memory_off) throw ParameterError("kernel.terms must be positive");
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
    } catch (const ConfigError& e) {
        const std::string where =
            e.line() > 0 ? source_name + ":" + std::to_string(e.line()) + ":" + std::to_string(e.column()) : source_name;
        throw ConfigError(where + ": " + e.what(), e.line(), e.column());
    } catch (const YAML::Exception& e) {
        throw ConfigError(source_name + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg, e.mark.line + 1,
                          e.mark.column + 1);
    }
    return rc;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read configuration file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    RunConfig rc = parse_config(ss.str(), path.parent_path(), path.string());
    rc.source = path;
    return rc;
}

namespace {

/// Shortest text that reads back as the same double.
struct Num {
    double v;
};

std::ostream& operator<<(std::ostream& os, Num n) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, n.v);
    return os.write(buf, r.ptr - buf);
}

}  // namespace

std::string preset_yaml(Preset preset) {
    const ScenarioConfig c = make_preset(preset);
    std::ostringstream y;
    y << "name: " << c.name << "\n"
      << "preset: " << preset_name(preset) << "\n"
      << "horizon: " << Num{c.horizon} << "\n"
      << "ensemble: " << c.ensemble << "\n"
      << "seed: " << c.seed << "\n"
      << "workers: 0\n"
      << "network:\n"
      << "  n: " << c.network.n << "\n"
      << "  adjacency: {kind: star, hub: 0, weight: 1.0}\n"
      << "  regimes:\n";
    for (const auto& r : c.network.regimes)
        y << "    - {label: " << r.label << ", gamma: " << Num{r.gamma} << ", beta: " << Num{r.beta} << "}\n";
    y << "  forcing: {kind: constant, node: " << c.network.forcing.node << ", amplitude: " << Num{c.network.forcing.amplitude}
      << "}\n"
      << "regimes:\n"
      << "  states: [S, U]\n"
      << "  unfavorable: U\n"
      << "  rates: {S: {U: " << Num{c.generator.rates(0, 1)} << "}, U: {S: " << Num{c.generator.rates(1, 0)} << "}}\n"
      << "  initial: U\n";
    const auto& pl = std::get<PowerLawKernel>(c.kernel.target);
    y << "kernel:\n"
      << "  target: {kind: power_law, exponent: " << Num{pl.exponent} << ", offset: " << Num{pl.offset} << "}\n"
      << "  terms: " << c.kernel.terms << "\n"
      << "  r_min: " << Num{*c.kernel.r_min} << "\n"
      << "  r_max: " << Num{*c.kernel.r_max} << "\n"
      << "  weight_scale: " << Num{c.kernel.weight_scale} << "\n";
    y << "policy:\n"
      << "  tau_l: [" << Num{c.policy.tau_l1} << ", " << Num{c.policy.tau_l2} << "]\n"
      << "  tau_s: [" << Num{c.policy.tau_s1} << ", " << Num{c.policy.tau_s2} << "]\n"
      << "  min_dwell: " << Num{c.policy.min_dwell} << "\n"
      << "modes: {alpha: " << Num{c.design.alpha} << ", delta: " << Num{c.design.delta} << ", delta_r: " << Num{c.design.delta_r}
      << "}\n"
      << "solver: {rtol: " << Num{c.solver.rtol} << ", atol: " << Num{c.solver.atol} << ", max_step: " << Num{c.solver.max_step}
      << ", output_intervals: " << c.solver.output_intervals << "}\n";
    const auto& e = c.estimators;
    y << "estimators:\n"
      << "  q_gamma: " << Num{e.q_gamma} << "\n"
      << "  q_b: " << Num{e.q_b} << "\n"
      << "  bootstrap: " << e.bootstrap << "\n"
      << "  ci_level: " << Num{e.ci_level} << "\n"
      << "  cone_alpha: " << Num{e.cone_alpha} << "\n"
      << "  cone_window: " << e.cone_window << "\n"
      << "  stability: " << Num{e.stability} << "\n"
      << "  min_dwell: " << Num{e.min_dwell} << "\n"
      << "compare: {band_tolerance: " << Num{c.band_tolerance} << "}\n";
    return y.str();
}

}  // namespace tailshape

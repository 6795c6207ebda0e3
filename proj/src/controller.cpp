#include "tailshape/controller.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

#include "tailshape/errors.hpp"

namespace tailshape {

void PolicyConfig::validate() const {
    if (!(tau_l1 < tau_l2)) throw ParameterError("policy needs tau_L1 < tau_L2");
    if (!(tau_s1 < tau_s2)) throw ParameterError("policy needs tau_S1 < tau_S2");
    if (!(min_dwell > 0.0)) throw ParameterError("policy minimum dwell must be positive");
}

const char* trigger_name(Trigger t) {
    switch (t) {
        case Trigger::none: return "none";
        case Trigger::load: return "L";
        case Trigger::susceptibility: return "S";
        case Trigger::release: return "release";
    }
    return "none";
}

int demanded_level(double load, double susceptibility, const PolicyConfig& cfg) {
    if (load > cfg.tau_l2 || susceptibility > cfg.tau_s2) return 2;
    if (load > cfg.tau_l1 || susceptibility > cfg.tau_s1) return 1;
    return 0;
}

Decision decide(const ControllerState& state, double t, double load, double susceptibility, const PolicyConfig& cfg) {
    Decision d{state, false, Trigger::none};
    if (!cfg.enabled) {
        d.state.mode = Mode::normal;
        return d;
    }
    if (t - state.t_last < cfg.min_dwell) return d;

    const int current = static_cast<int>(state.mode);
    const int desired = demanded_level(load, susceptibility, cfg);
    if (desired > current) {
        d.state.mode = static_cast<Mode>(desired);
        d.state.t_last = t;
        d.changed = true;
        const int by_load = load > cfg.tau_l2 ? 2 : (load > cfg.tau_l1 ? 1 : 0);
        d.trigger = by_load >= desired ? Trigger::load : Trigger::susceptibility;
        return d;
    }
    if (current > 0 && load < cfg.tau_l1 && susceptibility < cfg.tau_s1) {
        d.state.mode = static_cast<Mode>(current - 1);
        d.state.t_last = t;
        d.changed = true;
        d.trigger = Trigger::release;
    }
    return d;
}

std::vector<double> crossing_times(const std::function<double(double)>& f, double t0, double t1, double threshold,
                                   double tol, int probes) {
    std::vector<double> out;
    if (!(t1 > t0)) return out;
    probes = std::max(probes, 1);
    double a = t0;
    double fa = f(a);
    for (int p = 1; p <= probes; ++p) {
        const double b = p == probes ? t1 : t0 + (t1 - t0) * p / probes;
        const double fb = f(b);
        if (fa <= threshold && fb > threshold) {
            double lo = a, hi = b;
            while (hi - lo > tol) {
                const double mid = 0.5 * (lo + hi);
                if (f(mid) > threshold) hi = mid;
                else lo = mid;
            }
            out.push_back(hi);
        }
        a = b;
        fa = fb;
    }
    return out;
}

void write_event_log_csv(std::ostream& out, const std::vector<ModeEvent>& events) {
    out << "t,old_mode,new_mode,trigger,L,S\n" << std::setprecision(17);
    for (const auto& e : events) {
        out << e.t << ',' << static_cast<int>(e.from) << ',' << static_cast<int>(e.to) << ','
            << trigger_name(e.trigger) << ',' << e.load << ',' << e.susceptibility << '\n';
    }
}

HygieneReport audit_hygiene(const std::vector<ModeEvent>& events, const PolicyConfig& cfg) {
    HygieneReport r;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& e = events[i];
        if (i > 0 && e.t - events[i - 1].t < cfg.min_dwell) ++r.chattering;
        const int from = static_cast<int>(e.from);
        const int to = static_cast<int>(e.to);
        if (to < from) {
            const bool one_level = from - to == 1;
            const bool both_low = e.load < cfg.tau_l1 && e.susceptibility < cfg.tau_s1;
            if (!one_level || !both_low) ++r.release_violations;
        }
    }
    return r;
}

}  // namespace tailshape

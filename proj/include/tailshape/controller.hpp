#pragma once

#include <functional>
#include <iosfwd>
#include <limits>
#include <vector>

#include "tailshape/model.hpp"

namespace tailshape {

struct PolicyConfig {
    double tau_l1 = 1.0;
    double tau_l2 = 2.0;
    double tau_s1 = 0.0;
    double tau_s2 = 1.0;
    double min_dwell = 0.5;
    bool enabled = false;

    void validate() const;
};

struct ControllerState {
    Mode mode = Mode::normal;
    double t_last = -std::numeric_limits<double>::infinity();
};

enum class Trigger { none, load, susceptibility, release };

const char* trigger_name(Trigger t);

struct Decision {
    ControllerState state;
    bool changed = false;
    Trigger trigger = Trigger::none;
};

/// Mode level the indicators demand, ignoring dwell and release rules.
int demanded_level(double load, double susceptibility, const PolicyConfig& cfg);

/// One evaluation of the hysteretic mode rule.
Decision decide(const ControllerState& state, double t, double load, double susceptibility, const PolicyConfig& cfg);

/// Up-crossings of `threshold` by f on [t0, t1]. f is probed on `probes`
/// uniform sub-intervals and each bracketed crossing is refined by bisection
/// to within `tol`.
std::vector<double> crossing_times(const std::function<double(double)>& f, double t0, double t1, double threshold,
                                   double tol, int probes = 16);

struct ModeEvent {
    double t = 0.0;
    Mode from = Mode::normal;
    Mode to = Mode::normal;
    Trigger trigger = Trigger::none;
    double load = 0.0;
    double susceptibility = 0.0;
};

/// Rows "t,old_mode,new_mode,trigger".
void write_event_log_csv(std::ostream& out, const std::vector<ModeEvent>& events);

struct HygieneReport {
    std::size_t chattering = 0;         // mode-change gaps below min_dwell
    std::size_t release_violations = 0; // drops by more than one level, or without both indicators low
};

HygieneReport audit_hygiene(const std::vector<ModeEvent>& events, const PolicyConfig& cfg);

}  // namespace tailshape

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tailshape/linalg.hpp"
#include "tailshape/rng.hpp"

namespace tailshape {

struct GeneratorSpec {
    std::vector<std::string> states;
    Matrix rates;               // off-diagonal q_ij; the diagonal is ignored
    std::vector<double> initial;  // distribution of z(0)

    std::size_t size() const noexcept { return states.size(); }
    std::size_t index(const std::string& label) const;
    double exit_rate(std::size_t i) const;
    /// Full generator with q_ii = -sum_{j != i} q_ij.
    Matrix generator() const;
    /// Shape and sign checks. With allow_absorbing = false every state must
    /// have a positive exit rate.
    void validate(bool allow_absorbing = false) const;

    /// Two-state {S, U} chain started in `start`.
    static GeneratorSpec two_state(double rate_su, double rate_us, const std::string& start = "S");
};

struct RegimePath {
    std::vector<double> jump_times;   // strictly increasing, inside (0, T)
    std::vector<std::size_t> states;  // jump_times.size() + 1 entries
    double horizon = 0.0;

    std::size_t state_at(double t) const;
    friend bool operator==(const RegimePath&, const RegimePath&) = default;
};

/// Jump-chain sample on [0, T]. Draws: one uniform for z(0), one per dwell,
/// and one per jump only when more than one target state is possible. Paths
/// drawn with different rates but the same stream therefore stay coupled.
RegimePath sample_path(const GeneratorSpec& gen, double horizon, StreamRng& rng);
RegimePath sample_path(const GeneratorSpec& gen, double horizon, std::uint64_t seed, std::uint64_t index = 0);

std::vector<double> stationary_distribution(const GeneratorSpec& gen);

struct DwellRateEstimate {
    std::string state;
    std::size_t count = 0;
    double total_time = 0.0;
    double rate = 0.0;
    double standard_error = 0.0;
    bool available = false;
};

/// Accumulates completed dwells. The dwell still open at the horizon is
/// censored and skipped.
class DwellTally {
public:
    explicit DwellTally(std::size_t states) : count_(states, 0), time_(states, 0.0) {}

    void add(const RegimePath& path);
    void merge(const DwellTally& other);
    std::vector<DwellRateEstimate> estimates(const std::vector<std::string>& labels) const;

private:
    std::vector<std::size_t> count_;
    std::vector<double> time_;
};

std::vector<DwellRateEstimate> estimate_dwell_rates(const std::vector<RegimePath>& paths,
                                                    const std::vector<std::string>& labels);

/// Completed dwell durations in `state` (censored final dwell excluded).
std::vector<double> completed_dwells(const RegimePath& path, std::size_t state);

/// Rows "jump_time,state", starting with "0,<z(0)>".
void write_path_csv(std::ostream& out, const RegimePath& path, const std::vector<std::string>& labels);

}  // namespace tailshape

#include "tailshape/regime.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <queue>

#include "tailshape/errors.hpp"
#include "tailshape/nnls.hpp"

namespace tailshape {

std::size_t GeneratorSpec::index(const std::string& label) const {
    for (std::size_t i = 0; i < states.size(); ++i)
        if (states[i] == label) return i;
    throw ParameterError("unknown regime state '" + label + "'");
}

double GeneratorSpec::exit_rate(std::size_t i) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < size(); ++j)
        if (j != i) acc += rates(i, j);
    return acc;
}

Matrix GeneratorSpec::generator() const {
    Matrix q = rates;
    for (std::size_t i = 0; i < size(); ++i) q(i, i) = -exit_rate(i);
    return q;
}

void GeneratorSpec::validate(bool allow_absorbing) const {
    const std::size_t m = size();
    if (m == 0) throw ParameterError("generator needs at least one state");
    if (rates.rows() != m || rates.cols() != m) throw ParameterError("generator rate matrix has the wrong shape");
    if (initial.size() != m) throw ParameterError("initial distribution has the wrong length");
    double total = 0.0;
    for (double p : initial) {
        if (!(p >= 0.0)) throw ParameterError("initial distribution has a negative entry");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw ParameterError("initial distribution must sum to 1");
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            if (i != j && !(rates(i, j) >= 0.0 && std::isfinite(rates(i, j)))) {
                throw ParameterError("transition rate " + states[i] + "->" + states[j] + " must be finite and >= 0");
            }
        }
        if (!allow_absorbing && !(exit_rate(i) > 0.0)) {
            throw ParameterError("state " + states[i] + " has zero exit rate");
        }
    }
}

GeneratorSpec GeneratorSpec::two_state(double rate_su, double rate_us, const std::string& start) {
    GeneratorSpec g;
    g.states = {"S", "U"};
    g.rates = Matrix{{0.0, rate_su}, {rate_us, 0.0}};
    g.initial = start == "U" ? std::vector<double>{0.0, 1.0} : std::vector<double>{1.0, 0.0};
    return g;
}

std::size_t RegimePath::state_at(double t) const {
    std::size_t k = 0;
    while (k < jump_times.size() && jump_times[k] <= t) ++k;
    return states[k];
}

RegimePath sample_path(const GeneratorSpec& gen, double horizon, StreamRng& rng) {
    if (!(horizon > 0.0)) throw ParameterError("sample_path: horizon must be positive");
    const std::size_t m = gen.size();
    RegimePath path;
    path.horizon = horizon;

    const double u0 = rng.uniform();
    std::size_t state = m - 1;
    double cum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        cum += gen.initial[i];
        if (u0 < cum) {
            state = i;
            break;
        }
    }
    while (state > 0 && gen.initial[state] == 0.0) --state;
    path.states.push_back(state);

    double t = 0.0;
    while (true) {
        const double lambda = gen.exit_rate(state);
        const double u = rng.uniform();
        if (!(lambda > 0.0)) break;
        t += -std::log(u) / lambda;
        if (!(t < horizon)) break;

        std::size_t candidates = 0;
        std::size_t only = state;
        for (std::size_t j = 0; j < m; ++j) {
            if (j != state && gen.rates(state, j) > 0.0) {
                ++candidates;
                only = j;
            }
        }
        std::size_t next = only;
        if (candidates > 1) {
            const double target = rng.uniform() * lambda;
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) {
                if (j == state || !(gen.rates(state, j) > 0.0)) continue;
                acc += gen.rates(state, j);
                next = j;
                if (target < acc) break;
            }
        }
        path.jump_times.push_back(t);
        path.states.push_back(next);
        state = next;
    }
    return path;
}

RegimePath sample_path(const GeneratorSpec& gen, double horizon, std::uint64_t seed, std::uint64_t index) {
    StreamRng rng(seed, index, Stream::regime);
    return sample_path(gen, horizon, rng);
}

std::vector<double> stationary_distribution(const GeneratorSpec& gen) {
    gen.validate(true);
    const std::size_t m = gen.size();
    // Strong connectivity: every state reaches every other.
    for (std::size_t s = 0; s < m; ++s) {
        std::vector<bool> seen(m, false);
        std::queue<std::size_t> todo;
        todo.push(s);
        seen[s] = true;
        while (!todo.empty()) {
            const std::size_t i = todo.front();
            todo.pop();
            for (std::size_t j = 0; j < m; ++j) {
                if (!seen[j] && j != i && gen.rates(i, j) > 0.0) {
                    seen[j] = true;
                    todo.push(j);
                }
            }
        }
        std::string missing;
        for (std::size_t j = 0; j < m; ++j)
            if (!seen[j]) missing += (missing.empty() ? "" : ", ") + gen.states[j];
        if (!missing.empty()) {
            throw ParameterError("generator is reducible: from " + gen.states[s] + " the states {" + missing +
                                 "} are unreachable");
        }
    }
    // Solve Q^T pi = 0 with the normalization appended as an extra row.
    const Matrix q = gen.generator();
    Matrix a(m + 1, m);
    Vector b(m + 1, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) a(i, j) = q(j, i);
    for (std::size_t j = 0; j < m; ++j) a(m, j) = 1.0;
    b[m] = 1.0;
    Vector pi = least_squares(a, b);
    for (double& p : pi) p = std::max(0.0, p);
    return pi;
}

void DwellTally::add(const RegimePath& path) {
    double start = 0.0;
    for (std::size_t k = 0; k < path.jump_times.size(); ++k) {
        const std::size_t s = path.states[k];
        ++count_[s];
        time_[s] += path.jump_times[k] - start;
        start = path.jump_times[k];
    }
}

void DwellTally::merge(const DwellTally& other) {
    for (std::size_t i = 0; i < count_.size(); ++i) {
        count_[i] += other.count_[i];
        time_[i] += other.time_[i];
    }
}

std::vector<DwellRateEstimate> DwellTally::estimates(const std::vector<std::string>& labels) const {
    std::vector<DwellRateEstimate> out;
    for (std::size_t i = 0; i < count_.size(); ++i) {
        DwellRateEstimate e;
        e.state = i < labels.size() ? labels[i] : std::to_string(i);
        e.count = count_[i];
        e.total_time = time_[i];
        if (count_[i] > 0 && time_[i] > 0.0) {
            e.available = true;
            e.rate = static_cast<double>(count_[i]) / time_[i];
            e.standard_error = e.rate / std::sqrt(static_cast<double>(count_[i]));
        }
        out.push_back(e);
    }
    return out;
}

std::vector<DwellRateEstimate> estimate_dwell_rates(const std::vector<RegimePath>& paths,
                                                    const std::vector<std::string>& labels) {
    DwellTally tally(labels.size());
    for (const auto& p : paths) tally.add(p);
    return tally.estimates(labels);
}

std::vector<double> completed_dwells(const RegimePath& path, std::size_t state) {
    std::vector<double> out;
    double start = 0.0;
    for (std::size_t k = 0; k < path.jump_times.size(); ++k) {
        if (path.states[k] == state) out.push_back(path.jump_times[k] - start);
        start = path.jump_times[k];
    }
    return out;
}

void write_path_csv(std::ostream& out, const RegimePath& path, const std::vector<std::string>& labels) {
    out << "jump_time,state\n" << std::setprecision(17);
    out << 0.0 << ',' << labels.at(path.states[0]) << '\n';
    for (std::size_t k = 0; k < path.jump_times.size(); ++k) {
        out << path.jump_times[k] << ',' << labels.at(path.states[k + 1]) << '\n';
    }
}

}  // namespace tailshape

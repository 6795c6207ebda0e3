#include "tailshape/soe_kernel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tailshape/errors.hpp"
#include "tailshape/nnls.hpp"

namespace tailshape {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

void validate(const KernelTarget::Kind& kind, double horizon) {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ParameterError("kernel horizon must be positive");
    std::visit(overloaded{
                   [](const PowerLawKernel& p) {
                       if (!(p.exponent > 0.0)) throw ParameterError("power-law exponent must be positive");
                       if (!(p.offset > 0.0)) throw ParameterError("power-law offset must be positive");
                   },
                   [](const ExpSumKernel& e) {
                       if (e.terms.empty()) throw ParameterError("exp-sum kernel needs at least one term");
                       for (auto [w, r] : e.terms) {
                           if (!std::isfinite(w) || !(r >= 0.0)) throw ParameterError("invalid exp-sum term");
                       }
                   },
                   [horizon](const TabulatedKernel& tab) {
                       if (tab.t.size() != tab.g.size() || tab.t.empty())
                           throw ParameterError("tabulated kernel needs matching nonempty t and g columns");
                       for (std::size_t i = 0; i < tab.t.size(); ++i) {
                           if (!std::isfinite(tab.g[i])) throw ParameterError("tabulated kernel value not finite");
                           if (tab.t[i] < 0.0 || tab.t[i] > horizon)
                               throw ParameterError("tabulated kernel time outside [0, T]");
                           if (i > 0 && !(tab.t[i] > tab.t[i - 1]))
                               throw ParameterError("tabulated kernel times must be strictly increasing");
                       }
                   },
               },
               kind);
}

}  // namespace

KernelTarget::KernelTarget(Kind kind, double horizon) : kind_(std::move(kind)), horizon_(horizon) {
    validate(kind_, horizon_);
}

double KernelTarget::operator()(double t) const {
    return std::visit(overloaded{
                          [t](const PowerLawKernel& p) { return std::pow(p.offset + t, -p.exponent); },
                          [t](const ExpSumKernel& e) {
                              double acc = 0.0;
                              for (auto [w, r] : e.terms) acc += w * std::exp(-r * t);
                              return acc;
                          },
                          [t](const TabulatedKernel& tab) {
                              if (t <= tab.t.front()) return tab.g.front();
                              if (t >= tab.t.back()) return tab.g.back();
                              const auto it = std::upper_bound(tab.t.begin(), tab.t.end(), t);
                              const std::size_t j = static_cast<std::size_t>(it - tab.t.begin());
                              const double f = (t - tab.t[j - 1]) / (tab.t[j] - tab.t[j - 1]);
                              return tab.g[j - 1] + f * (tab.g[j] - tab.g[j - 1]);
                          },
                      },
                      kind_);
}

std::string KernelTarget::describe() const {
    std::ostringstream os;
    std::visit(overloaded{
                   [&](const PowerLawKernel& p) { os << "power_law(exponent=" << p.exponent << ", offset=" << p.offset << ")"; },
                   [&](const ExpSumKernel& e) { os << "exp_sum(" << e.terms.size() << " terms)"; },
                   [&](const TabulatedKernel& tab) { os << "tabulated(" << tab.t.size() << " samples)"; },
               },
               kind_);
    return os.str();
}

TabulatedKernel read_tabulated_kernel(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParameterError("cannot open kernel table " + path.string());
    TabulatedKernel tab;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::replace_if(line.begin(), line.end(), [](char c) { return c == ',' || c == ';' || c == '\t'; }, ' ');
        std::istringstream fields(line);
        double t = 0.0, g = 0.0;
        if (!(fields >> t)) continue;  // blank or header line
        if (!(fields >> g)) {
            throw ParameterError(path.string() + ":" + std::to_string(lineno) + ": expected two columns");
        }
        tab.t.push_back(t);
        tab.g.push_back(g);
    }
    return tab;
}

std::vector<double> make_log_grid(double r_min, double r_max, int k) {
    if (k < 2) throw ParameterError("log grid needs K >= 2");
    if (!(r_min > 0.0) || !(r_min < r_max) || !std::isfinite(r_max)) {
        throw ParameterError("log grid needs 0 < r_min < r_max");
    }
    std::vector<double> r(static_cast<std::size_t>(k));
    const double ratio = r_max / r_min;
    for (int i = 0; i < k; ++i) r[static_cast<std::size_t>(i)] = r_min * std::pow(ratio, static_cast<double>(i) / (k - 1));
    r.back() = r_max;
    return r;
}

std::vector<double> default_design_times(double horizon, std::size_t points) {
    std::vector<double> t{0.0};
    const double lo = std::log(horizon / 1e4);
    const double hi = std::log(horizon);
    for (std::size_t i = 0; i < points; ++i) {
        t.push_back(std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1)));
    }
    t.back() = horizon;
    return t;
}

std::vector<double> default_check_times(double horizon, std::size_t points) {
    std::vector<double> t(points);
    for (std::size_t i = 0; i < points; ++i) t[i] = horizon * static_cast<double>(i) / static_cast<double>(points - 1);
    return t;
}

double evaluate_soe(const SOEKernel& soe, double t) {
    if (t < 0.0) throw ParameterError("evaluate_soe: negative time");
    double acc = 0.0;
    for (std::size_t k = 0; k < soe.size(); ++k) acc += soe.weights[k] * std::exp(-soe.rates[k] * t);
    return acc;
}

double kernel_error(const KernelTarget& target, const SOEKernel& soe, std::span<const double> check_times) {
    if (check_times.empty()) throw ParameterError("kernel_error: empty check grid");
    double worst = 0.0;
    for (double t : check_times) {
        const double g = target(t);
        worst = std::max(worst, std::abs(g - evaluate_soe(soe, t)) / std::max(1.0, std::abs(g)));
    }
    return worst;
}

SOEKernel fit_nnls(const KernelTarget& target, std::span<const double> rates, std::span<const double> design_times,
                   std::span<const double> check_times) {
    if (rates.empty()) throw ParameterError("fit_nnls: no rates");
    if (design_times.empty()) throw ParameterError("fit_nnls: empty design grid");
    for (std::size_t k = 0; k < rates.size(); ++k) {
        if (!(rates[k] > 0.0) || (k > 0 && !(rates[k] > rates[k - 1])))
            throw ParameterError("fit_nnls: rates must be positive and strictly increasing");
    }
    for (double t : design_times) {
        if (t < 0.0 || t > target.horizon()) throw ParameterError("fit_nnls: design time outside [0, T]");
    }

    Matrix g(design_times.size(), rates.size());
    Vector b(design_times.size());
    for (std::size_t j = 0; j < design_times.size(); ++j) {
        b[j] = target(design_times[j]);
        for (std::size_t k = 0; k < rates.size(); ++k) g(j, k) = std::exp(-rates[k] * design_times[j]);
    }
    const NnlsResult res = nnls(g, b);

    SOEKernel soe;
    soe.rates.assign(rates.begin(), rates.end());
    soe.weights = res.x;
    soe.residual_norm = res.residual_norm;
    soe.kkt_violation = res.kkt_violation;
    soe.non_unique = res.non_unique;
    if (check_times.empty()) {
        const auto grid = default_check_times(target.horizon());
        soe.eps_rel = kernel_error(target, soe, grid);
    } else {
        soe.eps_rel = kernel_error(target, soe, check_times);
    }
    return soe;
}

}  // namespace tailshape

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "tailshape/linalg.hpp"

namespace tailshape {

/// g(t) = (offset + t)^(-exponent)
struct PowerLawKernel {
    double exponent = 1.5;
    double offset = 1.0;
};

/// g(t) = sum_j weight_j e^{-rate_j t}
struct ExpSumKernel {
    std::vector<std::pair<double, double>> terms;  // (weight, rate)
};

/// Piecewise-linear interpolation of (t_j, g_j); constant extension beyond
/// the last sample.
struct TabulatedKernel {
    std::vector<double> t;
    std::vector<double> g;
};

class KernelTarget {
public:
    using Kind = std::variant<PowerLawKernel, ExpSumKernel, TabulatedKernel>;

    KernelTarget(Kind kind, double horizon);

    double operator()(double t) const;
    double horizon() const noexcept { return horizon_; }
    const Kind& kind() const noexcept { return kind_; }
    std::string describe() const;

private:
    Kind kind_;
    double horizon_;
};

/// Reads a two-column (t, g) delimited text file. Commas, tabs, semicolons
/// and blanks all separate fields; '#' starts a comment.
TabulatedKernel read_tabulated_kernel(const std::filesystem::path& path);

struct SOEKernel {
    std::vector<double> weights;
    std::vector<double> rates;
    double eps_rel = 0.0;
    double residual_norm = 0.0;
    double kkt_violation = 0.0;
    bool non_unique = false;

    std::size_t size() const noexcept { return weights.size(); }
};

std::vector<double> make_log_grid(double r_min, double r_max, int k);

/// 400 log-spaced points on [T/1e4, T] plus t = 0.
std::vector<double> default_design_times(double horizon, std::size_t points = 400);

/// Uniform check grid on [0, T].
std::vector<double> default_check_times(double horizon, std::size_t points = 2001);

/// Nonnegative least-squares weights for fixed rates. eps_rel is evaluated
/// on `check_times`, or on default_check_times(T) when empty.
SOEKernel fit_nnls(const KernelTarget& target, std::span<const double> rates, std::span<const double> design_times,
                   std::span<const double> check_times = {});

double kernel_error(const KernelTarget& target, const SOEKernel& soe, std::span<const double> check_times);

double evaluate_soe(const SOEKernel& soe, double t);

}  // namespace tailshape

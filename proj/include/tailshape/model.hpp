#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "tailshape/linalg.hpp"
#include "tailshape/soe_kernel.hpp"

namespace tailshape {

enum class Mode : int { normal = 0, verify = 1, mitigate = 2 };
inline constexpr int kModeCount = 3;

struct RegimeParams {
    std::string label;
    double gamma = 1.0;  // damping
    double beta = 0.0;   // coupling strength
};

struct Forcing {
    enum class Kind { none, sinusoid, constant };

    Kind kind = Kind::sinusoid;
    std::size_t node = 0;
    double amplitude = 1.0;
    double omega = 1.0;

    /// Scalar forcing at the forced coordinate.
    double value(double t) const;
    /// Adds the lifted forcing vector at time t into `out`.
    void add_to(double t, std::span<double> out) const;
    Vector eval(double t, std::size_t dim) const;
    double norm(double t) const { return std::abs(value(t)); }
    double sup_norm() const;
    /// int_{t0}^{t1} e^{rate (t1 - s)} |f(s)| ds
    double growth_integral(double rate, double t0, double t1) const;
};

struct NetworkSpec {
    std::size_t n = 0;
    Matrix W;  // W(dst, src)
    std::vector<RegimeParams> regimes;
    Forcing forcing;

    std::size_t regime_index(const std::string& label) const;
    /// Checks shapes, gamma > 0, beta >= 0 and gamma > beta rho(W) per regime.
    void validate() const;
};

/// Reads (src, dst, weight) rows into an n x n matrix with W(dst, src) = weight.
Matrix read_edge_list(const std::filesystem::path& path, std::size_t n);

struct ModeDesign {
    double alpha = 0.5;    // verify-mode memory gain
    double delta = 1.0;    // extra damping in mitigate mode
    double delta_r = 1.0;  // extra memory decay in mitigate mode

    void validate() const;
};

Matrix build_instant_operator(const NetworkSpec& spec, std::size_t regime);
Matrix build_instant_operator(const NetworkSpec& spec, const std::string& regime);

/// A_i^(m) of the lifted system. Block layout for X = (x, y_1, ..., y_K):
///   x'   = B' x + sum_k w'_k y_k
///   y_k' = x - r'_k y_k
class LiftedOperator {
public:
    LiftedOperator(std::size_t regime, Mode mode, Matrix b, std::vector<double> w, std::vector<double> r);

    /// Unstructured operator, used for generic linear tests.
    static LiftedOperator from_matrix(Matrix a, std::size_t regime = 0, Mode mode = Mode::normal);

    std::size_t regime() const noexcept { return regime_; }
    Mode mode() const noexcept { return mode_; }
    std::size_t dim() const noexcept { return matrix_.rows(); }
    std::size_t n() const noexcept { return n_; }
    std::size_t memory_terms() const noexcept { return w_.size(); }
    bool structured() const noexcept { return structured_; }

    const Matrix& matrix() const noexcept { return matrix_; }
    double susceptibility() const noexcept { return susceptibility_ + susceptibility_offset_; }
    const Vector& top_direction() const noexcept { return top_direction_; }
    double operator_norm() const noexcept { return operator_norm_; }

    /// out = A x
    void apply(std::span<const double> x, std::span<double> out) const;

    /// Shifts the recorded susceptibility away from the true log norm. Only
    /// meant for negative-control audits.
    void corrupt_susceptibility(double offset) noexcept { susceptibility_offset_ = offset; }

private:
    LiftedOperator() = default;
    void cache();

    std::size_t regime_ = 0;
    Mode mode_ = Mode::normal;
    std::size_t n_ = 0;
    bool structured_ = false;
    Matrix b_;
    std::vector<double> w_;
    std::vector<double> r_;
    Matrix matrix_;
    double susceptibility_ = 0.0;
    double susceptibility_offset_ = 0.0;
    double operator_norm_ = 0.0;
    Vector top_direction_;
};

/// Applies the mode rules to (B, w, r) and assembles the lifted operator.
/// An SOE kernel with no terms yields the memoryless operator B'.
LiftedOperator assemble_lifted(const Matrix& b, const SOEKernel& soe, const ModeDesign& design, Mode mode,
                               std::size_t regime = 0);

struct ContractionCheck {
    bool certified = false;
    double kappa = 0.0;  // meaningful only when certified
};

/// mu_2(A) <= -kappa with M_c = 1.
ContractionCheck check_mitigation_contraction(const LiftedOperator& op);

/// All (regime, mode) operators of one scenario.
class OperatorTable {
public:
    OperatorTable() = default;
    explicit OperatorTable(std::vector<std::vector<LiftedOperator>> ops);

    const LiftedOperator& at(std::size_t regime, Mode mode) const { return ops_[regime][static_cast<int>(mode)]; }
    LiftedOperator& at(std::size_t regime, Mode mode) { return ops_[regime][static_cast<int>(mode)]; }
    std::size_t regimes() const noexcept { return ops_.size(); }
    std::size_t dim() const noexcept { return ops_.empty() ? 0 : ops_[0][0].dim(); }
    std::size_t n() const noexcept { return ops_.empty() ? 0 : ops_[0][0].n(); }
    /// A_star: the largest operator norm over the table.
    double max_operator_norm() const;

private:
    std::vector<std::vector<LiftedOperator>> ops_;
};

/// Builds every (regime, mode) operator from the network, kernel and design.
OperatorTable build_operator_table(const NetworkSpec& spec, const SOEKernel& soe, const ModeDesign& design);

}  // namespace tailshape

#include "tailshape/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "tailshape/errors.hpp"

namespace tailshape {

double Forcing::value(double t) const {
    switch (kind) {
        case Kind::none: return 0.0;
        case Kind::constant: return amplitude;
        case Kind::sinusoid: return amplitude * std::sin(omega * t);
    }
    return 0.0;
}

void Forcing::add_to(double t, std::span<double> out) const {
    if (kind == Kind::none) return;
    out[node] += value(t);
}

Vector Forcing::eval(double t, std::size_t dim) const {
    Vector out(dim, 0.0);
    add_to(t, out);
    return out;
}

double Forcing::sup_norm() const { return kind == Kind::none ? 0.0 : std::abs(amplitude); }

namespace {

// 8-point Gauss-Legendre nodes and weights on [-1, 1].
constexpr std::array<double, 4> kGlNodes{0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                                         0.9602898564975363};
constexpr std::array<double, 4> kGlWeights{0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                                           0.1012285362903763};

template <class F>
double gauss_legendre(F&& f, double a, double b) {
    const double mid = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    double acc = 0.0;
    for (std::size_t i = 0; i < kGlNodes.size(); ++i) {
        acc += kGlWeights[i] * (f(mid - half * kGlNodes[i]) + f(mid + half * kGlNodes[i]));
    }
    return acc * half;
}

}  // namespace

double Forcing::growth_integral(double rate, double t0, double t1) const {
    if (!(t1 > t0) || kind == Kind::none) return 0.0;
    const double a = std::abs(amplitude);
    if (kind == Kind::constant || omega == 0.0) {
        const double mag = kind == Kind::constant ? a : 0.0;
        const double len = t1 - t0;
        const double x = rate * len;
        return mag * (std::abs(x) < 1e-8 ? len * (1 + 0.5 * x) : std::expm1(x) / rate);
    }
    // |sin| is smooth between its zeros, so integrate piecewise.
    const double period = std::numbers::pi / std::abs(omega);
    auto integrand = [&](double s) { return std::exp(rate * (t1 - s)) * a * std::abs(std::sin(omega * s)); };
    double acc = 0.0;
    double lo = t0;
    while (lo < t1) {
        double k = std::floor(lo / period) + 1.0;
        while (k * period <= lo) k += 1.0;
        const double next_zero = k * period;
        const double hi = std::min(t1, next_zero);
        // Subdivide long pieces so the exponential weight stays well resolved.
        const int pieces = std::max(1, static_cast<int>(std::ceil(std::abs(rate) * (hi - lo))));
        const double width = (hi - lo) / pieces;
        for (int p = 0; p < pieces; ++p) acc += gauss_legendre(integrand, lo + p * width, lo + (p + 1) * width);
        lo = hi;
    }
    return acc;
}

std::size_t NetworkSpec::regime_index(const std::string& label) const {
    for (std::size_t i = 0; i < regimes.size(); ++i)
        if (regimes[i].label == label) return i;
    throw ParameterError("unknown regime label '" + label + "'");
}

void NetworkSpec::validate() const {
    if (n == 0) throw ParameterError("network needs at least one node");
    if (W.rows() != n || W.cols() != n) {
        throw ParameterError("adjacency is " + std::to_string(W.rows()) + "x" + std::to_string(W.cols()) +
                             ", expected " + std::to_string(n) + "x" + std::to_string(n));
    }
    if (!W.all_finite()) throw ParameterError("adjacency has non-finite entries");
    if (regimes.empty()) throw ParameterError("network needs at least one regime");
    if (forcing.node >= n) throw ParameterError("forced node outside [0, n)");
    const double rho = spectral_radius(W);
    for (const auto& r : regimes) {
        if (!(r.gamma > 0.0)) throw ParameterError("regime " + r.label + ": damping must be positive");
        if (!(r.beta >= 0.0)) throw ParameterError("regime " + r.label + ": coupling must be nonnegative");
        if (!(r.gamma > r.beta * rho)) {
            std::ostringstream msg;
            msg << "regime " << r.label << " violates the stability margin: gamma = " << r.gamma
                << " <= beta * rho(W) = " << r.beta * rho;
            throw ParameterError(msg.str());
        }
    }
}

Matrix read_edge_list(const std::filesystem::path& path, std::size_t n) {
    std::ifstream in(path);
    if (!in) throw ParameterError("cannot open edge list " + path.string());
    Matrix w(n, n);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::replace_if(line.begin(), line.end(), [](char c) { return c == ',' || c == ';' || c == '\t'; }, ' ');
        std::istringstream fields(line);
        long long src = 0, dst = 0;
        double weight = 1.0;
        if (!(fields >> src)) continue;
        if (!(fields >> dst)) throw ParameterError(path.string() + ":" + std::to_string(lineno) + ": missing dst");
        if (!(fields >> weight)) weight = 1.0;
        if (src < 0 || dst < 0 || static_cast<std::size_t>(src) >= n || static_cast<std::size_t>(dst) >= n) {
            throw ParameterError(path.string() + ":" + std::to_string(lineno) + ": node index out of range");
        }
        w(static_cast<std::size_t>(dst), static_cast<std::size_t>(src)) += weight;
    }
    return w;
}

void ModeDesign::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ParameterError("verify gain alpha must lie in (0, 1)");
    if (!(delta > 0.0)) throw ParameterError("mitigate damping delta must be positive");
    if (!(delta_r > 0.0)) throw ParameterError("mitigate decay delta_r must be positive");
}

Matrix build_instant_operator(const NetworkSpec& spec, std::size_t regime) {
    if (regime >= spec.regimes.size()) throw ParameterError("unknown regime index " + std::to_string(regime));
    const auto& p = spec.regimes[regime];
    Matrix b = p.beta * spec.W;
    for (std::size_t i = 0; i < spec.n; ++i) b(i, i) -= p.gamma;
    return b;
}

Matrix build_instant_operator(const NetworkSpec& spec, const std::string& regime) {
    return build_instant_operator(spec, spec.regime_index(regime));
}

LiftedOperator::LiftedOperator(std::size_t regime, Mode mode, Matrix b, std::vector<double> w, std::vector<double> r)
    : regime_(regime), mode_(mode), n_(b.rows()), structured_(true), b_(std::move(b)), w_(std::move(w)),
      r_(std::move(r)) {
    if (!b_.is_square()) throw ParameterError("lifted operator: B must be square");
    if (w_.size() != r_.size()) throw ParameterError("lifted operator: weights and rates differ in length");
    const std::size_t k = w_.size();
    const std::size_t d = (k + 1) * n_;
    matrix_ = Matrix(d, d);
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < n_; ++j) matrix_(i, j) = b_(i, j);
    for (std::size_t m = 0; m < k; ++m) {
        const std::size_t off = (m + 1) * n_;
        for (std::size_t i = 0; i < n_; ++i) {
            matrix_(i, off + i) = w_[m];
            matrix_(off + i, i) = 1.0;
            matrix_(off + i, off + i) = -r_[m];
        }
    }
    cache();
}

LiftedOperator LiftedOperator::from_matrix(Matrix a, std::size_t regime, Mode mode) {
    if (!a.is_square()) throw DimensionError("lifted operator must be square");
    LiftedOperator op;
    op.regime_ = regime;
    op.mode_ = mode;
    op.n_ = a.rows();
    op.structured_ = false;
    op.matrix_ = std::move(a);
    op.cache();
    return op;
}

void LiftedOperator::cache() {
    if (!matrix_.all_finite()) throw ParameterError("lifted operator has non-finite entries");
    auto [gamma, v] = top_symmetric_eigpair(matrix_);
    susceptibility_ = gamma;
    top_direction_ = std::move(v);
    operator_norm_ = operator_norm_2(matrix_);
}

void LiftedOperator::apply(std::span<const double> x, std::span<double> out) const {
    if (!structured_) {
        matrix_.apply(x, out);
        return;
    }
    const std::size_t n = n_;
    const std::size_t k = w_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double* row = &b_.entries()[i * n];
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += row[j] * x[j];
        for (std::size_t m = 0; m < k; ++m) acc += w_[m] * x[(m + 1) * n + i];
        out[i] = acc;
    }
    for (std::size_t m = 0; m < k; ++m) {
        const std::size_t off = (m + 1) * n;
        const double r = r_[m];
        for (std::size_t i = 0; i < n; ++i) out[off + i] = x[i] - r * x[off + i];
    }
}

LiftedOperator assemble_lifted(const Matrix& b, const SOEKernel& soe, const ModeDesign& design, Mode mode,
                               std::size_t regime) {
    if (!b.is_square()) throw ParameterError("assemble_lifted: B must be square");
    if (soe.weights.size() != soe.rates.size()) throw ParameterError("assemble_lifted: malformed SOE kernel");
    Matrix bp = b;
    std::vector<double> w = soe.weights;
    std::vector<double> r = soe.rates;
    switch (mode) {
        case Mode::normal: break;
        case Mode::verify:
            for (double& wk : w) wk *= design.alpha;
            break;
        case Mode::mitigate:
            for (std::size_t i = 0; i < bp.rows(); ++i) bp(i, i) -= design.delta;
            for (double& rk : r) rk += design.delta_r;
            break;
    }
    return LiftedOperator(regime, mode, std::move(bp), std::move(w), std::move(r));
}

ContractionCheck check_mitigation_contraction(const LiftedOperator& op) {
    const double s = op.susceptibility();
    if (s < 0.0) return {true, -s};
    return {false, 0.0};
}

OperatorTable::OperatorTable(std::vector<std::vector<LiftedOperator>> ops) : ops_(std::move(ops)) {
    for (const auto& row : ops_) {
        if (row.size() != kModeCount) throw ParameterError("operator table needs three modes per regime");
        for (const auto& op : row) {
            if (op.dim() != ops_[0][0].dim()) throw ParameterError("operator table dimensions differ");
        }
    }
}

double OperatorTable::max_operator_norm() const {
    double best = 0.0;
    for (const auto& row : ops_)
        for (const auto& op : row) best = std::max(best, op.operator_norm());
    return best;
}

OperatorTable build_operator_table(const NetworkSpec& spec, const SOEKernel& soe, const ModeDesign& design) {
    std::vector<std::vector<LiftedOperator>> ops;
    for (std::size_t z = 0; z < spec.regimes.size(); ++z) {
        const Matrix b = build_instant_operator(spec, z);
        std::vector<LiftedOperator> row;
        for (int m = 0; m < kModeCount; ++m) row.push_back(assemble_lifted(b, soe, design, static_cast<Mode>(m), z));
        ops.push_back(std::move(row));
    }
    return OperatorTable(std::move(ops));
}

}  // namespace tailshape

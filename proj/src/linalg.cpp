#include "tailshape/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "tailshape/errors.hpp"

namespace tailshape {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (data_.size() != rows * cols) {
        throw DimensionError("matrix entries do not match " + std::to_string(rows) + "x" +
                             std::to_string(cols));
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw DimensionError("ragged matrix literal");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(std::span<const double> diag) {
    Matrix m(diag.size(), diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
    return m;
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

bool Matrix::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Matrix::apply(std::span<const double> x, std::span<double> out) const {
    if (x.size() != cols_ || out.size() != rows_) throw DimensionError("matrix-vector size mismatch");
    for (std::size_t i = 0; i < rows_; ++i) {
        const double* r = data_.data() + i * cols_;
        double acc = 0.0;
        for (std::size_t j = 0; j < cols_; ++j) acc += r[j] * x[j];
        out[i] = acc;
    }
}

Vector Matrix::apply(std::span<const double> x) const {
    Vector out(rows_);
    apply(x, out);
    return out;
}

Matrix& Matrix::operator+=(const Matrix& other) {
    if (rows_ != other.rows_ || cols_ != other.cols_) throw DimensionError("matrix sum size mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
    if (rows_ != other.rows_ || cols_ != other.cols_) throw DimensionError("matrix difference size mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_) throw DimensionError("matrix product size mismatch");
    Matrix c(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i) {
        for (std::size_t k = 0; k < a.cols_; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
        }
    }
    return c;
}

double norm2(std::span<const double> v) {
    // Scaled accumulation keeps tiny and huge states representable.
    double scale = 0.0;
    for (double x : v) scale = std::max(scale, std::abs(x));
    if (scale == 0.0 || !std::isfinite(scale)) return scale;
    double acc = 0.0;
    for (double x : v) {
        const double s = x / scale;
        acc += s * s;
    }
    return scale * std::sqrt(acc);
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("dot product size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double frobenius_norm(const Matrix& a) { return norm2(a.entries()); }

namespace {

void require_square(const Matrix& a, const char* what) {
    if (!a.is_square()) {
        std::ostringstream msg;
        msg << what << ": expected a square matrix, got " << a.rows() << "x" << a.cols();
        throw DimensionError(msg.str());
    }
}

}  // namespace

Matrix symmetric_part(const Matrix& a) {
    require_square(a, "symmetric_part");
    const std::size_t n = a.rows();
    Matrix s(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
    return s;
}

SymmetricEigResult symmetric_eig(const Matrix& input) {
    require_square(input, "symmetric_eig");
    const std::size_t n = input.rows();
    Matrix s(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) s(i, j) = s(j, i) = input(i, j);
    Matrix v = Matrix::identity(n);

    const double fro = frobenius_norm(s);
    const double target = 1e-12 * fro;
    auto off_norm = [&] {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) acc += 2.0 * s(i, j) * s(i, j);
        return std::sqrt(acc);
    };

    constexpr int kMaxSweeps = 100;
    int sweep = 0;
    for (; sweep < kMaxSweeps && fro > 0.0 && off_norm() > target; ++sweep) {
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = s(p, q);
                if (apq == 0.0) continue;
                const double app = s(p, p);
                const double aqq = s(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double skp = s(k, p);
                    const double skq = s(k, q);
                    s(k, p) = c * skp - sn * skq;
                    s(k, q) = sn * skp + c * skq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double spk = s(p, k);
                    const double sqk = s(q, k);
                    s(p, k) = c * spk - sn * sqk;
                    s(q, k) = sn * spk + c * sqk;
                }
                s(p, q) = s(q, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - sn * vkq;
                    v(k, q) = sn * vkp + c * vkq;
                }
            }
        }
    }
    if (sweep == kMaxSweeps && off_norm() > target) {
        std::ostringstream msg;
        msg << "Jacobi eigensolver did not converge: off-diagonal norm " << off_norm()
            << " vs target " << target;
        throw ConvergenceError(msg.str());
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s(a, a) > s(b, b); });

    SymmetricEigResult out{Vector(n), Matrix(n, n)};
    for (std::size_t j = 0; j < n; ++j) {
        out.eigenvalues[j] = s(order[j], order[j]);
        for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, j) = v(i, order[j]);
    }
    return out;
}

double log_norm_2(const Matrix& a) {
    require_square(a, "log_norm_2");
    if (a.rows() == 0) throw DimensionError("log_norm_2: empty matrix");
    return symmetric_eig(symmetric_part(a)).eigenvalues.front();
}

std::pair<double, Vector> top_symmetric_eigpair(const Matrix& a) {
    require_square(a, "top_symmetric_eigpair");
    const std::size_t n = a.rows();
    if (n == 0) throw DimensionError("top_symmetric_eigpair: empty matrix");
    const auto eig = symmetric_eig(symmetric_part(a));
    const double top = eig.eigenvalues.front();

    std::size_t dim = 1;
    while (dim < n && top - eig.eigenvalues[dim] < 1e-9) ++dim;

    Vector v(n, 0.0);
    if (dim == 1) {
        for (std::size_t i = 0; i < n; ++i) v[i] = eig.eigenvectors(i, 0);
    } else {
        // Orthogonal projection of e_j onto the eigenspace maximizes the j-th
        // coordinate among its unit vectors; e_1 is tried first.
        for (std::size_t j = 0; j < n; ++j) {
            std::fill(v.begin(), v.end(), 0.0);
            for (std::size_t c = 0; c < dim; ++c) {
                const double coef = eig.eigenvectors(j, c);
                for (std::size_t i = 0; i < n; ++i) v[i] += coef * eig.eigenvectors(i, c);
            }
            if (norm2(v) > 1e-8) break;
        }
    }
    const double nv = norm2(v);
    for (double& x : v) x /= nv;

    std::size_t arg = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (std::abs(v[i]) > std::abs(v[arg]) + 1e-12) arg = i;
    if (v[arg] < 0)
        for (double& x : v) x = -x;
    return {top, v};
}

double operator_norm_2(const Matrix& a) {
    if (a.empty()) return 0.0;
    const Matrix ata = a.transpose() * a;
    const double top = symmetric_eig(ata).eigenvalues.front();
    return std::sqrt(std::max(0.0, top));
}

namespace {

// Gelfand estimate ||W^(2^k)||^(2^-k) evaluated with renormalization so the
// powers never overflow. Converges to rho(W) for any W, including defective
// and rotation-dominated spectra where power iteration oscillates.
double gelfand_radius(const Matrix& w) {
    Matrix p = w;
    double log_scale = 0.0;  // log of the factor stripped from p
    double power = 1.0;
    double estimate = operator_norm_2(w);
    // Nilpotent parts only vanish once the power reaches the dimension.
    const int warmup = static_cast<int>(std::ceil(std::log2(static_cast<double>(w.rows()) + 1.0))) + 1;
    for (int k = 0; k < 60; ++k) {
        const double nrm = frobenius_norm(p);
        if (nrm == 0.0) return 0.0;
        p *= 1.0 / nrm;
        log_scale += std::log(nrm);
        p = p * p;
        log_scale *= 2.0;
        power *= 2.0;
        const double pn = operator_norm_2(p);
        if (pn == 0.0) return 0.0;
        const double next = std::exp((log_scale + std::log(pn)) / power);
        if (k >= warmup && std::abs(next - estimate) <= 1e-12 * std::max(1.0, next)) return next;
        estimate = next;
    }
    return estimate;
}

}  // namespace

double spectral_radius(const Matrix& w) {
    require_square(w, "spectral_radius");
    const std::size_t n = w.rows();
    if (n == 0) return 0.0;
    const double bound = operator_norm_2(w);
    if (bound == 0.0) return 0.0;

    Vector x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = 1.0 + 1e-3 * static_cast<double>(i + 1) / static_cast<double>(n);
    double nx = norm2(x);
    for (double& v : x) v /= nx;

    // Rayleigh-free ratio estimate; a pair of iterates is compared so that
    // period-2 sign flips (eigenvalue -rho) still converge.
    constexpr int kCap = 10000;
    double prev = -1.0;
    int stable = 0;
    for (int it = 0; it < kCap; ++it) {
        w.apply(x, y);
        const double ny = norm2(y);
        if (ny == 0.0) break;  // nilpotent direction; fall through to Gelfand
        w.apply(y, x);
        const double nxx = norm2(x);
        if (nxx == 0.0) break;
        const double est = std::sqrt(nxx);
        for (double& v : x) v /= nxx;
        if (prev >= 0.0 && std::abs(est - prev) <= 1e-13 * std::max(est, 1e-300)) {
            if (++stable >= 3) {
                // Cross-check: the square-root ratio only equals rho when a
                // single dominant modulus governs the iteration.
                const double g = gelfand_radius(w);
                if (std::abs(g - est) <= 1e-6 * std::max(1.0, g)) return est;
                return g;
            }
        } else {
            stable = 0;
        }
        prev = est;
    }
    const double g = gelfand_radius(w);
    if (!(g <= bound * (1.0 + 1e-12)) || !std::isfinite(g)) {
        std::ostringstream msg;
        msg << "spectral_radius did not converge after " << kCap << " iterations; last estimate " << prev
            << ", squaring estimate " << g << ", norm bound " << bound;
        throw ConvergenceError(msg.str());
    }
    return g;
}

Vector expm_apply(const Matrix& a, std::span<const double> v, double t) {
    require_square(a, "expm_apply");
    if (v.size() != a.rows()) throw DimensionError("expm_apply: vector size mismatch");
    if (!std::isfinite(t)) throw ParameterError("expm_apply: non-finite time");
    const double scaled = operator_norm_2(a) * std::abs(t);
    if (!std::isfinite(scaled) || scaled > 700.0) {
        throw RangeError("expm_apply: ||A|| t = " + std::to_string(scaled) + " overflows");
    }
    Vector out(v.begin(), v.end());
    if (scaled == 0.0) return out;

    // Substep so each Taylor segment has norm <= 0.5, then sum to machine
    // precision.
    const auto steps = static_cast<std::size_t>(std::ceil(scaled / 0.5));
    const double h = t / static_cast<double>(steps);
    Vector term(out.size()), next(out.size()), acc(out.size());
    for (std::size_t s = 0; s < steps; ++s) {
        term = out;
        acc = out;
        for (int k = 1; k < 60; ++k) {
            a.apply(term, next);
            const double f = h / k;
            for (std::size_t i = 0; i < next.size(); ++i) term[i] = next[i] * f;
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += term[i];
            if (norm2(term) <= 1e-18 * norm2(acc)) break;
        }
        out.swap(acc);
    }
    return out;
}

}  // namespace tailshape

#include "tailshape/nnls.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "tailshape/errors.hpp"

namespace tailshape {

Vector least_squares(const Matrix& a, std::span<const double> b, bool* rank_deficient) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    if (b.size() != m) throw DimensionError("least_squares: rhs size mismatch");
    Matrix r = a;
    Vector qtb(b.begin(), b.end());
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Vector colnorm(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += r(i, j) * r(i, j);
        colnorm[j] = acc;
    }
    const double scale = std::sqrt(*std::max_element(colnorm.begin(), colnorm.end()));

    const std::size_t steps = std::min(m, n);
    std::size_t rank = 0;
    for (std::size_t k = 0; k < steps; ++k) {
        std::size_t piv = k;
        double best = -1.0;
        for (std::size_t j = k; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t i = k; i < m; ++i) acc += r(i, j) * r(i, j);
            if (acc > best) {
                best = acc;
                piv = j;
            }
        }
        if (piv != k) {
            for (std::size_t i = 0; i < m; ++i) std::swap(r(i, k), r(i, piv));
            std::swap(perm[k], perm[piv]);
        }
        const double alpha_norm = std::sqrt(best);
        if (alpha_norm <= 1e-12 * scale * std::sqrt(static_cast<double>(m))) break;
        ++rank;
        const double alpha = r(k, k) > 0 ? -alpha_norm : alpha_norm;
        Vector v(m - k);
        v[0] = r(k, k) - alpha;
        for (std::size_t i = k + 1; i < m; ++i) v[i - k] = r(i, k);
        const double vv = dot(v, v);
        if (vv == 0.0) continue;
        for (std::size_t j = k; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = k; i < m; ++i) s += v[i - k] * r(i, j);
            s = 2.0 * s / vv;
            for (std::size_t i = k; i < m; ++i) r(i, j) -= s * v[i - k];
        }
        double s = 0.0;
        for (std::size_t i = k; i < m; ++i) s += v[i - k] * qtb[i];
        s = 2.0 * s / vv;
        for (std::size_t i = k; i < m; ++i) qtb[i] -= s * v[i - k];
    }
    if (rank_deficient) *rank_deficient = rank < n;

    Vector z(n, 0.0);
    for (std::size_t kk = rank; kk-- > 0;) {
        double s = qtb[kk];
        for (std::size_t j = kk + 1; j < rank; ++j) s -= r(kk, j) * z[j];
        z[kk] = s / r(kk, kk);
    }
    Vector x(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) x[perm[j]] = z[j];
    return x;
}

namespace {

Vector gradient(const Matrix& a, std::span<const double> x, std::span<const double> b) {
    Vector res = a.apply(x);
    for (std::size_t i = 0; i < res.size(); ++i) res[i] -= b[i];
    Vector g(a.cols(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) g[j] += a(i, j) * res[i];
    return g;
}

Vector solve_on(const Matrix& a, std::span<const double> b, const std::vector<bool>& passive, bool& deficient) {
    std::vector<std::size_t> cols;
    for (std::size_t j = 0; j < passive.size(); ++j)
        if (passive[j]) cols.push_back(j);
    Matrix sub(a.rows(), cols.size());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t c = 0; c < cols.size(); ++c) sub(i, c) = a(i, cols[c]);
    bool rd = false;
    const Vector zs = least_squares(sub, b, &rd);
    deficient = deficient || rd;
    Vector z(a.cols(), 0.0);
    for (std::size_t c = 0; c < cols.size(); ++c) z[cols[c]] = zs[c];
    return z;
}

}  // namespace

NnlsResult nnls(const Matrix& a, std::span<const double> b, std::size_t max_outer) {
    const std::size_t n = a.cols();
    if (b.size() != a.rows()) throw DimensionError("nnls: rhs size mismatch");
    if (max_outer == 0) max_outer = std::max<std::size_t>(10 * n, 1);

    double bnorm = norm2(b);
    double anorm = frobenius_norm(a);
    const double tol = 1e-13 * std::max(1.0, anorm) * std::max(1.0, bnorm);

    NnlsResult out;
    out.x.assign(n, 0.0);
    std::vector<bool> passive(n, false);
    bool deficient = false;

    std::size_t outer = 0;
    while (true) {
        Vector w = gradient(a, out.x, b);
        for (double& v : w) v = -v;  // w = A^T (b - A x)
        std::size_t best = n;
        double best_w = tol;
        for (std::size_t j = 0; j < n; ++j) {
            if (!passive[j] && w[j] > best_w) {
                best_w = w[j];
                best = j;
            }
        }
        if (best == n) break;
        if (++outer > max_outer) {
            std::ostringstream msg;
            msg << "nnls: outer iteration cap " << max_outer << " reached, max dual " << best_w;
            throw ConvergenceError(msg.str());
        }
        passive[best] = true;

        bool first = true;
        bool stalled = false;
        while (true) {
            Vector z = solve_on(a, b, passive, deficient);
            if (first && z[best] <= 0.0) {
                // Round-off made the entering column useless; the current
                // point is optimal to working precision.
                passive[best] = false;
                stalled = true;
                break;
            }
            first = false;
            bool feasible = true;
            for (std::size_t j = 0; j < n; ++j)
                if (passive[j] && z[j] <= 0.0) feasible = false;
            if (feasible) {
                out.x = std::move(z);
                break;
            }
            double alpha = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < n; ++j) {
                if (passive[j] && z[j] <= 0.0) {
                    const double denom = out.x[j] - z[j];
                    const double ratio = denom > 0 ? out.x[j] / denom : 0.0;
                    alpha = std::min(alpha, ratio);
                }
            }
            for (std::size_t j = 0; j < n; ++j) {
                out.x[j] += alpha * (z[j] - out.x[j]);
                if (passive[j] && out.x[j] <= 1e-15 * std::max(1.0, std::abs(z[j]))) {
                    passive[j] = false;
                    out.x[j] = 0.0;
                }
            }
            if (std::none_of(passive.begin(), passive.end(), [](bool p) { return p; })) break;
        }
        if (stalled) break;
    }
    out.iterations = outer;

    const Vector g = gradient(a, out.x, b);
    double viol = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        viol = std::max(viol, out.x[j] > 0.0 ? std::abs(g[j]) : std::max(0.0, -g[j]));
    }
    out.kkt_violation = viol;
    out.non_unique = deficient;
    Vector res = a.apply(out.x);
    for (std::size_t i = 0; i < res.size(); ++i) res[i] -= b[i];
    out.residual_norm = norm2(res);
    return out;
}

}  // namespace tailshape

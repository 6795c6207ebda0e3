#include <cmath>
#include <random>

#include "doctest.h"
#include "tailshape/errors.hpp"
#include "tailshape/linalg.hpp"

using namespace tailshape;

namespace {

Matrix random_matrix(std::mt19937_64& gen, std::size_t n, double scale = 1.0) {
    std::normal_distribution<double> nd(0.0, scale);
    Matrix m(n, n);
    for (double& v : m.entries()) v = nd(gen);
    return m;
}

// e^{At} v summed as a Taylor series in long double with many substeps; an
// independent implementation of the quantity expm_apply computes.
std::vector<long double> taylor_oracle(const Matrix& a, const Vector& v, double t) {
    const std::size_t n = a.rows();
    const int steps = 64;
    const long double h = static_cast<long double>(t) / steps;
    std::vector<long double> x(v.begin(), v.end());
    for (int s = 0; s < steps; ++s) {
        std::vector<long double> term = x, acc = x, next(n);
        for (int k = 1; k < 40; ++k) {
            for (std::size_t i = 0; i < n; ++i) {
                long double sum = 0;
                for (std::size_t j = 0; j < n; ++j) sum += static_cast<long double>(a(i, j)) * term[j];
                next[i] = sum * h / k;
            }
            term = next;
            for (std::size_t i = 0; i < n; ++i) acc[i] += term[i];
        }
        x = acc;
    }
    return x;
}

}  // namespace

TEST_CASE("log_norm_2 examples") {
    CHECK(log_norm_2(Matrix{{-2, 0}, {0, 3}}) == doctest::Approx(3).epsilon(1e-14));
    CHECK(log_norm_2(Matrix{{-1, 4}, {0, -1}}) == doctest::Approx(1).epsilon(1e-14));
    for (double b : {0.3, 1.0, 17.0}) CHECK(std::abs(log_norm_2(Matrix{{0, -b}, {b, 0}})) < 1e-14);
    CHECK_THROWS_AS(log_norm_2(Matrix(2, 3)), DimensionError);
}

TEST_CASE("top_symmetric_eigpair examples and tie rule") {
    auto [g1, v1] = top_symmetric_eigpair(Matrix{{1, 0}, {0, -1}});
    CHECK(g1 == doctest::Approx(1));
    CHECK(v1[0] == doctest::Approx(1));
    CHECK(std::abs(v1[1]) < 1e-14);

    auto [g2, v2] = top_symmetric_eigpair(Matrix::identity(3));
    CHECK(g2 == doctest::Approx(1));
    CHECK(v2[0] == doctest::Approx(1));
    CHECK(std::abs(v2[1]) + std::abs(v2[2]) < 1e-14);

    auto [g3, v3] = top_symmetric_eigpair(Matrix{{-1, 4}, {0, -1}});
    CHECK(g3 == doctest::Approx(1));
    CHECK(v3[0] == doctest::Approx(1 / std::sqrt(2.0)));
    CHECK(v3[1] == doctest::Approx(1 / std::sqrt(2.0)));

    // Degenerate top eigenspace spanned by e_2, e_3: e_1 projects to zero, so
    // the rule falls back to e_2.
    auto [g4, v4] = top_symmetric_eigpair(Matrix{{-1, 0, 0}, {0, 2, 0}, {0, 0, 2}});
    CHECK(g4 == doctest::Approx(2));
    CHECK(v4[1] == doctest::Approx(1));

    // Sign fix: largest-magnitude entry positive.
    auto [g5, v5] = top_symmetric_eigpair(Matrix{{0, -1}, {-1, 0}});
    CHECK(g5 == doctest::Approx(1));
    CHECK(v5[0] * v5[1] < 0);
    CHECK(v5[0] > 0);
}

TEST_CASE("symmetric_eig invariants on random matrices") {
    std::mt19937_64 gen(11);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + static_cast<std::size_t>(trial % 9);
        Matrix a = random_matrix(gen, n);
        Matrix s = symmetric_part(a);
        auto eig = symmetric_eig(s);
        const double snorm = operator_norm_2(s);
        for (std::size_t j = 0; j + 1 < n; ++j) CHECK(eig.eigenvalues[j] >= eig.eigenvalues[j + 1]);
        Matrix qtq = eig.eigenvectors.transpose() * eig.eigenvectors;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) CHECK(std::abs(qtq(i, j) - (i == j)) <= 1e-10);
        for (std::size_t j = 0; j < n; ++j) {
            Vector v(n);
            for (std::size_t i = 0; i < n; ++i) v[i] = eig.eigenvectors(i, j);
            Vector sv = s.apply(v);
            for (std::size_t i = 0; i < n; ++i) sv[i] -= eig.eigenvalues[j] * v[i];
            CHECK(norm2(sv) <= 1e-10 * snorm);
        }
        auto [g, v] = top_symmetric_eigpair(a);
        CHECK(g == log_norm_2(a));
        Vector sv = s.apply(v);
        for (std::size_t i = 0; i < n; ++i) sv[i] -= g * v[i];
        CHECK(norm2(sv) <= 1e-9 * operator_norm_2(a));
        CHECK(norm2(v) == doctest::Approx(1).epsilon(1e-14));
    }
}

TEST_CASE("log_norm_2 shift property") {
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 10; ++trial) {
        Matrix a = random_matrix(gen, 6);
        for (double delta : {0.1, 1.5, -2.0}) {
            Matrix shifted = a - delta * Matrix::identity(6);
            CHECK(log_norm_2(shifted) == doctest::Approx(log_norm_2(a) - delta).epsilon(1e-12));
        }
    }
}

TEST_CASE("log_norm_2 dominates the asymptotic growth rate") {
    // (1/t) log ||e^{At} v|| approaches max Re(lambda) from the Taylor oracle.
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix a = random_matrix(gen, 5, 0.5);
        Vector v(5, 1.0);
        const double t = 8.0;
        auto x = taylor_oracle(a, v, t);
        long double nx = 0;
        for (auto xi : x) nx += xi * xi;
        const double rate = static_cast<double>(std::log(std::sqrt(nx)) - std::log(std::sqrt(5.0L))) / t;
        CHECK(rate <= log_norm_2(a) + 1e-9);
    }
}

TEST_CASE("spectral_radius examples") {
    CHECK(spectral_radius(Matrix{{0, 1}, {1, 0}}) == doctest::Approx(1).epsilon(1e-8));
    CHECK(spectral_radius(Matrix{{0, 2}, {0, 0}}) == doctest::Approx(0).epsilon(1e-8));
    CHECK(spectral_radius(Matrix{{0, 1, 0}, {0, 0, 1}, {1, 0, 0}}) == doctest::Approx(1).epsilon(1e-8));
    CHECK(spectral_radius(Matrix{{0.5, 0}, {0, -2}}) == doctest::Approx(2).epsilon(1e-8));
    // Directed chain (nilpotent) of length 5.
    Matrix chain(5, 5);
    for (std::size_t i = 0; i + 1 < 5; ++i) chain(i + 1, i) = 1.0;
    CHECK(spectral_radius(chain) < 1e-8);
    // Rotation-scaling block, eigenvalues 2(cos t +- i sin t).
    const double c = 2 * std::cos(0.7), s = 2 * std::sin(0.7);
    CHECK(spectral_radius(Matrix{{c, -s}, {s, c}}) == doctest::Approx(2).epsilon(1e-8));
}

TEST_CASE("spectral_radius homogeneity") {
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> u(0, 1);
    for (int trial = 0; trial < 10; ++trial) {
        Matrix w(6, 6);
        for (double& v : w.entries()) v = u(gen);  // positive: Perron root dominates
        const double r = spectral_radius(w);
        for (double c : {0.5, -3.0}) CHECK(spectral_radius(c * w) == doctest::Approx(std::abs(c) * r).epsilon(1e-8));
    }
}

TEST_CASE("operator_norm_2 examples") {
    CHECK(operator_norm_2(Matrix{{3, 0}, {0, -5}}) == doctest::Approx(5));
    CHECK(operator_norm_2(Matrix(3, 3)) == 0.0);
    CHECK(operator_norm_2(Matrix{{0, 2}, {0, 0}}) == doctest::Approx(2));
    CHECK(operator_norm_2(Matrix{{3, 4}}) == doctest::Approx(5));
}

TEST_CASE("expm_apply examples") {
    Vector v{1.0, -2.0};
    CHECK(expm_apply(Matrix(2, 2), v, 3.0) == v);
    CHECK(expm_apply(Matrix{{-1}}, Vector{1.0}, 1.0)[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));

    std::mt19937_64 gen(21);
    for (int trial = 0; trial < 10; ++trial) {
        Matrix a = random_matrix(gen, 4) - 3.0 * Matrix::identity(4);
        Vector x0{1.0, 0.5, -0.25, 2.0};
        const auto got = expm_apply(a, x0, 1.0);
        const auto want = taylor_oracle(a, x0, 1.0);
        long double err = 0, nrm = 0;
        for (std::size_t i = 0; i < 4; ++i) {
            err += (got[i] - want[i]) * (got[i] - want[i]);
            nrm += want[i] * want[i];
        }
        CHECK(std::sqrt(static_cast<double>(err / nrm)) <= 1e-10);
    }
    CHECK_THROWS_AS(expm_apply(Matrix{{1000}}, Vector{1.0}, 10.0), RangeError);
}

TEST_CASE("energy inequality at t = 0 by finite differences") {
    std::mt19937_64 gen(13);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix a = random_matrix(gen, 5);
        Vector v(5);
        std::normal_distribution<double> nd;
        for (double& x : v) x = nd(gen);
        const double h = 1e-6;
        const double deriv = (norm2(expm_apply(a, v, h)) - norm2(v)) / h;
        const double bound = log_norm_2(a) * norm2(v);
        CHECK(deriv <= bound + 1e-4 * std::max(1.0, std::abs(bound)));
    }
}

#pragma once

// Dense linear algebra for the small matrices used throughout the toolkit
// (at most a few hundred rows). Storage is row-major std::vector<double>.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

namespace tailshape {

using Vector = std::vector<double>;

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix diagonal(std::span<const double> diag);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool is_square() const noexcept { return rows_ == cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> entries() const noexcept { return data_; }
    std::span<double> entries() noexcept { return data_; }

    Matrix transpose() const;
    bool all_finite() const;

    /// out = this * x
    void apply(std::span<const double> x, std::span<double> out) const;
    Vector apply(std::span<const double> x) const;

    Matrix& operator+=(const Matrix& other);
    Matrix& operator-=(const Matrix& other);
    Matrix& operator*=(double s);

    friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
    friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
    friend Matrix operator*(Matrix a, double s) { return a *= s; }
    friend Matrix operator*(double s, Matrix a) { return a *= s; }
    friend Matrix operator*(const Matrix& a, const Matrix& b);
    friend bool operator==(const Matrix& a, const Matrix& b) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

double norm2(std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);
double frobenius_norm(const Matrix& a);

/// (A + A^T) / 2
Matrix symmetric_part(const Matrix& a);

struct SymmetricEigResult {
    Vector eigenvalues;   // descending
    Matrix eigenvectors;  // column j pairs with eigenvalues[j]
};

/// Cyclic Jacobi eigensolver. Input must be symmetric (only the upper
/// triangle is trusted). Runs until the off-diagonal Frobenius norm is at
/// most 1e-12 * ||S||_F.
SymmetricEigResult symmetric_eig(const Matrix& s);

/// Euclidean logarithmic norm: lambda_max((A + A^T) / 2).
double log_norm_2(const Matrix& a);

/// Top eigenpair of the symmetric part. Within a (near-)degenerate top
/// eigenspace (gap < 1e-9) the vector with the largest first coordinate is
/// chosen; the sign is then fixed so the largest-magnitude entry is positive.
std::pair<double, Vector> top_symmetric_eigpair(const Matrix& a);

/// max |eigenvalue|. Only used for the regime-wise stability margin check.
double spectral_radius(const Matrix& w);

/// Largest singular value.
double operator_norm_2(const Matrix& a);

/// e^{A t} v by scaling and squaring of a truncated Taylor series.
Vector expm_apply(const Matrix& a, std::span<const double> v, double t);

}  // namespace tailshape

#pragma once

#include <cstddef>

#include "tailshape/linalg.hpp"

namespace tailshape {

struct NnlsResult {
    Vector x;
    double residual_norm = 0.0;
    /// max over k of the KKT violation: |grad_k| on the passive set,
    /// max(0, -grad_k) on the active set, with grad = A^T (A x - b).
    double kkt_violation = 0.0;
    /// The passive-set design columns were numerically rank deficient, so the
    /// minimizer need not be unique.
    bool non_unique = false;
    std::size_t iterations = 0;
};

/// Lawson-Hanson active-set solution of min ||A x - b||_2 subject to x >= 0.
/// Subproblems are solved by Householder QR.
NnlsResult nnls(const Matrix& a, std::span<const double> b, std::size_t max_outer = 0);

/// Unconstrained least squares by Householder QR with column pivoting.
/// Returns the minimum-residual solution; dependent columns get zero weight.
Vector least_squares(const Matrix& a, std::span<const double> b, bool* rank_deficient = nullptr);

}  // namespace tailshape

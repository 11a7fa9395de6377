#pragma once

#include <Eigen/Dense>

#include <functional>
#include <utility>
#include <vector>

#include "lossdisc/errors.hpp"

namespace lossdisc {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Relative symmetry tolerance used before Cholesky factorizations.
inline constexpr double kSymmetryTol = 1e-10;

/// Maximum recursion depth of the adaptive Simpson quadrature.
inline constexpr int kQuadMaxDepth = 40;

/// Solves a * X = b for symmetric positive-definite `a` via a Cholesky
/// factorization (the matrix is symmetrized as (a + a^T)/2 first to absorb
/// rounding). Never forms an explicit inverse.
///
/// Throws NotSpd if `a` is asymmetric beyond tolerance or a non-positive
/// pivot is encountered, DimensionMismatch on incompatible shapes.
Mat spd_solve(const Mat& a, const Mat& b);

/// Inverse of A + u v^T given A^{-1}, via the rank-one update identity
///   (A + u v^T)^{-1} = A^{-1} - A^{-1} u v^T A^{-1} / (1 + v^T A^{-1} u).
/// Throws SingularUpdate when |1 + v^T A^{-1} u| <= 1e-12.
Mat sherman_morrison_inverse(const Mat& a_inv, const Vec& u, const Vec& v);

/// Adaptive Simpson quadrature of f on [lo, hi] with absolute error target
/// `tol`. Throws NonConvergence when an interval still fails its local error
/// test at depth kQuadMaxDepth, or when f returns a non-finite value.
double integrate_1d(const std::function<double(double)>& f, double lo,
                    double hi, double tol);

/// Weighted mean and covariance of a point cloud. Weights are normalized
/// internally; the covariance uses the population convention (divisor = sum
/// of weights, not sum - 1).
std::pair<Vec, Mat> weighted_moments(const std::vector<Vec>& points,
                                     const std::vector<double>& weights);

}  // namespace lossdisc

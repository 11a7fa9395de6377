#include "lossdisc/numerics.hpp"

#include <cmath>
#include <limits>

namespace lossdisc {

namespace {

double max_abs(const Mat& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace

Mat spd_solve(const Mat& a, const Mat& b) {
  if (a.rows() != a.cols()) {
    throw DimensionMismatch("spd_solve: matrix is not square");
  }
  if (a.cols() != b.rows()) {
    throw DimensionMismatch("spd_solve: a.cols() != b.rows()");
  }
  const double scale = std::max(1.0, max_abs(a));
  if (max_abs(a - a.transpose()) > kSymmetryTol * scale) {
    throw NotSpd("spd_solve: matrix is asymmetric beyond tolerance");
  }
  const Mat sym = 0.5 * (a + a.transpose());
  Eigen::LLT<Mat> llt(sym);
  if (llt.info() != Eigen::Success) {
    throw NotSpd("spd_solve: Cholesky hit a non-positive pivot");
  }
  return llt.solve(b);
}

Mat sherman_morrison_inverse(const Mat& a_inv, const Vec& u, const Vec& v) {
  if (a_inv.rows() != a_inv.cols()) {
    throw DimensionMismatch("sherman_morrison_inverse: matrix is not square");
  }
  if (u.size() != a_inv.rows() || v.size() != a_inv.rows()) {
    throw DimensionMismatch("sherman_morrison_inverse: vector length mismatch");
  }
  const Vec a_inv_u = a_inv * u;
  const double denom = 1.0 + v.dot(a_inv_u);
  if (std::abs(denom) <= 1e-12) {
    throw SingularUpdate("sherman_morrison_inverse: 1 + v^T A^-1 u is zero");
  }
  return a_inv - (a_inv_u * (v.transpose() * a_inv)) / denom;
}

namespace {

double eval_checked(const std::function<double(double)>& f, double x) {
  const double y = f(x);
  if (!std::isfinite(y)) {
    throw NonConvergence("integrate_1d: integrand is non-finite");
  }
  return y;
}

// One level of adaptive Simpson. `whole` is the Simpson estimate on [a, b]
// with midpoint value fm.
double simpson_recurse(const std::function<double(double)>& f, double a,
                       double b, double fa, double fm, double fb, double whole,
                       double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = eval_checked(f, lm);
  const double frm = eval_checked(f, rm);
  const double h = b - a;
  const double left = h / 12.0 * (fa + 4.0 * flm + fm);
  const double right = h / 12.0 * (fm + 4.0 * frm + fb);
  const double err = left + right - whole;
  if (std::abs(err) <= 15.0 * tol) {
    return left + right + err / 15.0;
  }
  if (depth <= 0) {
    throw NonConvergence("integrate_1d: subdivision budget exhausted");
  }
  return simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

double integrate_1d(const std::function<double(double)>& f, double lo,
                    double hi, double tol) {
  if (!(lo < hi)) {
    throw InvalidInput("integrate_1d: requires lo < hi");
  }
  if (!(tol > 0.0)) {
    throw InvalidInput("integrate_1d: requires tol > 0");
  }
  const double fa = eval_checked(f, lo);
  const double fb = eval_checked(f, hi);
  const double m = 0.5 * (lo + hi);
  const double fm = eval_checked(f, m);
  const double whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_recurse(f, lo, hi, fa, fm, fb, whole, tol, kQuadMaxDepth);
}

std::pair<Vec, Mat> weighted_moments(const std::vector<Vec>& points,
                                     const std::vector<double>& weights) {
  if (points.empty()) {
    throw EmptyInput("weighted_moments: no points");
  }
  if (points.size() != weights.size()) {
    throw DimensionMismatch("weighted_moments: points/weights size mismatch");
  }
  const Eigen::Index d = points.front().size();
  double wsum = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != d) {
      throw DimensionMismatch("weighted_moments: inconsistent point dimension");
    }
    if (weights[i] < 0.0) {
      throw NegativeWeight("weighted_moments: negative weight");
    }
    wsum += weights[i];
  }
  if (!(wsum > 0.0)) {
    throw EmptyInput("weighted_moments: weights sum to zero");
  }

  Vec mean = Vec::Zero(d);
  for (std::size_t i = 0; i < points.size(); ++i) {
    mean += weights[i] * points[i];
  }
  mean /= wsum;

  Mat cov = Mat::Zero(d, d);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Vec c = points[i] - mean;
    cov += weights[i] * (c * c.transpose());
  }
  cov /= wsum;
  return {mean, cov};
}

}  // namespace lossdisc

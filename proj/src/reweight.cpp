#include "lossdisc/reweight.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace lossdisc {

LpProblem build_reweight_lp(const Dataset& ds) {
  const Eigen::Index n = ds.n();
  const Eigen::Index d = ds.dim();
  std::vector<Eigen::Index> rows0, rows1;
  for (Eigen::Index i = 0; i < n; ++i) {
    (ds.group[static_cast<std::size_t>(i)] == 1 ? rows1 : rows0).push_back(i);
  }
  if (rows0.empty() || rows1.empty()) {
    throw GroupEmpty("build_reweight_lp: a group has no rows");
  }

  LpProblem lp;
  lp.objective = Vec::Zero(n);
  lp.eq_matrix = Mat::Zero(d + 2, n);
  lp.eq_rhs = Vec::Zero(d + 2);
  lp.lower = Vec::Zero(n);
  lp.upper = Vec::Ones(n);

  Eigen::Index col = 0;
  for (const Eigen::Index r : rows0) {
    lp.objective(col) = 1.0;
    lp.eq_matrix.block(0, col, d, 1) = ds.features.row(r).transpose();
    lp.eq_matrix(d, col) = ds.target(r);
    lp.eq_matrix(d + 1, col) = 1.0;
    ++col;
  }
  for (const Eigen::Index r : rows1) {
    lp.eq_matrix.block(0, col, d, 1) = -ds.features.row(r).transpose();
    lp.eq_matrix(d, col) = -ds.target(r);
    lp.eq_matrix(d + 1, col) = -1.0;
    ++col;
  }
  return lp;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kCostTol = 1e-9;
constexpr int kRefactorEvery = 50;

enum class VarState { Basic, AtLower, AtUpper };

// Bounded-variable primal simplex over the augmented system [A | I_art].
class Simplex {
 public:
  explicit Simplex(const LpProblem& lp)
      : m_(lp.num_rows()), n_(lp.num_vars()), total_(n_ + m_) {
    a_.resize(m_, total_);
    a_.leftCols(n_) = lp.eq_matrix;
    a_.rightCols(m_).setZero();
    b_ = lp.eq_rhs;
    lower_.resize(total_);
    upper_.resize(total_);
    lower_.head(n_) = lp.lower;
    upper_.head(n_) = lp.upper;
    cost_ = Vec::Zero(total_);
    state_.assign(static_cast<std::size_t>(total_), VarState::AtLower);
    value_ = Vec::Zero(total_);
  }

  LpSolution run(const LpProblem& lp) {
    // Start every structural variable at a finite bound. Variables free on
    // both sides are rejected: the entering rule below only leaves a bound
    // in one direction.
    for (Eigen::Index j = 0; j < n_; ++j) {
      if (std::isfinite(lower_(j))) {
        state_[static_cast<std::size_t>(j)] = VarState::AtLower;
        value_(j) = lower_(j);
      } else if (std::isfinite(upper_(j))) {
        state_[static_cast<std::size_t>(j)] = VarState::AtUpper;
        value_(j) = upper_(j);
      } else {
        throw InvalidInput(
            "simplex_solve: variables free on both sides are not supported");
      }
    }
    // Artificial columns absorb the residual with nonnegative values.
    Vec resid = b_;
    for (Eigen::Index j = 0; j < n_; ++j) {
      resid -= a_.col(j) * value_(j);
    }
    basis_.resize(static_cast<std::size_t>(m_));
    for (Eigen::Index i = 0; i < m_; ++i) {
      const Eigen::Index art = n_ + i;
      a_(i, art) = resid(i) >= 0.0 ? 1.0 : -1.0;
      lower_(art) = 0.0;
      upper_(art) = kInf;
      value_(art) = std::abs(resid(i));
      basis_[static_cast<std::size_t>(i)] = art;
      state_[static_cast<std::size_t>(art)] = VarState::Basic;
      cost_(art) = -1.0;  // phase 1: maximize -sum(artificials)
    }
    refactor();

    if (!iterate()) {
      throw IterationLimit("simplex_solve: phase 1 exceeded iteration budget");
    }
    double art_mass = 0.0;
    for (Eigen::Index i = 0; i < m_; ++i) {
      art_mass += value_(n_ + i);
    }
    LpSolution out;
    if (art_mass > kLpFeasibilityTol) {
      out.status = LpStatus::Infeasible;
      out.weights = Vec::Zero(n_);
      return out;
    }

    // Phase 2: real objective, artificials pinned to zero.
    cost_.setZero();
    cost_.head(n_) = lp.objective;
    for (Eigen::Index i = 0; i < m_; ++i) {
      upper_(n_ + i) = 0.0;
      value_(n_ + i) = std::min(value_(n_ + i), 0.0);
    }
    if (!iterate()) {
      throw IterationLimit("simplex_solve: phase 2 exceeded iteration budget");
    }
    if (unbounded_) {
      out.status = LpStatus::Unbounded;
      out.weights = Vec::Zero(n_);
      return out;
    }

    recompute_basic_values();
    Vec x = value_.head(n_);
    for (Eigen::Index j = 0; j < n_; ++j) {
      if (std::isfinite(lp.lower(j))) x(j) = std::max(x(j), lp.lower(j));
      if (std::isfinite(lp.upper(j))) x(j) = std::min(x(j), lp.upper(j));
    }
    const double eq_err = (lp.eq_matrix * x - lp.eq_rhs).cwiseAbs().maxCoeff();
    if (eq_err > kLpFeasibilityTol * (1.0 + b_.cwiseAbs().maxCoeff())) {
      throw IterationLimit("simplex_solve: solution drifted out of feasibility");
    }
    out.status = LpStatus::Optimal;
    out.weights = x;
    out.objective_value = lp.objective.dot(x);
    return out;
  }

 private:
  void refactor() {
    Mat basis_mat(m_, m_);
    for (Eigen::Index i = 0; i < m_; ++i) {
      basis_mat.col(i) = a_.col(basis_[static_cast<std::size_t>(i)]);
    }
    binv_ = basis_mat.partialPivLu().inverse();
    recompute_basic_values();
    pivots_since_refactor_ = 0;
  }

  void recompute_basic_values() {
    Vec rhs = b_;
    for (Eigen::Index j = 0; j < total_; ++j) {
      if (state_[static_cast<std::size_t>(j)] != VarState::Basic) {
        rhs -= a_.col(j) * value_(j);
      }
    }
    const Vec xb = binv_ * rhs;
    for (Eigen::Index i = 0; i < m_; ++i) {
      value_(basis_[static_cast<std::size_t>(i)]) = xb(i);
    }
  }

  // Returns false on iteration-budget exhaustion; sets unbounded_ when a
  // direction of unbounded improvement is found.
  bool iterate() {
    unbounded_ = false;
    const long max_iters = 2000 + 200 * static_cast<long>(total_);
    for (long iter = 0; iter < max_iters; ++iter) {
      // Pricing: y = B^{-T} c_B, reduced cost d_j = c_j - y^T A_j.
      Vec cb(m_);
      for (Eigen::Index i = 0; i < m_; ++i) {
        cb(i) = cost_(basis_[static_cast<std::size_t>(i)]);
      }
      const Vec y = binv_.transpose() * cb;

      // Bland: smallest-index improving nonbasic variable.
      Eigen::Index enter = -1;
      int direction = 0;
      for (Eigen::Index j = 0; j < total_; ++j) {
        const auto st = state_[static_cast<std::size_t>(j)];
        if (st == VarState::Basic || upper_(j) - lower_(j) <= 0.0) {
          continue;
        }
        const double dj = cost_(j) - y.dot(a_.col(j));
        if (st == VarState::AtLower && dj > kCostTol) {
          enter = j;
          direction = 1;
          break;
        }
        if (st == VarState::AtUpper && dj < -kCostTol) {
          enter = j;
          direction = -1;
          break;
        }
      }
      if (enter < 0) {
        return true;  // optimal for the current cost vector
      }

      const Vec w = binv_ * a_.col(enter);
      const double sigma = static_cast<double>(direction);

      // Ratio test: largest step the entering variable can take.
      double step = upper_(enter) - lower_(enter);  // its own opposite bound
      Eigen::Index leave_row = -1;
      int leave_to_upper = 0;
      for (Eigen::Index i = 0; i < m_; ++i) {
        const double rate = sigma * w(i);
        const Eigen::Index bi = basis_[static_cast<std::size_t>(i)];
        double limit = kInf;
        int to_upper = 0;
        if (rate > kLpPivotTol) {
          if (std::isfinite(lower_(bi))) {
            limit = (value_(bi) - lower_(bi)) / rate;
          }
        } else if (rate < -kLpPivotTol) {
          if (std::isfinite(upper_(bi))) {
            limit = (upper_(bi) - value_(bi)) / (-rate);
            to_upper = 1;
          }
        } else {
          continue;
        }
        limit = std::max(limit, 0.0);
        // Bland tie-break: strictly smaller limit, or equal limit with a
        // smaller basic variable index.
        if (limit < step - kLpPivotTol ||
            (leave_row >= 0 && limit < step + kLpPivotTol &&
             bi < basis_[static_cast<std::size_t>(leave_row)])) {
          step = limit;
          leave_row = i;
          leave_to_upper = to_upper;
        } else if (leave_row < 0 && limit <= step) {
          step = limit;
          leave_row = i;
          leave_to_upper = to_upper;
        }
      }

      if (!std::isfinite(step)) {
        unbounded_ = true;
        return true;
      }

      // Move the entering variable and update basic values.
      for (Eigen::Index i = 0; i < m_; ++i) {
        value_(basis_[static_cast<std::size_t>(i)]) -= step * sigma * w(i);
      }
      value_(enter) += sigma * step;

      if (leave_row < 0) {
        // Bound flip: entering traveled to its opposite bound.
        state_[static_cast<std::size_t>(enter)] =
            direction > 0 ? VarState::AtUpper : VarState::AtLower;
        value_(enter) = direction > 0 ? upper_(enter) : lower_(enter);
        continue;
      }

      const Eigen::Index leaving = basis_[static_cast<std::size_t>(leave_row)];
      state_[static_cast<std::size_t>(leaving)] =
          leave_to_upper ? VarState::AtUpper : VarState::AtLower;
      value_(leaving) = leave_to_upper ? upper_(leaving) : lower_(leaving);
      basis_[static_cast<std::size_t>(leave_row)] = enter;
      state_[static_cast<std::size_t>(enter)] = VarState::Basic;

      // Product-form update of B^{-1}.
      const double pivot = w(leave_row);
      if (std::abs(pivot) <= kLpPivotTol) {
        refactor();
        continue;
      }
      const Vec pivot_row = binv_.row(leave_row) / pivot;
      for (Eigen::Index i = 0; i < m_; ++i) {
        if (i != leave_row) {
          binv_.row(i) -= w(i) * pivot_row.transpose();
        }
      }
      binv_.row(leave_row) = pivot_row.transpose();

      if (++pivots_since_refactor_ >= kRefactorEvery) {
        refactor();
      }
    }
    return false;
  }

  Eigen::Index m_, n_, total_;
  Mat a_;
  Vec b_, lower_, upper_, cost_, value_;
  std::vector<Eigen::Index> basis_;
  std::vector<VarState> state_;
  Mat binv_;
  int pivots_since_refactor_ = 0;
  bool unbounded_ = false;
};

}  // namespace

LpSolution simplex_solve(const LpProblem& lp) {
  const Eigen::Index n = lp.num_vars();
  if (lp.lower.size() != n || lp.upper.size() != n ||
      lp.eq_matrix.cols() != n || lp.eq_rhs.size() != lp.eq_matrix.rows()) {
    throw DimensionMismatch("simplex_solve: malformed problem");
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    if (lp.lower(j) > lp.upper(j)) {
      throw InvalidInput("simplex_solve: lower bound exceeds upper bound");
    }
  }
  if (lp.num_rows() == 0) {
    // Pure box problem: each variable goes to whichever finite bound its
    // objective coefficient prefers.
    LpSolution out;
    out.weights = Vec::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double c = lp.objective(j);
      const double best = c >= 0.0 ? lp.upper(j) : lp.lower(j);
      if (!std::isfinite(best) && c != 0.0) {
        out.status = LpStatus::Unbounded;
        return out;
      }
      out.weights(j) = std::isfinite(best) ? best
                       : std::isfinite(lp.lower(j)) ? lp.lower(j)
                       : std::isfinite(lp.upper(j)) ? lp.upper(j)
                                                    : 0.0;
    }
    out.status = LpStatus::Optimal;
    out.objective_value = lp.objective.dot(out.weights);
    return out;
  }
  Simplex solver(lp);
  return solver.run(lp);
}

ReweightResult reweight_dataset(const Dataset& ds) {
  const LpProblem lp = build_reweight_lp(ds);
  ReweightResult out;
  out.solution = simplex_solve(lp);
  out.row_weights = Vec::Zero(ds.n());
  if (out.solution.status != LpStatus::Optimal) {
    return out;
  }
  Eigen::Index col = 0;
  for (int pass = 0; pass < 2; ++pass) {
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
      if ((ds.group[static_cast<std::size_t>(i)] == 1) == (pass == 1)) {
        out.row_weights(i) = out.solution.weights(col++);
      }
    }
  }
  return out;
}

Dataset resample_by_weights(const Dataset& ds, const Vec& weights,
                            std::size_t m, Seed seed) {
  const Eigen::Index n = ds.n();
  if (weights.size() != n) {
    throw DimensionMismatch("resample_by_weights: weight length mismatch");
  }
  if (weights.minCoeff() < 0.0) {
    throw NegativeWeight("resample_by_weights: negative weight");
  }
  // Per-group cumulative weights for inverse-CDF draws.
  std::vector<Eigen::Index> rows[2];
  std::vector<double> cum[2];
  double mass[2] = {0.0, 0.0};
  for (Eigen::Index i = 0; i < n; ++i) {
    const int g = ds.group[static_cast<std::size_t>(i)] == 1 ? 1 : 0;
    mass[g] += weights(i);
    rows[g].push_back(i);
    cum[g].push_back(mass[g]);
  }
  if (!(mass[0] > 0.0) || !(mass[1] > 0.0)) {
    throw ZeroMass("resample_by_weights: a group has zero total weight");
  }

  const double total = mass[0] + mass[1];
  std::size_t m0 = static_cast<std::size_t>(
      std::llround(static_cast<double>(m) * mass[0] / total));
  m0 = std::min(m0, m);
  const std::size_t counts[2] = {m0, m - m0};

  const Rng base{seed};
  std::vector<Eigen::Index> picked;
  picked.reserve(m);
  for (int g = 0; g < 2; ++g) {
    Rng rng = base.fork(static_cast<std::uint64_t>(g));
    for (std::size_t k = 0; k < counts[g]; ++k) {
      const double u = rng.uniform() * mass[g];
      const auto it = std::upper_bound(cum[g].begin(), cum[g].end(), u);
      const std::size_t pos = std::min(
          static_cast<std::size_t>(it - cum[g].begin()), rows[g].size() - 1);
      picked.push_back(rows[g][pos]);
    }
  }
  return subset(ds, picked);
}

std::string lp_debug_format(const LpProblem& lp) {
  std::ostringstream os;
  os << "maximize";
  for (Eigen::Index j = 0; j < lp.num_vars(); ++j) {
    os << ' ' << lp.objective(j);
  }
  os << "\nsubject to\n";
  for (Eigen::Index i = 0; i < lp.num_rows(); ++i) {
    os << "  row " << i << ':';
    for (Eigen::Index j = 0; j < lp.num_vars(); ++j) {
      os << ' ' << lp.eq_matrix(i, j);
    }
    os << " = " << lp.eq_rhs(i) << '\n';
  }
  os << "bounds\n";
  for (Eigen::Index j = 0; j < lp.num_vars(); ++j) {
    os << "  " << lp.lower(j) << " <= p" << j << " <= " << lp.upper(j) << '\n';
  }
  return os.str();
}

}  // namespace lossdisc

#pragma once

#include <string>

#include "lossdisc/empirical.hpp"

namespace lossdisc {

/// Bounded-variable linear program: maximize objective^T p subject to
/// eq_matrix * p = eq_rhs and lower <= p <= upper elementwise. Bounds may be
/// infinite on one side; every variable needs at least one finite bound.
struct LpProblem {
  Vec objective;
  Mat eq_matrix;
  Vec eq_rhs;
  Vec lower;
  Vec upper;

  Eigen::Index num_vars() const { return objective.size(); }
  Eigen::Index num_rows() const { return eq_matrix.rows(); }
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpSolution {
  Vec weights;
  double objective_value = 0.0;
  LpStatus status = LpStatus::Infeasible;
};

/// Simplex tolerances (also recorded in CLI output metadata).
inline constexpr double kLpFeasibilityTol = 1e-8;
inline constexpr double kLpPivotTol = 1e-10;

/// Reweighting LP: per-row weights p in [0,1], one block per group
/// (variables are the group-0 rows in dataset order followed by the group-1
/// rows), maximizing the retained mass of the first block subject to
///   sum_{g=0} p_i x_i = sum_{g=1} p_i x_i   (one row per feature),
///   sum_{g=0} p_i y_i = sum_{g=1} p_i y_i,
///   sum_{g=0} p_i     = sum_{g=1} p_i.
/// Under these constraints the weighted group means of every feature and of
/// the target coincide. Throws GroupEmpty if a group has no rows.
LpProblem build_reweight_lp(const Dataset& ds);

/// Dense bounded-variable primal simplex (two phases, Bland's rule for
/// anti-cycling, basis inverse refreshed every 50 pivots). Infeasible /
/// Unbounded statuses are reported honestly; numerical trouble raises
/// IterationLimit instead of being passed off as Optimal.
LpSolution simplex_solve(const LpProblem& lp);

/// Convenience wrapper: builds and solves the reweighting LP and scatters
/// the block-ordered LP weights back to dataset row order.
struct ReweightResult {
  LpSolution solution;
  Vec row_weights;  // length n, dataset row order
};

ReweightResult reweight_dataset(const Dataset& ds);

/// m rows drawn with replacement, each group's weights normalized
/// separately; the group counts in the output follow the original per-group
/// masses. Throws ZeroMass when a group's total weight vanishes.
Dataset resample_by_weights(const Dataset& ds, const Vec& weights,
                            std::size_t m, Seed seed);

/// Plain-text dump of an LP (objective, rows, bounds) for debugging.
std::string lp_debug_format(const LpProblem& lp);

}  // namespace lossdisc

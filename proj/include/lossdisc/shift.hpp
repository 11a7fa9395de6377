#pragma once

#include <utility>
#include <vector>

#include "lossdisc/discrepancy.hpp"

namespace lossdisc {

/// Covariate-shift study setting. Initial distribution: group 0 has latent
/// mean +mu, group 1 has -mu, both with covariance sigma and weight 1/2.
/// Shifted distribution: both groups have mean mu (the group gap closes).
/// Feature noise is Gaussian with covariance noise_cov throughout.
struct ShiftScenario {
  Vec mu;
  Mat sigma;
  Mat noise_cov;
  TrueLinearModel model;
};

/// The initial two-group population of the scenario.
PopulationSpec initial_population(const ShiftScenario& sc);

/// The shifted population (identical group means).
PopulationSpec shifted_population(const ShiftScenario& sc);

/// Bracket constants for the residual discrepancy at mixture weight t:
///   c1 = ((Sigma + Sigma_u)^{-1} Sigma_u beta)^T (2 mu),
///   c2 = ((Sigma + Sigma_u)^{-1} mu mu^T (Sigma + Sigma_u)^{-1}
///         Sigma_u beta)^T (2 mu),
/// giving t (c1 - |c2|) <= SLD <= t (c1 + |c2|).
std::pair<double, double> shift_constants(const ShiftScenario& sc);

struct MixtureSld {
  double value = 0.0;  // exact SLD(with-group, residual) on the shifted test
  double lower = 0.0;
  double upper = 0.0;
};

/// Exact with-group residual SLD when training on the t-mixture of initial
/// and shifted distributions and testing on the shifted one, bracketed by
/// the constants above. On the shifted test distribution the group means
/// coincide, so this SLD equals the CLD. Raises BoundViolation if the exact
/// value escapes the bracket beyond 1e-9 (that indicates a bug, not data).
MixtureSld sld_at_mixture(const ShiftScenario& sc, double t);

/// Discrepancy decay under batch accumulation: entry K uses mixture weight
/// t = 1/(K+1), i.e. one initial batch diluted by K shifted batches.
struct PersistenceCurve {
  struct Entry {
    double t = 0.0;
    int k = 0;
    double sld_with_group = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double sld_no_group = 0.0;  // identically zero: the test gap vanishes
  };
  std::vector<Entry> entries;
};

PersistenceCurve persistence_curve(const ShiftScenario& sc, int max_k);

}  // namespace lossdisc

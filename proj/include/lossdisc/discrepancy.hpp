#pragma once

#include <utility>
#include <vector>

#include "lossdisc/estimators.hpp"

namespace lossdisc {

/// Whether a report's numbers come from closed forms or from data.
enum class Source { Analytic, Empirical };

/// Statistical (SLD) and counterfactual (CLD) loss discrepancies for the
/// residual and squared-error losses. SLD is the absolute difference of
/// expected loss between the groups; CLD is the expected absolute loss
/// difference between an individual and its group-flipped counterfactual at
/// the same latent features. All four values are nonnegative by definition.
///
/// signed_sld_res is a diagnostic companion to sld_res: positive when group 1
/// bears the larger residual (is underestimated relative to group 0).
struct DiscrepancyReport {
  double sld_res = 0.0;
  double sld_sq = 0.0;
  double cld_res = 0.0;
  double cld_sq = 0.0;
  Mode mode = Mode::NoGroup;
  Source source = Source::Analytic;
  double signed_sld_res = 0.0;
};

/// Closed-form discrepancies of the no-group least squares predictor. With
/// q = Lambda beta:
///   CLD_res = CLD_sq = 0 (the predictor never sees g),
///   SLD_res = |q^T dmu|,
///   SLD_sq  = |q^T dSigma q - (P1 - P0) (q^T dmu)^2|.
DiscrepancyReport analytic_report_no_group(const PopulationSpec& pop);

/// Closed-form discrepancies of the with-group least squares predictor. With
/// q = Lambda' beta:
///   SLD_res = 0 (per-group residual means vanish),
///   SLD_sq  = |q^T dSigma q|,
///   CLD_res = |q^T dmu|,
///   CLD_sq  = |q^T dmu| * E|q^T (2z - mu1 - mu0)|,
/// the expectation evaluated analytically over the Gaussian mixture of z
/// (folded-normal mean per component).
DiscrepancyReport analytic_report_with_group(const PopulationSpec& pop);

/// Group-conditional moment gaps of the observed pair (x, y), with second
/// moments centered at the *population* means:
///   delta_sigma_x = E[(x-mu_x)(x-mu_x)^T | g=1] - E[... | g=0], etc.
/// This centering is what makes the squared-error form below reduce to the
/// closed forms under independent noise.
struct GroupMomentGaps {
  Vec delta_mu_x;
  double delta_mu_y = 0.0;
  Mat delta_sigma_x;
  Vec delta_sigma_xy;
  double delta_sigma_y = 0.0;
};

/// The gaps above computed exactly from a PopulationSpec (x = z + u with
/// mean-zero noise independent of g).
GroupMomentGaps population_moment_gaps(const PopulationSpec& pop);

/// SLD of an arbitrary linear predictor under an arbitrary observation
/// function, given only observed-space moment gaps:
///   SLD_res = |beta_hat^T dmu_x - dmu_y|,
///   SLD_sq  = |dsigma_y + beta_hat^T dsigma_x beta_hat
///              - 2 beta_hat^T dsigma_xy|.
std::pair<double, double> general_noise_sld(const Vec& beta_hat,
                                            const GroupMomentGaps& gaps);

/// Limiting discrepancies as the noise covariance grows without bound,
/// expressed through the per-group moments of y alone.
DiscrepancyReport infinite_noise_report(const PopulationSpec& pop, Mode mode);

/// An individual in a finite-support population: its loss under each
/// counterfactual group treatment and its own group label / probability.
struct FiniteIndividual {
  int z_id = 0;
  int group = 0;
  double loss_g0 = 0.0;
  double loss_g1 = 0.0;
  double prob = 0.0;
};

struct FinitePopulation {
  std::vector<FiniteIndividual> individuals;
};

/// (SLD, CLD) on a finite support. SLD conditions each individual on its own
/// group treatment; CLD averages |loss_g0 - loss_g1| over all individuals.
/// The two notions are incomparable: either can be zero while the other is
/// not.
std::pair<double, double> finite_population_report(const FinitePopulation& fp);

/// Residual-loss discrepancies decomposed into train and test distributions
/// (the predictor is fit on `train`, discrepancy measured on `test`):
///   NoGroup:   SLD_res = |(Lambda_train beta)^T dmu_test|, CLD_res = 0.
///   WithGroup: CLD_res = |(Lambda'_train beta)^T dmu_train|,
///              SLD_res = |(Lambda'_train beta)^T (dmu_train - dmu_test)|.
/// The decomposition covers the residual loss only; the squared-error fields
/// of the returned report are left at zero.
DiscrepancyReport decomposed_residual_report(const PopulationSpec& train,
                                             const PopulationSpec& test,
                                             Mode mode);

/// E|N(mean, sd^2)| (folded-normal mean). Exposed for reuse by the
/// infinite-noise limits and tests.
double folded_normal_mean(double mean, double sd);

}  // namespace lossdisc

#pragma once

#include <functional>
#include <optional>
#include <utility>

#include "lossdisc/population.hpp"

namespace lossdisc {

/// Which observation function a predictor was fit against: features only
/// (NoGroup, x = z + u) or features plus the group indicator (WithGroup,
/// x = [z + u, g]).
enum class Mode { NoGroup, WithGroup };

/// A fitted linear predictor yhat = beta_hat^T x + beta_g * g + alpha_hat.
/// beta_g is present iff mode == WithGroup; NoGroup predictors evaluate with
/// an implicit group coefficient of zero so both modes share one path.
struct LinearPredictor {
  Vec beta_hat;
  double alpha_hat = 0.0;
  std::optional<double> beta_g;
  Mode mode = Mode::NoGroup;

  double group_coef() const { return beta_g.value_or(0.0); }

  double predict(const Eigen::Ref<const Vec>& x, int group) const {
    return beta_hat.dot(x) + group_coef() * static_cast<double>(group) + alpha_hat;
  }
};

/// Noise-to-signal ratio matrix: (Sigma + Sigma_u)^{-1} Sigma_u with Sigma
/// the pooled (no-group) or within-group latent covariance.
struct NoiseRatio {
  Mat lambda;
};

/// Lambda = (Sigma_z + Sigma_u)^{-1} Sigma_u, computed via spd_solve.
NoiseRatio lambda_no_group(const PopulationSpec& pop);

/// Lambda' = (Sigma_{z|g} + Sigma_u)^{-1} Sigma_u.
NoiseRatio lambda_with_group(const PopulationSpec& pop);

/// Population least squares of y on x = z + u:
///   beta_hat = (I - Lambda) beta,  alpha_hat = (Lambda beta)^T E[z] + alpha.
LinearPredictor fit_population_no_group(const PopulationSpec& pop);

/// Population least squares of y on [z + u, g]:
///   beta_hat = (I - Lambda') beta,
///   beta_g   = (Lambda' beta)^T (mu_1 - mu_0),
///   alpha_hat = (Lambda' beta)^T mu_0 + alpha.
LinearPredictor fit_population_with_group(const PopulationSpec& pop);

/// Limiting constant predictions as the noise covariance grows without
/// bound: E[y] for both groups under NoGroup, the per-group E[y|g] under
/// WithGroup. Returned as (prediction for g=0, prediction for g=1).
std::pair<double, double> infinite_noise_predictions(const PopulationSpec& pop,
                                                     Mode mode);

/// Population mean squared error of the no-group least squares predictor:
///   (Lambda beta)^T Sigma_z (Lambda beta)
///     + ((I - Lambda) beta)^T Sigma_u ((I - Lambda) beta).
double expected_squared_error_no_group(const PopulationSpec& pop);

/// Bayes-optimal prediction E[y | x] for a 1-D nonlinear model y = f(z) with
/// z ~ N(prior_mean, prior_var) and additive noise u ~ N(0, noise_var):
///
///   E[y|x] = Int f(z) P_z(z) P_u(x - z) dz / Int P_z(z) P_u(x - z) dz,
///
/// both integrals evaluated by integrate_1d on the interval covering +-8
/// posterior standard deviations (Gaussian tail mass below 1e-15).
double bayes_optimal_1d(const std::function<double(double)>& f,
                        double prior_mean, double prior_var, double noise_var,
                        double x);

}  // namespace lossdisc

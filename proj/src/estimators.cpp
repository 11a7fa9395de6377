#include "lossdisc/estimators.hpp"

#include <cmath>

namespace lossdisc {

NoiseRatio lambda_no_group(const PopulationSpec& pop) {
  return {spd_solve(pooled_cov(pop) + pop.noise.cov, pop.noise.cov)};
}

NoiseRatio lambda_with_group(const PopulationSpec& pop) {
  return {spd_solve(within_group_cov(pop) + pop.noise.cov, pop.noise.cov)};
}

LinearPredictor fit_population_no_group(const PopulationSpec& pop) {
  const Mat lambda = lambda_no_group(pop).lambda;
  const Vec lb = lambda * pop.model.beta;
  LinearPredictor p;
  p.mode = Mode::NoGroup;
  p.beta_hat = pop.model.beta - lb;
  p.alpha_hat = lb.dot(pooled_mean(pop)) + pop.model.alpha;
  return p;
}

LinearPredictor fit_population_with_group(const PopulationSpec& pop) {
  const Mat lambda = lambda_with_group(pop).lambda;
  const Vec lb = lambda * pop.model.beta;
  LinearPredictor p;
  p.mode = Mode::WithGroup;
  p.beta_hat = pop.model.beta - lb;
  p.beta_g = lb.dot(pop.group1.mean - pop.group0.mean);
  p.alpha_hat = lb.dot(pop.group0.mean) + pop.model.alpha;
  return p;
}

std::pair<double, double> infinite_noise_predictions(const PopulationSpec& pop,
                                                     Mode mode) {
  const TargetMoments y = target_moments(pop);
  if (mode == Mode::NoGroup) {
    return {y.mean, y.mean};
  }
  return {y.mean_g0, y.mean_g1};
}

double expected_squared_error_no_group(const PopulationSpec& pop) {
  const Mat lambda = lambda_no_group(pop).lambda;
  const Vec lb = lambda * pop.model.beta;
  const Vec bh = pop.model.beta - lb;
  return lb.dot(pooled_cov(pop) * lb) + bh.dot(pop.noise.cov * bh);
}

namespace {

double normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  return inv_sqrt_2pi / std::sqrt(var) * std::exp(-0.5 * d * d / var);
}

}  // namespace

double bayes_optimal_1d(const std::function<double(double)>& f,
                        double prior_mean, double prior_var, double noise_var,
                        double x) {
  if (!(prior_var > 0.0) || !(noise_var > 0.0)) {
    throw InvalidInput("bayes_optimal_1d: variances must be positive");
  }
  // The unnormalized posterior P_z(z) P_u(x - z) is proportional to a
  // Gaussian with these moments; truncate the integrals where its tails
  // drop below 1e-15.
  const double post_var = prior_var * noise_var / (prior_var + noise_var);
  const double post_mean =
      (noise_var * prior_mean + prior_var * x) / (prior_var + noise_var);
  const double sd = std::sqrt(post_var);
  const double lo = post_mean - 8.0 * sd;
  const double hi = post_mean + 8.0 * sd;

  const auto kernel = [&](double z) {
    return normal_pdf(z, prior_mean, prior_var) * normal_pdf(x - z, 0.0, noise_var);
  };
  // Evidence (exact for Gaussian prior/noise) sets the quadrature scale so
  // the tolerance stays meaningful far in the tails of x.
  const double evidence = normal_pdf(x, prior_mean, prior_var + noise_var);
  const double f_scale = std::max(1.0, std::abs(f(post_mean)));
  const double tol = 1e-12 * std::max(evidence, 1e-300);

  const double den = integrate_1d(kernel, lo, hi, tol);
  const double num = integrate_1d(
      [&](double z) { return f(z) * kernel(z); }, lo, hi, tol * f_scale);
  if (den <= 0.0) {
    throw NonConvergence("bayes_optimal_1d: vanishing posterior mass");
  }
  return num / den;
}

}  // namespace lossdisc

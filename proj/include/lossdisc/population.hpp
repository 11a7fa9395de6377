#pragma once

#include "lossdisc/numerics.hpp"

namespace lossdisc {

/// Distribution family of the additive feature noise. Closed forms depend on
/// the noise only through its covariance; the family matters for sampling.
enum class NoiseFamily { Gaussian, Laplace, Discrete };

/// One group's latent feature distribution: z | g ~ N(mean, cov), with
/// marginal group probability `weight`.
struct GroupSpec {
  Vec mean;
  Mat cov;
  double weight = 0.5;
};

/// True linear model y = beta^T z + alpha.
struct TrueLinearModel {
  Vec beta;
  double alpha = 0.0;
};

/// Mean-zero additive feature noise with covariance `cov`.
///
/// Laplace and Discrete families are sampled per-feature and therefore
/// require a diagonal covariance. The Discrete family carries a scalar
/// support/probability table (mean zero within 1e-12) that is rescaled per
/// feature to match the diagonal of `cov`.
struct NoiseSpec {
  Mat cov;
  NoiseFamily family = NoiseFamily::Gaussian;
  Vec discrete_support;
  Vec discrete_probs;
};

/// Two-group generative process: g ~ Bernoulli, z | g Gaussian,
/// y = beta^T z + alpha, observed x = z + u.
struct PopulationSpec {
  GroupSpec group0;
  GroupSpec group1;
  TrueLinearModel model;
  NoiseSpec noise;

  Eigen::Index dim() const { return group0.mean.size(); }

  /// Checks all construction invariants (dimensions, PSD covariances, group
  /// weights summing to 1 within 1e-12, noise family constraints). Throws
  /// InvalidSpec.
  void validate() const;
};

/// E[z] = P0 mu0 + P1 mu1.
Vec pooled_mean(const PopulationSpec& pop);

/// Var[z] by the law of total variance:
/// E[Var[z|g]] + Var[E[z|g]].
Mat pooled_cov(const PopulationSpec& pop);

/// Within-group covariance E[Var[z|g]] = P0 Var[z|g=0] + P1 Var[z|g=1].
Mat within_group_cov(const PopulationSpec& pop);

struct GroupDeltas {
  Vec delta_mu;     // E[z|g=1] - E[z|g=0]
  Mat delta_sigma;  // Var[z|g=1] - Var[z|g=0]
  double delta_p;   // P[g=1] - P[g=0]
};

GroupDeltas group_deltas(const PopulationSpec& pop);

/// Population whose per-group z distribution is the t-mixture of `initial`
/// (weight t) and `shifted` (weight 1-t). Group means are the mixture means
/// and group covariances the exact law-of-total-variance mixture moments.
/// The specs must share dimensions, model, noise, and group weights.
PopulationSpec mixture_population(const PopulationSpec& initial,
                                  const PopulationSpec& shifted, double t);

/// Per-group mean and variance of the target y (derived from the model and
/// the group z-moments). Used by the infinite-noise limits.
struct TargetMoments {
  double mean_g0, mean_g1;  // E[y | g]
  double var_g0, var_g1;    // Var[y | g]
  double mean, var;         // pooled
};

TargetMoments target_moments(const PopulationSpec& pop);

}  // namespace lossdisc

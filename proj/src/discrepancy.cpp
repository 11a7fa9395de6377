#include "lossdisc/discrepancy.hpp"

#include <cmath>

namespace lossdisc {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

double folded_normal_mean(double mean, double sd) {
  if (sd <= 0.0) {
    return std::abs(mean);
  }
  constexpr double sqrt_2_over_pi = 0.79788456080286535588;
  return sd * sqrt_2_over_pi * std::exp(-0.5 * mean * mean / (sd * sd)) +
         mean * (1.0 - 2.0 * normal_cdf(-mean / sd));
}

DiscrepancyReport analytic_report_no_group(const PopulationSpec& pop) {
  const Mat lambda = lambda_no_group(pop).lambda;
  const Vec q = lambda * pop.model.beta;
  const GroupDeltas d = group_deltas(pop);
  const double proj = q.dot(d.delta_mu);

  DiscrepancyReport r;
  r.mode = Mode::NoGroup;
  r.source = Source::Analytic;
  r.signed_sld_res = proj;
  r.sld_res = std::abs(proj);
  r.sld_sq = std::abs(q.dot(d.delta_sigma * q) - d.delta_p * proj * proj);
  r.cld_res = 0.0;
  r.cld_sq = 0.0;
  return r;
}

DiscrepancyReport analytic_report_with_group(const PopulationSpec& pop) {
  const Mat lambda = lambda_with_group(pop).lambda;
  const Vec q = lambda * pop.model.beta;
  const GroupDeltas d = group_deltas(pop);
  const double proj = q.dot(d.delta_mu);

  // E|q^T (2z - mu1 - mu0)| per mixture component: the projection is
  // N(-proj, 4 q^T Sigma_0 q) under g=0 and N(+proj, 4 q^T Sigma_1 q)
  // under g=1.
  const double s0 = 2.0 * std::sqrt(std::max(0.0, q.dot(pop.group0.cov * q)));
  const double s1 = 2.0 * std::sqrt(std::max(0.0, q.dot(pop.group1.cov * q)));
  const double abs_moment = pop.group0.weight * folded_normal_mean(-proj, s0) +
                            pop.group1.weight * folded_normal_mean(proj, s1);

  DiscrepancyReport r;
  r.mode = Mode::WithGroup;
  r.source = Source::Analytic;
  r.signed_sld_res = 0.0;
  r.sld_res = 0.0;
  r.sld_sq = std::abs(q.dot(d.delta_sigma * q));
  r.cld_res = std::abs(proj);
  r.cld_sq = std::abs(proj) * abs_moment;
  return r;
}

GroupMomentGaps population_moment_gaps(const PopulationSpec& pop) {
  const Vec mu = pooled_mean(pop);
  const TargetMoments y = target_moments(pop);
  const Vec& beta = pop.model.beta;

  const Vec c0 = pop.group0.mean - mu;
  const Vec c1 = pop.group1.mean - mu;
  const double y0 = y.mean_g0 - y.mean;
  const double y1 = y.mean_g1 - y.mean;

  GroupMomentGaps g;
  g.delta_mu_x = pop.group1.mean - pop.group0.mean;
  g.delta_mu_y = y.mean_g1 - y.mean_g0;
  // Noise terms cancel between groups everywhere except within Sigma_x,
  // where the same Sigma_u appears in both and cancels as well.
  g.delta_sigma_x = (pop.group1.cov + c1 * c1.transpose()) -
                    (pop.group0.cov + c0 * c0.transpose());
  g.delta_sigma_xy = (pop.group1.cov * beta + c1 * y1) -
                     (pop.group0.cov * beta + c0 * y0);
  g.delta_sigma_y = (y.var_g1 + y1 * y1) - (y.var_g0 + y0 * y0);
  return g;
}

std::pair<double, double> general_noise_sld(const Vec& beta_hat,
                                            const GroupMomentGaps& gaps) {
  if (beta_hat.size() != gaps.delta_mu_x.size() ||
      gaps.delta_sigma_x.rows() != beta_hat.size() ||
      gaps.delta_sigma_xy.size() != beta_hat.size()) {
    throw DimensionMismatch("general_noise_sld: dimensions disagree");
  }
  const double sld_res = std::abs(beta_hat.dot(gaps.delta_mu_x) - gaps.delta_mu_y);
  const double sld_sq =
      std::abs(gaps.delta_sigma_y + beta_hat.dot(gaps.delta_sigma_x * beta_hat) -
               2.0 * beta_hat.dot(gaps.delta_sigma_xy));
  return {sld_res, sld_sq};
}

DiscrepancyReport infinite_noise_report(const PopulationSpec& pop, Mode mode) {
  const TargetMoments y = target_moments(pop);
  const double dmu = y.mean_g1 - y.mean_g0;
  const double dvar = y.var_g1 - y.var_g0;
  const double dp = pop.group1.weight - pop.group0.weight;

  DiscrepancyReport r;
  r.mode = mode;
  r.source = Source::Analytic;
  if (mode == Mode::NoGroup) {
    r.signed_sld_res = dmu;
    r.sld_res = std::abs(dmu);
    r.sld_sq = std::abs(dvar - dp * dmu * dmu);
    return r;
  }
  // WithGroup: the limiting predictor is the per-group mean of y, so only the
  // y-moments enter. y - (mu_{y|0} + mu_{y|1})/2 is N(-dmu/2, var_{y|0})
  // under g=0 and N(+dmu/2, var_{y|1}) under g=1.
  const double abs_moment =
      pop.group0.weight *
          folded_normal_mean(-0.5 * dmu, std::sqrt(std::max(0.0, y.var_g0))) +
      pop.group1.weight *
          folded_normal_mean(0.5 * dmu, std::sqrt(std::max(0.0, y.var_g1)));
  r.signed_sld_res = 0.0;
  r.sld_res = 0.0;
  r.sld_sq = std::abs(dvar);
  r.cld_res = std::abs(dmu);
  r.cld_sq = 2.0 * std::abs(dmu) * abs_moment;
  return r;
}

std::pair<double, double> finite_population_report(const FinitePopulation& fp) {
  if (fp.individuals.empty()) {
    throw EmptyPopulation("finite_population_report: no individuals");
  }
  double total = 0.0, mass0 = 0.0, mass1 = 0.0;
  double own0 = 0.0, own1 = 0.0, cld = 0.0;
  for (const auto& ind : fp.individuals) {
    if (ind.prob < 0.0) {
      throw InvalidSpec("finite_population_report: negative probability");
    }
    if (ind.group != 0 && ind.group != 1) {
      throw InvalidSpec("finite_population_report: group labels must be 0/1");
    }
    total += ind.prob;
    cld += ind.prob * std::abs(ind.loss_g0 - ind.loss_g1);
    if (ind.group == 0) {
      mass0 += ind.prob;
      own0 += ind.prob * ind.loss_g0;
    } else {
      mass1 += ind.prob;
      own1 += ind.prob * ind.loss_g1;
    }
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InvalidSpec("finite_population_report: probabilities must sum to 1");
  }
  if (mass0 <= 0.0 || mass1 <= 0.0) {
    throw GroupEmpty("finite_population_report: a group has zero mass");
  }
  const double sld = std::abs(own1 / mass1 - own0 / mass0);
  return {sld, cld};
}

DiscrepancyReport decomposed_residual_report(const PopulationSpec& train,
                                             const PopulationSpec& test,
                                             Mode mode) {
  if (train.dim() != test.dim()) {
    throw DimensionMismatch("decomposed_residual_report: dimensions disagree");
  }
  if ((train.model.beta - test.model.beta).cwiseAbs().maxCoeff() > 1e-12 ||
      std::abs(train.model.alpha - test.model.alpha) > 1e-12 ||
      (train.noise.cov - test.noise.cov).cwiseAbs().maxCoeff() > 1e-12) {
    throw InvalidSpec("decomposed_residual_report: specs must share model and noise");
  }
  const Vec dmu_train = train.group1.mean - train.group0.mean;
  const Vec dmu_test = test.group1.mean - test.group0.mean;

  DiscrepancyReport r;
  r.mode = mode;
  r.source = Source::Analytic;
  if (mode == Mode::NoGroup) {
    const Vec q = lambda_no_group(train).lambda * train.model.beta;
    r.signed_sld_res = q.dot(dmu_test);
    r.sld_res = std::abs(r.signed_sld_res);
    return r;
  }
  const Vec q = lambda_with_group(train).lambda * train.model.beta;
  r.signed_sld_res = q.dot(dmu_train - dmu_test);
  r.sld_res = std::abs(r.signed_sld_res);
  r.cld_res = std::abs(q.dot(dmu_train));
  return r;
}

}  // namespace lossdisc

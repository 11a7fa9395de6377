#include "lossdisc/population.hpp"

#include <cmath>

namespace lossdisc {

namespace {

void check_psd(const Mat& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw InvalidSpec(std::string(what) + ": covariance is not square");
  }
  const double scale = std::max(1.0, m.size() ? m.cwiseAbs().maxCoeff() : 0.0);
  if (m.size() && (m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale) {
    throw InvalidSpec(std::string(what) + ": covariance is asymmetric");
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (m + m.transpose()));
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() < -1e-9 * scale) {
    throw InvalidSpec(std::string(what) + ": covariance is not PSD");
  }
}

bool is_diagonal(const Mat& m) {
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  Mat off = m;
  off.diagonal().setZero();
  return off.cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

}  // namespace

void PopulationSpec::validate() const {
  const Eigen::Index d = dim();
  if (d <= 0) {
    throw InvalidSpec("PopulationSpec: feature dimension must be positive");
  }
  if (group1.mean.size() != d || model.beta.size() != d ||
      group0.cov.rows() != d || group1.cov.rows() != d ||
      noise.cov.rows() != d) {
    throw InvalidSpec("PopulationSpec: dimensions disagree");
  }
  check_psd(group0.cov, "group0");
  check_psd(group1.cov, "group1");
  check_psd(noise.cov, "noise");
  if (!(group0.weight > 0.0 && group0.weight < 1.0) ||
      !(group1.weight > 0.0 && group1.weight < 1.0)) {
    throw InvalidSpec("PopulationSpec: group weights must lie in (0,1)");
  }
  if (std::abs(group0.weight + group1.weight - 1.0) > 1e-12) {
    throw InvalidSpec("PopulationSpec: group weights must sum to 1");
  }
  if (noise.family != NoiseFamily::Gaussian && !is_diagonal(noise.cov)) {
    throw InvalidSpec(
        "PopulationSpec: Laplace/Discrete noise requires a diagonal covariance");
  }
  if (noise.family == NoiseFamily::Discrete) {
    const auto& s = noise.discrete_support;
    const auto& p = noise.discrete_probs;
    if (s.size() == 0 || s.size() != p.size()) {
      throw InvalidSpec("PopulationSpec: discrete noise needs matching support/probs");
    }
    if (p.minCoeff() < 0.0 || std::abs(p.sum() - 1.0) > 1e-12) {
      throw InvalidSpec("PopulationSpec: discrete probs must be a distribution");
    }
    if (std::abs(s.dot(p)) > 1e-12) {
      throw InvalidSpec("PopulationSpec: discrete noise must have mean zero");
    }
  }
}

Vec pooled_mean(const PopulationSpec& pop) {
  return pop.group0.weight * pop.group0.mean + pop.group1.weight * pop.group1.mean;
}

Mat pooled_cov(const PopulationSpec& pop) {
  const Vec mu = pooled_mean(pop);
  const Vec c0 = pop.group0.mean - mu;
  const Vec c1 = pop.group1.mean - mu;
  return within_group_cov(pop) + pop.group0.weight * (c0 * c0.transpose()) +
         pop.group1.weight * (c1 * c1.transpose());
}

Mat within_group_cov(const PopulationSpec& pop) {
  return pop.group0.weight * pop.group0.cov + pop.group1.weight * pop.group1.cov;
}

GroupDeltas group_deltas(const PopulationSpec& pop) {
  return {pop.group1.mean - pop.group0.mean, pop.group1.cov - pop.group0.cov,
          pop.group1.weight - pop.group0.weight};
}

namespace {

GroupSpec mix_group(const GroupSpec& init, const GroupSpec& shift, double t) {
  GroupSpec out;
  out.weight = init.weight;
  out.mean = t * init.mean + (1.0 - t) * shift.mean;
  const Vec dm = init.mean - shift.mean;
  out.cov = t * init.cov + (1.0 - t) * shift.cov +
            t * (1.0 - t) * (dm * dm.transpose());
  return out;
}

}  // namespace

PopulationSpec mixture_population(const PopulationSpec& initial,
                                  const PopulationSpec& shifted, double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw InvalidInput("mixture_population: t must lie in [0,1]");
  }
  if (initial.dim() != shifted.dim()) {
    throw DimensionMismatch("mixture_population: dimensions disagree");
  }
  const auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
  if ((initial.model.beta - shifted.model.beta).cwiseAbs().maxCoeff() > 1e-12 ||
      !near(initial.model.alpha, shifted.model.alpha) ||
      (initial.noise.cov - shifted.noise.cov).cwiseAbs().maxCoeff() > 1e-12 ||
      !near(initial.group0.weight, shifted.group0.weight)) {
    throw InvalidSpec(
        "mixture_population: specs must share model, noise, and group weights");
  }
  PopulationSpec out = initial;
  out.group0 = mix_group(initial.group0, shifted.group0, t);
  out.group1 = mix_group(initial.group1, shifted.group1, t);
  return out;
}

TargetMoments target_moments(const PopulationSpec& pop) {
  const Vec& b = pop.model.beta;
  TargetMoments m;
  m.mean_g0 = b.dot(pop.group0.mean) + pop.model.alpha;
  m.mean_g1 = b.dot(pop.group1.mean) + pop.model.alpha;
  m.var_g0 = b.dot(pop.group0.cov * b);
  m.var_g1 = b.dot(pop.group1.cov * b);
  m.mean = pop.group0.weight * m.mean_g0 + pop.group1.weight * m.mean_g1;
  const double dm0 = m.mean_g0 - m.mean;
  const double dm1 = m.mean_g1 - m.mean;
  m.var = pop.group0.weight * (m.var_g0 + dm0 * dm0) +
          pop.group1.weight * (m.var_g1 + dm1 * dm1);
  return m;
}

}  // namespace lossdisc

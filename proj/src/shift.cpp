#include "lossdisc/shift.hpp"

#include <cmath>

namespace lossdisc {

namespace {

PopulationSpec scenario_population(const ShiftScenario& sc, const Vec& mean0,
                                   const Vec& mean1) {
  PopulationSpec pop;
  pop.group0 = {mean0, sc.sigma, 0.5};
  pop.group1 = {mean1, sc.sigma, 0.5};
  pop.model = sc.model;
  pop.noise = {sc.noise_cov, NoiseFamily::Gaussian, {}, {}};
  return pop;
}

}  // namespace

PopulationSpec initial_population(const ShiftScenario& sc) {
  return scenario_population(sc, sc.mu, -sc.mu);
}

PopulationSpec shifted_population(const ShiftScenario& sc) {
  return scenario_population(sc, sc.mu, sc.mu);
}

std::pair<double, double> shift_constants(const ShiftScenario& sc) {
  const Mat total = sc.sigma + sc.noise_cov;
  const Vec w = spd_solve(total, sc.noise_cov * sc.model.beta);
  const Vec m = spd_solve(total, sc.mu);
  const double c1 = 2.0 * sc.mu.dot(w);
  const double c2 = 2.0 * sc.mu.dot(m) * sc.mu.dot(w);
  return {c1, c2};
}

MixtureSld sld_at_mixture(const ShiftScenario& sc, double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw InvalidInput("sld_at_mixture: t must lie in [0,1]");
  }
  const PopulationSpec train =
      mixture_population(initial_population(sc), shifted_population(sc), t);
  const PopulationSpec test = shifted_population(sc);
  const DiscrepancyReport rep =
      decomposed_residual_report(train, test, Mode::WithGroup);

  const auto [c1, c2] = shift_constants(sc);
  MixtureSld out;
  out.value = rep.sld_res;
  out.lower = t * (c1 - std::abs(c2));
  out.upper = t * (c1 + std::abs(c2));
  if (out.value < out.lower - 1e-9 || out.value > out.upper + 1e-9) {
    throw BoundViolation("sld_at_mixture: exact value escaped the bracket");
  }
  return out;
}

PersistenceCurve persistence_curve(const ShiftScenario& sc, int max_k) {
  if (max_k < 1) {
    throw InvalidInput("persistence_curve: max_k must be >= 1");
  }
  const PopulationSpec init = initial_population(sc);
  const PopulationSpec shifted = shifted_population(sc);

  PersistenceCurve curve;
  curve.entries.reserve(static_cast<std::size_t>(max_k) + 1);
  for (int k = 0; k <= max_k; ++k) {
    const double t = 1.0 / (static_cast<double>(k) + 1.0);
    const MixtureSld s = sld_at_mixture(sc, t);
    const PopulationSpec train = mixture_population(init, shifted, t);
    const DiscrepancyReport no_group =
        decomposed_residual_report(train, shifted, Mode::NoGroup);
    curve.entries.push_back(
        {t, k, s.value, s.lower, s.upper, no_group.sld_res});
  }
  return curve;
}

}  // namespace lossdisc

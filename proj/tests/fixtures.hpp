#pragma once

#include "lossdisc/population.hpp"
#include "lossdisc/rng.hpp"

namespace lossdisc::testing {

// 1-D worked example used throughout the suite: majority group z ~ N(1, 0.5)
// with weight 2/3, minority group z ~ N(4, 1) with weight 1/3, y = z, unit
// Gaussian feature noise. Pooled variance 8/3; the no-group least squares
// fit is (8/11, 6/11) and the with-group fit (2/5, 9/5, 3/5).
inline PopulationSpec example_population(double noise_var = 1.0) {
  PopulationSpec pop;
  pop.group0 = {Vec::Constant(1, 1.0), Mat::Constant(1, 1, 0.5), 2.0 / 3.0};
  pop.group1 = {Vec::Constant(1, 4.0), Mat::Constant(1, 1, 1.0), 1.0 / 3.0};
  pop.model = {Vec::Constant(1, 1.0), 0.0};
  pop.noise = {Mat::Constant(1, 1, noise_var), NoiseFamily::Gaussian, {}, {}};
  return pop;
}

inline Mat random_spd(Rng& rng, int d, double scale = 1.0) {
  Mat a(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      a(i, j) = rng.normal();
    }
  }
  return scale * (a * a.transpose() / static_cast<double>(d) +
                  0.3 * Mat::Identity(d, d));
}

inline Vec random_vec(Rng& rng, int d, double lo, double hi) {
  Vec v(d);
  for (int i = 0; i < d; ++i) {
    v(i) = lo + (hi - lo) * rng.uniform();
  }
  return v;
}

// Seeded random two-group population of dimension d with Gaussian noise of a
// magnitude comparable to the latent signal.
inline PopulationSpec random_population(Rng& rng, int d) {
  PopulationSpec pop;
  pop.group0.mean = random_vec(rng, d, -2.0, 2.0);
  pop.group1.mean = random_vec(rng, d, -2.0, 2.0);
  pop.group0.cov = random_spd(rng, d);
  pop.group1.cov = random_spd(rng, d);
  pop.group0.weight = 0.25 + 0.5 * rng.uniform();
  pop.group1.weight = 1.0 - pop.group0.weight;
  pop.model.beta = random_vec(rng, d, -2.0, 2.0);
  pop.model.alpha = -1.0 + 2.0 * rng.uniform();
  pop.noise =
      {random_spd(rng, d, 0.3 + rng.uniform()), NoiseFamily::Gaussian, {}, {}};
  return pop;
}

}  // namespace lossdisc::testing

#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "lossdisc/empirical.hpp"
#include "lossdisc/population.hpp"

using namespace lossdisc;
using testing::example_population;

TEST_SUITE_BEGIN("population");

TEST_CASE("example fixture moments") {
  const PopulationSpec pop = example_population();
  CHECK(pooled_mean(pop)(0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(pooled_cov(pop)(0, 0) == doctest::Approx(8.0 / 3.0).epsilon(1e-14));
  CHECK(within_group_cov(pop)(0, 0) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-14));

  const GroupDeltas d = group_deltas(pop);
  CHECK(d.delta_mu(0) == doctest::Approx(3.0));
  CHECK(d.delta_sigma(0, 0) == doctest::Approx(0.5));
  CHECK(d.delta_p == doctest::Approx(-1.0 / 3.0));
}

TEST_CASE("pooled mean: symmetric groups cancel") {
  PopulationSpec pop = example_population();
  pop.group0 = {Vec::Constant(1, -1.5), Mat::Identity(1, 1), 0.5};
  pop.group1 = {Vec::Constant(1, 1.5), Mat::Identity(1, 1), 0.5};
  CHECK(std::abs(pooled_mean(pop)(0)) < 1e-15);
}

TEST_CASE("pooled mean: a near-unit-weight group dominates") {
  PopulationSpec pop = example_population();
  pop.group0.weight = 1.0 - 1e-12;
  pop.group1.weight = 1e-12;
  CHECK(pooled_mean(pop)(0) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("identical groups collapse the deltas") {
  PopulationSpec pop = example_population();
  pop.group1 = pop.group0;
  pop.group0.weight = pop.group1.weight = 0.5;
  CHECK(pooled_cov(pop)(0, 0) == doctest::Approx(pop.group0.cov(0, 0)));
  const GroupDeltas d = group_deltas(pop);
  CHECK(d.delta_mu.cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.delta_sigma.cwiseAbs().maxCoeff() == 0.0);
  CHECK(d.delta_p == 0.0);
}

TEST_CASE("swapping group labels negates the deltas") {
  lossdisc::Rng rng(42);
  for (int d : {1, 3}) {
    const PopulationSpec pop = testing::random_population(rng, d);
    PopulationSpec swapped = pop;
    std::swap(swapped.group0, swapped.group1);
    const GroupDeltas a = group_deltas(pop);
    const GroupDeltas b = group_deltas(swapped);
    CHECK((a.delta_mu + b.delta_mu).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((a.delta_sigma + b.delta_sigma).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(a.delta_p + b.delta_p == doctest::Approx(0.0));
  }
}

TEST_CASE("law of total variance holds exactly") {
  lossdisc::Rng rng(7);
  for (int d : {1, 2, 4}) {
    const PopulationSpec pop = testing::random_population(rng, d);
    const Vec mu = pooled_mean(pop);
    const Vec c0 = pop.group0.mean - mu;
    const Vec c1 = pop.group1.mean - mu;
    const Mat between = pop.group0.weight * c0 * c0.transpose() +
                        pop.group1.weight * c1 * c1.transpose();
    const Mat diff = pooled_cov(pop) - within_group_cov(pop) - between;
    CHECK(diff.cwiseAbs().maxCoeff() < 1e-12);

    // The between-group part is PSD.
    Eigen::SelfAdjointEigenSolver<Mat> es(between);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12);
  }
}

TEST_CASE("pooled covariance matches sampled covariance") {
  const PopulationSpec pop = example_population();
  const auto data = sample_dataset(pop, 1'000'000, Seed{909});
  const double mean = data.latent.features.col(0).mean();
  const double var =
      (data.latent.features.col(0).array() - mean).square().mean();
  CHECK(var == doctest::Approx(8.0 / 3.0).epsilon(0.01));
}

TEST_CASE("mixture endpoints return the inputs") {
  lossdisc::Rng rng(21);
  const PopulationSpec init = testing::random_population(rng, 2);
  PopulationSpec shifted = init;
  shifted.group0.mean = testing::random_vec(rng, 2, -1.0, 1.0);
  shifted.group1.mean = testing::random_vec(rng, 2, -1.0, 1.0);

  const PopulationSpec at1 = mixture_population(init, shifted, 1.0);
  CHECK((at1.group0.mean - init.group0.mean).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((at1.group1.cov - init.group1.cov).cwiseAbs().maxCoeff() < 1e-15);

  const PopulationSpec at0 = mixture_population(init, shifted, 0.0);
  CHECK((at0.group0.mean - shifted.group0.mean).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((at0.group1.cov - shifted.group1.cov).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("mixture covariance matches the rank-one inflation formula") {
  // Group 1 mixes N(-mu, Sigma) and N(+mu, Sigma): the t-mixture has
  // covariance Sigma + 4 t (1 - t) mu mu^T, so the within-group covariance
  // is Sigma + 2 t (1 - t) mu mu^T when group 0 does not move.
  const double mu = 1.0, sigma = 1.0;
  PopulationSpec init, shifted;
  init.group0 = {Vec::Constant(1, mu), Mat::Constant(1, 1, sigma), 0.5};
  init.group1 = {Vec::Constant(1, -mu), Mat::Constant(1, 1, sigma), 0.5};
  init.model = {Vec::Ones(1), 0.0};
  init.noise = {Mat::Identity(1, 1), NoiseFamily::Gaussian, {}, {}};
  shifted = init;
  shifted.group1.mean = Vec::Constant(1, mu);

  for (double t : {0.0, 0.25, 0.5, 0.9, 1.0}) {
    const PopulationSpec mix = mixture_population(init, shifted, t);
    CHECK(mix.group1.cov(0, 0) ==
          doctest::Approx(sigma + 4.0 * t * (1.0 - t) * mu * mu).epsilon(1e-13));
    CHECK(within_group_cov(mix)(0, 0) ==
          doctest::Approx(sigma + 2.0 * t * (1.0 - t) * mu * mu).epsilon(1e-13));
    // Means are affine in t.
    CHECK(mix.group1.mean(0) == doctest::Approx(t * (-mu) + (1.0 - t) * mu));
  }

  const PopulationSpec half = mixture_population(init, shifted, 0.5);
  CHECK(half.group1.cov(0, 0) == doctest::Approx(2.0));
  CHECK(within_group_cov(half)(0, 0) == doctest::Approx(1.5));
}

TEST_CASE("mixture moments agree with sampling the mixture") {
  const double t = 0.3;
  PopulationSpec init, shifted;
  init.group0 = {Vec::Constant(1, 1.0), Mat::Constant(1, 1, 1.0), 0.5};
  init.group1 = {Vec::Constant(1, -1.0), Mat::Constant(1, 1, 1.0), 0.5};
  init.model = {Vec::Ones(1), 0.0};
  init.noise = {Mat::Identity(1, 1), NoiseFamily::Gaussian, {}, {}};
  shifted = init;
  shifted.group1.mean = Vec::Constant(1, 1.0);
  const PopulationSpec mix = mixture_population(init, shifted, t);

  // Sample the mixture directly: choose the component per draw.
  lossdisc::Rng rng(5150);
  const std::size_t n = 400'000;
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double mean = rng.uniform() < t ? -1.0 : 1.0;
    const double z = mean + rng.normal();
    sum += z;
    sum2 += z * z;
  }
  const double mc_mean = sum / static_cast<double>(n);
  const double mc_var = sum2 / static_cast<double>(n) - mc_mean * mc_mean;
  CHECK(mix.group1.mean(0) == doctest::Approx(mc_mean).epsilon(0.02));
  CHECK(mix.group1.cov(0, 0) == doctest::Approx(mc_var).epsilon(0.02));
}

TEST_CASE("mixture rejects mismatched specs") {
  const PopulationSpec init = example_population();
  PopulationSpec other = init;
  other.model.beta = Vec::Constant(1, 2.0);
  CHECK_THROWS_AS(mixture_population(init, other, 0.5), InvalidSpec);
  CHECK_THROWS_AS(mixture_population(init, init, 1.5), InvalidInput);

  lossdisc::Rng rng(77);
  const PopulationSpec wider = testing::random_population(rng, 2);
  CHECK_THROWS_AS(mixture_population(init, wider, 0.5), DimensionMismatch);
}

TEST_CASE("validate rejects broken specs") {
  PopulationSpec pop = example_population();
  pop.group0.weight = 0.6;  // weights no longer sum to 1
  CHECK_THROWS_AS(pop.validate(), InvalidSpec);

  pop = example_population();
  pop.group1.cov = Mat::Constant(1, 1, -1.0);
  CHECK_THROWS_AS(pop.validate(), InvalidSpec);

  pop = example_population();
  pop.model.beta = Vec::Ones(2);
  CHECK_THROWS_AS(pop.validate(), InvalidSpec);

  pop = example_population();
  pop.noise.family = NoiseFamily::Discrete;
  pop.noise.discrete_support = Vec::Ones(2);  // mean 1, not 0
  pop.noise.discrete_probs = Vec::Constant(2, 0.5);
  CHECK_THROWS_AS(pop.validate(), InvalidSpec);
}

TEST_CASE("target moments follow the linear model") {
  const PopulationSpec pop = example_population();
  const TargetMoments y = target_moments(pop);
  CHECK(y.mean_g0 == doctest::Approx(1.0));
  CHECK(y.mean_g1 == doctest::Approx(4.0));
  CHECK(y.var_g0 == doctest::Approx(0.5));
  CHECK(y.var_g1 == doctest::Approx(1.0));
  CHECK(y.mean == doctest::Approx(2.0));
  CHECK(y.var == doctest::Approx(8.0 / 3.0));
}

TEST_SUITE_END();

#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "lossdisc/empirical.hpp"
#include "lossdisc/estimators.hpp"

using namespace lossdisc;
using testing::example_population;

TEST_SUITE_BEGIN("estimators");

TEST_CASE("lambda: no noise means no attenuation") {
  PopulationSpec pop = example_population(0.0);
  CHECK(lambda_no_group(pop).lambda.cwiseAbs().maxCoeff() == 0.0);
  CHECK(lambda_with_group(pop).lambda.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("lambda: example fixture values") {
  const PopulationSpec pop = example_population();
  CHECK(lambda_no_group(pop).lambda(0, 0) ==
        doctest::Approx(3.0 / 11.0).epsilon(1e-13));
  CHECK(lambda_with_group(pop).lambda(0, 0) ==
        doctest::Approx(3.0 / 5.0).epsilon(1e-13));
}

TEST_CASE("lambda: huge noise approaches the identity") {
  const PopulationSpec pop = example_population(1e6);
  CHECK(std::abs(lambda_no_group(pop).lambda(0, 0) - 1.0) < 1e-5);
}

TEST_CASE("no-group fit reproduces the fixture closed form") {
  const PopulationSpec pop = example_population();
  const LinearPredictor p = fit_population_no_group(pop);
  CHECK(std::abs(p.beta_hat(0) - 8.0 / 11.0) < 1e-12);
  CHECK(std::abs(p.alpha_hat - 6.0 / 11.0) < 1e-12);
  CHECK(p.mode == Mode::NoGroup);
  CHECK_FALSE(p.beta_g.has_value());
}

TEST_CASE("no-group fit is consistent without noise") {
  lossdisc::Rng rng(99);
  PopulationSpec pop = testing::random_population(rng, 3);
  pop.noise.cov = Mat::Zero(3, 3);
  const LinearPredictor p = fit_population_no_group(pop);
  CHECK((p.beta_hat - pop.model.beta).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(p.alpha_hat == doctest::Approx(pop.model.alpha).epsilon(1e-12));
}

TEST_CASE("1-D slope shows attenuation bias") {
  lossdisc::Rng rng(123);
  for (int rep = 0; rep < 10; ++rep) {
    const PopulationSpec pop = testing::random_population(rng, 1);
    const double sz = pooled_cov(pop)(0, 0);
    const double su = pop.noise.cov(0, 0);
    const LinearPredictor p = fit_population_no_group(pop);
    CHECK(p.beta_hat(0) ==
          doctest::Approx(sz / (sz + su) * pop.model.beta(0)).epsilon(1e-12));
    CHECK(std::abs(p.beta_hat(0)) <= std::abs(pop.model.beta(0)));
  }
}

TEST_CASE("with-group fit reproduces the fixture closed form") {
  const PopulationSpec pop = example_population();
  const LinearPredictor p = fit_population_with_group(pop);
  CHECK(std::abs(p.beta_hat(0) - 2.0 / 5.0) < 1e-12);
  CHECK(std::abs(p.beta_g.value() - 9.0 / 5.0) < 1e-12);
  CHECK(std::abs(p.alpha_hat - 3.0 / 5.0) < 1e-12);
  CHECK(p.mode == Mode::WithGroup);
}

TEST_CASE("with-group fit: group feature is redundant without noise") {
  lossdisc::Rng rng(7);
  PopulationSpec pop = testing::random_population(rng, 2);
  pop.noise.cov = Mat::Zero(2, 2);
  const LinearPredictor p = fit_population_with_group(pop);
  CHECK((p.beta_hat - pop.model.beta).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(p.beta_g.value()) < 1e-12);
  CHECK(p.alpha_hat == doctest::Approx(pop.model.alpha).epsilon(1e-12));
}

TEST_CASE("with-group fit: equal group means zero the group coefficient") {
  lossdisc::Rng rng(8);
  PopulationSpec pop = testing::random_population(rng, 2);
  pop.group1.mean = pop.group0.mean;
  const LinearPredictor p = fit_population_with_group(pop);
  CHECK(std::abs(p.beta_g.value()) < 1e-14);
}

TEST_CASE("population fits match OLS on a large sample") {
  const PopulationSpec pop = example_population();
  const auto data = sample_dataset(pop, 1'000'000, Seed{314159});

  const LinearPredictor ols_ng = ols_fit(data.observed, false);
  const LinearPredictor pop_ng = fit_population_no_group(pop);
  CHECK(ols_ng.beta_hat(0) ==
        doctest::Approx(pop_ng.beta_hat(0)).epsilon(0.005));
  CHECK(ols_ng.alpha_hat == doctest::Approx(pop_ng.alpha_hat).epsilon(0.005));

  const LinearPredictor ols_wg = ols_fit(data.observed, true);
  const LinearPredictor pop_wg = fit_population_with_group(pop);
  CHECK(ols_wg.beta_hat(0) ==
        doctest::Approx(pop_wg.beta_hat(0)).epsilon(0.005));
  CHECK(ols_wg.beta_g.value() ==
        doctest::Approx(pop_wg.beta_g.value()).epsilon(0.005));
  CHECK(ols_wg.alpha_hat == doctest::Approx(pop_wg.alpha_hat).epsilon(0.005));
}

TEST_CASE("infinite-noise predictions on the fixture") {
  const PopulationSpec pop = example_population();
  const auto [ng0, ng1] = infinite_noise_predictions(pop, Mode::NoGroup);
  CHECK(ng0 == doctest::Approx(2.0));
  CHECK(ng1 == doctest::Approx(2.0));
  const auto [wg0, wg1] = infinite_noise_predictions(pop, Mode::WithGroup);
  CHECK(wg0 == doctest::Approx(1.0));
  CHECK(wg1 == doctest::Approx(4.0));
}

TEST_CASE("infinite-noise predictions shift with the intercept") {
  PopulationSpec pop = example_population();
  const auto [a0, a1] = infinite_noise_predictions(pop, Mode::WithGroup);
  pop.model.alpha += 2.5;
  const auto [b0, b1] = infinite_noise_predictions(pop, Mode::WithGroup);
  CHECK(b0 - a0 == doctest::Approx(2.5));
  CHECK(b1 - a1 == doctest::Approx(2.5));
}

TEST_CASE("fits converge to the infinite-noise predictions") {
  const PopulationSpec pop = example_population(1e6);
  const LinearPredictor ng = fit_population_no_group(pop);
  const LinearPredictor wg = fit_population_with_group(pop);
  const auto [ng0, ng1] = infinite_noise_predictions(pop, Mode::NoGroup);
  const auto [wg0, wg1] = infinite_noise_predictions(pop, Mode::WithGroup);
  for (double x : {-2.0, 0.0, 1.0, 3.0, 5.0}) {
    const Vec xv = Vec::Constant(1, x);
    CHECK(std::abs(ng.predict(xv, 0) - ng0) < 1e-3);
    CHECK(std::abs(ng.predict(xv, 1) - ng1) < 1e-3);
    CHECK(std::abs(wg.predict(xv, 0) - wg0) < 1e-3);
    CHECK(std::abs(wg.predict(xv, 1) - wg1) < 1e-3);
  }
}

TEST_CASE("expected squared error: zero without noise, fixture value with") {
  PopulationSpec pop = example_population(0.0);
  CHECK(expected_squared_error_no_group(pop) == doctest::Approx(0.0));
  pop = example_population();
  CHECK(expected_squared_error_no_group(pop) ==
        doctest::Approx(8.0 / 11.0).epsilon(1e-12));
}

TEST_CASE("expected squared error grows with the noise") {
  double prev = -1.0;
  for (double var : {0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0}) {
    const double se = expected_squared_error_no_group(example_population(var));
    CHECK(se >= prev);
    prev = se;
  }
}

TEST_CASE("bayes_optimal_1d: linear model reduces to the posterior mean") {
  const auto identity = [](double z) { return z; };
  for (double x : {-1.0, 0.5, 2.0, 4.0}) {
    const double prior_mean = 1.0, prior_var = 2.0, noise_var = 0.5;
    const double expected = (noise_var * prior_mean + prior_var * x) /
                            (prior_var + noise_var);
    CHECK(bayes_optimal_1d(identity, prior_mean, prior_var, noise_var, x) ==
          doctest::Approx(expected).epsilon(1e-8));
  }
}

TEST_CASE("bayes_optimal_1d: constant function is returned unchanged") {
  const auto c = [](double) { return -3.25; };
  CHECK(bayes_optimal_1d(c, 0.0, 1.0, 1.0, 0.7) ==
        doctest::Approx(-3.25).epsilon(1e-10));
}

TEST_CASE("bayes_optimal_1d: prediction depends on the prior") {
  // y = z^3 + 5 z^2 observed through unit noise: the same x yields different
  // best estimates under different priors, unlike the noiseless case.
  const auto f = [](double z) { return z * z * z + 5.0 * z * z; };
  const double x = 2.0;
  const double near = bayes_optimal_1d(f, 1.0, 1.0, 1.0, x);
  const double far = bayes_optimal_1d(f, 3.0, 1.0, 1.0, x);
  CHECK(std::abs(near - far) > 1.0);

  // Monte-Carlo conditional mean (kernel bin around x) as the oracle.
  for (const double prior_mean : {1.0, 3.0}) {
    lossdisc::Rng rng(777);
    const double h = 0.02;
    double acc = 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < 10'000'000; ++i) {
      const double z = prior_mean + rng.normal();
      const double xs = z + rng.normal();
      if (std::abs(xs - x) <= h) {
        acc += f(z);
        ++hits;
      }
    }
    REQUIRE(hits > 1000);
    const double mc = acc / static_cast<double>(hits);
    const double quad = bayes_optimal_1d(f, prior_mean, 1.0, 1.0, x);
    CHECK(quad == doctest::Approx(mc).epsilon(0.02));
  }
}

TEST_CASE("bayes_optimal_1d: rejects non-positive variances") {
  const auto id = [](double z) { return z; };
  CHECK_THROWS_AS(bayes_optimal_1d(id, 0.0, 0.0, 1.0, 0.0), InvalidInput);
  CHECK_THROWS_AS(bayes_optimal_1d(id, 0.0, 1.0, -1.0, 0.0), InvalidInput);
}

TEST_SUITE_END();

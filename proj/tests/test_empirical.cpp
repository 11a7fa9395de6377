#include <doctest.h>

#include <cmath>
#include <set>

#include "fixtures.hpp"
#include "lossdisc/empirical.hpp"

using namespace lossdisc;
using testing::example_population;

TEST_SUITE_BEGIN("empirical");

TEST_CASE("sample_dataset: sample mean within 3 standard errors") {
  const PopulationSpec pop = example_population();
  const auto data = sample_dataset(pop, 1'000'000, Seed{1001});
  const double mean = data.latent.features.col(0).mean();
  const double se = std::sqrt(8.0 / 3.0 / 1e6);
  CHECK(std::abs(mean - 2.0) < 3.0 * se);

  // y = beta^T z + alpha holds exactly per row.
  const Vec resid = data.latent.target - data.latent.features * pop.model.beta;
  CHECK(resid.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sample_dataset: no noise means observed == latent bit-for-bit") {
  const PopulationSpec pop = example_population(0.0);
  const auto data = sample_dataset(pop, 1000, Seed{1002});
  CHECK((data.observed.features.array() == data.latent.features.array()).all());
}

TEST_CASE("sample_dataset: same seed, same data") {
  const PopulationSpec pop = example_population();
  const auto a = sample_dataset(pop, 5000, Seed{1003});
  const auto b = sample_dataset(pop, 5000, Seed{1003});
  CHECK((a.observed.features.array() == b.observed.features.array()).all());
  CHECK((a.observed.target.array() == b.observed.target.array()).all());
  CHECK(a.observed.group == b.observed.group);

  const auto c = sample_dataset(pop, 5000, Seed{1004});
  CHECK((a.observed.features.array() != c.observed.features.array()).any());
}

TEST_CASE("sample_dataset: group frequencies follow the weights") {
  const PopulationSpec pop = example_population();
  const auto data = sample_dataset(pop, 200'000, Seed{1005});
  double frac1 = 0.0;
  for (auto g : data.observed.group) frac1 += g;
  frac1 /= static_cast<double>(data.observed.n());
  CHECK(frac1 == doctest::Approx(1.0 / 3.0).epsilon(0.02));
}

TEST_CASE("ols_fit: interpolates noiseless linear data") {
  lossdisc::Rng rng(51);
  const int d = 3, n = 200;
  Dataset ds;
  ds.features.resize(n, d);
  ds.target.resize(n);
  ds.group.resize(n);
  const Vec beta = testing::random_vec(rng, d, -2.0, 2.0);
  const double alpha = 0.75;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) ds.features(i, j) = rng.normal();
    ds.target(i) = beta.dot(ds.features.row(i)) + alpha;
    ds.group[static_cast<std::size_t>(i)] = i % 2;
  }
  const LinearPredictor p = ols_fit(ds, false);
  CHECK((p.beta_hat - beta).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(p.alpha_hat == doctest::Approx(alpha).epsilon(1e-8));

  const LinearPredictor pg = ols_fit(ds, true);
  CHECK(std::abs(pg.beta_g.value()) < 1e-8);
}

TEST_CASE("ols_fit: duplicated feature column is rank deficient") {
  lossdisc::Rng rng(52);
  const int n = 100;
  Dataset ds;
  ds.features.resize(n, 2);
  ds.target.resize(n);
  ds.group.assign(n, 0);
  for (int i = 0; i < n; ++i) {
    ds.features(i, 0) = rng.normal();
    ds.features(i, 1) = ds.features(i, 0);
    ds.target(i) = rng.normal();
    ds.group[static_cast<std::size_t>(i)] = i % 2;
  }
  CHECK_THROWS_AS(ols_fit(ds, false), RankDeficient);
}

TEST_CASE("ols_fit: refuses tiny samples") {
  Dataset ds;
  ds.features = Mat::Identity(3, 3);
  ds.target = Vec::Ones(3);
  ds.group = {0, 1, 0};
  CHECK_THROWS_AS(ols_fit(ds, false), InvalidInput);
}

TEST_CASE("inject_noise: zero variance is the identity") {
  const auto data = sample_dataset(example_population(), 500, Seed{61});
  const Dataset out = inject_noise(data.observed, 0.0, Seed{62});
  CHECK((out.features.array() == data.observed.features.array()).all());
}

TEST_CASE("inject_noise: grows column variance by sigma_sq") {
  const auto data = sample_dataset(example_population(0.0), 100'000, Seed{63});
  const double sigma_sq = 2.0;
  const Dataset noisy = inject_noise(data.observed, sigma_sq, Seed{64});

  const auto col_var = [](const Dataset& ds) {
    const double m = ds.features.col(0).mean();
    return (ds.features.col(0).array() - m).square().mean();
  };
  CHECK(col_var(noisy) - col_var(data.observed) ==
        doctest::Approx(sigma_sq).epsilon(0.05));

  // Target and group are untouched bit-for-bit.
  CHECK((noisy.target.array() == data.observed.target.array()).all());
  CHECK(noisy.group == data.observed.group);
}

TEST_CASE("omit_features: k = 0 is the identity, noised set matches order") {
  lossdisc::Rng rng(65);
  PopulationSpec pop;
  pop.group0 = {Vec::Zero(3), Mat::Identity(3, 3), 0.5};
  pop.group1 = {Vec::Ones(3), Mat::Identity(3, 3), 0.5};
  pop.model = {Vec::Ones(3), 0.0};
  pop.noise = {Mat::Zero(3, 3), NoiseFamily::Gaussian, {}, {}};
  const auto data = sample_dataset(pop, 2000, Seed{66});

  const std::vector<int> order = {2, 0, 1};
  const Dataset same = omit_features(data.observed, order, 0, Seed{67});
  CHECK((same.features.array() == data.observed.features.array()).all());

  const Dataset one = omit_features(data.observed, order, 1, Seed{67});
  CHECK((one.features.col(2).array() != data.observed.features.col(2).array())
            .any());
  CHECK((one.features.col(0).array() == data.observed.features.col(0).array())
            .all());
  CHECK((one.features.col(1).array() == data.observed.features.col(1).array())
            .all());
}

TEST_CASE("omit_features: omitted slopes collapse toward zero") {
  PopulationSpec pop;
  pop.group0 = {Vec::Zero(2), Mat::Identity(2, 2), 0.5};
  pop.group1 = {Vec::Ones(2), Mat::Identity(2, 2), 0.5};
  pop.model = {Vec::Constant(2, 1.0), 0.0};
  pop.noise = {Mat::Zero(2, 2), NoiseFamily::Gaussian, {}, {}};
  const auto data = sample_dataset(pop, 100'000, Seed{68});

  const Dataset gone = omit_features(data.observed, {0, 1}, 2, Seed{69});
  const LinearPredictor p = ols_fit(gone, false);
  // Attenuation at noise variance 1e4 shrinks unit slopes below 2%.
  CHECK(std::abs(p.beta_hat(0)) < 0.02);
  CHECK(std::abs(p.beta_hat(1)) < 0.02);
}

TEST_CASE("omit_features: rejects non-permutations") {
  const auto data = sample_dataset(example_population(), 100, Seed{70});
  CHECK_THROWS_AS(omit_features(data.observed, {0, 0}, 1, Seed{71}),
                  InvalidPermutation);
  CHECK_THROWS_AS(omit_features(data.observed, {1}, 1, Seed{71}),
                  InvalidPermutation);
}

TEST_CASE("standardize: post-conditions and train-parameter reuse") {
  const auto data = sample_dataset(example_population(), 20'000, Seed{72});
  const auto [train_raw, test_raw] = split_80_20(data.observed, Seed{73});
  const auto [train, test] = standardize(train_raw, test_raw);

  CHECK(train.standardized);
  CHECK(test.standardized);
  CHECK(std::abs(train.features.col(0).mean()) < 1e-8);
  const double var =
      (train.features.col(0).array() - train.features.col(0).mean())
          .square()
          .mean();
  CHECK(var == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(train.target.mean()) < 1e-8);

  // The test split is transformed with the train parameters, not its own.
  const double m = train_raw.features.col(0).mean();
  const double sd = std::sqrt(
      (train_raw.features.col(0).array() - m).square().mean());
  const Vec expected = (test_raw.features.col(0).array() - m) / sd;
  CHECK((test.features.col(0) - expected).cwiseAbs().maxCoeff() < 1e-12);

  // Standardizing an already-standardized split is the identity.
  const auto [again, _] = standardize(train, test);
  CHECK((again.features - train.features).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("standardize: constant column raises ZeroVariance") {
  Dataset ds;
  ds.features = Mat::Ones(50, 2);
  ds.features.col(0) = Vec::LinSpaced(50, 0.0, 1.0);
  ds.target = Vec::LinSpaced(50, -1.0, 1.0);
  ds.group.assign(50, 0);
  CHECK_THROWS_AS(standardize(ds, ds), ZeroVariance);
}

TEST_CASE("empirical_report: true model on noiseless data scores zero") {
  const PopulationSpec pop = example_population(0.0);
  const auto data = sample_dataset(pop, 10'000, Seed{74});
  LinearPredictor truth;
  truth.beta_hat = pop.model.beta;
  truth.alpha_hat = pop.model.alpha;
  truth.mode = Mode::NoGroup;
  const DiscrepancyReport r = empirical_report(truth, data.observed);
  CHECK(r.sld_res < 1e-10);
  CHECK(r.sld_sq < 1e-10);
  CHECK(r.cld_res == 0.0);
  CHECK(r.cld_sq == 0.0);
  CHECK(r.source == Source::Empirical);
}

TEST_CASE("empirical_report: fixture SLD within 3 standard errors") {
  const PopulationSpec pop = example_population();
  const auto data = sample_dataset(pop, 1'000'000, Seed{750});
  const auto detail = empirical_report_detailed(fit_population_no_group(pop),
                                                data.observed, &data.latent);
  CHECK(std::abs(detail.report.sld_res - 9.0 / 11.0) <
        3.0 * detail.sld_res_se);
}

TEST_CASE("empirical_report: with-group residual CLD equals |beta_g|") {
  const PopulationSpec pop = example_population();
  const auto data = sample_dataset(pop, 50'000, Seed{76});
  const LinearPredictor p = ols_fit(data.observed, true);
  const DiscrepancyReport r =
      empirical_report(p, data.observed, data.latent);
  CHECK(r.cld_res == std::abs(p.beta_g.value()));
}

TEST_CASE("empirical_report: with-group residual SLD vanishes at scale") {
  const PopulationSpec pop = example_population();
  const auto data = sample_dataset(pop, 1'000'000, Seed{77});
  const auto detail = empirical_report_detailed(ols_fit(data.observed, true),
                                                data.observed, &data.latent);
  CHECK(std::abs(detail.report.signed_sld_res) <= 3.0 * detail.sld_res_se);
}

TEST_CASE("empirical_report: error paths") {
  const auto data = sample_dataset(example_population(), 100, Seed{78});
  Dataset no_groups = data.observed;
  no_groups.group.clear();
  const LinearPredictor p = ols_fit(data.observed, false);
  CHECK_THROWS_AS(empirical_report(p, no_groups), MissingGroup);

  Dataset one_group = data.observed;
  std::fill(one_group.group.begin(), one_group.group.end(), 1);
  CHECK_THROWS_AS(empirical_report(p, one_group), GroupEmpty);
}

TEST_CASE("analytic metrics survive non-Gaussian noise families") {
  // The closed forms depend on the noise only through its covariance.
  PopulationSpec pop = example_population();
  pop.noise.family = NoiseFamily::Laplace;
  const auto lap = sample_dataset(pop, 400'000, Seed{79});
  const auto lap_detail = empirical_report_detailed(
      fit_population_no_group(pop), lap.observed, &lap.latent);
  CHECK(std::abs(lap_detail.report.sld_res - 9.0 / 11.0) <
        std::max(0.01 * 9.0 / 11.0, 3.0 * lap_detail.sld_res_se));

  pop.noise.family = NoiseFamily::Discrete;
  pop.noise.discrete_support = Vec(2);
  pop.noise.discrete_support << -1.0, 1.0;
  pop.noise.discrete_probs = Vec::Constant(2, 0.5);
  const auto disc = sample_dataset(pop, 400'000, Seed{80});
  const double var =
      (disc.observed.features - disc.latent.features).col(0).array().square().mean();
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));
  const auto disc_detail = empirical_report_detailed(
      fit_population_no_group(pop), disc.observed, &disc.latent);
  CHECK(std::abs(disc_detail.report.sld_res - 9.0 / 11.0) <
        std::max(0.01 * 9.0 / 11.0, 3.0 * disc_detail.sld_res_se));
}

TEST_CASE("split_80_20: sizes, disjointness, determinism") {
  const auto data = sample_dataset(example_population(), 10, Seed{81});
  const auto [train, test] = split_80_20(data.observed, Seed{82});
  CHECK(train.n() == 8);
  CHECK(test.n() == 2);

  // Disjoint union of the original rows: match on (feature, target) pairs.
  std::multiset<double> seen;
  for (Eigen::Index i = 0; i < train.n(); ++i) seen.insert(train.target(i));
  for (Eigen::Index i = 0; i < test.n(); ++i) seen.insert(test.target(i));
  std::multiset<double> expected;
  for (Eigen::Index i = 0; i < data.observed.n(); ++i) {
    expected.insert(data.observed.target(i));
  }
  CHECK(seen == expected);

  const auto [train2, test2] = split_80_20(data.observed, Seed{82});
  CHECK((train.features.array() == train2.features.array()).all());

  CHECK_THROWS_AS(split_80_20(subset(data.observed, {0, 1, 2}), Seed{83}),
                  InvalidInput);
}

TEST_CASE("attenuation: average slope magnitude shrinks with noise") {
  const PopulationSpec pop = example_population(0.0);
  const std::vector<double> grid = {0.0, 0.5, 1.0, 2.0, 4.0};
  std::vector<double> mean_slope(grid.size(), 0.0);
  const int reps = 100;
  for (int rep = 0; rep < reps; ++rep) {
    const auto data =
        sample_dataset(pop, 2000, Seed{9000 + static_cast<unsigned>(rep)});
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const Dataset noisy = inject_noise(
          data.observed, grid[k], Seed{100'000 + 17 * static_cast<unsigned>(rep) + k});
      mean_slope[k] += std::abs(ols_fit(noisy, false).beta_hat(0));
    }
  }
  for (std::size_t k = 1; k < grid.size(); ++k) {
    CHECK(mean_slope[k] < mean_slope[k - 1]);
  }
}

TEST_SUITE_END();

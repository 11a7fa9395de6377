#include "lossdisc/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <thread>

namespace lossdisc {

void parallel_for_tasks(int jobs, std::size_t count,
                        const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) {
      fn(i);
    }
    return;
  }
  const int workers = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(jobs), count));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) {
          return;
        }
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) {
            error = std::current_exception();
          }
          return;
        }
      }
    });
  }
  for (auto& t : pool) {
    t.join();
  }
  if (error) {
    std::rethrow_exception(error);
  }
}

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw InvalidInput("spearman_rho: need two equal-length series");
  }
  const auto ranks = [](const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) {
        ++j;
      }
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) {
        r[idx[k]] = avg;
      }
      i = j + 1;
    }
    return r;
  };
  const std::vector<double> rx = ranks(x);
  const std::vector<double> ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    return 0.0;
  }
  return sxy / std::sqrt(sxx * syy);
}

namespace {

std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  Rng r(seed);
  for (const std::uint64_t p : path) {
    r = r.fork(p);
  }
  return r.next_u64();
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(const std::vector<double>& v) {
  MeanSe out;
  const double n = static_cast<double>(v.size());
  for (const double x : v) {
    out.mean += x;
  }
  out.mean /= n;
  if (v.size() > 1) {
    double ss = 0.0;
    for (const double x : v) {
      ss += (x - out.mean) * (x - out.mean);
    }
    out.se = std::sqrt(ss / (n - 1.0) / n);
  }
  return out;
}

std::vector<int> seeded_order(Eigen::Index d, std::uint64_t seed) {
  std::vector<int> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const std::size_t j =
        static_cast<std::size_t>(rng.uniform() * static_cast<double>(i + 1));
    std::swap(order[i], order[std::min(j, i)]);
  }
  return order;
}

// Exact population transform of standardization fitted on the observed
// features and target: z -> D^{-1}(z - mean), y -> (y - mu_y)/sd_y.
PopulationSpec standardized_population(const PopulationSpec& pop) {
  const Vec mu = pooled_mean(pop);
  const Vec scale = pooled_cov(pop).diagonal().cwiseSqrt();
  const Vec inv = scale.cwiseInverse();
  const double y_sd = std::sqrt(target_moments(pop).var);

  PopulationSpec out = pop;
  out.group0.mean = inv.asDiagonal() * (pop.group0.mean - mu);
  out.group1.mean = inv.asDiagonal() * (pop.group1.mean - mu);
  out.group0.cov = inv.asDiagonal() * pop.group0.cov * inv.asDiagonal();
  out.group1.cov = inv.asDiagonal() * pop.group1.cov * inv.asDiagonal();
  out.model.beta = scale.asDiagonal() * pop.model.beta / y_sd;
  out.model.alpha = 0.0;
  out.noise.cov = inv.asDiagonal() * pop.noise.cov * inv.asDiagonal();
  return out;
}

Mat omit_noise_cov(Eigen::Index d, const std::vector<int>& order, int k) {
  Mat cov = Mat::Zero(d, d);
  for (int i = 0; i < k; ++i) {
    cov(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]) =
        kOmitNoiseVar;
  }
  return cov;
}

struct GridPoint {
  double value = 0.0;  // sigma_sq (Noise) or k (Omit)
  int k = 0;
};

SweepResult run_sweep_impl(
    const std::function<Dataset(int rep)>& source, Eigen::Index dim,
    const PopulationSpec* analytic_source, SweepKind kind,
    const SweepOptions& options) {
  if (options.repetitions < 1) {
    throw InvalidInput("run_sweep: repetitions must be >= 1");
  }
  std::vector<GridPoint> grid;
  if (kind == SweepKind::Noise) {
    for (const double v : options.noise_grid) {
      if (v < 0.0) {
        throw InvalidInput("run_sweep: negative noise variance");
      }
      grid.push_back({v, 0});
    }
  } else {
    for (const int k : options.omit_counts) {
      if (k < 0 || k > dim) {
        throw InvalidInput("run_sweep: omit count out of range");
      }
      grid.push_back({static_cast<double>(k), k});
    }
  }
  if (grid.empty()) {
    throw InvalidInput("run_sweep: empty grid");
  }

  SweepResult result;
  result.kind = kind;
  if (kind == SweepKind::Omit) {
    result.omit_order = options.omit_order.empty()
                            ? seeded_order(dim, derive(options.seed, {0}))
                            : options.omit_order;
    if (result.omit_order.size() != static_cast<std::size_t>(dim)) {
      throw InvalidPermutation("run_sweep: omit order must cover every feature");
    }
  }

  const std::size_t reps = static_cast<std::size_t>(options.repetitions);
  const std::size_t tasks = grid.size() * reps;
  result.rows.assign(2 * tasks, SweepRow{});

  parallel_for_tasks(options.jobs, tasks, [&](std::size_t task) {
    const std::size_t gi = task / reps;
    const int rep = static_cast<int>(task % reps);
    const GridPoint point = grid[gi];

    const Dataset raw = source(rep);
    auto [train, test] =
        split_80_20(raw, Seed{derive(options.seed, {1, static_cast<std::uint64_t>(rep)})});
    if (options.standardize) {
      std::tie(train, test) = standardize(train, test);
    }
    const std::uint64_t base =
        derive(options.seed, {3, gi, static_cast<std::uint64_t>(rep)});
    if (kind == SweepKind::Noise) {
      train = inject_noise(train, point.value, Seed{derive(base, {0})});
      test = inject_noise(test, point.value, Seed{derive(base, {1})});
    } else {
      train = omit_features(train, result.omit_order, point.k, Seed{derive(base, {0})});
      test = omit_features(test, result.omit_order, point.k, Seed{derive(base, {1})});
    }

    for (int m = 0; m < 2; ++m) {
      const bool with_group = m == 1;
      const LinearPredictor fit = ols_fit(train, with_group);
      const EmpiricalDetail detail = empirical_report_detailed(fit, test);
      SweepRow row;
      row.grid_value = point.value;
      row.rep = rep;
      row.mode = with_group ? Mode::WithGroup : Mode::NoGroup;
      row.sld_res = detail.report.sld_res;
      row.sld_sq = detail.report.sld_sq;
      row.signed_sld_res = detail.report.signed_sld_res;
      row.mse = detail.mse;
      row.beta_g = with_group ? fit.group_coef() : 0.0;
      result.rows[2 * task + static_cast<std::size_t>(m)] = row;
    }
  });

  // Aggregates, one per (grid point, mode), in grid order.
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    for (int m = 0; m < 2; ++m) {
      std::vector<double> sld_res, sld_sq, signed_res, mse, beta_g;
      for (std::size_t rep = 0; rep < reps; ++rep) {
        const SweepRow& row =
            result.rows[2 * (gi * reps + rep) + static_cast<std::size_t>(m)];
        sld_res.push_back(row.sld_res);
        sld_sq.push_back(row.sld_sq);
        signed_res.push_back(row.signed_sld_res);
        mse.push_back(row.mse);
        beta_g.push_back(row.beta_g);
      }
      SweepAggregate agg;
      agg.grid_value = grid[gi].value;
      agg.mode = m == 1 ? Mode::WithGroup : Mode::NoGroup;
      agg.reps = options.repetitions;
      const MeanSe a = mean_se(sld_res);
      agg.mean_sld_res = a.mean;
      agg.se_sld_res = a.se;
      const MeanSe b = mean_se(sld_sq);
      agg.mean_sld_sq = b.mean;
      agg.se_sld_sq = b.se;
      const MeanSe c = mean_se(signed_res);
      agg.mean_signed_sld_res = c.mean;
      agg.se_signed_sld_res = c.se;
      agg.mean_mse = mean_se(mse).mean;
      agg.mean_beta_g = mean_se(beta_g).mean;

      if (analytic_source != nullptr) {
        PopulationSpec ref = options.standardize
                                 ? standardized_population(*analytic_source)
                                 : *analytic_source;
        ref.noise.cov = kind == SweepKind::Noise
                            ? grid[gi].value * Mat::Identity(dim, dim)
                            : omit_noise_cov(dim, result.omit_order, grid[gi].k);
        const DiscrepancyReport rep = agg.mode == Mode::WithGroup
                                          ? analytic_report_with_group(ref)
                                          : analytic_report_no_group(ref);
        agg.has_analytic = true;
        agg.analytic_sld_res = rep.sld_res;
        agg.analytic_sld_sq = rep.sld_sq;
      }
      result.aggregates.push_back(agg);
    }
  }
  return result;
}

}  // namespace

SweepResult run_sweep(const PopulationSpec& pop, SweepKind kind,
                      const SweepOptions& options) {
  pop.validate();
  if (pop.noise.cov.cwiseAbs().maxCoeff() != 0.0) {
    throw InvalidSpec(
        "run_sweep: synthetic sweep source must be noiseless; the sweep "
        "injects its own noise");
  }
  if (options.sample_n < 10) {
    throw InvalidInput("run_sweep: sample_n too small");
  }
  const auto source = [&pop, &options](int rep) {
    return sample_dataset(
               pop, options.sample_n,
               Seed{derive(options.seed, {2, static_cast<std::uint64_t>(rep)})})
        .observed;
  };
  return run_sweep_impl(source, pop.dim(), &pop, kind, options);
}

SweepResult run_sweep(const Dataset& ds, SweepKind kind,
                      const SweepOptions& options) {
  const auto source = [&ds](int) { return ds; };
  return run_sweep_impl(source, ds.dim(), nullptr, kind, options);
}

namespace {

ShiftExperimentResult run_shift_impl(
    const std::function<Dataset(int k, int rep, std::uint64_t stream)>& make_train,
    const std::function<Dataset(int k, int rep, std::uint64_t stream)>& make_test,
    const ShiftScenario* scenario, const ShiftExperimentOptions& options) {
  if (options.max_k < 0 || options.repetitions < 1) {
    throw InvalidInput("run_shift_experiment: bad K range or repetitions");
  }
  const std::size_t reps = static_cast<std::size_t>(options.repetitions);
  const std::size_t ks = static_cast<std::size_t>(options.max_k) + 1;
  const std::size_t tasks = ks * reps;

  ShiftExperimentResult result;
  result.rows.assign(2 * tasks, ShiftRow{});

  parallel_for_tasks(options.jobs, tasks, [&](std::size_t task) {
    const int k = static_cast<int>(task / reps);
    const int rep = static_cast<int>(task % reps);
    const double t = 1.0 / (static_cast<double>(k) + 1.0);
    const std::uint64_t stream = derive(
        options.seed, {static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(rep)});

    const Dataset train = make_train(k, rep, stream);
    const Dataset test = make_test(k, rep, stream);

    for (int m = 0; m < 2; ++m) {
      const bool with_group = m == 1;
      const LinearPredictor fit = ols_fit(train, with_group);
      const EmpiricalDetail detail = empirical_report_detailed(fit, test);
      ShiftRow row;
      row.k = k;
      row.t = t;
      row.rep = rep;
      row.mode = with_group ? Mode::WithGroup : Mode::NoGroup;
      row.signed_sld_res = detail.report.signed_sld_res;
      row.sld_res = detail.report.sld_res;
      row.se = detail.sld_res_se;
      row.mse = detail.mse;
      result.rows[2 * task + static_cast<std::size_t>(m)] = row;
    }
  });

  for (std::size_t ki = 0; ki < ks; ++ki) {
    ShiftAggregate agg;
    agg.k = static_cast<int>(ki);
    agg.t = 1.0 / (static_cast<double>(ki) + 1.0);
    agg.reps = options.repetitions;
    std::vector<double> signed_wg, signed_ng;
    for (std::size_t rep = 0; rep < reps; ++rep) {
      signed_ng.push_back(result.rows[2 * (ki * reps + rep)].signed_sld_res);
      signed_wg.push_back(result.rows[2 * (ki * reps + rep) + 1].signed_sld_res);
    }
    const MeanSe wg = mean_se(signed_wg);
    agg.sld_with_group = std::abs(wg.mean);
    agg.se_with_group = wg.se;
    const MeanSe ng = mean_se(signed_ng);
    agg.sld_no_group = std::abs(ng.mean);
    agg.se_no_group = ng.se;
    if (scenario != nullptr) {
      const MixtureSld exact = sld_at_mixture(*scenario, agg.t);
      agg.has_analytic = true;
      agg.analytic = exact.value;
      agg.lower = exact.lower;
      agg.upper = exact.upper;
    }
    result.aggregates.push_back(agg);
  }
  return result;
}

}  // namespace

ShiftExperimentResult run_shift_experiment(const ShiftScenario& sc,
                                           const ShiftExperimentOptions& options) {
  const PopulationSpec init = initial_population(sc);
  const PopulationSpec shifted = shifted_population(sc);
  const auto make_train = [&](int k, int, std::uint64_t stream) {
    Dataset train =
        sample_dataset(init, options.batch_n, Seed{derive(stream, {0})}).observed;
    if (k > 0) {
      const Dataset extra =
          sample_dataset(shifted, options.batch_n * static_cast<std::size_t>(k),
                         Seed{derive(stream, {1})})
              .observed;
      train = concat(train, extra);
    }
    return train;
  };
  const auto make_test = [&](int, int, std::uint64_t stream) {
    return sample_dataset(shifted, options.test_n, Seed{derive(stream, {2})})
        .observed;
  };
  return run_shift_impl(make_train, make_test, &sc, options);
}

ShiftExperimentResult run_shift_experiment(const Dataset& ds,
                                           const Vec& row_weights,
                                           const ShiftExperimentOptions& options) {
  const Vec uniform = Vec::Ones(ds.n());
  const auto make_train = [&](int k, int, std::uint64_t stream) {
    Dataset train =
        resample_by_weights(ds, uniform, options.batch_n, Seed{derive(stream, {0})});
    if (k > 0) {
      const Dataset extra = resample_by_weights(
          ds, row_weights, options.batch_n * static_cast<std::size_t>(k),
          Seed{derive(stream, {1})});
      train = concat(train, extra);
    }
    return train;
  };
  const auto make_test = [&](int, int, std::uint64_t stream) {
    return resample_by_weights(ds, row_weights, options.test_n,
                               Seed{derive(stream, {2})});
  };
  return run_shift_impl(make_train, make_test, nullptr, options);
}

PopulationSpec random_oracle_population(Rng& rng, int dim) {
  const auto vec_in = [&](double lo, double hi) {
    Vec v(dim);
    for (int i = 0; i < dim; ++i) {
      v(i) = lo + (hi - lo) * rng.uniform();
    }
    return v;
  };
  const auto spd = [&](double scale) {
    Mat a(dim, dim);
    for (int i = 0; i < dim; ++i) {
      for (int j = 0; j < dim; ++j) {
        a(i, j) = rng.normal();
      }
    }
    return Mat(scale * (a * a.transpose() / static_cast<double>(dim) +
                        0.3 * Mat::Identity(dim, dim)));
  };

  PopulationSpec pop;
  pop.group0.mean = vec_in(-1.5, 1.5);
  pop.group1.mean = vec_in(-1.5, 1.5);
  // Keep the group mean gap away from zero so residual metrics have signal.
  for (int i = 0; i < dim; ++i) {
    if (std::abs(pop.group1.mean(i) - pop.group0.mean(i)) < 0.4) {
      pop.group1.mean(i) =
          pop.group0.mean(i) + (pop.group1.mean(i) >= pop.group0.mean(i) ? 0.4 : -0.4);
    }
  }
  pop.group0.cov = spd(1.0);
  pop.group1.cov = spd(1.0);
  pop.group0.weight = 0.3 + 0.4 * rng.uniform();
  pop.group1.weight = 1.0 - pop.group0.weight;
  pop.model.beta = Vec(dim);
  for (int i = 0; i < dim; ++i) {
    const double mag = 0.5 + 1.5 * rng.uniform();
    pop.model.beta(i) = rng.uniform() < 0.5 ? -mag : mag;
  }
  pop.model.alpha = -1.0 + 2.0 * rng.uniform();
  pop.noise = {spd(0.3 + 0.9 * rng.uniform()), NoiseFamily::Gaussian, {}, {}};
  return pop;
}

McValidateResult run_mc_validation(const McValidateOptions& options) {
  if (options.num_specs < 1 || options.samples < 1000) {
    throw InvalidInput("run_mc_validation: need >= 1 spec and >= 1000 samples");
  }
  McValidateResult result;
  std::vector<std::vector<McCheck>> per_spec(
      static_cast<std::size_t>(options.num_specs));

  parallel_for_tasks(options.jobs, per_spec.size(), [&](std::size_t si) {
    const int dim = 1 + static_cast<int>(si % 5);
    Rng rng = Rng(options.seed).fork(si);
    const PopulationSpec pop = random_oracle_population(rng, dim);
    const auto data =
        sample_dataset(pop, options.samples, Seed{derive(options.seed, {11, si})});

    auto& checks = per_spec[si];
    const auto push = [&](const std::string& metric, double analytic,
                          double empirical, double tol) {
      checks.push_back({static_cast<int>(si), dim, metric, analytic, empirical,
                        tol, std::abs(analytic - empirical) <= tol});
    };
    const auto rel_or_se = [](double analytic, double se) {
      return std::max(0.01 * std::abs(analytic), 3.0 * se);
    };

    // Closed-form predictors against large-sample least squares, coefficient
    // by coefficient.
    const auto push_coefs = [&](const char* tag, const LinearPredictor& exact,
                                const OlsDetail& fit) {
      for (int j = 0; j < dim; ++j) {
        push(std::string(tag) + ".beta[" + std::to_string(j) + "]",
             exact.beta_hat(j), fit.predictor.beta_hat(j),
             std::max(0.005 * std::abs(exact.beta_hat(j)),
                      4.0 * fit.std_errors(j)));
      }
      const Eigen::Index last = fit.std_errors.size() - 1;
      push(std::string(tag) + ".alpha", exact.alpha_hat,
           fit.predictor.alpha_hat,
           std::max(0.005 * std::abs(exact.alpha_hat),
                    4.0 * fit.std_errors(last)));
      if (exact.beta_g.has_value()) {
        push(std::string(tag) + ".beta_g", *exact.beta_g,
             fit.predictor.group_coef(),
             std::max(0.005 * std::abs(*exact.beta_g),
                      4.0 * fit.std_errors(dim)));
      }
    };

    // No-group estimator and its four metrics.
    const OlsDetail ng_fit = ols_fit_detailed(data.observed, false);
    push_coefs("fit_ng", fit_population_no_group(pop), ng_fit);
    const EmpiricalDetail ng = empirical_report_detailed(
        ng_fit.predictor, data.observed, &data.latent);
    const DiscrepancyReport ng_exact = analytic_report_no_group(pop);
    push("sld_res(no_group)", ng_exact.sld_res, ng.report.sld_res,
         rel_or_se(ng_exact.sld_res, ng.sld_res_se));
    push("sld_sq(no_group)", ng_exact.sld_sq, ng.report.sld_sq,
         rel_or_se(ng_exact.sld_sq, ng.sld_sq_se));
    push("cld_res(no_group)==0", 0.0, ng.report.cld_res, 1e-15);
    push("cld_sq(no_group)==0", 0.0, ng.report.cld_sq, 1e-15);

    // Population squared error of the no-group estimator.
    const double se_exact = expected_squared_error_no_group(pop);
    push("mse(no_group)", se_exact, ng.mse, rel_or_se(se_exact, ng.mse_se));

    // With-group estimator and its four metrics.
    const OlsDetail wg_fit = ols_fit_detailed(data.observed, true);
    push_coefs("fit_wg", fit_population_with_group(pop), wg_fit);
    const EmpiricalDetail wg = empirical_report_detailed(
        wg_fit.predictor, data.observed, &data.latent);
    const DiscrepancyReport wg_exact = analytic_report_with_group(pop);
    push("sld_res(with_group)==0", 0.0, std::abs(wg.report.signed_sld_res),
         3.0 * wg.sld_res_se);
    push("sld_sq(with_group)", wg_exact.sld_sq, wg.report.sld_sq,
         rel_or_se(wg_exact.sld_sq, wg.sld_sq_se));
    const double beta_g_se = wg_fit.std_errors(dim);
    push("cld_res(with_group)", wg_exact.cld_res, wg.report.cld_res,
         rel_or_se(wg_exact.cld_res, beta_g_se));
    // cld_sq scales with the fitted group coefficient, so its Monte-Carlo
    // error includes that coefficient's sampling error (delta method).
    const double bg = std::abs(wg_fit.predictor.group_coef());
    const double cld_sq_se =
        std::sqrt(wg.cld_sq_se * wg.cld_sq_se +
                  (bg > 0.0 ? std::pow(wg.report.cld_sq * beta_g_se / bg, 2.0)
                            : 0.0));
    push("cld_sq(with_group)", wg_exact.cld_sq, wg.report.cld_sq,
         rel_or_se(wg_exact.cld_sq, cld_sq_se));
  });

  for (const auto& checks : per_spec) {
    for (const auto& check : checks) {
      if (!check.pass) {
        ++result.failures;
      }
      result.checks.push_back(check);
    }
  }
  return result;
}

}  // namespace lossdisc

#pragma once

#include <string>
#include <vector>

#include "lossdisc/reweight.hpp"
#include "lossdisc/shift.hpp"

namespace lossdisc {

/// Runs fn(0..count-1) on up to `jobs` threads. Tasks own preassigned RNG
/// substreams and write to disjoint slots, so the result is independent of
/// the thread count.
void parallel_for_tasks(int jobs, std::size_t count,
                        const std::function<void(std::size_t)>& fn);

/// Spearman rank correlation (average ranks on ties).
double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

enum class SweepKind { Noise, Omit };

/// Noise / omission sweep protocol: per repetition an 80-20 split,
/// optional train-fitted standardization, a perturbation at each grid point
/// (fresh noise draws for train and test), least squares in both observation
/// modes, and discrepancy evaluation on the test split.
struct SweepOptions {
  std::vector<double> noise_grid;  // SweepKind::Noise
  std::vector<int> omit_counts;    // SweepKind::Omit
  std::vector<int> omit_order;     // empty: seeded shuffle of all columns
  int repetitions = 100;
  std::size_t sample_n = 2000;  // rows per repetition (synthetic source only)
  bool standardize = true;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct SweepRow {
  double grid_value = 0.0;  // sigma_sq or omitted-feature count
  int rep = 0;
  Mode mode = Mode::NoGroup;
  double sld_res = 0.0;
  double sld_sq = 0.0;
  double signed_sld_res = 0.0;
  double mse = 0.0;
  double beta_g = 0.0;  // 0 for NoGroup rows
};

struct SweepAggregate {
  double grid_value = 0.0;
  Mode mode = Mode::NoGroup;
  int reps = 0;
  double mean_sld_res = 0.0, se_sld_res = 0.0;
  double mean_sld_sq = 0.0, se_sld_sq = 0.0;
  double mean_signed_sld_res = 0.0, se_signed_sld_res = 0.0;
  double mean_mse = 0.0;
  double mean_beta_g = 0.0;
  bool has_analytic = false;  // closed-form reference (synthetic sources)
  double analytic_sld_res = 0.0;
  double analytic_sld_sq = 0.0;
};

struct SweepResult {
  SweepKind kind = SweepKind::Noise;
  std::vector<int> omit_order;  // the order actually used (Omit sweeps)
  std::vector<SweepRow> rows;
  std::vector<SweepAggregate> aggregates;
};

/// Synthetic source: each repetition draws `sample_n` fresh rows of latent
/// features from the population (which must therefore be noiseless; the
/// sweep injects the noise itself). Aggregates carry the closed-form
/// reference values for the matching noise level.
SweepResult run_sweep(const PopulationSpec& pop, SweepKind kind,
                      const SweepOptions& options);

/// Dataset source: repetitions differ only through the split and the noise
/// draws. No analytic reference is available.
SweepResult run_sweep(const Dataset& ds, SweepKind kind,
                      const SweepOptions& options);

/// Batch-accumulation shift experiment: at step K the training data is one
/// batch from the initial distribution plus K batches from the shifted one
/// (mixture weight t = 1/(K+1)), evaluated on shifted test data.
struct ShiftExperimentOptions {
  int max_k = 10;
  int repetitions = 30;
  std::size_t batch_n = 1000;
  std::size_t test_n = 20000;
  std::uint64_t seed = 0;
  int jobs = 1;
};

struct ShiftRow {
  int k = 0;
  double t = 0.0;
  int rep = 0;
  Mode mode = Mode::NoGroup;
  double signed_sld_res = 0.0;
  double sld_res = 0.0;
  double se = 0.0;
  double mse = 0.0;
};

struct ShiftAggregate {
  int k = 0;
  double t = 0.0;
  int reps = 0;
  // |mean over repetitions of the signed residual gap| and its standard
  // error; averaging before the absolute value avoids folding noise into a
  // positive bias near zero.
  double sld_with_group = 0.0, se_with_group = 0.0;
  double sld_no_group = 0.0, se_no_group = 0.0;
  bool has_analytic = false;
  double analytic = 0.0, lower = 0.0, upper = 0.0;
};

struct ShiftExperimentResult {
  std::vector<ShiftRow> rows;
  std::vector<ShiftAggregate> aggregates;
};

/// Synthetic path: batches are sampled from the scenario populations and the
/// aggregates carry the exact value and bracket.
ShiftExperimentResult run_shift_experiment(const ShiftScenario& sc,
                                           const ShiftExperimentOptions& options);

/// Real-data path: the original distribution is the uniform resample of the
/// dataset and the shifted distribution its `row_weights` resample (weights
/// typically from reweight_dataset).
ShiftExperimentResult run_shift_experiment(const Dataset& ds,
                                           const Vec& row_weights,
                                           const ShiftExperimentOptions& options);

/// Analytic-vs-Monte-Carlo oracle suite over seeded random populations:
/// every closed-form metric and the population squared error are compared
/// against their large-sample estimates at max(1% relative, 3 MC standard
/// errors); structural zeros are checked at 3 standard errors.
struct McValidateOptions {
  int num_specs = 20;
  std::size_t samples = 1'000'000;
  std::uint64_t seed = 917;
  int jobs = 1;
};

struct McCheck {
  int spec_index = 0;
  int dim = 0;
  std::string metric;
  double analytic = 0.0;
  double empirical = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct McValidateResult {
  std::vector<McCheck> checks;
  int failures = 0;
};

McValidateResult run_mc_validation(const McValidateOptions& options);

/// Random population with enough group structure that no oracle metric is
/// degenerate (coefficients and mean gaps bounded away from zero).
PopulationSpec random_oracle_population(Rng& rng, int dim);

}  // namespace lossdisc

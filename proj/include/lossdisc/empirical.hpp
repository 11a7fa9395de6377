#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lossdisc/discrepancy.hpp"
#include "lossdisc/rng.hpp"

namespace lossdisc {

/// Rows of features, target, and binary group label. The group label lives
/// outside the feature matrix, so feature-level transforms (noise injection,
/// standardization) never touch it.
struct Dataset {
  Mat features;                    // n x d
  Vec target;                      // n
  std::vector<std::uint8_t> group; // n, values in {0,1}
  bool standardized = false;
  std::vector<std::string> feature_names;

  Eigen::Index n() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
};

/// Rows selected by `indices`, in the given order.
Dataset subset(const Dataset& ds, const std::vector<Eigen::Index>& indices);

/// Row-wise concatenation (dimensions and standardization flags must agree).
Dataset concat(const Dataset& a, const Dataset& b);

struct SampledData {
  Dataset latent;    // features = z
  Dataset observed;  // features = z + u
};

/// Draws n individuals from the population: group by weight, z from the
/// group Gaussian, u from the noise family, y = beta^T z + alpha exactly.
/// Deterministic given the seed; one RNG substream per purpose and column.
SampledData sample_dataset(const PopulationSpec& pop, std::size_t n, Seed seed);

/// Least squares with intercept; the group label is appended as a feature
/// iff include_group. Throws RankDeficient when the design matrix is
/// (numerically) collinear.
LinearPredictor ols_fit(const Dataset& ds, bool include_group);

/// ols_fit plus homoskedastic coefficient standard errors, ordered
/// [slopes..., group (if present), intercept].
struct OlsDetail {
  LinearPredictor predictor;
  Vec std_errors;
  double sigma_sq = 0.0;  // residual variance estimate
};

OlsDetail ols_fit_detailed(const Dataset& ds, bool include_group);

/// Adds independent N(0, sigma_sq) noise to every feature entry; target and
/// group are untouched. sigma_sq = 0 returns the dataset unchanged.
Dataset inject_noise(const Dataset& ds, double sigma_sq, Seed seed);

/// Variance of the noise used to knock out omitted features.
inline constexpr double kOmitNoiseVar = 1e4;

/// Simulates feature omission: the first k features in `order` (a
/// permutation of all feature columns) receive N(0, kOmitNoiseVar) noise.
Dataset omit_features(const Dataset& ds, const std::vector<int>& order, int k,
                      Seed seed);

/// Standardizes features and target to mean 0 / variance 1 using moments
/// fitted on `train` (population divisor), applying the same transform to
/// both datasets. Throws ZeroVariance on constant columns.
std::pair<Dataset, Dataset> standardize(const Dataset& train,
                                        const Dataset& apply_to);

/// Empirical discrepancies of a predictor on a dataset. SLD entries are
/// per-group sample means of the residual / squared-error losses.
///
/// CLD entries: for NoGroup predictors both are exactly zero (the predictor
/// never sees g). For WithGroup predictors cld_res = |beta_g| exactly (the
/// counterfactual residual difference of a linear predictor is its group
/// coefficient); cld_sq requires latent features and is reported as zero by
/// this overload.
DiscrepancyReport empirical_report(const LinearPredictor& pred,
                                   const Dataset& ds);

/// As above, with latent features available (synthetic data): cld_sq becomes
/// the sample mean of |loss(g=0) - loss(g=1)| per individual, where each
/// counterfactual loss is the conditional expectation over the feature noise
/// given z. For the residual/squared losses of a linear predictor that
/// expectation is exact at the latent features (the noise variance term
/// cancels in the difference), so no extra noise draws are needed.
DiscrepancyReport empirical_report(const LinearPredictor& pred,
                                   const Dataset& observed,
                                   const Dataset& latent);

/// empirical_report plus Monte-Carlo standard errors and the mean squared
/// error, for oracle comparisons against closed forms.
struct EmpiricalDetail {
  DiscrepancyReport report;
  double sld_res_se = 0.0;
  double sld_sq_se = 0.0;
  double cld_sq_se = 0.0;
  double mse = 0.0;
  double mse_se = 0.0;
};

EmpiricalDetail empirical_report_detailed(const LinearPredictor& pred,
                                          const Dataset& observed,
                                          const Dataset* latent = nullptr);

/// Uniformly random partition into 80% train (floor) and 20% test,
/// deterministic per seed. Requires n >= 5.
std::pair<Dataset, Dataset> split_80_20(const Dataset& ds, Seed seed);

}  // namespace lossdisc

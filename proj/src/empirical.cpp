#include "lossdisc/empirical.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lossdisc {

Dataset subset(const Dataset& ds, const std::vector<Eigen::Index>& indices) {
  Dataset out;
  out.features.resize(static_cast<Eigen::Index>(indices.size()), ds.dim());
  out.target.resize(static_cast<Eigen::Index>(indices.size()));
  out.group.resize(indices.size());
  out.standardized = ds.standardized;
  out.feature_names = ds.feature_names;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Eigen::Index r = indices[i];
    out.features.row(static_cast<Eigen::Index>(i)) = ds.features.row(r);
    out.target(static_cast<Eigen::Index>(i)) = ds.target(r);
    out.group[i] = ds.group[static_cast<std::size_t>(r)];
  }
  return out;
}

Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.dim() != b.dim()) {
    throw DimensionMismatch("concat: feature dimensions disagree");
  }
  if (a.standardized != b.standardized) {
    throw InvalidInput("concat: mixed standardization states");
  }
  Dataset out;
  out.features.resize(a.n() + b.n(), a.dim());
  out.features.topRows(a.n()) = a.features;
  out.features.bottomRows(b.n()) = b.features;
  out.target.resize(a.n() + b.n());
  out.target.head(a.n()) = a.target;
  out.target.tail(b.n()) = b.target;
  out.group = a.group;
  out.group.insert(out.group.end(), b.group.begin(), b.group.end());
  out.standardized = a.standardized;
  out.feature_names = a.feature_names;
  return out;
}

namespace {

// Matrix square root for sampling; tolerates PSD-singular covariances.
Mat sampling_root(const Mat& cov) {
  Eigen::SelfAdjointEigenSolver<Mat> es(cov);
  if (es.info() != Eigen::Success) {
    throw NotSpd("sampling_root: eigendecomposition failed");
  }
  const Vec clipped = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * clipped.asDiagonal();
}

// Fills an n x d matrix one column per substream.
Mat standard_normal_matrix(const Rng& base, std::uint64_t first_stream,
                           Eigen::Index n, Eigen::Index d) {
  Mat m(n, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    Rng col = base.fork(first_stream + static_cast<std::uint64_t>(j));
    for (Eigen::Index i = 0; i < n; ++i) {
      m(i, j) = col.normal();
    }
  }
  return m;
}

Mat sample_noise(const PopulationSpec& pop, const Rng& base,
                 std::uint64_t first_stream, Eigen::Index n) {
  const Eigen::Index d = pop.dim();
  switch (pop.noise.family) {
    case NoiseFamily::Gaussian: {
      if (pop.noise.cov.cwiseAbs().maxCoeff() == 0.0) {
        return Mat::Zero(n, d);
      }
      return standard_normal_matrix(base, first_stream, n, d) *
             sampling_root(pop.noise.cov).transpose();
    }
    case NoiseFamily::Laplace: {
      Mat m(n, d);
      for (Eigen::Index j = 0; j < d; ++j) {
        const double scale = std::sqrt(pop.noise.cov(j, j) / 2.0);
        Rng col = base.fork(first_stream + static_cast<std::uint64_t>(j));
        for (Eigen::Index i = 0; i < n; ++i) {
          m(i, j) = scale > 0.0 ? col.laplace(scale) : 0.0;
        }
      }
      return m;
    }
    case NoiseFamily::Discrete: {
      const Vec& support = pop.noise.discrete_support;
      const Vec& probs = pop.noise.discrete_probs;
      const double base_var = support.cwiseAbs2().dot(probs);
      Mat m(n, d);
      for (Eigen::Index j = 0; j < d; ++j) {
        const double scale =
            base_var > 0.0 ? std::sqrt(pop.noise.cov(j, j) / base_var) : 0.0;
        Rng col = base.fork(first_stream + static_cast<std::uint64_t>(j));
        for (Eigen::Index i = 0; i < n; ++i) {
          double u = col.uniform();
          Eigen::Index idx = 0;
          while (idx + 1 < probs.size() && u >= probs(idx)) {
            u -= probs(idx);
            ++idx;
          }
          m(i, j) = scale * support(idx);
        }
      }
      return m;
    }
  }
  throw InvalidSpec("sample_noise: unknown noise family");
}

}  // namespace

SampledData sample_dataset(const PopulationSpec& pop, std::size_t n, Seed seed) {
  if (n < 1) {
    throw InvalidInput("sample_dataset: n must be >= 1");
  }
  pop.validate();
  const Eigen::Index rows = static_cast<Eigen::Index>(n);
  const Eigen::Index d = pop.dim();
  const Rng base(seed);

  // Substream layout: 0 = group labels, 1..d = z columns, d+1..2d = noise
  // columns.
  Rng group_rng = base.fork(0);
  std::vector<std::uint8_t> group(n);
  for (std::size_t i = 0; i < n; ++i) {
    group[i] = group_rng.uniform() < pop.group1.weight ? 1 : 0;
  }

  const Mat xi = standard_normal_matrix(base, 1, rows, d);
  const Mat root0_t = sampling_root(pop.group0.cov).transpose();
  const Mat root1_t = sampling_root(pop.group1.cov).transpose();

  Mat z(rows, d);
  for (Eigen::Index i = 0; i < rows; ++i) {
    if (group[static_cast<std::size_t>(i)] == 1) {
      z.row(i) = pop.group1.mean.transpose() + xi.row(i) * root1_t;
    } else {
      z.row(i) = pop.group0.mean.transpose() + xi.row(i) * root0_t;
    }
  }

  const Mat u = sample_noise(pop, base, static_cast<std::uint64_t>(d) + 1, rows);

  SampledData out;
  out.latent.features = z;
  out.latent.target = z * pop.model.beta + Vec::Constant(rows, pop.model.alpha);
  out.latent.group = group;
  out.observed.features = z + u;
  out.observed.target = out.latent.target;
  out.observed.group = std::move(group);
  return out;
}

namespace {

struct GramSystem {
  Mat gram;      // A^T A for A = [features, group?, 1]
  Vec rhs;       // A^T y
  Eigen::Index p = 0;
};

GramSystem build_gram(const Dataset& ds, bool include_group) {
  const Eigen::Index n = ds.n();
  const Eigen::Index d = ds.dim();
  const Eigen::Index p = d + (include_group ? 1 : 0) + 1;

  Vec gv;
  if (include_group) {
    gv.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      gv(i) = static_cast<double>(ds.group[static_cast<std::size_t>(i)]);
    }
  }

  GramSystem sys;
  sys.p = p;
  sys.gram.setZero(p, p);
  sys.rhs.setZero(p);

  sys.gram.topLeftCorner(d, d) = ds.features.transpose() * ds.features;
  const Vec col_sums = ds.features.colwise().sum();
  sys.gram.block(0, p - 1, d, 1) = col_sums;
  sys.gram.block(p - 1, 0, 1, d) = col_sums.transpose();
  sys.gram(p - 1, p - 1) = static_cast<double>(n);
  sys.rhs.head(d) = ds.features.transpose() * ds.target;
  sys.rhs(p - 1) = ds.target.sum();

  if (include_group) {
    const Vec fg = ds.features.transpose() * gv;
    sys.gram.block(0, d, d, 1) = fg;
    sys.gram.block(d, 0, 1, d) = fg.transpose();
    sys.gram(d, d) = gv.squaredNorm();
    const double gsum = gv.sum();
    sys.gram(d, p - 1) = gsum;
    sys.gram(p - 1, d) = gsum;
    sys.rhs(d) = gv.dot(ds.target);
  }
  return sys;
}

}  // namespace

OlsDetail ols_fit_detailed(const Dataset& ds, bool include_group) {
  const Eigen::Index n = ds.n();
  const Eigen::Index d = ds.dim();
  if (ds.group.size() != static_cast<std::size_t>(n)) {
    throw MissingGroup("ols_fit: dataset has no group labels");
  }
  if (n <= d + 2) {
    throw InvalidInput("ols_fit: need n > d + 2 rows");
  }
  const GramSystem sys = build_gram(ds, include_group);

  Eigen::SelfAdjointEigenSolver<Mat> es(sys.gram);
  if (es.info() != Eigen::Success ||
      es.eigenvalues().minCoeff() <= 1e-9 * es.eigenvalues().maxCoeff()) {
    throw RankDeficient("ols_fit: design matrix is collinear");
  }
  Eigen::LDLT<Mat> ldlt(sys.gram);
  const Vec theta = ldlt.solve(sys.rhs);

  OlsDetail out;
  out.predictor.beta_hat = theta.head(d);
  out.predictor.alpha_hat = theta(sys.p - 1);
  out.predictor.mode = include_group ? Mode::WithGroup : Mode::NoGroup;
  if (include_group) {
    out.predictor.beta_g = theta(d);
  }

  const double ssr = std::max(
      0.0, ds.target.squaredNorm() - 2.0 * theta.dot(sys.rhs) +
               theta.dot(sys.gram * theta));
  out.sigma_sq = ssr / static_cast<double>(n - sys.p);
  const Mat gram_inv = ldlt.solve(Mat::Identity(sys.p, sys.p));
  out.std_errors = (out.sigma_sq * gram_inv.diagonal()).cwiseMax(0.0).cwiseSqrt();
  return out;
}

LinearPredictor ols_fit(const Dataset& ds, bool include_group) {
  return ols_fit_detailed(ds, include_group).predictor;
}

Dataset inject_noise(const Dataset& ds, double sigma_sq, Seed seed) {
  if (sigma_sq < 0.0) {
    throw InvalidInput("inject_noise: sigma_sq must be >= 0");
  }
  Dataset out = ds;
  if (sigma_sq == 0.0) {
    return out;
  }
  const double sd = std::sqrt(sigma_sq);
  const Rng base(seed);
  for (Eigen::Index j = 0; j < out.dim(); ++j) {
    Rng col = base.fork(static_cast<std::uint64_t>(j));
    for (Eigen::Index i = 0; i < out.n(); ++i) {
      out.features(i, j) += sd * col.normal();
    }
  }
  return out;
}

Dataset omit_features(const Dataset& ds, const std::vector<int>& order, int k,
                      Seed seed) {
  const Eigen::Index d = ds.dim();
  if (order.size() != static_cast<std::size_t>(d)) {
    throw InvalidPermutation("omit_features: order must cover every feature");
  }
  std::vector<bool> seen(static_cast<std::size_t>(d), false);
  for (int c : order) {
    if (c < 0 || c >= d || seen[static_cast<std::size_t>(c)]) {
      throw InvalidPermutation("omit_features: order is not a permutation");
    }
    seen[static_cast<std::size_t>(c)] = true;
  }
  if (k < 0 || k > d) {
    throw InvalidInput("omit_features: k out of range");
  }
  Dataset out = ds;
  const double sd = std::sqrt(kOmitNoiseVar);
  const Rng base(seed);
  for (int idx = 0; idx < k; ++idx) {
    const Eigen::Index j = order[static_cast<std::size_t>(idx)];
    Rng col = base.fork(static_cast<std::uint64_t>(j));
    for (Eigen::Index i = 0; i < out.n(); ++i) {
      out.features(i, j) += sd * col.normal();
    }
  }
  return out;
}

std::pair<Dataset, Dataset> standardize(const Dataset& train,
                                        const Dataset& apply_to) {
  const Eigen::Index n = train.n();
  const Eigen::Index d = train.dim();
  if (n < 1) {
    throw EmptyInput("standardize: empty training dataset");
  }
  if (apply_to.dim() != d) {
    throw DimensionMismatch("standardize: feature dimensions disagree");
  }

  const Vec mean = train.features.colwise().mean();
  Vec sd(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double var =
        (train.features.col(j).array() - mean(j)).square().mean();
    sd(j) = std::sqrt(var);
    if (!(sd(j) > 1e-12 * (1.0 + std::abs(mean(j))))) {
      throw ZeroVariance("standardize: constant feature column " +
                         std::to_string(j));
    }
  }
  const double y_mean = train.target.mean();
  const double y_var = (train.target.array() - y_mean).square().mean();
  const double y_sd = std::sqrt(y_var);
  if (!(y_sd > 1e-12 * (1.0 + std::abs(y_mean)))) {
    throw ZeroVariance("standardize: constant target");
  }

  const auto apply = [&](const Dataset& ds) {
    Dataset out = ds;
    out.features = (ds.features.rowwise() - mean.transpose()) *
                   sd.cwiseInverse().asDiagonal();
    out.target = (ds.target.array() - y_mean) / y_sd;
    out.standardized = true;
    return out;
  };
  return {apply(train), apply(apply_to)};
}

namespace {

struct GroupStats {
  double mean0 = 0.0, mean1 = 0.0;
  double var0 = 0.0, var1 = 0.0;
  Eigen::Index n0 = 0, n1 = 0;

  double diff() const { return mean1 - mean0; }
  double se() const {
    return std::sqrt(var0 / static_cast<double>(n0) +
                     var1 / static_cast<double>(n1));
  }
};

GroupStats per_group(const Vec& values, const std::vector<std::uint8_t>& group) {
  GroupStats s;
  double sum0 = 0.0, sum1 = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (group[static_cast<std::size_t>(i)] == 1) {
      sum1 += values(i);
      ++s.n1;
    } else {
      sum0 += values(i);
      ++s.n0;
    }
  }
  if (s.n0 == 0 || s.n1 == 0) {
    throw GroupEmpty("empirical_report: one group has zero rows");
  }
  s.mean0 = sum0 / static_cast<double>(s.n0);
  s.mean1 = sum1 / static_cast<double>(s.n1);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const double c = values(i);
    if (group[static_cast<std::size_t>(i)] == 1) {
      s.var1 += (c - s.mean1) * (c - s.mean1);
    } else {
      s.var0 += (c - s.mean0) * (c - s.mean0);
    }
  }
  if (s.n0 > 1) s.var0 /= static_cast<double>(s.n0 - 1);
  if (s.n1 > 1) s.var1 /= static_cast<double>(s.n1 - 1);
  return s;
}

Vec predictions(const LinearPredictor& pred, const Dataset& ds) {
  Vec yhat = ds.features * pred.beta_hat + Vec::Constant(ds.n(), pred.alpha_hat);
  const double bg = pred.group_coef();
  if (bg != 0.0) {
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
      yhat(i) += bg * static_cast<double>(ds.group[static_cast<std::size_t>(i)]);
    }
  }
  return yhat;
}

}  // namespace

EmpiricalDetail empirical_report_detailed(const LinearPredictor& pred,
                                          const Dataset& observed,
                                          const Dataset* latent) {
  const Eigen::Index n = observed.n();
  if (pred.beta_hat.size() != observed.dim()) {
    throw DimensionMismatch("empirical_report: predictor dimension mismatch");
  }
  if (observed.group.size() != static_cast<std::size_t>(n)) {
    throw MissingGroup("empirical_report: dataset has no group labels");
  }

  const Vec resid = observed.target - predictions(pred, observed);
  const Vec sq = resid.cwiseAbs2();
  const GroupStats rs = per_group(resid, observed.group);
  const GroupStats ss = per_group(sq, observed.group);

  EmpiricalDetail out;
  out.report.mode = pred.mode;
  out.report.source = Source::Empirical;
  out.report.signed_sld_res = rs.diff();
  out.report.sld_res = std::abs(rs.diff());
  out.report.sld_sq = std::abs(ss.diff());
  out.sld_res_se = rs.se();
  out.sld_sq_se = ss.se();
  out.mse = sq.mean();
  out.mse_se = std::sqrt(std::max(0.0, (sq.array() - out.mse).square().mean() /
                                           static_cast<double>(n)));

  if (pred.mode == Mode::WithGroup) {
    // Counterfactual residual difference of a linear predictor is its group
    // coefficient, independent of the features.
    out.report.cld_res = std::abs(pred.group_coef());
    if (latent != nullptr) {
      if (latent->n() != n || latent->dim() != observed.dim()) {
        throw DimensionMismatch("empirical_report: latent/observed mismatch");
      }
      // Per-individual |E[loss | z, g=0] - E[loss | z, g=1]| for squared
      // loss. The feature-noise variance enters both counterfactuals
      // identically and cancels, leaving the noise-free evaluation at z.
      const Vec base = latent->features * pred.beta_hat +
                       Vec::Constant(n, pred.alpha_hat);
      const double bg = pred.group_coef();
      double acc = 0.0, acc2 = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double r0 = latent->target(i) - base(i);
        const double r1 = r0 - bg;
        const double diff = std::abs(r0 * r0 - r1 * r1);
        acc += diff;
        acc2 += diff * diff;
      }
      const double mean = acc / static_cast<double>(n);
      out.report.cld_sq = mean;
      out.cld_sq_se = std::sqrt(
          std::max(0.0, (acc2 / static_cast<double>(n) - mean * mean) /
                            static_cast<double>(n)));
    }
  }
  return out;
}

DiscrepancyReport empirical_report(const LinearPredictor& pred,
                                   const Dataset& ds) {
  return empirical_report_detailed(pred, ds, nullptr).report;
}

DiscrepancyReport empirical_report(const LinearPredictor& pred,
                                   const Dataset& observed,
                                   const Dataset& latent) {
  return empirical_report_detailed(pred, observed, &latent).report;
}

std::pair<Dataset, Dataset> split_80_20(const Dataset& ds, Seed seed) {
  const Eigen::Index n = ds.n();
  if (n < 5) {
    throw InvalidInput("split_80_20: need at least 5 rows");
  }
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng{seed};
  for (std::size_t i = idx.size() - 1; i > 0; --i) {
    const std::size_t j =
        static_cast<std::size_t>(rng.uniform() * static_cast<double>(i + 1));
    std::swap(idx[i], idx[std::min(j, i)]);
  }
  const std::size_t n_train = static_cast<std::size_t>(
      std::floor(0.8 * static_cast<double>(n)));
  std::vector<Eigen::Index> train_idx(idx.begin(),
                                      idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<Eigen::Index> test_idx(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                                     idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {subset(ds, train_idx), subset(ds, test_idx)};
}

}  // namespace lossdisc

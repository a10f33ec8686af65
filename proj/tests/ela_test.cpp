#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "aaslab/ela.hpp"
#include "aaslab/generator.hpp"

using namespace aaslab;
using namespace aaslab::ela;

namespace {

PointMatrix box_sample(std::size_t n, std::size_t d, std::uint64_t seed = 0) {
  return sobol_points(SampleDesign::box(n, d, -5.0, 5.0, seed));
}

template <typename F>
std::vector<double> evaluate(const PointMatrix& x, F&& f) {
  std::vector<double> y(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) y[static_cast<std::size_t>(i)] = f(row_span(x, i));
  return y;
}

FeatureVector toy_vector(int id, std::vector<double> values) {
  FeatureVector v;
  v.problem_id = id;
  for (std::size_t i = 0; i < values.size(); ++i) v.names.push_back("f" + std::to_string(i + 1));
  v.values.assign(values.size(), 0.0);
  v.feasible.assign(values.size(), 0);
  for (std::size_t i = 0; i < values.size(); ++i) v.set(i, values[i]);
  return v;
}

}  // namespace

TEST(Catalog, UniqueNamesAndGroupSizes) {
  const auto& cat = catalog();
  std::set<std::string> names(cat.names.begin(), cat.names.end());
  EXPECT_EQ(names.size(), cat.names.size());
  ASSERT_EQ(cat.groups.size(), 6u);
  const std::size_t sizes[] = {9, 3, 9, 5, 16, 5};
  for (std::size_t g = 0; g < 6; ++g) EXPECT_EQ(cat.groups[g].features.size(), sizes[g]) << cat.groups[g].name;
  EXPECT_NE(cat.version.find("pca and limo omitted"), std::string::npos);
}

TEST(Features, MatchIndependentReference) {
  // numpy least squares, scipy.stats skew/kurtosis, scipy pdist for the
  // distance-based groups; scipy Sobol rows 1..200 mapped to [-5, 5]^2, sorted
  // lexicographically so nearest-better ties resolve to the same neighbour
  const auto x = box_sample(200, 2);
  const auto y = evaluate(x, [](std::span<const double> p) {
    return p[0] * p[0] + 3.0 * p[0] * p[1] + std::sin(3.0 * p[1]) + 0.5 * p[1];
  });
  const auto fv = compute_features(x, y);
  const std::pair<const char*, double> expected[] = {
      {"ela_meta.lin_simple.adj_r2", -0.0034305372744065643},
      {"ela_meta.lin_simple.intercept", 8.172135981808196},
      {"ela_meta.lin_simple.coef.min", 0.0489108534597959},
      {"ela_meta.lin_simple.coef.max", 0.7301306660829495},
      {"ela_meta.lin_simple.coef.max_by_min", 14.927784212211868},
      {"ela_meta.lin_w_interact.adj_r2", 0.916755604621799},
      {"ela_meta.quad_simple.adj_r2", 0.07321957412000968},
      {"ela_meta.quad_simple.cond", 8.370235641408316},
      {"ela_meta.quad_w_interact.adj_r2", 0.9992230567271653},
      {"ela_distr.skewness", 0.6972696277957748},
      {"ela_distr.kurtosis", 0.5981170481636471},
      {"disp.ratio_mean_02", 0.21240117811300827},
      {"disp.ratio_median_02", 0.21600225363896725},
      {"disp.diff_mean_02", -4.10200969743574},
      {"disp.diff_median_02", -4.029475046914161},
      {"disp.ratio_mean_05", 1.3185529676408905},
      {"disp.ratio_median_05", 2.092147098662024},
      {"disp.diff_mean_05", 1.6591027387257293},
      {"disp.diff_median_05", 5.613255270241244},
      {"disp.ratio_mean_10", 1.2082249685091304},
      {"disp.ratio_median_10", 1.8498327082683321},
      {"disp.diff_mean_10", 1.0844871987318188},
      {"disp.diff_median_10", 4.367843795359319},
      {"disp.ratio_mean_25", 1.0880258697624647},
      {"disp.ratio_median_25", 1.3012151295265082},
      {"disp.diff_mean_25", 0.45846052756368394},
      {"disp.diff_median_25", 1.5481407361356778},
      {"nbc.nb_nn.sd_ratio", 4.5518496079773385},
      {"nbc.nb_nn.mean_ratio", 1.3065785614521326},
      {"nbc.nb_fitness.cor", -0.13290875040432146},
      {"nbc.nb.coeff_var", 1.2097011163323608},
      {"nbc.indegree_fitness.cor", -0.21851166221089682},
  };
  for (const auto& [name, value] : expected) {
    ASSERT_TRUE(fv.is_feasible(name)) << name;
    EXPECT_NEAR(fv.at(name), value, 1e-9 * std::max(1.0, std::abs(value))) << name;
  }
  for (std::size_t i = 0; i < fv.size(); ++i) EXPECT_TRUE(fv.feasible[i]) << fv.names[i];
}

TEST(Features, ExactLinearFit) {
  const auto x = box_sample(100, 2, 3);
  const auto y = evaluate(x, [](std::span<const double> p) { return 3.0 + 2.0 * p[0]; });
  const auto fv = compute_features(x, y);
  EXPECT_NEAR(fv.at("ela_meta.lin_simple.adj_r2"), 1.0, 1e-9);
  EXPECT_NEAR(fv.at("ela_meta.lin_simple.intercept"), 3.0, 1e-9);
  EXPECT_NEAR(fv.at("ela_meta.lin_simple.coef.max"), 2.0, 1e-9);
}

TEST(Features, AntitheticValuesHaveZeroSkewness) {
  const auto half = box_sample(60, 2, 4);
  PointMatrix x(120, 2);
  std::vector<double> y(120);
  for (Eigen::Index i = 0; i < 60; ++i) {
    x.row(i) = half.row(i);
    x.row(i + 60) = -half.row(i);
    const double v = half(i, 0) + 0.3 * half(i, 1);
    y[static_cast<std::size_t>(i)] = v;
    y[static_cast<std::size_t>(i + 60)] = -v;
  }
  EXPECT_NEAR(compute_features(x, y).at("ela_distr.skewness"), 0.0, 1e-9);
}

TEST(Features, ConstantFunctionFlagsInfeasible) {
  const auto x = box_sample(100, 2, 5);
  const std::vector<double> y(100, 4.0);
  const auto fv = compute_features(x, y);
  for (const char* name : {"ela_distr.skewness", "ela_distr.kurtosis", "nbc.nb_nn.sd_ratio", "nbc.nb_nn.mean_ratio",
                           "nbc.nb_fitness.cor", "nbc.indegree_fitness.cor", "ela_meta.lin_simple.adj_r2"}) {
    EXPECT_FALSE(fv.is_feasible(name)) << name;
    EXPECT_TRUE(std::isnan(fv.at(name))) << name;
  }
  EXPECT_TRUE(fv.is_feasible("ic.m0"));
  EXPECT_EQ(fv.at("ic.m0"), 0.0);
}

TEST(Features, SphereBestPointsCluster) {
  const auto x = box_sample(1000, 2);
  const auto y = evaluate(x, [](std::span<const double> p) { return p[0] * p[0] + p[1] * p[1]; });
  EXPECT_LT(compute_features(x, y).at("disp.ratio_mean_05"), 1.0);
  const auto self = dispersion(x, y, 1.0);
  EXPECT_NEAR(self.ratio_mean, 1.0, 1e-9);
  EXPECT_NEAR(self.ratio_median, 1.0, 1e-9);
  EXPECT_NEAR(self.diff_mean, 0.0, 1e-9);
}

TEST(Features, InformationContentBounds) {
  const auto x = box_sample(200, 2, 6);
  const auto y = evaluate(x, [](std::span<const double> p) { return std::sin(2 * p[0]) * std::cos(p[1]) + 0.1 * p[0]; });
  const auto ic = information_content(x, y);
  EXPECT_GE(ic.m0, 0.0);
  EXPECT_LE(ic.m0, 1.0);
  EXPECT_GE(ic.h_max, 0.0);
  EXPECT_LE(ic.h_max, std::log2(6.0));
  ASSERT_EQ(ic.eps.front(), 0.0);
  for (std::size_t i = 1; i < ic.eps.size(); ++i) EXPECT_GT(ic.eps[i], ic.eps[i - 1]);
  EXPECT_EQ(ic.eps.size(), 101u);
}

TEST(Features, RowOrderDoesNotMatter) {
  const auto x = box_sample(150, 3, 7);
  const auto y = evaluate(x, [](std::span<const double> p) { return p[0] * p[0] - p[1] + std::abs(p[2]); });
  PointMatrix xr = x.colwise().reverse();
  std::vector<double> yr(y.rbegin(), y.rend());
  const auto a = compute_features(x, y), b = compute_features(xr, yr);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.feasible[i], b.feasible[i]) << a.names[i];
    if (a.feasible[i]) EXPECT_EQ(a.values[i], b.values[i]) << a.names[i];
  }
}

TEST(Features, AffineValueTransformInvariance) {
  ComponentFactory factory(21);
  const auto x = box_sample(200, 2, 8);
  const char* invariant[] = {"ela_distr.skewness",        "ela_meta.lin_simple.adj_r2", "ela_meta.quad_w_interact.adj_r2",
                             "ela_level.mmce_lda_10",     "ela_level.mmce_qda_25",      "ela_level.qda_lda_50",
                             "nbc.nb_nn.sd_ratio",        "nbc.nb_nn.mean_ratio",       "nbc.nb_fitness.cor",
                             "disp.ratio_mean_05",        "disp.ratio_median_25"};
  for (int id = 1; id <= 5; ++id) {
    const auto f = bind_problem(generate_problem(2, 3, 21, id), factory);
    const auto y = evaluate(x, f);
    std::vector<double> z(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) z[i] = 3.7 * y[i] + 12.0;
    const auto a = compute_features(x, y), b = compute_features(x, z);
    for (const char* name : invariant) {
      ASSERT_EQ(a.is_feasible(name), b.is_feasible(name)) << name;
      if (a.is_feasible(name)) EXPECT_NEAR(a.at(name), b.at(name), 1e-6) << name << " problem " << id;
    }
  }
}

TEST(Features, SampleSizeAndValueChecks) {
  const auto x = box_sample(99, 2);
  std::vector<double> y(99, 1.0);
  try {
    compute_features(x, y);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::sample_size);
  }
  const auto x2 = box_sample(100, 2);
  std::vector<double> y2(100, 1.0);
  y2[3] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(compute_features(x2, y2), Error);
  EXPECT_EQ(minimum_sample_size(5), 250u);
}

TEST(Averaging, MeanAndInfeasibility) {
  auto a = toy_vector(1, {0.2, 1.0, 5.0});
  auto b = toy_vector(1, {0.4, kNaN, 5.0});
  const auto avg = average_feature_repetitions({a, b});
  EXPECT_NEAR(avg.values[0], 0.3, 1e-15);
  EXPECT_FALSE(avg.feasible[1]);
  EXPECT_EQ(avg.values[2], 5.0);
  const auto same = average_feature_repetitions({a, a, a, a, a});
  EXPECT_EQ(same.values, a.values);
  EXPECT_THROW(average_feature_repetitions({a, toy_vector(2, {0, 0, 0})}), Error);
  EXPECT_THROW(average_feature_repetitions({}), Error);
}

TEST(Pruning, DuplicateFeatureRemovesLaterEntry) {
  Rng rng(1);
  std::vector<FeatureVector> vs;
  for (int i = 0; i < 30; ++i) {
    const double f1 = uniform_open01(rng), f3 = uniform_open01(rng);
    vs.push_back(toy_vector(i, {f1, f1, f3}));
  }
  const auto kept = prune_features(FeatureMatrix::from_vectors(vs));
  EXPECT_EQ(kept, (std::vector<std::string>{"f1", "f3"}));
}

TEST(Pruning, UncorrelatedIsIdentityAndNaNIsDropped) {
  Rng rng(2);
  std::vector<FeatureVector> vs;
  for (int i = 0; i < 40; ++i) vs.push_back(toy_vector(i, {uniform_open01(rng), uniform_open01(rng), uniform_open01(rng)}));
  auto m = FeatureMatrix::from_vectors(vs);
  EXPECT_EQ(prune_features(m).size(), 3u);
  m.rows[7][1] = kNaN;
  m.feasible[7][1] = 0;
  EXPECT_EQ(prune_features(m), (std::vector<std::string>{"f1", "f3"}));
  for (auto& f : m.feasible) std::fill(f.begin(), f.end(), 0);
  try {
    prune_features(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::pruning);
  }
}

TEST(Pruning, NoRetainedPairAboveThreshold) {
  for (int trial = 0; trial < 50; ++trial) {
    Rng rng(derive_seed(3, "prune-trial", trial));
    std::vector<FeatureVector> vs;
    std::vector<std::vector<double>> latent(30, std::vector<double>(4));
    for (auto& l : latent)
      for (auto& v : l) v = standard_normal(rng);
    for (int i = 0; i < 30; ++i) {
      std::vector<double> row(20);
      for (std::size_t j = 0; j < 20; ++j)
        row[j] = latent[static_cast<std::size_t>(i)][j % 4] + 0.2 * static_cast<double>(j / 4) * standard_normal(rng);
      vs.push_back(toy_vector(i, row));
    }
    const auto m = FeatureMatrix::from_vectors(vs);
    const auto kept = prune_features(m);
    EXPECT_EQ(kept, prune_features(m));
    for (std::size_t a = 0; a < kept.size(); ++a)
      for (std::size_t b = a + 1; b < kept.size(); ++b) {
        const auto ca = m.column(static_cast<std::size_t>(std::stoi(kept[a].substr(1)) - 1));
        const auto cb = m.column(static_cast<std::size_t>(std::stoi(kept[b].substr(1)) - 1));
        EXPECT_LE(std::abs(pearson(ca, cb)), 0.9) << kept[a] << " " << kept[b];
      }
  }
}

TEST(Normalization, EndpointsConstantsAndClipping) {
  std::vector<FeatureVector> vs{toy_vector(1, {0.0, 2.0, 7.0}), toy_vector(2, {10.0, 2.0, 7.0}),
                                toy_vector(3, {4.0, 2.0, kNaN})};
  const auto b = fit_minmax(FeatureMatrix::from_vectors(vs), 2, "toy");
  EXPECT_EQ(b.min[0], 0.0);
  EXPECT_EQ(b.max[0], 10.0);
  EXPECT_EQ(b.min[2], 7.0);
  EXPECT_EQ(apply_minmax(vs[0], b).values[0], 0.0);
  EXPECT_EQ(apply_minmax(vs[1], b).values[0], 1.0);
  EXPECT_EQ(apply_minmax(toy_vector(4, {5.0, 2.0, 7.0}), b).values[0], 0.5);
  EXPECT_EQ(apply_minmax(vs[0], b).values[1], 0.5);
  const auto out = apply_minmax(toy_vector(5, {-3.0, 9.0, 7.5}), b);
  EXPECT_EQ(out.values[0], 0.0);
  EXPECT_EQ(out.values[1], 0.5);
  EXPECT_EQ(out.values[2], 0.5);
  EXPECT_TRUE(out.normalized);
  EXPECT_EQ(apply_minmax(toy_vector(6, {12.0, 2.0, 7.0}), b).values[0], 1.0);
  EXPECT_FALSE(apply_minmax(vs[2], b).feasible[2]);

  const auto back = NormalizationBounds::from_json(nlohmann::json::parse(b.to_json().dump()));
  EXPECT_EQ(back.names, b.names);
  EXPECT_EQ(back.min, b.min);
  EXPECT_EQ(back.max, b.max);
}

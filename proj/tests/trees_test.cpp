#include <gtest/gtest.h>

#include <cmath>

#include "aaslab/trees.hpp"

using namespace aaslab;
using namespace aaslab::ml;

namespace {

// three classes by quadrant of the first two features, a noise feature third
Dataset quadrant_data(std::size_t n, std::uint64_t seed) {
  Dataset d;
  d.classes = {"A", "B", "C"};
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = uniform_open01(rng), b = uniform_open01(rng), c = uniform_open01(rng);
    d.x.push_back({a, b, c});
    d.y.push_back(a < 0.5 ? 0 : (b < 0.3 ? 1 : 2));
  }
  return d;
}

double training_accuracy(const Classifier& m, const Dataset& d) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < d.rows(); ++i) ok += m.predict_index(d.x[i]) == d.y[i];
  return static_cast<double>(ok) / static_cast<double>(d.rows());
}

}  // namespace

TEST(Boosting, FitsSeparableDataExactly) {
  const auto d = quadrant_data(200, 1);
  const auto m = train_gbdt(d);
  EXPECT_EQ(m.kind, ModelKind::gbdt);
  EXPECT_EQ(m.trees.size(), 100u * 3u);
  for (const auto& t : m.trees) EXPECT_LE(t.depth(), 6u);
  EXPECT_EQ(training_accuracy(m, d), 1.0);
  EXPECT_EQ(m.predict(std::vector<double>{0.1, 0.9, 0.5}), "A");
  EXPECT_EQ(m.predict(std::vector<double>{0.9, 0.1, 0.5}), "B");
  EXPECT_EQ(m.predict(std::vector<double>{0.9, 0.9, 0.5}), "C");
}

TEST(Boosting, MemorizesNoisyLabels) {
  Dataset d;
  d.classes = {"A", "B"};
  Rng rng(5);
  for (int i = 0; i < 120; ++i) {
    d.x.push_back({uniform_open01(rng), uniform_open01(rng)});
    d.y.push_back(uniform_index(rng, 2));
  }
  EXPECT_EQ(training_accuracy(train_gbdt(d), d), 1.0);
}

TEST(Boosting, SingleLabelGivesConstantModel) {
  Dataset d;
  d.classes = {"A", "B", "C"};
  d.x = {{0.1}, {0.2}, {0.9}};
  d.y = {2, 2, 2};
  const auto m = train_gbdt(d);
  EXPECT_EQ(m.kind, ModelKind::constant);
  EXPECT_EQ(m.predict(std::vector<double>{0.5}), "C");
  EXPECT_EQ(train_forest(d, {}, 1).kind, ModelKind::constant);
}

TEST(Boosting, DeterministicAndJsonRoundTripIsBitExact) {
  const auto d = quadrant_data(150, 2);
  BoostingParams p;
  p.rounds = 30;
  const auto a = train_gbdt(d, p);
  const auto b = train_gbdt(d, p);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  const auto back = Classifier::from_json(nlohmann::json::parse(a.to_json().dump()));
  Rng rng(3);
  for (int probe = 0; probe < 1000; ++probe) {
    const std::vector<double> x{uniform_open01(rng), uniform_open01(rng), uniform_open01(rng)};
    ASSERT_EQ(a.predict_index(x), back.predict_index(x));
    for (std::size_t t = 0; t < a.trees.size(); ++t) ASSERT_EQ(a.trees[t].evaluate(x), back.trees[t].evaluate(x));
  }
}

TEST(Boosting, NaNFeaturesAreTreatedAsHalf) {
  const auto d = quadrant_data(200, 1);
  const auto m = train_gbdt(d);
  EXPECT_EQ(m.predict_index(std::vector<double>{std::nan(""), 0.9, 0.2}),
            m.predict_index(std::vector<double>{0.5, 0.9, 0.2}));
  EXPECT_THROW(m.predict_index(std::vector<double>{0.5}), Error);
}

TEST(Forest, FitsAndIsSeeded) {
  const auto d = quadrant_data(200, 4);
  const auto a = train_forest(d, {}, 9);
  EXPECT_EQ(a.kind, ModelKind::forest);
  EXPECT_EQ(a.trees.size(), 100u);
  EXPECT_GE(training_accuracy(a, d), 0.97);
  EXPECT_EQ(a.to_json().dump(), train_forest(d, {}, 9).to_json().dump());
  EXPECT_NE(a.to_json().dump(), train_forest(d, {}, 10).to_json().dump());
  const auto back = Classifier::from_json(nlohmann::json::parse(a.to_json().dump()));
  for (const auto& x : d.x) EXPECT_EQ(a.predict_index(x), back.predict_index(x));
}

TEST(Dataset, ValidationErrors) {
  Dataset d;
  d.classes = {"A"};
  EXPECT_THROW(train_gbdt(d), Error);
  d.x = {{0.1}, {0.2, 0.3}};
  d.y = {0, 0};
  EXPECT_THROW(train_gbdt(d), Error);
  d.x = {{0.1}, {0.2}};
  d.y = {0, 1};
  EXPECT_THROW(train_gbdt(d), Error);
  EXPECT_THROW(Classifier::from_json(nlohmann::json{{"kind", "gbdt"}}), Error);
}

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "aaslab/functions.hpp"

using namespace aaslab;

TEST(Registry, IdsContiguousNamesUnique) {
  const auto& reg = registry();
  ASSERT_GE(reg.size(), 10u);
  std::set<std::string_view> names;
  for (std::size_t i = 0; i < reg.size(); ++i) {
    EXPECT_EQ(reg[i].id, static_cast<int>(i + 1));
    names.insert(reg[i].name);
    EXPECT_EQ(&component_function(reg[i].id), &reg[i]);
  }
  EXPECT_EQ(names.size(), reg.size());
}

TEST(Registry, CoversAllGroups) {
  std::set<FunctionGroup> groups;
  for (const auto& f : registry()) groups.insert(f.group);
  EXPECT_EQ(groups.size(), 5u);
}

TEST(Registry, UnknownIdIsRegistryError) {
  for (int id : {0, -1, static_cast<int>(registry_size()) + 1}) {
    try {
      component_function(id);
      FAIL() << id;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::registry);
    }
  }
}

class KernelTest : public ::testing::TestWithParam<int> {};

TEST_P(KernelTest, DeterministicAndFinite) {
  const auto& fn = component_function(GetParam());
  for (std::size_t d : {1u, 2u, 5u}) {
    const auto f = fn.bind(d);
    const auto g = fn.bind(d);
    Rng rng(derive_seed(1, "kernel-probe", fn.id, d));
    std::vector<double> z(d);
    for (int t = 0; t < 200; ++t) {
      for (auto& v : z) v = uniform(rng, -9.0, 9.0);
      const double a = f(z);
      EXPECT_TRUE(std::isfinite(a)) << fn.name << " d=" << d;
      EXPECT_EQ(a, f(z));
      EXPECT_EQ(a, g(z));
    }
  }
}

TEST_P(KernelTest, OriginIsNotBeatenByProbes) {
  // schwefel and lunacek place their global optimum off the origin
  const auto& fn = component_function(GetParam());
  if (fn.name == "schwefel" || fn.name == "lunacek-bi-rastrigin") GTEST_SKIP();
  for (std::size_t d : {1u, 2u, 5u}) {
    const auto f = fn.bind(d);
    const double f0 = f(std::vector<double>(d, 0.0));
    Rng rng(derive_seed(2, "kernel-probe", fn.id, d));
    std::vector<double> z(d);
    for (int t = 0; t < 500; ++t) {
      for (auto& v : z) v = uniform(rng, -9.0, 9.0);
      EXPECT_GE(f(z), f0 - 1e-9) << fn.name << " d=" << d;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(AllComponents, KernelTest, ::testing::Range(1, static_cast<int>(registry_size()) + 1));

TEST(Kernels, SphereByHand) {
  const auto f = component_function(1).bind(2);
  EXPECT_EQ(f(std::vector<double>{1.0, 0.0}), 1.0);
  EXPECT_EQ(f(std::vector<double>{3.0, 4.0}), 25.0);
}

#pragma once

#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "aaslab/common.hpp"
#include "aaslab/functions.hpp"
#include "aaslab/sampling.hpp"

namespace aaslab {

inline constexpr double kDomainLo = -5.0;
inline constexpr double kDomainHi = 5.0;
inline constexpr double kLogFloor = -8.0;     // log10 precision floor
inline constexpr double kLogCeiling = 2.0;    // target log10 precision after rescaling
inline constexpr double kPrecisionEps = 1e-12;

/// One seeded instance of a registry function in a given dimension.
struct ComponentInstance {
  int component_id = 0;
  int instance_id = 0;
  std::size_t dim = 0;
  std::vector<double> shift;  // native optimum location, in [-4, 4]^d
  Eigen::MatrixXd rotation;   // orthogonal
  double raw_optimum_value = 0.0;
  double scale_factor = std::numeric_limits<double>::quiet_NaN();  // log10 of max precision
  Kernel kernel;

  std::string key() const { return scale_key(component_id, instance_id, dim); }

  static std::string scale_key(int component_id, int instance_id, std::size_t dim) {
    return std::to_string(component_id) + "." + std::to_string(instance_id) + "." + std::to_string(dim);
  }
};

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs
/// of R's diagonal folded into Q.
inline Eigen::MatrixXd random_rotation(std::size_t d, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) g(i, j) = standard_normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < n; ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  return q;
}

/// Shift and rotation of (component, instance, d); scale factor left unset.
inline ComponentInstance make_component_instance(int component_id, int instance_id, std::size_t d,
                                                 std::uint64_t master_seed, int instance_pool_size = 100) {
  const auto& fn = component_function(component_id);
  if (instance_id < 1 || instance_id > instance_pool_size)
    fail(ErrorKind::domain, "instance id " + std::to_string(instance_id) + " outside [1, " +
                                std::to_string(instance_pool_size) + "]");
  if (d < 1) fail(ErrorKind::domain, "dimension must be >= 1");

  ComponentInstance ci;
  ci.component_id = component_id;
  ci.instance_id = instance_id;
  ci.dim = d;
  Rng shift_rng(derive_seed(master_seed, "instance-shift", component_id, instance_id, d));
  ci.shift.resize(d);
  for (auto& v : ci.shift) v = uniform(shift_rng, -4.0, 4.0);
  if (fn.rotated) {
    Rng rot_rng(derive_seed(master_seed, "instance-rotation", component_id, instance_id, d));
    ci.rotation = random_rotation(d, rot_rng);
  } else {
    ci.rotation = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  }
  ci.kernel = fn.bind(d);
  const std::vector<double> origin(d, 0.0);
  ci.raw_optimum_value = ci.kernel(origin);
  return ci;
}

/// p(x) = f(R (x - x*)) - f_opt, clamped at zero.
inline double component_precision(const ComponentInstance& ci, std::span<const double> optimum,
                                  std::span<const double> x) {
  const std::size_t d = ci.dim;
  if (x.size() != d || optimum.size() != d)
    fail(ErrorKind::domain, "point dimension " + std::to_string(x.size()) + " does not match component dimension " +
                                std::to_string(d));
  double small[16];
  std::vector<double> large;
  double* z = small;
  if (d > 16) {
    large.resize(d);
    z = large.data();
  }
  for (std::size_t i = 0; i < d; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j)
      acc += ci.rotation(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * (x[j] - optimum[j]);
    z[i] = acc;
  }
  const double p = ci.kernel(std::span<const double>(z, d)) - ci.raw_optimum_value;
  return p > 0.0 ? p : 0.0;
}

/// log10 of the largest precision over a Sobol sample of [-5, 5]^d, with the
/// optimum at the instance's own shift.
inline double estimate_scale_factor(const ComponentInstance& ci, std::size_t sample_size) {
  if (sample_size < 2) fail(ErrorKind::domain, "scale-factor sample needs at least 2 points");
  constexpr std::uint64_t kScaleSampleSeed = 0x5ca1ef4c7011ULL;
  const auto pts = sobol_points(SampleDesign::box(sample_size, ci.dim, kDomainLo, kDomainHi, kScaleSampleSeed));
  double best = 0.0;
  for (Eigen::Index i = 0; i < pts.rows(); ++i) best = std::max(best, component_precision(ci, ci.shift, row_span(pts, i)));
  if (!(best >= 1e-8))
    fail(ErrorKind::degenerate, "component " + ci.key() + " has no sampled precision above 1e-8");
  return std::max(std::log10(best), kLogFloor + 1e-6);
}

/// Scale factors keyed "fid.iid.d". Concurrent readers, serialized writers.
class ScaleFactorCache {
 public:
  std::optional<double> find(const std::string& key) const {
    std::shared_lock lock(mutex_);
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  double get_or_compute(const ComponentInstance& ci, std::size_t sample_size) {
    const auto key = ci.key();
    if (auto v = find(key)) return *v;
    const double s = estimate_scale_factor(ci, sample_size);
    std::unique_lock lock(mutex_);
    return values_.emplace(key, s).first->second;
  }

  void invalidate() {
    std::unique_lock lock(mutex_);
    values_.clear();
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return values_.size();
  }

  nlohmann::json to_json() const {
    std::shared_lock lock(mutex_);
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : values_) j[k] = v;
    return j;
  }

  void merge_json(const nlohmann::json& j) {
    std::unique_lock lock(mutex_);
    for (auto it = j.begin(); it != j.end(); ++it) values_[it.key()] = it.value().get<double>();
  }

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, double> values_;
};

/// Builds and memoizes fully initialised component instances.
class ComponentFactory {
 public:
  ComponentFactory(std::uint64_t master_seed, int instance_pool_size = 100,
                   std::shared_ptr<ScaleFactorCache> cache = std::make_shared<ScaleFactorCache>())
      : master_seed_(master_seed), instance_pool_size_(instance_pool_size), cache_(std::move(cache)) {}

  std::shared_ptr<const ComponentInstance> get(int component_id, int instance_id, std::size_t d) {
    const auto key = ComponentInstance::scale_key(component_id, instance_id, d);
    {
      std::lock_guard lock(mutex_);
      if (auto it = built_.find(key); it != built_.end()) return it->second;
    }
    auto ci = make_component_instance(component_id, instance_id, d, master_seed_, instance_pool_size_);
    ci.scale_factor = cache_->get_or_compute(ci, 500 * d);
    auto ptr = std::make_shared<const ComponentInstance>(std::move(ci));
    std::lock_guard lock(mutex_);
    return built_.emplace(key, std::move(ptr)).first->second;
  }

  ScaleFactorCache& cache() { return *cache_; }
  std::uint64_t master_seed() const { return master_seed_; }
  int instance_pool_size() const { return instance_pool_size_; }

 private:
  std::uint64_t master_seed_;
  int instance_pool_size_;
  std::shared_ptr<ScaleFactorCache> cache_;
  std::mutex mutex_;
  std::unordered_map<std::string, std::shared_ptr<const ComponentInstance>> built_;
};

/// Fully initialised instance (scale factor from 500*d Sobol points).
inline ComponentInstance instantiate_component(int component_id, int instance_id, std::size_t d,
                                               std::uint64_t master_seed, int instance_pool_size = 100) {
  auto ci = make_component_instance(component_id, instance_id, d, master_seed, instance_pool_size);
  ci.scale_factor = estimate_scale_factor(ci, 500 * d);
  return ci;
}

// ---------------------------------------------------------------------------
// Problems
// ---------------------------------------------------------------------------

enum class ProblemSource { generated, component };

struct ActiveComponent {
  int component_id = 0;
  int instance_id = 0;
  bool operator==(const ActiveComponent&) const = default;
};

struct ProblemInstance {
  int problem_id = 0;
  std::size_t dim = 0;
  ProblemSource source = ProblemSource::generated;
  std::vector<ActiveComponent> active;
  std::vector<double> weights;
  std::vector<double> optimum;
  std::uint64_t master_seed = 0;
  std::uint64_t problem_seed = 0;

  std::size_t k() const { return active.size(); }
  bool operator==(const ProblemInstance&) const = default;
};

/// Evaluable affine combination in log-precision space:
///   F(x) = 10^(sum_i w_i lt_i(x)) - 1e-8,
///   lt_i = -8 + 10 (l_i + 8) / (s_i + 8),  l_i = max(log10(p_i + 1e-12), -8).
/// Computed as 1e-8 * (10^(sum_i w_i (lt_i + 8)) - 1) so that F(x*) is exactly 0.
class Problem {
 public:
  Problem(ProblemInstance instance, std::vector<std::shared_ptr<const ComponentInstance>> components)
      : instance_(std::move(instance)), components_(std::move(components)) {
    if (components_.size() != instance_.active.size() || instance_.weights.size() != components_.size())
      fail(ErrorKind::domain, "problem components and weights do not match");
    // summation runs in component-id order so F does not depend on listing order
    order_.resize(components_.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    std::sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      return instance_.active[a].component_id < instance_.active[b].component_id;
    });
  }

  double operator()(std::span<const double> x) const {
    if (x.size() != instance_.dim)
      fail(ErrorKind::domain, "point dimension " + std::to_string(x.size()) + " does not match problem dimension " +
                                  std::to_string(instance_.dim));
    double exponent = 0.0;
    for (std::size_t i : order_) {
      const auto& ci = *components_[i];
      const double p = component_precision(ci, instance_.optimum, x);
      const double l = std::max(std::log10(p + kPrecisionEps), kLogFloor);
      const double lifted = (kLogCeiling - kLogFloor) * (l - kLogFloor) / (ci.scale_factor - kLogFloor);
      exponent += instance_.weights[i] * lifted;
    }
    return 1e-8 * std::expm1(exponent * std::numbers::ln10);
  }

  const ProblemInstance& instance() const { return instance_; }
  std::size_t dim() const { return instance_.dim; }
  int id() const { return instance_.problem_id; }
  const std::vector<std::shared_ptr<const ComponentInstance>>& components() const { return components_; }

 private:
  ProblemInstance instance_;
  std::vector<std::shared_ptr<const ComponentInstance>> components_;
  std::vector<std::size_t> order_;
};

inline Problem bind_problem(const ProblemInstance& pi, ComponentFactory& factory) {
  std::vector<std::shared_ptr<const ComponentInstance>> comps;
  comps.reserve(pi.active.size());
  for (const auto& a : pi.active) comps.push_back(factory.get(a.component_id, a.instance_id, pi.dim));
  return Problem(pi, std::move(comps));
}

inline double evaluate_problem(const Problem& problem, std::span<const double> x) { return problem(x); }

/// Random affine combination of k distinct registry functions.
inline ProblemInstance generate_problem(std::size_t d, std::size_t k, std::uint64_t master_seed, int problem_id,
                                        int instance_pool_size = 100) {
  const std::size_t reg = registry_size();
  if (k < 1 || k > reg)
    fail(ErrorKind::domain, "active component count " + std::to_string(k) + " outside [1, " + std::to_string(reg) + "]");
  if (d < 1) fail(ErrorKind::domain, "dimension must be >= 1");

  ProblemInstance pi;
  pi.problem_id = problem_id;
  pi.dim = d;
  pi.master_seed = master_seed;
  pi.problem_seed = derive_seed(master_seed, "problem", problem_id, d);
  Rng rng(pi.problem_seed);

  std::vector<int> ids(reg);
  for (std::size_t i = 0; i < reg; ++i) ids[i] = static_cast<int>(i + 1);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_index(rng, reg - i));
    std::swap(ids[i], ids[j]);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const int iid = 1 + static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(instance_pool_size)));
    pi.active.push_back({ids[i], iid});
    pi.weights.push_back(uniform_open01(rng));
    total += pi.weights.back();
  }
  for (auto& w : pi.weights) w /= total;
  pi.optimum.resize(d);
  for (auto& v : pi.optimum) v = uniform(rng, kDomainLo, kDomainHi);
  return pi;
}

/// Single-component wrapper of a registry instance: weight 1, optimum at the instance shift.
inline ProblemInstance component_problem(int component_id, int instance_id, std::size_t d, int problem_id,
                                         std::uint64_t master_seed, int instance_pool_size = 100) {
  const auto ci = make_component_instance(component_id, instance_id, d, master_seed, instance_pool_size);
  ProblemInstance pi;
  pi.problem_id = problem_id;
  pi.dim = d;
  pi.source = ProblemSource::component;
  pi.active = {{component_id, instance_id}};
  pi.weights = {1.0};
  pi.optimum = ci.shift;
  pi.master_seed = master_seed;
  pi.problem_seed = derive_seed(master_seed, "component-problem", component_id, instance_id, d);
  return pi;
}

struct GeneratorSpec {
  std::size_t dim = 2;
  std::map<std::size_t, std::size_t> counts_per_k;
  int instance_pool_size = 100;
  std::uint64_t master_seed = 0;
  int component_instances = 5;  // first instances of every registry function used as component problems

  void validate() const {
    if (dim < 1) fail(ErrorKind::config, "dimension must be >= 1");
    if (instance_pool_size < 1) fail(ErrorKind::config, "instance pool size must be >= 1");
    if (component_instances < 0 || component_instances > instance_pool_size)
      fail(ErrorKind::config, "component instance count outside the instance pool");
    for (const auto& [k, c] : counts_per_k)
      if (k < 1 || k > registry_size())
        fail(ErrorKind::config, "active component count " + std::to_string(k) + " outside the registry bounds");
  }

  /// 2..5 active components: 2000 each; 6..24: 200 each.
  static std::map<std::size_t, std::size_t> full_scale_counts() {
    std::map<std::size_t, std::size_t> c;
    for (std::size_t k = 2; k <= 5; ++k) c[k] = 2000;
    for (std::size_t k = 6; k <= 24; ++k) c[k] = 200;
    return c;
  }
};

struct Suite {
  std::size_t dim = 0;
  std::vector<ProblemInstance> problems;            // generated, ids 1..N
  std::vector<ProblemInstance> component_problems;  // ids N+1.., ordered by (fid, iid)

  std::vector<ProblemInstance> pool() const {
    auto all = problems;
    all.insert(all.end(), component_problems.begin(), component_problems.end());
    return all;
  }
};

inline Suite generate_suite(const GeneratorSpec& spec) {
  spec.validate();
  Suite suite;
  suite.dim = spec.dim;
  int next_id = 1;
  for (const auto& [k, count] : spec.counts_per_k)
    for (std::size_t c = 0; c < count; ++c)
      suite.problems.push_back(generate_problem(spec.dim, k, spec.master_seed, next_id++, spec.instance_pool_size));
  for (const auto& fn : registry())
    for (int iid = 1; iid <= spec.component_instances; ++iid)
      suite.component_problems.push_back(
          component_problem(fn.id, iid, spec.dim, next_id++, spec.master_seed, spec.instance_pool_size));
  return suite;
}

// ---------------------------------------------------------------------------
// Manifest (JSON)
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const ProblemInstance& pi) {
  nlohmann::json active = nlohmann::json::array();
  for (const auto& a : pi.active) active.push_back({a.component_id, a.instance_id});
  return {
      {"problem_id", pi.problem_id},
      {"d", pi.dim},
      {"source", pi.source == ProblemSource::generated ? "generated" : "component"},
      {"active", active},
      {"weights", pi.weights},
      {"optimum", pi.optimum},
      {"seed_lineage", {{"master_seed", pi.master_seed}, {"problem_seed", pi.problem_seed}}},
  };
}

inline ProblemInstance problem_from_json(const nlohmann::json& j) {
  ProblemInstance pi;
  try {
    pi.problem_id = j.at("problem_id").get<int>();
    pi.dim = j.at("d").get<std::size_t>();
    pi.source = j.at("source").get<std::string>() == "component" ? ProblemSource::component : ProblemSource::generated;
    for (const auto& a : j.at("active")) pi.active.push_back({a.at(0).get<int>(), a.at(1).get<int>()});
    pi.weights = j.at("weights").get<std::vector<double>>();
    pi.optimum = j.at("optimum").get<std::vector<double>>();
    pi.master_seed = j.at("seed_lineage").at("master_seed").get<std::uint64_t>();
    pi.problem_seed = j.at("seed_lineage").at("problem_seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::data, std::string("malformed problem entry: ") + e.what());
  }
  return pi;
}

inline nlohmann::json suite_manifest(const Suite& suite, const GeneratorSpec& spec) {
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [k, c] : spec.counts_per_k) counts[std::to_string(k)] = c;
  nlohmann::json problems = nlohmann::json::array();
  for (const auto& p : suite.problems) problems.push_back(to_json(p));
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& p : suite.component_problems) comps.push_back(to_json(p));
  return {
      {"d", suite.dim},
      {"master_seed", spec.master_seed},
      {"instance_pool_size", spec.instance_pool_size},
      {"registry_size", registry_size()},
      {"counts_per_k", counts},
      {"problems", problems},
      {"component_problems", comps},
  };
}

inline Suite suite_from_manifest(const nlohmann::json& j) {
  Suite s;
  try {
    s.dim = j.at("d").get<std::size_t>();
    for (const auto& p : j.at("problems")) s.problems.push_back(problem_from_json(p));
    for (const auto& p : j.at("component_problems")) s.component_problems.push_back(problem_from_json(p));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::data, std::string("malformed suite manifest: ") + e.what());
  }
  return s;
}

inline std::uint64_t manifest_hash(const nlohmann::json& manifest) { return fnv1a(manifest.dump()); }

}  // namespace aaslab

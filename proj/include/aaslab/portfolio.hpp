#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aaslab/common.hpp"
#include "aaslab/io.hpp"

namespace aaslab {

using Objective = std::function<double(std::span<const double>)>;

struct OptimizerSpec {
  std::string algorithm_id;
  std::string name;  // optimizer kind: random_search, one_plus_one_es, de, pso, nelder_mead, bfgs
  std::map<std::string, double> hyperparameters;
  bool population_based = false;

  double param(const std::string& key, double fallback) const {
    auto it = hyperparameters.find(key);
    return it == hyperparameters.end() ? fallback : it->second;
  }

  /// Identity of the search behaviour (kind + hyperparameters), independent of the id.
  std::uint64_t behaviour_hash() const {
    Hasher h;
    h.add(std::string_view(name));
    for (const auto& [k, v] : hyperparameters) h.add(std::string_view(k)).add(v);
    return h.value();
  }
};

struct Trajectory {
  int problem_id = 0;
  std::string algorithm_id;
  int run_index = 0;
  std::vector<double> best_so_far;
  std::size_t budget = 0;
  std::size_t evaluations = 0;  // before padding
  bool aborted = false;
  std::string diagnostic;
};

struct AoccConfig {
  double lb = 1e-8;
  double ub = 1e2;

  void validate() const {
    if (!(0.0 < lb && lb < ub)) fail(ErrorKind::domain, "AOCC bounds need 0 < lb < ub");
  }
};

/// Area over the convergence curve of best-so-far precision in log10 space.
/// A trajectory shorter than its budget is extended with its final value.
inline double aocc(std::span<const double> best_so_far, std::size_t budget, const AoccConfig& cfg = {}) {
  cfg.validate();
  if (best_so_far.empty()) fail(ErrorKind::domain, "AOCC of an empty trajectory");
  if (budget < best_so_far.size()) budget = best_so_far.size();
  const double llb = std::log10(cfg.lb), lub = std::log10(cfg.ub);
  auto v = [&](double p) { return std::clamp((std::log10(std::max(p, cfg.lb)) - llb) / (lub - llb), 0.0, 1.0); };
  double acc = 0.0;
  for (double p : best_so_far) acc += 1.0 - v(p);
  acc += static_cast<double>(budget - best_so_far.size()) * (1.0 - v(best_so_far.back()));
  return acc / static_cast<double>(budget);
}

inline double aocc(const Trajectory& t, const AoccConfig& cfg = {}) {
  return aocc(t.best_so_far, std::max(t.budget, t.best_so_far.size()), cfg);
}

namespace detail {

struct BudgetExhausted {};
struct RunAborted {
  std::string reason;
};

/// Counts evaluations and logs best-so-far precision; throws once the budget is spent.
class BudgetedObjective {
 public:
  BudgetedObjective(const Objective& f, std::size_t dim, std::size_t budget) : f_(f), dim_(dim), budget_(budget) {
    trace_.reserve(budget);
  }

  double operator()(std::span<const double> x) {
    if (trace_.size() >= budget_) throw BudgetExhausted{};
    for (double v : x)
      if (!std::isfinite(v)) throw RunAborted{"optimizer proposed a non-finite coordinate"};
    const double y = f_(x);
    if (std::isnan(y)) throw RunAborted{"objective returned NaN"};
    best_ = std::min(best_, std::max(y, 0.0));
    trace_.push_back(best_);
    return y;
  }

  double operator()(const Eigen::VectorXd& x) { return (*this)(std::span<const double>(x.data(), dim_)); }

  std::size_t dim() const { return dim_; }
  std::size_t remaining() const { return budget_ - trace_.size(); }
  std::vector<double>& trace() { return trace_; }

 private:
  const Objective& f_;
  std::size_t dim_;
  std::size_t budget_;
  double best_ = std::numeric_limits<double>::infinity();
  std::vector<double> trace_;
};

struct Box {
  double lo = -5.0, hi = 5.0;
  Eigen::VectorXd sample(std::size_t d, Rng& rng) const {
    Eigen::VectorXd x(static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = uniform(rng, lo, hi);
    return x;
  }
  void clamp(Eigen::VectorXd& x) const { x = x.cwiseMax(lo).cwiseMin(hi); }
  double width() const { return hi - lo; }
};

inline void random_search(BudgetedObjective& f, const OptimizerSpec&, Rng& rng, const Box& box) {
  for (;;) f(box.sample(f.dim(), rng));
}

// (1+1)-ES with the one-fifth success rule.
inline void one_plus_one_es(BudgetedObjective& f, const OptimizerSpec& spec, Rng& rng, const Box& box) {
  const auto d = static_cast<Eigen::Index>(f.dim());
  double sigma = spec.param("sigma0", 0.2) * box.width();
  const double up = std::exp(spec.param("success_exponent", 1.0 / 3.0));
  const double down = std::exp(-spec.param("success_exponent", 1.0 / 3.0) / 4.0);
  Eigen::VectorXd x = box.sample(f.dim(), rng);
  double fx = f(x);
  Eigen::VectorXd y(d);
  for (;;) {
    for (Eigen::Index i = 0; i < d; ++i) y(i) = x(i) + sigma * standard_normal(rng);
    const double fy = f(y);
    if (fy <= fx) {
      x = y;
      fx = fy;
      sigma *= up;
    } else {
      sigma *= down;
    }
    sigma = std::max(sigma, 1e-300);
  }
}

// DE/rand/1/bin.
inline void differential_evolution(BudgetedObjective& f, const OptimizerSpec& spec, Rng& rng, const Box& box) {
  const std::size_t d = f.dim();
  const auto np = std::max<std::size_t>(4, static_cast<std::size_t>(std::lround(spec.param("pop_factor", 10.0) * d)));
  const double F = spec.param("F", 0.5), CR = spec.param("CR", 0.9);
  std::vector<Eigen::VectorXd> pop(np);
  std::vector<double> fit(np);
  for (std::size_t i = 0; i < np; ++i) {
    pop[i] = box.sample(d, rng);
    fit[i] = f(pop[i]);
  }
  Eigen::VectorXd trial(static_cast<Eigen::Index>(d));
  for (;;) {
    for (std::size_t i = 0; i < np; ++i) {
      std::size_t r[3];
      for (int k = 0; k < 3; ++k) {
        do {
          r[k] = static_cast<std::size_t>(uniform_index(rng, np));
        } while (r[k] == i || (k > 0 && r[k] == r[0]) || (k > 1 && r[k] == r[1]));
      }
      const auto jrand = static_cast<Eigen::Index>(uniform_index(rng, d));
      for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(d); ++j) {
        trial(j) = (j == jrand || uniform_open01(rng) < CR) ? pop[r[0]](j) + F * (pop[r[1]](j) - pop[r[2]](j))
                                                            : pop[i](j);
      }
      box.clamp(trial);
      const double ft = f(trial);
      if (ft <= fit[i]) {
        pop[i] = trial;
        fit[i] = ft;
      }
    }
  }
}

// Global-best particle swarm with inertia weight.
inline void particle_swarm(BudgetedObjective& f, const OptimizerSpec& spec, Rng& rng, const Box& box) {
  const std::size_t d = f.dim();
  const auto np = std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(spec.param("pop_factor", 10.0) * d)));
  const double w = spec.param("inertia", 0.72), c1 = spec.param("c1", 1.49), c2 = spec.param("c2", 1.49);
  const double vmax = spec.param("vmax_fraction", 0.2) * box.width();
  std::vector<Eigen::VectorXd> x(np), v(np), pbest(np);
  std::vector<double> pfit(np);
  Eigen::VectorXd gbest;
  double gfit = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < np; ++i) {
    x[i] = box.sample(d, rng);
    v[i] = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    for (Eigen::Index j = 0; j < v[i].size(); ++j) v[i](j) = uniform(rng, -vmax, vmax);
    pbest[i] = x[i];
    pfit[i] = f(x[i]);
    if (pfit[i] < gfit) {
      gfit = pfit[i];
      gbest = x[i];
    }
  }
  for (;;) {
    for (std::size_t i = 0; i < np; ++i) {
      for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(d); ++j) {
        const double vj = w * v[i](j) + c1 * uniform_open01(rng) * (pbest[i](j) - x[i](j)) +
                          c2 * uniform_open01(rng) * (gbest(j) - x[i](j));
        v[i](j) = std::clamp(vj, -vmax, vmax);
      }
      x[i] += v[i];
      box.clamp(x[i]);
      const double fx = f(x[i]);
      if (fx < pfit[i]) {
        pfit[i] = fx;
        pbest[i] = x[i];
        if (fx < gfit) {
          gfit = fx;
          gbest = x[i];
        }
      }
    }
  }
}

// Nelder-Mead; restarts from a uniform point once the simplex collapses.
inline void nelder_mead(BudgetedObjective& f, const OptimizerSpec& spec, Rng& rng, const Box& box) {
  const std::size_t d = f.dim();
  const double step = spec.param("initial_step", 0.1) * box.width();
  const double tol = spec.param("collapse_tol", 1e-10);
  const double alpha = 1.0, gamma = 2.0, rho = 0.5, shrink = 0.5;
  for (;;) {
    std::vector<Eigen::VectorXd> s(d + 1);
    std::vector<double> fs(d + 1);
    s[0] = box.sample(d, rng);
    for (std::size_t i = 1; i <= d; ++i) {
      s[i] = s[0];
      s[i](static_cast<Eigen::Index>(i - 1)) += step;
    }
    for (std::size_t i = 0; i <= d; ++i) fs[i] = f(s[i]);
    std::vector<std::size_t> idx(d + 1);
    for (;;) {
      std::iota(idx.begin(), idx.end(), 0);
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
      const std::size_t best = idx.front(), worst = idx.back(), second = idx[d - 1];
      double diameter = 0.0;
      for (std::size_t i = 0; i <= d; ++i) diameter = std::max(diameter, (s[i] - s[best]).cwiseAbs().maxCoeff());
      if (diameter < tol || !(fs[worst] - fs[best] > 1e-300 || diameter > tol * 1e3)) break;

      Eigen::VectorXd centroid = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
      for (std::size_t i = 0; i <= d; ++i)
        if (i != worst) centroid += s[i];
      centroid /= static_cast<double>(d);
      const Eigen::VectorXd xr = centroid + alpha * (centroid - s[worst]);
      const double fr = f(xr);
      if (fr < fs[best]) {
        const Eigen::VectorXd xe = centroid + gamma * (xr - centroid);
        const double fe = f(xe);
        if (fe < fr) {
          s[worst] = xe;
          fs[worst] = fe;
        } else {
          s[worst] = xr;
          fs[worst] = fr;
        }
      } else if (fr < fs[second]) {
        s[worst] = xr;
        fs[worst] = fr;
      } else {
        const bool outside = fr < fs[worst];
        const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + rho * (xr - centroid))
                                           : Eigen::VectorXd(centroid + rho * (s[worst] - centroid));
        const double fc = f(xc);
        if (fc < (outside ? fr : fs[worst])) {
          s[worst] = xc;
          fs[worst] = fc;
        } else {
          for (std::size_t i = 0; i <= d; ++i) {
            if (i == best) continue;
            s[i] = s[best] + shrink * (s[i] - s[best]);
            fs[i] = f(s[i]);
          }
        }
      }
    }
  }
}

// Quasi-Newton (BFGS) with central-difference gradients, Armijo backtracking
// and uniform restarts when progress stalls.
inline void bfgs(BudgetedObjective& f, const OptimizerSpec& spec, Rng& rng, const Box& box) {
  const std::size_t d = f.dim();
  const auto n = static_cast<Eigen::Index>(d);
  const double h_rel = spec.param("fd_step", 1e-6);
  const double c1 = spec.param("armijo", 1e-4);
  auto gradient = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd g(n);
    Eigen::VectorXd xp = x;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double h = h_rel * std::max(1.0, std::abs(x(i)));
      xp(i) = x(i) + h;
      const double fp = f(xp);
      xp(i) = x(i) - h;
      const double fm = f(xp);
      xp(i) = x(i);
      g(i) = (fp - fm) / (2.0 * h);
    }
    return g;
  };
  for (;;) {
    Eigen::VectorXd x = box.sample(d, rng);
    double fx = f(x);
    Eigen::VectorXd g = gradient(x);
    Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
    for (int iter = 0;; ++iter) {
      if (!g.allFinite() || g.norm() < 1e-12) break;
      Eigen::VectorXd p = -H * g;
      double slope = g.dot(p);
      if (!(slope < 0.0)) {
        H.setIdentity();
        p = -g;
        slope = -g.squaredNorm();
      }
      // first trial step limited to the box width
      double t = std::min(1.0, box.width() / std::max(p.norm(), 1e-300));
      bool accepted = false;
      Eigen::VectorXd xn;
      double fn = 0.0;
      for (int ls = 0; ls < 40; ++ls) {
        xn = x + t * p;
        fn = f(xn);
        if (fn <= fx + c1 * t * slope) {
          accepted = true;
          break;
        }
        t *= 0.5;
      }
      if (!accepted || (xn - x).norm() < 1e-14) break;
      const Eigen::VectorXd gn = gradient(xn);
      const Eigen::VectorXd sk = xn - x, yk = gn - g;
      const double sy = sk.dot(yk);
      if (sy > 1e-300) {
        const double rho = 1.0 / sy;
        const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
        H = (I - rho * sk * yk.transpose()) * H * (I - rho * yk * sk.transpose()) + rho * sk * sk.transpose();
      }
      x = xn;
      fx = fn;
      g = gn;
    }
  }
}

using OptimizerFn = void (*)(BudgetedObjective&, const OptimizerSpec&, Rng&, const Box&);

inline OptimizerFn resolve_optimizer(const std::string& name) {
  static const std::map<std::string, OptimizerFn> table = {
      {"random_search", random_search}, {"one_plus_one_es", one_plus_one_es}, {"de", differential_evolution},
      {"pso", particle_swarm},          {"nelder_mead", nelder_mead},         {"bfgs", bfgs},
  };
  auto it = table.find(name);
  if (it == table.end()) fail(ErrorKind::config, "unknown optimizer kind '" + name + "'");
  return it->second;
}

}  // namespace detail

inline std::vector<std::string> optimizer_kinds() {
  return {"random_search", "one_plus_one_es", "de", "pso", "nelder_mead", "bfgs"};
}

/// All six built-in optimizers with their default hyperparameters.
inline std::vector<OptimizerSpec> default_portfolio() {
  return {
      {"RS", "random_search", {}, false},
      {"ES", "one_plus_one_es", {{"sigma0", 0.2}, {"success_exponent", 1.0 / 3.0}}, false},
      {"DE", "de", {{"pop_factor", 10.0}, {"F", 0.5}, {"CR", 0.9}}, true},
      {"PSO", "pso", {{"pop_factor", 10.0}, {"inertia", 0.72}, {"c1", 1.49}, {"c2", 1.49}, {"vmax_fraction", 0.2}}, true},
      {"NM", "nelder_mead", {{"initial_step", 0.1}, {"collapse_tol", 1e-10}}, false},
      {"BFGS", "bfgs", {{"fd_step", 1e-6}, {"armijo", 1e-4}}, false},
  };
}

inline void validate_portfolio(const std::vector<OptimizerSpec>& portfolio) {
  if (portfolio.empty()) fail(ErrorKind::config, "portfolio is empty");
  for (std::size_t i = 0; i < portfolio.size(); ++i) {
    if (portfolio[i].algorithm_id.empty() || portfolio[i].algorithm_id.find(',') != std::string::npos)
      fail(ErrorKind::config, "algorithm ids must be nonempty and comma-free");
    detail::resolve_optimizer(portfolio[i].name);
    for (std::size_t j = 0; j < i; ++j)
      if (portfolio[j].algorithm_id == portfolio[i].algorithm_id)
        fail(ErrorKind::config, "duplicate algorithm id '" + portfolio[i].algorithm_id + "'");
  }
}

/// Runs one optimizer until `budget` evaluations are consumed. Objective values are
/// precisions (the optimum value is 0).
inline Trajectory run_algorithm(const OptimizerSpec& spec, const Objective& problem, std::size_t dim, std::size_t budget,
                                std::uint64_t seed, int problem_id = 0, int run_index = 0, double lo = -5.0,
                                double hi = 5.0) {
  if (budget < 1) fail(ErrorKind::domain, "budget must be >= 1");
  if (dim < 1) fail(ErrorKind::domain, "dimension must be >= 1");
  const auto fn = detail::resolve_optimizer(spec.name);
  detail::BudgetedObjective f(problem, dim, budget);
  Rng rng(seed);
  Trajectory t;
  t.problem_id = problem_id;
  t.algorithm_id = spec.algorithm_id;
  t.run_index = run_index;
  t.budget = budget;
  try {
    fn(f, spec, rng, detail::Box{lo, hi});
  } catch (const detail::BudgetExhausted&) {
  } catch (const detail::RunAborted& e) {
    t.aborted = true;
    t.diagnostic = e.reason + " after " + std::to_string(f.trace().size()) + " evaluations";
  }
  t.evaluations = f.trace().size();
  t.best_so_far = std::move(f.trace());
  if (t.best_so_far.empty()) t.best_so_far.push_back(std::numeric_limits<double>::infinity());
  t.best_so_far.resize(budget, t.best_so_far.back());
  return t;
}

// ---------------------------------------------------------------------------
// Portfolio runs
// ---------------------------------------------------------------------------

struct PortfolioProblem {
  int problem_id = 0;
  std::size_t dim = 0;
  std::size_t runs = 15;
  Objective objective;
};

struct PerformanceCell {
  std::size_t runs = 0;
  std::size_t budget = 0;
  double mean_aocc = 0.0;
  std::vector<double> run_aocc;
};

/// problem x algorithm table of mean AOCC.
struct PerformanceTable {
  std::size_t dim = 0;
  std::vector<int> problem_ids;
  std::vector<std::string> algorithm_ids;
  std::vector<std::vector<PerformanceCell>> cells;  // [problem][algorithm]

  std::size_t problem_index(int id) const {
    auto it = std::find(problem_ids.begin(), problem_ids.end(), id);
    if (it == problem_ids.end()) fail(ErrorKind::data, "problem " + std::to_string(id) + " not in performance table");
    return static_cast<std::size_t>(it - problem_ids.begin());
  }

  std::size_t algorithm_index(const std::string& id) const {
    auto it = std::find(algorithm_ids.begin(), algorithm_ids.end(), id);
    if (it == algorithm_ids.end()) fail(ErrorKind::data, "algorithm '" + id + "' not in performance table");
    return static_cast<std::size_t>(it - algorithm_ids.begin());
  }

  double mean(int problem_id, const std::string& algorithm_id) const {
    return cells[problem_index(problem_id)][algorithm_index(algorithm_id)].mean_aocc;
  }

  /// Row of mean AOCC values in algorithm order.
  std::vector<double> row(int problem_id) const {
    const auto& r = cells[problem_index(problem_id)];
    std::vector<double> out;
    for (const auto& c : r) out.push_back(c.mean_aocc);
    return out;
  }

  io::CsvTable to_csv(const std::string& config_hash) const {
    io::CsvTable t;
    t.config_hash = config_hash;
    std::size_t max_runs = 0;
    for (const auto& r : cells)
      for (const auto& c : r) max_runs = std::max(max_runs, c.runs);
    t.header = {"problem_id", "algorithm_id", "runs", "budget", "mean_aocc"};
    for (std::size_t k = 1; k <= max_runs; ++k) t.header.push_back("aocc_" + std::to_string(k));
    for (std::size_t p = 0; p < problem_ids.size(); ++p)
      for (std::size_t a = 0; a < algorithm_ids.size(); ++a) {
        const auto& c = cells[p][a];
        std::vector<std::string> row = {std::to_string(problem_ids[p]), algorithm_ids[a], std::to_string(c.runs),
                                        std::to_string(c.budget), format_double(c.mean_aocc)};
        for (std::size_t k = 0; k < max_runs; ++k) row.push_back(k < c.run_aocc.size() ? format_double(c.run_aocc[k]) : "");
        t.rows.push_back(std::move(row));
      }
    return t;
  }

  static PerformanceTable from_csv(const io::CsvTable& t, std::size_t dim = 0) {
    PerformanceTable pt;
    pt.dim = dim;
    const auto cp = t.column("problem_id"), ca = t.column("algorithm_id"), cr = t.column("runs"),
               cb = t.column("budget"), cm = t.column("mean_aocc");
    std::map<int, std::size_t> pidx;
    std::map<std::string, std::size_t> aidx;
    for (const auto& r : t.rows) {
      const int pid = static_cast<int>(parse_int(r[cp]));
      if (!pidx.count(pid)) {
        pidx[pid] = pt.problem_ids.size();
        pt.problem_ids.push_back(pid);
      }
      if (!aidx.count(r[ca])) {
        aidx[r[ca]] = pt.algorithm_ids.size();
        pt.algorithm_ids.push_back(r[ca]);
      }
    }
    pt.cells.assign(pt.problem_ids.size(), std::vector<PerformanceCell>(pt.algorithm_ids.size()));
    std::vector<std::vector<char>> seen(pt.problem_ids.size(), std::vector<char>(pt.algorithm_ids.size(), 0));
    for (const auto& r : t.rows) {
      const auto p = pidx[static_cast<int>(parse_int(r[cp]))];
      const auto a = aidx[r[ca]];
      auto& c = pt.cells[p][a];
      c.runs = static_cast<std::size_t>(parse_int(r[cr]));
      c.budget = static_cast<std::size_t>(parse_int(r[cb]));
      c.mean_aocc = parse_double(r[cm]);
      for (std::size_t k = 1; k <= c.runs; ++k) c.run_aocc.push_back(parse_double(r[t.column("aocc_" + std::to_string(k))]));
      seen[p][a] = 1;
    }
    for (const auto& s : seen)
      for (char v : s)
        if (!v) fail(ErrorKind::data, "performance table is missing (problem, algorithm) cells");
    return pt;
  }
};

struct PortfolioOptions {
  std::size_t budget_factor = 2000;
  std::uint64_t master_seed = 0;
  std::size_t jobs = 1;
  std::string checkpoint_path;  // empty: no persistence
  std::string config_hash;
  std::size_t stop_after_cells = 0;  // >0: stop after this many new cells (simulated interruption)
  AoccConfig aocc;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

inline std::uint64_t run_seed(std::uint64_t master_seed, int problem_id, const OptimizerSpec& spec, std::size_t run) {
  return derive_seed(master_seed, "optimizer-run", problem_id, spec.behaviour_hash(), run);
}

inline PerformanceCell run_cell(const PortfolioProblem& problem, const OptimizerSpec& spec,
                                const PortfolioOptions& opt) {
  PerformanceCell c;
  c.runs = problem.runs;
  c.budget = opt.budget_factor * problem.dim;
  for (std::size_t r = 0; r < problem.runs; ++r) {
    const auto t = run_algorithm(spec, problem.objective, problem.dim, c.budget,
                                 run_seed(opt.master_seed, problem.problem_id, spec, r), problem.problem_id,
                                 static_cast<int>(r));
    c.run_aocc.push_back(aocc(t, opt.aocc));
  }
  double acc = 0.0;
  for (double v : c.run_aocc) acc += v;
  c.mean_aocc = acc / static_cast<double>(c.runs);
  return c;
}

namespace detail {

inline std::string checkpoint_line(int problem_id, const std::string& algorithm_id, const PerformanceCell& c) {
  std::string line = std::to_string(problem_id) + "," + algorithm_id + "," + std::to_string(c.runs) + "," +
                     std::to_string(c.budget) + "," + format_double(c.mean_aocc) + ",";
  for (std::size_t k = 0; k < c.run_aocc.size(); ++k) line += (k ? ";" : "") + format_double(c.run_aocc[k]);
  return line + "\n";
}

// Completed cells from a checkpoint; a torn final line is ignored.
inline std::map<std::pair<int, std::string>, PerformanceCell> load_checkpoint(const std::string& path,
                                                                              const std::string& config_hash) {
  std::map<std::pair<int, std::string>, PerformanceCell> done;
  if (path.empty() || !io::exists(path)) return done;
  const std::string text = read_file(path);
  std::size_t pos = 0;
  bool first = true;
  while (pos < text.size()) {
    const auto end = text.find('\n', pos);
    if (end == std::string::npos) break;
    const std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    if (first) {
      first = false;
      if (!line.starts_with(io::kHashPrefix))
        fail(ErrorKind::data, path + ": checkpoint lacks a config hash line");
      io::check_hash(std::string(line.substr(io::kHashPrefix.size())), config_hash, path);
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 6) fail(ErrorKind::data, path + ": malformed checkpoint line");
    PerformanceCell c;
    c.runs = static_cast<std::size_t>(parse_int(f[2]));
    c.budget = static_cast<std::size_t>(parse_int(f[3]));
    c.mean_aocc = parse_double(f[4]);
    for (auto v : split(f[5], ';')) c.run_aocc.push_back(parse_double(v));
    if (c.run_aocc.size() != c.runs) fail(ErrorKind::data, path + ": checkpoint run count mismatch");
    done[{static_cast<int>(parse_int(f[0])), std::string(f[1])}] = std::move(c);
  }
  return done;
}

}  // namespace detail

/// Mean AOCC for every (problem, algorithm) pair. Cells already present in the
/// checkpoint are reused; new cells are appended as they complete.
inline PerformanceTable run_portfolio(const std::vector<PortfolioProblem>& problems,
                                      const std::vector<OptimizerSpec>& portfolio, const PortfolioOptions& opt) {
  if (problems.empty()) fail(ErrorKind::domain, "run_portfolio needs a nonempty suite");
  validate_portfolio(portfolio);
  PerformanceTable table;
  table.dim = problems.front().dim;
  for (const auto& p : problems) table.problem_ids.push_back(p.problem_id);
  for (const auto& s : portfolio) table.algorithm_ids.push_back(s.algorithm_id);
  table.cells.assign(problems.size(), std::vector<PerformanceCell>(portfolio.size()));

  auto done = detail::load_checkpoint(opt.checkpoint_path, opt.config_hash);
  std::vector<std::pair<std::size_t, std::size_t>> pending;
  for (std::size_t p = 0; p < problems.size(); ++p)
    for (std::size_t a = 0; a < portfolio.size(); ++a) {
      auto it = done.find({problems[p].problem_id, portfolio[a].algorithm_id});
      if (it != done.end() && it->second.runs == problems[p].runs &&
          it->second.budget == opt.budget_factor * problems[p].dim)
        table.cells[p][a] = it->second;
      else
        pending.emplace_back(p, a);
    }
  if (opt.stop_after_cells > 0 && pending.size() > opt.stop_after_cells) pending.resize(opt.stop_after_cells);

  std::ofstream checkpoint;
  if (!opt.checkpoint_path.empty()) {
    const bool fresh = !io::exists(opt.checkpoint_path);
    checkpoint.open(opt.checkpoint_path, std::ios::binary | std::ios::app);
    if (!checkpoint) fail(ErrorKind::io, "cannot open checkpoint '" + opt.checkpoint_path + "'");
    if (fresh) checkpoint << io::kHashPrefix << opt.config_hash << "\n" << std::flush;
  }
  std::mutex write_mutex;
  std::size_t finished = 0;
  parallel_for(pending.size(), opt.jobs, [&](std::size_t i) {
    const auto [p, a] = pending[i];
    auto cell = run_cell(problems[p], portfolio[a], opt);
    std::lock_guard lock(write_mutex);
    if (checkpoint.is_open())
      checkpoint << detail::checkpoint_line(problems[p].problem_id, portfolio[a].algorithm_id, cell) << std::flush;
    table.cells[p][a] = std::move(cell);
    if (opt.progress) opt.progress(++finished, pending.size());
  });
  if (opt.stop_after_cells > 0) {
    for (const auto& row : table.cells)
      for (const auto& c : row)
        if (c.runs == 0) fail(ErrorKind::data, "portfolio run interrupted before completion");
  }
  return table;
}

}  // namespace aaslab

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "aaslab/common.hpp"
#include "aaslab/sampling.hpp"

// Exploratory landscape features computable from one space-filling sample.
namespace aaslab::ela {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct FeatureGroup {
  std::string name;
  std::vector<std::string> features;
};

struct FeatureCatalog {
  std::string version;
  std::vector<FeatureGroup> groups;
  std::vector<std::string> names;  // flattened, catalog order

  std::size_t index_of(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) fail(ErrorKind::domain, "unknown feature '" + name + "'");
    return static_cast<std::size_t>(it - names.begin());
  }
};

inline constexpr double kLevelQuantiles[] = {0.10, 0.25, 0.50};
inline constexpr double kDispQuantiles[] = {0.02, 0.05, 0.10, 0.25};

inline std::string percent_tag(double q) {
  const int pct = static_cast<int>(std::lround(q * 100.0));
  return pct < 10 ? "0" + std::to_string(pct) : std::to_string(pct);
}

inline const FeatureCatalog& catalog() {
  static const FeatureCatalog cat = [] {
    FeatureCatalog c;
    c.version = "aaslab-ela/1 (groups: ela_meta ela_distr ela_level nbc disp ic; pca and limo omitted)";
    c.groups.push_back({"ela_meta",
                        {"ela_meta.lin_simple.adj_r2", "ela_meta.lin_simple.intercept", "ela_meta.lin_simple.coef.min",
                         "ela_meta.lin_simple.coef.max", "ela_meta.lin_simple.coef.max_by_min",
                         "ela_meta.lin_w_interact.adj_r2", "ela_meta.quad_simple.adj_r2", "ela_meta.quad_simple.cond",
                         "ela_meta.quad_w_interact.adj_r2"}});
    c.groups.push_back({"ela_distr", {"ela_distr.skewness", "ela_distr.kurtosis", "ela_distr.number_of_peaks"}});
    FeatureGroup level{"ela_level", {}};
    for (const char* kind : {"mmce_lda", "mmce_qda", "qda_lda"})
      for (double q : kLevelQuantiles) level.features.push_back("ela_level." + std::string(kind) + "_" + percent_tag(q));
    c.groups.push_back(level);
    c.groups.push_back({"nbc",
                        {"nbc.nb_nn.sd_ratio", "nbc.nb_nn.mean_ratio", "nbc.nb_fitness.cor", "nbc.nb.coeff_var",
                         "nbc.indegree_fitness.cor"}});
    FeatureGroup disp{"disp", {}};
    for (const char* kind : {"ratio_mean", "ratio_median", "diff_mean", "diff_median"})
      for (double q : kDispQuantiles) disp.features.push_back("disp." + std::string(kind) + "_" + percent_tag(q));
    c.groups.push_back(disp);
    c.groups.push_back({"ic", {"ic.h_max", "ic.eps_s", "ic.eps_max", "ic.eps_ratio", "ic.m0"}});
    for (const auto& g : c.groups) c.names.insert(c.names.end(), g.features.begin(), g.features.end());
    return c;
  }();
  return cat;
}

/// Named feature values; infeasible entries carry an explicit flag (value NaN).
struct FeatureVector {
  int problem_id = 0;
  std::vector<std::string> names;
  std::vector<double> values;
  std::vector<char> feasible;
  bool normalized = false;

  std::size_t size() const { return values.size(); }

  double at(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) fail(ErrorKind::domain, "feature '" + name + "' not present");
    return values[static_cast<std::size_t>(it - names.begin())];
  }

  bool is_feasible(const std::string& name) const {
    auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) fail(ErrorKind::domain, "feature '" + name + "' not present");
    return feasible[static_cast<std::size_t>(it - names.begin())] != 0;
  }

  void set(std::size_t i, double v) {
    const bool ok = std::isfinite(v);
    values[i] = ok ? v : kNaN;
    feasible[i] = ok ? 1 : 0;
  }

  static FeatureVector empty_catalog(int problem_id) {
    FeatureVector fv;
    fv.problem_id = problem_id;
    fv.names = catalog().names;
    fv.values.assign(fv.names.size(), kNaN);
    fv.feasible.assign(fv.names.size(), 0);
    return fv;
  }

  FeatureVector subset(const std::vector<std::string>& keep) const {
    FeatureVector out;
    out.problem_id = problem_id;
    out.normalized = normalized;
    for (const auto& n : keep) {
      auto it = std::find(names.begin(), names.end(), n);
      if (it == names.end()) fail(ErrorKind::domain, "feature '" + n + "' not present");
      const auto i = static_cast<std::size_t>(it - names.begin());
      out.names.push_back(n);
      out.values.push_back(values[i]);
      out.feasible.push_back(feasible[i]);
    }
    return out;
  }
};

struct FeatureOptions {
  std::uint64_t cv_seed = 0x1e5e1cULL;  // stratified fold assignment for ela_level
  std::size_t cv_folds = 5;
  std::size_t kde_grid = 512;
  double peak_prominence = 1e-3;  // fraction of the density maximum
  std::size_t ic_grid = 100;
  double ic_settling = 0.05;
};

namespace detail {

// Canonical sample: rows sorted lexicographically by (x, y); makes every
// feature a function of the point set only.
struct Sample {
  Eigen::MatrixXd x;  // n x d
  Eigen::VectorXd y;
  std::size_t n() const { return static_cast<std::size_t>(x.rows()); }
  std::size_t d() const { return static_cast<std::size_t>(x.cols()); }
};

inline Sample canonicalize(const PointMatrix& points, std::span<const double> values) {
  const auto n = static_cast<std::size_t>(points.rows());
  const auto d = points.cols();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    for (Eigen::Index j = 0; j < d; ++j) {
      const double va = points(static_cast<Eigen::Index>(a), j), vb = points(static_cast<Eigen::Index>(b), j);
      if (va != vb) return va < vb;
    }
    return values[a] < values[b];
  });
  Sample s;
  s.x.resize(static_cast<Eigen::Index>(n), d);
  s.y.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    s.x.row(static_cast<Eigen::Index>(i)) = points.row(static_cast<Eigen::Index>(order[i]));
    s.y(static_cast<Eigen::Index>(i)) = values[order[i]];
  }
  return s;
}

// Condensed Euclidean distance matrix, i < j.
class Distances {
 public:
  explicit Distances(const Eigen::MatrixXd& x) : n_(static_cast<std::size_t>(x.rows())) {
    values_.resize(n_ * (n_ - 1) / 2);
    std::size_t k = 0;
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = i + 1; j < n_; ++j)
        values_[k++] = (x.row(static_cast<Eigen::Index>(i)) - x.row(static_cast<Eigen::Index>(j))).norm();
  }

  double operator()(std::size_t i, std::size_t j) const {
    if (i == j) return 0.0;
    if (i > j) std::swap(i, j);
    return values_[i * n_ - i * (i + 1) / 2 + (j - i - 1)];
  }

  const std::vector<double>& all() const { return values_; }
  std::size_t n() const { return n_; }

 private:
  std::size_t n_;
  std::vector<double> values_;
};

struct LinearFit {
  Eigen::VectorXd coef;
  double adj_r2 = kNaN;
};

inline LinearFit least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
  LinearFit fit;
  const double n = static_cast<double>(design.rows());
  const double p = static_cast<double>(design.cols());
  fit.coef = design.colPivHouseholderQr().solve(y);
  const double ss_res = (y - design * fit.coef).squaredNorm();
  const double ss_tot = (y.array() - y.mean()).square().sum();
  if (ss_tot > 0.0 && n > p) fit.adj_r2 = 1.0 - (ss_res / (n - p)) / (ss_tot / (n - 1.0));
  return fit;
}

// columns: 1, x, [x^2], [x_i x_j for i < j]
inline Eigen::MatrixXd model_matrix(const Eigen::MatrixXd& x, bool squares, bool interactions) {
  const Eigen::Index n = x.rows(), d = x.cols();
  Eigen::Index p = 1 + d + (squares ? d : 0) + (interactions ? d * (d - 1) / 2 : 0);
  Eigen::MatrixXd m(n, p);
  m.col(0).setOnes();
  m.middleCols(1, d) = x;
  Eigen::Index c = 1 + d;
  if (squares)
    for (Eigen::Index j = 0; j < d; ++j) m.col(c++) = x.col(j).array().square();
  if (interactions)
    for (Eigen::Index a = 0; a < d; ++a)
      for (Eigen::Index b = a + 1; b < d; ++b) m.col(c++) = x.col(a).cwiseProduct(x.col(b));
  return m;
}

inline void meta_features(const Sample& s, FeatureVector& fv, std::size_t base) {
  const auto d = static_cast<Eigen::Index>(s.d());
  const auto lin = least_squares(model_matrix(s.x, false, false), s.y);
  fv.set(base + 0, lin.adj_r2);
  fv.set(base + 1, lin.coef(0));
  const Eigen::VectorXd slopes = lin.coef.segment(1, d).cwiseAbs();
  const double cmin = slopes.minCoeff(), cmax = slopes.maxCoeff();
  fv.set(base + 2, cmin);
  fv.set(base + 3, cmax);
  fv.set(base + 4, cmin > 0.0 ? cmax / cmin : kNaN);
  fv.set(base + 5, least_squares(model_matrix(s.x, false, true), s.y).adj_r2);
  const auto quad = least_squares(model_matrix(s.x, true, false), s.y);
  fv.set(base + 6, quad.adj_r2);
  const Eigen::VectorXd q = quad.coef.segment(1 + d, d).cwiseAbs();
  fv.set(base + 7, q.minCoeff() > 0.0 ? q.maxCoeff() / q.minCoeff() : kNaN);
  fv.set(base + 8, least_squares(model_matrix(s.x, true, true), s.y).adj_r2);
}

/// Local maxima of a sampled curve whose prominence reaches `min_prominence`.
inline std::size_t count_prominent_peaks(const std::vector<double>& f, double min_prominence) {
  const std::size_t m = f.size();
  std::size_t peaks = 0;
  std::size_t i = 0;
  while (i < m) {
    std::size_t j = i;
    while (j + 1 < m && f[j + 1] == f[i]) ++j;  // plateau [i, j]
    const bool left_lower = i == 0 || f[i - 1] < f[i];
    const bool right_lower = j + 1 == m || f[j + 1] < f[i];
    if (left_lower && right_lower && !(i == 0 && j + 1 == m)) {
      double left_min = f[i];
      for (std::size_t k = i; k-- > 0;) {
        if (f[k] > f[i]) break;
        left_min = std::min(left_min, f[k]);
      }
      double right_min = f[i];
      for (std::size_t k = j + 1; k < m; ++k) {
        if (f[k] > f[i]) break;
        right_min = std::min(right_min, f[k]);
      }
      if (f[i] - std::max(left_min, right_min) >= min_prominence) ++peaks;
    }
    i = j + 1;
  }
  return peaks;
}

inline void distr_features(const Sample& s, const FeatureOptions& opt, FeatureVector& fv, std::size_t base) {
  const auto n = static_cast<double>(s.n());
  const double mu = s.y.mean();
  const Eigen::ArrayXd c = s.y.array() - mu;
  const double m2 = c.square().mean();
  if (!(m2 > 0.0)) return;  // all three infeasible
  const double m3 = c.cube().mean();
  const double m4 = c.square().square().mean();
  fv.set(base + 0, m3 / std::pow(m2, 1.5));
  fv.set(base + 1, m4 / (m2 * m2) - 3.0);

  // Gaussian KDE of standardized values, Silverman bandwidth
  const double sd = std::sqrt(m2 * n / (n - 1.0));
  std::vector<double> z(s.n());
  for (std::size_t i = 0; i < s.n(); ++i) z[i] = c(static_cast<Eigen::Index>(i)) / sd;
  const double iqr = quantile(z, 0.75) - quantile(z, 0.25);
  const double spread = iqr > 0.0 ? std::min(1.0, iqr / 1.34) : 1.0;
  const double h = 0.9 * spread * std::pow(n, -0.2);
  const auto [zmin_it, zmax_it] = std::minmax_element(z.begin(), z.end());
  const double lo = *zmin_it - 3.0 * h, hi = *zmax_it + 3.0 * h;
  std::vector<double> dens(opt.kde_grid, 0.0);
  for (std::size_t g = 0; g < opt.kde_grid; ++g) {
    const double t = lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(opt.kde_grid - 1);
    double acc = 0.0;
    for (double v : z) {
      const double u = (t - v) / h;
      if (std::abs(u) < 8.0) acc += std::exp(-0.5 * u * u);
    }
    dens[g] = acc;
  }
  const double top = *std::max_element(dens.begin(), dens.end());
  fv.set(base + 2, static_cast<double>(count_prominent_peaks(dens, opt.peak_prominence * top)));
}

// Linear and quadratic discriminant classifiers.
class Discriminant {
 public:
  // Returns false when a covariance matrix is not positive definite.
  bool fit(const Eigen::MatrixXd& x, const std::vector<int>& label, bool quadratic) {
    quadratic_ = quadratic;
    const Eigen::Index d = x.cols();
    std::array<Eigen::Index, 2> count{0, 0};
    for (int l : label) ++count[static_cast<std::size_t>(l)];
    if (count[0] < 2 || count[1] < 2) return false;
    const double n = static_cast<double>(label.size());
    for (int c = 0; c < 2; ++c) {
      means_[c] = Eigen::VectorXd::Zero(d);
      log_prior_[c] = std::log(static_cast<double>(count[static_cast<std::size_t>(c)]) / n);
    }
    for (std::size_t i = 0; i < label.size(); ++i) means_[label[i]] += x.row(static_cast<Eigen::Index>(i)).transpose();
    for (int c = 0; c < 2; ++c) means_[c] /= static_cast<double>(count[static_cast<std::size_t>(c)]);
    std::array<Eigen::MatrixXd, 2> scatter{Eigen::MatrixXd::Zero(d, d), Eigen::MatrixXd::Zero(d, d)};
    for (std::size_t i = 0; i < label.size(); ++i) {
      const Eigen::VectorXd r = x.row(static_cast<Eigen::Index>(i)).transpose() - means_[label[i]];
      scatter[static_cast<std::size_t>(label[i])].noalias() += r * r.transpose();
    }
    if (quadratic) {
      for (int c = 0; c < 2; ++c) {
        if (count[static_cast<std::size_t>(c)] <= d) return false;
        Eigen::MatrixXd cov = scatter[static_cast<std::size_t>(c)] / static_cast<double>(count[static_cast<std::size_t>(c)] - 1);
        chol_[c].compute(cov);
        if (chol_[c].info() != Eigen::Success) return false;
        log_det_[c] = 2.0 * chol_[c].matrixL().toDenseMatrix().diagonal().array().log().sum();
      }
    } else {
      Eigen::MatrixXd cov = (scatter[0] + scatter[1]) / (n - 2.0);
      chol_[0].compute(cov);
      if (chol_[0].info() != Eigen::Success) return false;
    }
    return true;
  }

  int predict(const Eigen::VectorXd& v) const {
    std::array<double, 2> score{};
    for (int c = 0; c < 2; ++c) {
      const auto& ch = quadratic_ ? chol_[c] : chol_[0];
      const Eigen::VectorXd r = v - means_[c];
      const double maha = r.dot(ch.solve(r));
      score[static_cast<std::size_t>(c)] = log_prior_[c] - 0.5 * maha - (quadratic_ ? 0.5 * log_det_[c] : 0.0);
    }
    return score[1] > score[0] ? 1 : 0;
  }

 private:
  bool quadratic_ = false;
  Eigen::VectorXd means_[2];
  double log_prior_[2] = {0.0, 0.0};
  double log_det_[2] = {0.0, 0.0};
  Eigen::LLT<Eigen::MatrixXd> chol_[2];
};

// Cross-validated misclassification rate; NaN when a fold cannot be fitted.
inline double cv_mmce(const Sample& s, const std::vector<int>& label, const std::vector<std::size_t>& fold,
                      std::size_t folds, bool quadratic) {
  std::size_t errors = 0;
  for (std::size_t f = 0; f < folds; ++f) {
    std::vector<std::size_t> train;
    for (std::size_t i = 0; i < s.n(); ++i)
      if (fold[i] != f) train.push_back(i);
    Eigen::MatrixXd xt(static_cast<Eigen::Index>(train.size()), s.x.cols());
    std::vector<int> lt(train.size());
    for (std::size_t r = 0; r < train.size(); ++r) {
      xt.row(static_cast<Eigen::Index>(r)) = s.x.row(static_cast<Eigen::Index>(train[r]));
      lt[r] = label[train[r]];
    }
    Discriminant model;
    if (!model.fit(xt, lt, quadratic)) return kNaN;
    for (std::size_t i = 0; i < s.n(); ++i)
      if (fold[i] == f && model.predict(s.x.row(static_cast<Eigen::Index>(i)).transpose()) != label[i]) ++errors;
  }
  return static_cast<double>(errors) / static_cast<double>(s.n());
}

inline void level_features(const Sample& s, const FeatureOptions& opt, FeatureVector& fv, std::size_t base) {
  const std::size_t nq = std::size(kLevelQuantiles);
  std::vector<double> yv(s.y.data(), s.y.data() + s.n());
  for (std::size_t qi = 0; qi < nq; ++qi) {
    const double thr = quantile(yv, kLevelQuantiles[qi]);
    std::vector<int> label(s.n());
    std::vector<std::vector<std::size_t>> members(2);
    for (std::size_t i = 0; i < s.n(); ++i) {
      label[i] = yv[i] < thr ? 1 : 0;
      members[static_cast<std::size_t>(label[i])].push_back(i);
    }
    if (members[0].size() < opt.cv_folds || members[1].size() < opt.cv_folds) continue;
    // stratified folds
    std::vector<std::size_t> fold(s.n());
    Rng rng(derive_seed(opt.cv_seed, "ela-level-folds", qi));
    for (auto& m : members) {
      shuffle(m, rng);
      for (std::size_t r = 0; r < m.size(); ++r) fold[m[r]] = r % opt.cv_folds;
    }
    const double lda = cv_mmce(s, label, fold, opt.cv_folds, false);
    const double qda = cv_mmce(s, label, fold, opt.cv_folds, true);
    fv.set(base + qi, lda);
    fv.set(base + nq + qi, qda);
    fv.set(base + 2 * nq + qi, lda > 0.0 ? qda / lda : kNaN);
  }
}

inline void nbc_features(const Sample& s, const Distances& dist, FeatureVector& fv, std::size_t base) {
  const std::size_t n = s.n();
  std::vector<double> nn_all(n, std::numeric_limits<double>::infinity());
  std::vector<double> nb(n, std::numeric_limits<double>::infinity());
  std::vector<std::size_t> nb_of(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dij = dist(i, j);
      if (dij < nn_all[i]) nn_all[i] = dij;
      if (s.y(static_cast<Eigen::Index>(j)) < s.y(static_cast<Eigen::Index>(i)) && dij < nb[i]) {
        nb[i] = dij;
        nb_of[i] = j;
      }
    }
  }
  std::vector<double> nn_d, nb_d, fit;
  std::vector<double> indegree(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (nb_of[i] == n) continue;
    nn_d.push_back(nn_all[i]);
    nb_d.push_back(nb[i]);
    fit.push_back(s.y(static_cast<Eigen::Index>(i)));
    indegree[nb_of[i]] += 1.0;
  }
  if (nb_d.size() < 3) return;
  const double sd_nn = stddev(nn_d), sd_nb = stddev(nb_d);
  const double mean_nn = mean(nn_d), mean_nb = mean(nb_d);
  fv.set(base + 0, sd_nn > 0.0 ? sd_nb / sd_nn : kNaN);
  fv.set(base + 1, mean_nn > 0.0 ? mean_nb / mean_nn : kNaN);
  fv.set(base + 2, pearson(nb_d, fit));
  fv.set(base + 3, mean_nb > 0.0 ? sd_nb / mean_nb : kNaN);
  std::vector<double> yall(s.y.data(), s.y.data() + n);
  fv.set(base + 4, pearson(indegree, yall));
}

struct Dispersion {
  double ratio_mean = kNaN, ratio_median = kNaN, diff_mean = kNaN, diff_median = kNaN;
};

// Indices of the best max(2, round(q n)) points; ties by canonical index.
inline std::vector<std::size_t> best_fraction(const Sample& s, double q) {
  std::vector<std::size_t> idx(s.n());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return s.y(static_cast<Eigen::Index>(a)) < s.y(static_cast<Eigen::Index>(b));
  });
  auto m = static_cast<std::size_t>(std::lround(q * static_cast<double>(s.n())));
  m = std::clamp<std::size_t>(m, 2, s.n());
  idx.resize(m);
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline Dispersion dispersion(const Sample& s, const Distances& dist, double q, double all_mean, double all_median) {
  const auto best = best_fraction(s, q);
  std::vector<double> d;
  d.reserve(best.size() * (best.size() - 1) / 2);
  for (std::size_t a = 0; a < best.size(); ++a)
    for (std::size_t b = a + 1; b < best.size(); ++b) d.push_back(dist(best[a], best[b]));
  Dispersion out;
  const double m = mean(d), med = median(std::move(d));
  if (all_mean > 0.0) out.ratio_mean = m / all_mean;
  if (all_median > 0.0) out.ratio_median = med / all_median;
  out.diff_mean = m - all_mean;
  out.diff_median = med - all_median;
  return out;
}

inline void disp_features(const Sample& s, const Distances& dist, FeatureVector& fv, std::size_t base) {
  const double all_mean = mean(dist.all());
  const double all_median = median(dist.all());
  const std::size_t nq = std::size(kDispQuantiles);
  for (std::size_t qi = 0; qi < nq; ++qi) {
    const auto r = dispersion(s, dist, kDispQuantiles[qi], all_mean, all_median);
    fv.set(base + qi, r.ratio_mean);
    fv.set(base + nq + qi, r.ratio_median);
    fv.set(base + 2 * nq + qi, r.diff_mean);
    fv.set(base + 3 * nq + qi, r.diff_median);
  }
}

}  // namespace detail

/// Information-content curve H(eps) and partial information M(eps) along a
/// nearest-neighbour tour of the sample.
struct InformationContent {
  std::vector<double> eps;  // eps[0] == 0, then increasing positive values
  std::vector<double> entropy;
  std::vector<double> partial;
  double h_max = kNaN, eps_s = kNaN, eps_max = kNaN, eps_ratio = kNaN, m0 = kNaN;
};

namespace detail {

inline std::vector<std::size_t> nearest_neighbour_tour(const Distances& dist) {
  const std::size_t n = dist.n();
  std::vector<std::size_t> tour;
  tour.reserve(n);
  std::vector<char> seen(n, 0);
  std::size_t cur = 0;
  seen[0] = 1;
  tour.push_back(0);
  for (std::size_t step = 1; step < n; ++step) {
    std::size_t best = n;
    double bd = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (seen[j]) continue;
      const double dj = dist(cur, j);
      if (dj < bd) {
        bd = dj;
        best = j;
      }
    }
    seen[best] = 1;
    tour.push_back(best);
    cur = best;
  }
  return tour;
}

inline InformationContent information_content(const Sample& s, const Distances& dist, const FeatureOptions& opt) {
  InformationContent ic;
  const auto tour = nearest_neighbour_tour(dist);
  std::vector<double> delta(tour.size() - 1);
  for (std::size_t i = 0; i + 1 < tour.size(); ++i)
    delta[i] = s.y(static_cast<Eigen::Index>(tour[i + 1])) - s.y(static_cast<Eigen::Index>(tour[i]));

  double min_nz = std::numeric_limits<double>::infinity(), max_abs = 0.0;
  for (double v : delta) {
    const double a = std::abs(v);
    if (a > 0.0) min_nz = std::min(min_nz, a);
    max_abs = std::max(max_abs, a);
  }
  ic.eps.push_back(0.0);
  if (max_abs > 0.0) {
    const double lo = std::log10(min_nz) - 1.0, hi = std::log10(max_abs);
    for (std::size_t g = 0; g < opt.ic_grid; ++g)
      ic.eps.push_back(std::pow(10.0, lo + (hi - lo) * static_cast<double>(g) / static_cast<double>(opt.ic_grid - 1)));
    ic.eps.back() = max_abs;
  }

  const std::size_t m = delta.size();
  std::vector<int> sym(m);
  for (double eps : ic.eps) {
    for (std::size_t i = 0; i < m; ++i) sym[i] = delta[i] > eps ? 1 : (delta[i] < -eps ? -1 : 0);
    // entropy over the six ordered pairs of distinct consecutive symbols, base 6
    double counts[3][3] = {};
    for (std::size_t i = 0; i + 1 < m; ++i) counts[sym[i] + 1][sym[i + 1] + 1] += 1.0;
    double h = 0.0;
    if (m > 1) {
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          if (a == b || counts[a][b] == 0.0) continue;
          const double p = counts[a][b] / static_cast<double>(m - 1);
          h -= p * std::log(p) / std::log(6.0);
        }
    }
    ic.entropy.push_back(h);
    // partial information: length of the sign sequence with zeros dropped and runs merged
    std::size_t mu = 0;
    int last = 0;
    for (int v : sym) {
      if (v == 0 || v == last) continue;
      ++mu;
      last = v;
    }
    ic.partial.push_back(m > 0 ? static_cast<double>(mu) / static_cast<double>(m) : 0.0);
  }

  ic.h_max = *std::max_element(ic.entropy.begin(), ic.entropy.end());
  ic.m0 = ic.partial.front();
  if (ic.eps.size() > 1) {
    std::size_t arg = 1;
    for (std::size_t g = 1; g < ic.eps.size(); ++g)
      if (ic.entropy[g] > ic.entropy[arg]) arg = g;
    ic.eps_max = std::log10(ic.eps[arg]);
    for (std::size_t g = 1; g < ic.eps.size(); ++g)
      if (ic.entropy[g] < opt.ic_settling) {
        ic.eps_s = std::log10(ic.eps[g]);
        break;
      }
    if (ic.m0 > 0.0)
      for (std::size_t g = ic.eps.size(); g-- > 1;)
        if (ic.partial[g] > 0.5 * ic.m0) {
          ic.eps_ratio = std::log10(ic.eps[g]);
          break;
        }
  }
  return ic;
}

}  // namespace detail

inline std::size_t minimum_sample_size(std::size_t d) { return 50 * d; }

/// Computes every catalog feature from one (points, values) sample.
inline FeatureVector compute_features(const PointMatrix& points, std::span<const double> values, int problem_id = 0,
                                      const FeatureOptions& opt = {}) {
  const auto n = static_cast<std::size_t>(points.rows());
  const auto d = static_cast<std::size_t>(points.cols());
  if (values.size() != n) fail(ErrorKind::domain, "sample has " + std::to_string(n) + " points but " +
                                                       std::to_string(values.size()) + " values");
  if (d < 1 || n < minimum_sample_size(d))
    fail(ErrorKind::sample_size, "need at least " + std::to_string(minimum_sample_size(d)) + " points, got " +
                                     std::to_string(n));
  for (double v : values)
    if (!std::isfinite(v)) fail(ErrorKind::data, "sample contains a non-finite objective value");

  const auto s = detail::canonicalize(points, values);
  const detail::Distances dist(s.x);
  auto fv = FeatureVector::empty_catalog(problem_id);
  const auto& cat = catalog();
  std::size_t base = 0;
  for (const auto& g : cat.groups) {
    if (g.name == "ela_meta") detail::meta_features(s, fv, base);
    else if (g.name == "ela_distr") detail::distr_features(s, opt, fv, base);
    else if (g.name == "ela_level") detail::level_features(s, opt, fv, base);
    else if (g.name == "nbc") detail::nbc_features(s, dist, fv, base);
    else if (g.name == "disp") detail::disp_features(s, dist, fv, base);
    else if (g.name == "ic") {
      const auto ic = detail::information_content(s, dist, opt);
      fv.set(base + 0, ic.h_max);
      fv.set(base + 1, ic.eps_s);
      fv.set(base + 2, ic.eps_max);
      fv.set(base + 3, ic.eps_ratio);
      fv.set(base + 4, ic.m0);
    }
    base += g.features.size();
  }
  return fv;
}

/// Information-content curve for inspection and tests.
inline InformationContent information_content(const PointMatrix& points, std::span<const double> values,
                                              const FeatureOptions& opt = {}) {
  const auto s = detail::canonicalize(points, values);
  return detail::information_content(s, detail::Distances(s.x), opt);
}

/// Dispersion of the best fraction q of the sample against all points.
inline detail::Dispersion dispersion(const PointMatrix& points, std::span<const double> values, double q) {
  const auto s = detail::canonicalize(points, values);
  const detail::Distances dist(s.x);
  return detail::dispersion(s, dist, q, mean(dist.all()), median(dist.all()));
}

/// Per-feature mean over repetitions; infeasible anywhere means infeasible.
inline FeatureVector average_feature_repetitions(const std::vector<FeatureVector>& reps) {
  if (reps.empty()) fail(ErrorKind::domain, "no repetitions to average");
  FeatureVector out = reps.front();
  for (const auto& r : reps)
    if (r.names != out.names || r.problem_id != out.problem_id)
      fail(ErrorKind::domain, "repetitions disagree on problem or feature catalog");
  for (std::size_t i = 0; i < out.size(); ++i) {
    double acc = 0.0;
    bool ok = true;
    for (const auto& r : reps) {
      ok = ok && r.feasible[i];
      acc += r.values[i];
    }
    out.set(i, ok ? acc / static_cast<double>(reps.size()) : kNaN);
  }
  return out;
}

/// Population x features matrix with an explicit feasibility mask.
struct FeatureMatrix {
  std::vector<std::string> names;
  std::vector<int> problem_ids;
  std::vector<std::vector<double>> rows;
  std::vector<std::vector<char>> feasible;

  static FeatureMatrix from_vectors(const std::vector<FeatureVector>& vs) {
    FeatureMatrix m;
    if (vs.empty()) return m;
    m.names = vs.front().names;
    for (const auto& v : vs) {
      if (v.names != m.names) fail(ErrorKind::domain, "feature vectors disagree on names");
      m.problem_ids.push_back(v.problem_id);
      m.rows.push_back(v.values);
      m.feasible.push_back(v.feasible);
    }
    return m;
  }

  std::vector<double> column(std::size_t j) const {
    std::vector<double> c(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) c[i] = rows[i][j];
    return c;
  }
};

/// Drops features infeasible anywhere, then iteratively removes the feature with
/// the most |Pearson r| > threshold partners (ties: latest in catalog order).
inline std::vector<std::string> prune_features(const FeatureMatrix& m, double threshold = 0.9) {
  if (m.rows.size() < 3) fail(ErrorKind::domain, "pruning needs at least 3 population rows");
  std::vector<std::size_t> alive;
  for (std::size_t j = 0; j < m.names.size(); ++j) {
    bool ok = true;
    for (const auto& f : m.feasible) ok = ok && f[j];
    if (ok) alive.push_back(j);
  }
  if (alive.empty()) fail(ErrorKind::pruning, "every feature is infeasible for some population member");

  const std::size_t k = alive.size();
  std::vector<std::vector<double>> cols(k);
  for (std::size_t a = 0; a < k; ++a) cols[a] = m.column(alive[a]);
  std::vector<std::vector<char>> high(k, std::vector<char>(k, 0));
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) {
      const double r = pearson(cols[a], cols[b]);
      high[a][b] = high[b][a] = (std::isfinite(r) && std::abs(r) > threshold) ? 1 : 0;
    }
  std::vector<char> keep(k, 1);
  for (;;) {
    std::size_t worst = k, worst_count = 0;
    for (std::size_t a = 0; a < k; ++a) {
      if (!keep[a]) continue;
      std::size_t c = 0;
      for (std::size_t b = 0; b < k; ++b) c += (keep[b] && high[a][b]) ? 1 : 0;
      if (c > 0 && c >= worst_count) {
        worst = a;
        worst_count = c;
      }
    }
    if (worst == k) break;
    keep[worst] = 0;
  }
  std::vector<std::string> out;
  for (std::size_t a = 0; a < k; ++a)
    if (keep[a]) out.push_back(m.names[alive[a]]);
  if (out.empty()) fail(ErrorKind::pruning, "no features survive pruning");
  return out;
}

struct NormalizationBounds {
  std::size_t dim = 0;
  std::string population;
  std::vector<std::string> names;
  std::vector<double> min;
  std::vector<double> max;

  nlohmann::json to_json() const {
    nlohmann::json f = nlohmann::json::object();
    for (std::size_t i = 0; i < names.size(); ++i) f[names[i]] = {min[i], max[i]};
    return {{"d", dim}, {"population", population}, {"features", f}, {"order", names}};
  }

  static NormalizationBounds from_json(const nlohmann::json& j) {
    NormalizationBounds b;
    try {
      b.dim = j.at("d").get<std::size_t>();
      b.population = j.at("population").get<std::string>();
      b.names = j.at("order").get<std::vector<std::string>>();
      for (const auto& n : b.names) {
        b.min.push_back(j.at("features").at(n).at(0).get<double>());
        b.max.push_back(j.at("features").at(n).at(1).get<double>());
      }
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::data, std::string("malformed normalization bounds: ") + e.what());
    }
    return b;
  }
};

/// Per-feature (min, max) over the feasible entries of the population.
inline NormalizationBounds fit_minmax(const FeatureMatrix& m, std::size_t dim = 0, std::string population = {}) {
  NormalizationBounds b;
  b.dim = dim;
  b.population = std::move(population);
  b.names = m.names;
  for (std::size_t j = 0; j < m.names.size(); ++j) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < m.rows.size(); ++i) {
      if (!m.feasible[i][j]) continue;
      lo = std::min(lo, m.rows[i][j]);
      hi = std::max(hi, m.rows[i][j]);
    }
    if (lo > hi) lo = hi = kNaN;
    b.min.push_back(lo);
    b.max.push_back(hi);
  }
  return b;
}

/// (v - min) / (max - min), clipped to [0, 1]; constant features map to 0.5.
inline FeatureVector apply_minmax(const FeatureVector& v, const NormalizationBounds& b) {
  FeatureVector out = v.subset(b.names);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out.feasible[i] || !std::isfinite(b.min[i])) {
      out.set(i, kNaN);
      continue;
    }
    const double span = b.max[i] - b.min[i];
    out.values[i] = span > 0.0 ? std::clamp((out.values[i] - b.min[i]) / span, 0.0, 1.0) : 0.5;
  }
  out.normalized = true;
  return out;
}

}  // namespace aaslab::ela

#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aaslab/common.hpp"

// Registry of scalable component functions modelled on the 24 noiseless BBOB
// functions. Every kernel takes already-transformed coordinates z and has its
// canonical optimum at z = 0. The BBOB oscillation/asymmetry transformations
// are not reproduced; the conditioning matrices are.
namespace aaslab {

enum class FunctionGroup {
  separable,
  low_conditioning,
  high_conditioning,
  multimodal_adequate,
  multimodal_weak,
};

inline std::string_view to_string(FunctionGroup g) {
  switch (g) {
    case FunctionGroup::separable: return "separable";
    case FunctionGroup::low_conditioning: return "low-conditioning";
    case FunctionGroup::high_conditioning: return "high-conditioning";
    case FunctionGroup::multimodal_adequate: return "multimodal-adequate";
    case FunctionGroup::multimodal_weak: return "multimodal-weak";
  }
  return "unknown";
}

using Kernel = std::function<double(std::span<const double>)>;

struct ComponentFunction {
  int id;
  std::string_view name;
  FunctionGroup group;
  bool rotated;                      // instances draw a random rotation
  Kernel (*bind)(std::size_t dim);  // dimension-specialised evaluator
};

namespace detail {

// position of coordinate i on [0, 1] (0 for d = 1)
inline double ramp(std::size_t i, std::size_t d) {
  return d > 1 ? static_cast<double>(i) / static_cast<double>(d - 1) : 0.0;
}

// diagonal of the BBOB conditioning matrix Lambda^alpha
inline std::vector<double> conditioning(std::size_t d, double alpha) {
  std::vector<double> s(d);
  for (std::size_t i = 0; i < d; ++i) s[i] = std::pow(alpha, 0.5 * ramp(i, d));
  return s;
}

// 10 (n - sum cos(2 pi y_i)) + |y|^2 with y_i = scale(i, z_i) * z_i
template <typename Scale>
double rastrigin_core(std::span<const double> z, Scale&& scale) {
  double c = 0.0, q = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double v = scale(i, z[i]) * z[i];
    c += std::cos(2.0 * std::numbers::pi * v);
    q += v * v;
  }
  return 10.0 * (static_cast<double>(z.size()) - c) + q;
}

inline Kernel sphere(std::size_t) {
  return [](std::span<const double> z) {
    double s = 0.0;
    for (double v : z) s += v * v;
    return s;
  };
}

inline Kernel ellipsoid(std::size_t d) {
  std::vector<double> c(d);
  for (std::size_t i = 0; i < d; ++i) c[i] = std::pow(10.0, 6.0 * ramp(i, d));
  return [c](std::span<const double> z) {
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) s += c[i] * z[i] * z[i];
    return s;
  };
}

inline Kernel rastrigin(std::size_t d) {
  auto lam = conditioning(d, 10.0);
  return [lam](std::span<const double> z) {
    return rastrigin_core(z, [&](std::size_t i, double) { return lam[i]; });
  };
}

inline Kernel bueche_rastrigin(std::size_t d) {
  auto lam = conditioning(d, 10.0);
  return [lam](std::span<const double> z) {
    return rastrigin_core(z, [&](std::size_t i, double v) { return (v > 0.0 && i % 2 == 0 ? 10.0 : 1.0) * lam[i]; });
  };
}

// Weighted L1 cone: grows linearly away from the optimum with slopes 1..10.
inline Kernel linear_slope(std::size_t d) {
  std::vector<double> c(d);
  for (std::size_t i = 0; i < d; ++i) c[i] = std::pow(10.0, ramp(i, d));
  return [c](std::span<const double> z) {
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) s += 5.0 * c[i] * std::abs(z[i]);
    return s;
  };
}

inline Kernel attractive_sector(std::size_t d) {
  auto lam = conditioning(d, 10.0);
  return [lam](std::span<const double> z) {
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double y = lam[i] * z[i];
      const double w = y > 0.0 ? 100.0 : 1.0;
      s += (w * y) * (w * y);
    }
    return std::pow(s, 0.9);
  };
}

inline Kernel step_ellipsoid(std::size_t d) {
  auto lam = conditioning(d, 10.0);
  std::vector<double> c(d);
  for (std::size_t i = 0; i < d; ++i) c[i] = std::pow(10.0, 2.0 * ramp(i, d));
  return [lam, c](std::span<const double> z) {
    double s = 0.0, first = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double y = lam[i] * z[i];
      if (i == 0) first = std::abs(y);
      const double r = std::abs(y) > 0.5 ? std::round(y) : std::round(10.0 * y) / 10.0;
      s += c[i] * r * r;
    }
    return 0.1 * std::max(first / 1e4, s);
  };
}

// Rosenbrock with u = scale*z + 1; the last coordinate also carries (u - 1)^2
// so that the function is non-degenerate for d = 1.
inline Kernel rosenbrock(std::size_t d) {
  const double scale = std::max(1.0, std::sqrt(static_cast<double>(d)) / 8.0);
  return [scale](std::span<const double> z) {
    const std::size_t n = z.size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = scale * z[i] + 1.0;
      if (i + 1 < n) {
        const double un = scale * z[i + 1] + 1.0;
        s += 100.0 * (u * u - un) * (u * u - un);
      }
      s += (u - 1.0) * (u - 1.0);
    }
    return s;
  };
}

inline Kernel discus(std::size_t) {
  return [](std::span<const double> z) {
    double s = 1e6 * z[0] * z[0];
    for (std::size_t i = 1; i < z.size(); ++i) s += z[i] * z[i];
    return s;
  };
}

inline Kernel bent_cigar(std::size_t) {
  return [](std::span<const double> z) {
    double s = z[0] * z[0];
    for (std::size_t i = 1; i < z.size(); ++i) s += 1e6 * z[i] * z[i];
    return s;
  };
}

inline Kernel sharp_ridge(std::size_t) {
  return [](std::span<const double> z) {
    double r = 0.0;
    for (std::size_t i = 1; i < z.size(); ++i) r += z[i] * z[i];
    return z[0] * z[0] + 100.0 * std::sqrt(r);
  };
}

inline Kernel different_powers(std::size_t d) {
  std::vector<double> e(d);
  for (std::size_t i = 0; i < d; ++i) e[i] = 2.0 + 4.0 * ramp(i, d);
  return [e](std::span<const double> z) {
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) s += std::pow(std::abs(z[i]), e[i]);
    return std::sqrt(s);
  };
}

inline Kernel weierstrass(std::size_t d) {
  auto lam = conditioning(d, 0.01);
  double f0 = 0.0;
  for (int k = 0; k < 12; ++k) f0 += std::pow(0.5, k) * std::cos(std::numbers::pi * std::pow(3.0, k));
  return [lam, f0](std::span<const double> z) {
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double y = lam[i] * z[i];
      double a = 1.0, b = 1.0;
      for (int k = 0; k < 12; ++k, a *= 0.5, b *= 3.0) s += a * std::cos(2.0 * std::numbers::pi * b * (y + 0.5));
    }
    const double t = std::max(0.0, s / static_cast<double>(z.size()) - f0);
    return 10.0 * t * t * t;
  };
}

inline Kernel schaffers(std::size_t d, double alpha) {
  auto lam = conditioning(d, alpha);
  return [lam](std::span<const double> z) {
    const std::size_t n = z.size();
    auto term = [](double s) {
      const double r = std::sqrt(s);
      const double w = std::sin(50.0 * std::pow(s, 0.2));
      return r + r * w * w;
    };
    if (n == 1) {
      const double t = term(std::abs(lam[0] * z[0]));
      return t * t;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double a = lam[i] * z[i], b = lam[i + 1] * z[i + 1];
      acc += term(std::sqrt(a * a + b * b));
    }
    acc /= static_cast<double>(n - 1);
    return acc * acc;
  };
}

inline Kernel schaffers10(std::size_t d) { return schaffers(d, 10.0); }
inline Kernel schaffers1000(std::size_t d) { return schaffers(d, 1000.0); }

inline Kernel griewank_rosenbrock(std::size_t d) {
  const double scale = std::max(1.0, std::sqrt(static_cast<double>(d)) / 8.0);
  return [scale](std::span<const double> z) {
    const std::size_t n = z.size();
    auto part = [](double s) { return s / 4000.0 - std::cos(s); };
    if (n == 1) {
      const double u = scale * z[0];
      return 10.0 * part(u * u) + 10.0;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double u = scale * z[i] + 1.0, un = scale * z[i + 1] + 1.0;
      const double s = 100.0 * (u * u - un) * (u * u - un) + (u - 1.0) * (u - 1.0);
      acc += part(s);
    }
    return 10.0 / static_cast<double>(n - 1) * acc + 10.0;
  };
}

inline Kernel schwefel(std::size_t d) {
  auto lam = conditioning(d, 10.0);
  return [lam](std::span<const double> z) {
    constexpr double opt = 4.2096874633;
    double s = 0.0, pen = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double w = lam[i] * z[i] + opt;
      const double u = 100.0 * w;
      s += u * std::sin(std::sqrt(std::abs(u)));
      const double excess = std::abs(w) - 5.0;
      if (excess > 0.0) pen += excess * excess;
    }
    return -s / (100.0 * static_cast<double>(z.size())) + 4.189828872724339 + 100.0 * pen;
  };
}

struct GallagherPeaks {
  std::vector<std::vector<double>> centers;
  std::vector<std::vector<double>> scales;  // diagonal of C_i
  std::vector<double> heights;
};

inline GallagherPeaks make_gallagher(std::size_t d, std::size_t peaks, double first_alpha, double spread) {
  Rng rng(derive_seed(0x6a11a6e5ULL, "gallagher", peaks, d));
  GallagherPeaks g;
  std::vector<std::size_t> order(peaks - 1);
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
  shuffle(order, rng);
  for (std::size_t p = 0; p < peaks; ++p) {
    std::vector<double> c(d, 0.0);
    if (p > 0)
      for (auto& v : c) v = uniform(rng, -spread, spread);
    const double alpha =
        p == 0 ? first_alpha
               : std::pow(1000.0, 2.0 * static_cast<double>(order[p - 1]) / static_cast<double>(peaks - 2));
    std::vector<double> s(d);
    for (std::size_t i = 0; i < d; ++i) s[i] = std::pow(alpha, 0.5 * ramp(i, d)) / std::pow(alpha, 0.25);
    shuffle(s, rng);
    g.centers.push_back(std::move(c));
    g.scales.push_back(std::move(s));
    g.heights.push_back(p == 0 ? 10.0 : 1.1 + 8.0 * static_cast<double>(p - 1) / static_cast<double>(peaks - 2));
  }
  return g;
}

inline Kernel gallagher(std::size_t d, std::size_t peaks, double first_alpha, double spread) {
  auto g = std::make_shared<const GallagherPeaks>(make_gallagher(d, peaks, first_alpha, spread));
  return [g](std::span<const double> z) {
    const double n = static_cast<double>(z.size());
    double best = 0.0;
    for (std::size_t p = 0; p < g->heights.size(); ++p) {
      double q = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) {
        const double t = z[i] - g->centers[p][i];
        q += g->scales[p][i] * t * t;
      }
      best = std::max(best, g->heights[p] * std::exp(-q / (2.0 * n)));
    }
    return (10.0 - best) * (10.0 - best);
  };
}

inline Kernel gallagher101(std::size_t d) { return gallagher(d, 101, 1000.0, 4.9); }
inline Kernel gallagher21(std::size_t d) { return gallagher(d, 21, 1e6, 3.92); }

inline Kernel katsuura(std::size_t d) {
  auto lam = conditioning(d, 100.0);
  const double n = static_cast<double>(d);
  const double expo = 10.0 / std::pow(n, 1.2);
  return [lam, n, expo](std::span<const double> z) {
    double prod = 1.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double y = lam[i] * z[i];
      double s = 0.0, p2 = 2.0;
      for (int j = 1; j <= 32; ++j, p2 *= 2.0) s += std::abs(p2 * y - std::round(p2 * y)) / p2;
      prod *= std::pow(1.0 + static_cast<double>(i + 1) * s, expo);
    }
    return 10.0 / (n * n) * (prod - 1.0);
  };
}

inline Kernel lunacek(std::size_t d) {
  auto lam = conditioning(d, 100.0);
  const double n = static_cast<double>(d);
  const double mu0 = 2.5;
  const double s = 1.0 - 1.0 / (2.0 * std::sqrt(n + 20.0) - 8.2);
  const double mu1 = -std::sqrt((mu0 * mu0 - 1.0) / s);
  return [lam, n, mu0, mu1, s](std::span<const double> z) {
    double a = 0.0, b = 0.0, c = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double xh = z[i] + mu0;
      a += (xh - mu0) * (xh - mu0);
      b += (xh - mu1) * (xh - mu1);
      c += std::cos(2.0 * std::numbers::pi * lam[i] * z[i]);
    }
    return std::min(a, n + s * b) + 10.0 * (n - c);
  };
}

}  // namespace detail

inline const std::vector<ComponentFunction>& registry() {
  using G = FunctionGroup;
  static const std::vector<ComponentFunction> table = {
      {1, "sphere", G::separable, false, &detail::sphere},
      {2, "ellipsoid-separable", G::separable, false, &detail::ellipsoid},
      {3, "rastrigin-separable", G::separable, false, &detail::rastrigin},
      {4, "bueche-rastrigin", G::separable, false, &detail::bueche_rastrigin},
      {5, "linear-slope", G::separable, false, &detail::linear_slope},
      {6, "attractive-sector", G::low_conditioning, true, &detail::attractive_sector},
      {7, "step-ellipsoid", G::low_conditioning, true, &detail::step_ellipsoid},
      {8, "rosenbrock", G::low_conditioning, false, &detail::rosenbrock},
      {9, "rosenbrock-rotated", G::low_conditioning, true, &detail::rosenbrock},
      {10, "ellipsoid", G::high_conditioning, true, &detail::ellipsoid},
      {11, "discus", G::high_conditioning, true, &detail::discus},
      {12, "bent-cigar", G::high_conditioning, true, &detail::bent_cigar},
      {13, "sharp-ridge", G::high_conditioning, true, &detail::sharp_ridge},
      {14, "different-powers", G::high_conditioning, true, &detail::different_powers},
      {15, "rastrigin", G::multimodal_adequate, true, &detail::rastrigin},
      {16, "weierstrass", G::multimodal_adequate, true, &detail::weierstrass},
      {17, "schaffers-f7", G::multimodal_adequate, true, &detail::schaffers10},
      {18, "schaffers-f7-ill", G::multimodal_adequate, true, &detail::schaffers1000},
      {19, "griewank-rosenbrock", G::multimodal_adequate, true, &detail::griewank_rosenbrock},
      {20, "schwefel", G::multimodal_weak, false, &detail::schwefel},
      {21, "gallagher-101", G::multimodal_weak, true, &detail::gallagher101},
      {22, "gallagher-21", G::multimodal_weak, true, &detail::gallagher21},
      {23, "katsuura", G::multimodal_weak, true, &detail::katsuura},
      {24, "lunacek-bi-rastrigin", G::multimodal_weak, true, &detail::lunacek},
  };
  return table;
}

inline std::size_t registry_size() { return registry().size(); }

inline const ComponentFunction& component_function(int id) {
  const auto& reg = registry();
  if (id < 1 || static_cast<std::size_t>(id) > reg.size())
    fail(ErrorKind::registry, "unknown component id " + std::to_string(id));
  return reg[static_cast<std::size_t>(id - 1)];
}

}  // namespace aaslab

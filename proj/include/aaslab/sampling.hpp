#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "aaslab/common.hpp"

namespace aaslab {

/// n x d sample, one point per row (rows are contiguous).
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::span<const double> row_span(const PointMatrix& m, Eigen::Index r) {
  return {m.data() + r * m.cols(), static_cast<std::size_t>(m.cols())};
}

/// Sobol' sequence in base 2 with Joe-Kuo (new-joe-kuo-6.21201) direction numbers,
/// 32-bit resolution, Gray-code ordering.
class SobolSequence {
 public:
  static constexpr std::size_t max_dimension = 16;
  static constexpr int bits = 32;

  explicit SobolSequence(std::size_t dimension) : dimension_(dimension) {
    if (dimension == 0 || dimension > max_dimension)
      fail(ErrorKind::domain, "Sobol dimension " + std::to_string(dimension) + " outside [1, " +
                                  std::to_string(max_dimension) + "]");
    directions_.resize(dimension);
    for (std::size_t j = 0; j < dimension; ++j) directions_[j] = direction_numbers(j);
  }

  std::size_t dimension() const { return dimension_; }

  /// Integer coordinates of point `index` (index 0 is the origin).
  void integer_point(std::uint64_t index, std::span<std::uint32_t> out) const {
    const std::uint64_t gray = index ^ (index >> 1);
    for (std::size_t j = 0; j < dimension_; ++j) {
      std::uint32_t x = 0;
      std::uint64_t g = gray;
      for (int b = 0; g != 0 && b < bits; ++b, g >>= 1)
        if (g & 1U) x ^= directions_[j][static_cast<std::size_t>(b)];
      out[j] = x;
    }
  }

 private:
  struct Primitive {
    unsigned degree;
    unsigned coeffs;
    std::array<std::uint32_t, 6> m;
  };

  // Rows for dimensions 2..16 of the Joe-Kuo table: degree s, coefficients a, m_1..m_s.
  static constexpr std::array<Primitive, max_dimension - 1> table_{{
      {1, 0, {1}},
      {2, 1, {1, 3}},
      {3, 1, {1, 3, 1}},
      {3, 2, {1, 1, 1}},
      {4, 1, {1, 1, 3, 3}},
      {4, 4, {1, 3, 5, 13}},
      {5, 2, {1, 1, 5, 5, 17}},
      {5, 4, {1, 1, 5, 5, 5}},
      {5, 7, {1, 1, 7, 11, 19}},
      {5, 11, {1, 1, 5, 1, 1}},
      {5, 13, {1, 1, 1, 3, 11}},
      {5, 14, {1, 3, 5, 5, 31}},
      {6, 1, {1, 3, 3, 9, 7, 49}},
      {6, 13, {1, 1, 1, 15, 21, 21}},
      {6, 16, {1, 3, 1, 13, 27, 49}},
  }};

  static std::array<std::uint32_t, bits> direction_numbers(std::size_t j) {
    std::array<std::uint32_t, bits> v{};
    if (j == 0) {
      for (int k = 0; k < bits; ++k) v[static_cast<std::size_t>(k)] = 1U << (bits - 1 - k);
      return v;
    }
    const Primitive& p = table_[j - 1];
    const unsigned s = p.degree;
    for (unsigned k = 0; k < s; ++k) v[k] = p.m[k] << (bits - 1 - static_cast<int>(k));
    for (unsigned k = s; k < static_cast<unsigned>(bits); ++k) {
      std::uint32_t x = v[k - s] ^ (v[k - s] >> s);
      for (unsigned i = 1; i < s; ++i)
        if ((p.coeffs >> (s - 1 - i)) & 1U) x ^= v[k - i];
      v[k] = x;
    }
    return v;
  }

  std::size_t dimension_;
  std::vector<std::array<std::uint32_t, bits>> directions_;
};

struct SampleDesign {
  std::size_t n = 1;
  std::size_t d = 1;
  std::vector<double> lo;
  std::vector<double> hi;
  std::uint64_t scramble_seed = 0;  // 0 = unscrambled

  static SampleDesign box(std::size_t n, std::size_t d, double lo, double hi, std::uint64_t scramble_seed = 0) {
    return SampleDesign{n, d, std::vector<double>(d, lo), std::vector<double>(d, hi), scramble_seed};
  }

  void validate() const {
    if (n < 1) fail(ErrorKind::domain, "sample design needs n >= 1");
    if (lo.size() != d || hi.size() != d) fail(ErrorKind::domain, "sample design bounds do not match dimension");
    for (std::size_t j = 0; j < d; ++j)
      if (!(lo[j] < hi[j])) fail(ErrorKind::domain, "sample design requires lo < hi in every coordinate");
  }
};

/// Per-coordinate XOR digital shift derived from a scramble seed (all zeros when seed is 0).
inline std::vector<std::uint32_t> digital_shift(std::uint64_t scramble_seed, std::size_t d) {
  std::vector<std::uint32_t> shift(d, 0U);
  if (scramble_seed == 0) return shift;
  for (std::size_t j = 0; j < d; ++j)
    shift[j] = static_cast<std::uint32_t>(derive_seed(scramble_seed, "sobol-shift", j) >> 32);
  return shift;
}

/// First n points after the origin, optionally digitally shifted, mapped to [lo, hi].
inline PointMatrix sobol_points(const SampleDesign& design) {
  design.validate();
  SobolSequence seq(design.d);
  const auto shift = digital_shift(design.scramble_seed, design.d);
  PointMatrix out(static_cast<Eigen::Index>(design.n), static_cast<Eigen::Index>(design.d));
  std::vector<std::uint32_t> ip(design.d);
  for (std::size_t i = 0; i < design.n; ++i) {
    seq.integer_point(i + 1, ip);
    for (std::size_t j = 0; j < design.d; ++j) {
      const double u = static_cast<double>(ip[j] ^ shift[j]) * 0x1.0p-32;
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          design.lo[j] + (design.hi[j] - design.lo[j]) * u;
    }
  }
  return out;
}

/// `repetitions` copies of base differing only in their scramble seeds.
inline std::vector<SampleDesign> repeat_designs(const SampleDesign& base, std::size_t repetitions, std::uint64_t seed) {
  std::vector<SampleDesign> out;
  out.reserve(repetitions);
  for (std::size_t r = 0; r < repetitions; ++r) {
    SampleDesign d = base;
    d.scramble_seed = derive_seed(seed, "ela-repetition", r);
    if (d.scramble_seed == 0) d.scramble_seed = 1;
    out.push_back(std::move(d));
  }
  return out;
}

/// Debug dump of a design as CSV (x1..xd).
inline std::string design_to_csv(const PointMatrix& points) {
  std::string out;
  for (Eigen::Index j = 0; j < points.cols(); ++j) out += (j ? ",x" : "x") + std::to_string(j + 1);
  out += '\n';
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
      if (j) out += ',';
      out += format_double(points(i, j));
    }
    out += '\n';
  }
  return out;
}

}  // namespace aaslab

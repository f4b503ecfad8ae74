#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace tsgzsl::features {

inline constexpr std::size_t kAttributeCount = 9;

inline const std::array<const char*, kAttributeCount>& attribute_names() {
  static const std::array<const char*, kAttributeCount> names = {
      "mean", "median", "max", "argmax", "min", "argmin", "skew", "kurtosis", "apen"};
  return names;
}

struct AttributeVector {
  std::array<double, kAttributeCount> values{};
};

struct ApEnParams {
  std::size_t m = 2;        // embedding length
  double r_factor = 0.2;    // tolerance = r_factor * population sigma
};

/// ApEn(m, r) = Phi_m(r) - Phi_{m+1}(r) with self-matches included;
/// Phi_m = mean over i of ln(C_i^m), C_i^m the fraction of windows within
/// Chebyshev distance r of window i. Requires T >= m+1 and r >= 0.
double approx_entropy(const std::vector<double>& series, std::size_t m, double r);

/// The fixed-order statistic vector [mean, median, max, argmax, min, argmin,
/// skew, kurtosis, approximate entropy]. Skew/kurtosis use population-moment
/// denominators (excess kurtosis); zero-variance series map all three
/// shape statistics to 0. argmax/argmin report the first extremal index.
AttributeVector compute_attributes(const std::vector<double>& series,
                                   const ApEnParams& apen = ApEnParams{});

/// CSV dump with header [series_index, mean, ..., apen].
std::string attributes_csv(const std::vector<AttributeVector>& rows);

}  // namespace tsgzsl::features

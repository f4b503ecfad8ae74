#include "tsgzsl/attributes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace tsgzsl::features {

double approx_entropy(const std::vector<double>& series, std::size_t m, double r) {
  const std::size_t T = series.size();
  if (m == 0) throw std::invalid_argument("approx_entropy: m must be >= 1");
  if (T <= m) {
    throw std::invalid_argument("approx_entropy: series length " + std::to_string(T) +
                                " must exceed embedding length m=" + std::to_string(m));
  }
  if (r < 0.0) throw std::invalid_argument("approx_entropy: tolerance r must be >= 0");

  auto phi = [&](std::size_t mm) {
    const std::size_t n = T - mm + 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t count = 0;
      for (std::size_t j = 0; j < n; ++j) {
        // Chebyshev distance between windows i and j; early exit on exceed
        bool within = true;
        for (std::size_t k = 0; k < mm; ++k) {
          if (std::fabs(series[i + k] - series[j + k]) > r) {
            within = false;
            break;
          }
        }
        if (within) ++count;
      }
      acc += std::log(static_cast<double>(count) / static_cast<double>(n));
    }
    return acc / static_cast<double>(n);
  };
  return phi(m) - phi(m + 1);
}

AttributeVector compute_attributes(const std::vector<double>& series, const ApEnParams& apen) {
  const std::size_t T = series.size();
  if (T < 2) {
    throw std::invalid_argument("compute_attributes: series length must be >= 2, got " +
                                std::to_string(T));
  }

  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(T);

  std::vector<double> sorted = series;
  std::sort(sorted.begin(), sorted.end());
  const double median = (T % 2 == 1) ? sorted[T / 2] : 0.5 * (sorted[T / 2 - 1] + sorted[T / 2]);

  std::size_t argmax = 0, argmin = 0;
  for (std::size_t i = 1; i < T; ++i) {
    if (series[i] > series[argmax]) argmax = i;
    if (series[i] < series[argmin]) argmin = i;
  }

  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : series) {
    const double d = v - mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= static_cast<double>(T);
  m3 /= static_cast<double>(T);
  m4 /= static_cast<double>(T);

  double skew = 0.0, kurtosis = 0.0, apen_value = 0.0;
  const double sigma = std::sqrt(m2);
  if (sigma > 1e-12) {
    skew = m3 / (m2 * sigma);
    kurtosis = m4 / (m2 * m2) - 3.0;
    // too short to embed -> degenerate, reported as 0 like the other shape stats
    if (T > apen.m) apen_value = approx_entropy(series, apen.m, apen.r_factor * sigma);
  }

  AttributeVector a;
  a.values = {mean,
              median,
              series[argmax],
              static_cast<double>(argmax),
              series[argmin],
              static_cast<double>(argmin),
              skew,
              kurtosis,
              apen_value};
  return a;
}

std::string attributes_csv(const std::vector<AttributeVector>& rows) {
  std::string out = "series_index";
  for (const char* n : attribute_names()) {
    out += ',';
    out += n;
  }
  out += '\n';
  char buf[64];
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out += std::to_string(i);
    for (double v : rows[i].values) {
      std::snprintf(buf, sizeof(buf), ",%.17g", v);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace tsgzsl::features

#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace chatcad {

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) noexcept { return std::sqrt(dot(a, a)); }

inline double squared_l2(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double l2(std::span<const double> a, std::span<const double> b) noexcept {
  return std::sqrt(squared_l2(a, b));
}

}  // namespace chatcad

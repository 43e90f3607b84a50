#pragma once

#include <random>

#include "ibkd/linalg.hpp"

namespace testutil {

inline ibkd::Matrix uniform(std::size_t r, std::size_t c, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  ibkd::Matrix m(r, c);
  for (double& v : m.data()) v = u(rng);
  return m;
}

inline ibkd::Matrix normal(std::size_t r, std::size_t c, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sd);
  ibkd::Matrix m(r, c);
  for (double& v : m.data()) v = n(rng);
  return m;
}

inline double max_abs(const ibkd::Matrix& m) {
  double a = 0.0;
  for (double v : m.data()) a = std::max(a, std::abs(v));
  return a;
}

inline double max_abs_diff(const ibkd::Matrix& a, const ibkd::Matrix& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
  return d;
}

}  // namespace testutil

#include <optional>

#include "ibkd/error.hpp"

namespace testutil {

/// Kind of the ibkd::Error thrown by f, or nullopt when nothing is thrown.
template <class F>
std::optional<ibkd::ErrorKind> error_kind(F&& f) {
  try {
    f();
  } catch (const ibkd::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

}  // namespace testutil

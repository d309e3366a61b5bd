#pragma once

#include <Eigen/Dense>

#include <cstdio>
#include <stdexcept>
#include <string>

namespace asphere {

inline constexpr const char* kVersion = "0.1.0";

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline Vec vec1(double x) {
  Vec v(1);
  v << x;
  return v;
}

inline Vec vec2(double x, double y) {
  Vec v(2);
  v << x, y;
  return v;
}

// 17 significant digits: enough to round-trip any IEEE double exactly.
inline std::string format_full(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// Errors carry a module prefix ("solver: ...") so CLI users can tell where a
// failure originated without a stack trace.
inline std::runtime_error error(const std::string& module, const std::string& what) {
  return std::runtime_error(module + ": " + what);
}

inline std::invalid_argument precondition_error(const std::string& module,
                                                const std::string& what) {
  return std::invalid_argument(module + ": " + what);
}

}  // namespace asphere

#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hebbsnn {

[[noreturn]] inline void fail_argument(const std::string& msg) {
  throw std::invalid_argument(msg);
}

[[noreturn]] inline void fail_state(const std::string& msg) {
  throw std::logic_error(msg);
}

[[noreturn]] inline void fail_numeric(const std::string& msg) {
  throw std::runtime_error(msg);
}

#define HSNN_CHECK_ARG(cond, msg) \
  do {                            \
    if (!(cond)) ::hebbsnn::fail_argument(msg); \
  } while (0)

#define HSNN_CHECK_STATE(cond, msg) \
  do {                              \
    if (!(cond)) ::hebbsnn::fail_state(msg); \
  } while (0)

// Dense row-major matrix. By convention throughout this project, rows index
// the input (presynaptic) side and columns the output (postsynaptic) side,
// so a projection is y = x^T M and a row is the fan-out of one input.
struct Mat {
  std::int32_t rows = 0;
  std::int32_t cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(std::int32_t r, std::int32_t c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {
    HSNN_CHECK_ARG(r >= 0 && c >= 0, "Mat: negative dimension");
  }

  double* operator[](std::int32_t r) { return a.data() + static_cast<std::size_t>(r) * cols; }
  const double* operator[](std::int32_t r) const {
    return a.data() + static_cast<std::size_t>(r) * cols;
  }
  double& at(std::int32_t r, std::int32_t c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  double at(std::int32_t r, std::int32_t c) const {
    return a[static_cast<std::size_t>(r) * cols + c];
  }
  std::size_t size() const { return a.size(); }
  void zero() { std::fill(a.begin(), a.end(), 0.0); }
};

// y += x^T M with x dense.
inline void add_vecmat(std::span<const double> x, const Mat& m, std::span<double> y) {
  HSNN_CHECK_ARG(static_cast<std::int32_t>(x.size()) == m.rows &&
                     static_cast<std::int32_t>(y.size()) == m.cols,
                 "add_vecmat: dimension mismatch");
  for (std::int32_t r = 0; r < m.rows; ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    const double* row = m[r];
    for (std::int32_t c = 0; c < m.cols; ++c) y[c] += xr * row[c];
  }
}

// y += x^T M with x a binary spike vector; skips inactive inputs.
inline void add_vecmat(std::span<const std::uint8_t> x, const Mat& m, std::span<double> y) {
  HSNN_CHECK_ARG(static_cast<std::int32_t>(x.size()) == m.rows &&
                     static_cast<std::int32_t>(y.size()) == m.cols,
                 "add_vecmat: dimension mismatch");
  for (std::int32_t r = 0; r < m.rows; ++r) {
    if (!x[r]) continue;
    const double* row = m[r];
    for (std::int32_t c = 0; c < m.cols; ++c) y[c] += row[c];
  }
}

inline double l2_norm_squared(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

}  // namespace hebbsnn

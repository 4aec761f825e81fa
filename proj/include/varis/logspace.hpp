#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace varis {

// Probabilities are carried as natural logs. A zero probability is the
// explicit marker log_zero (negative infinity), never a tiny float.
inline constexpr double log_zero = -std::numeric_limits<double>::infinity();

inline bool is_log_zero(double x) { return x == log_zero; }

inline double safe_log(double p) { return p > 0.0 ? std::log(p) : log_zero; }

/// log(exp(a) + exp(b))
inline double log_add(double a, double b) {
  if (is_log_zero(a)) return b;
  if (is_log_zero(b)) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

inline double log_sum_exp(std::span<const double> xs) {
  double hi = log_zero;
  for (double x : xs) hi = std::max(hi, x);
  if (is_log_zero(hi)) return log_zero;
  if (std::isinf(hi)) return hi;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - hi);
  return hi + std::log(s);
}

/// Streaming log-sum-exp accumulator; order of additions is the order of calls.
class LogSumAccumulator {
 public:
  void add(double x) {
    if (is_log_zero(x)) return;
    if (x <= max_) {
      sum_ += std::exp(x - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - x) + 1.0;
      max_ = x;
    }
  }
  void merge(const LogSumAccumulator& other) {
    if (is_log_zero(other.max_)) return;
    if (is_log_zero(max_)) {
      *this = other;
      return;
    }
    if (other.max_ <= max_) {
      sum_ += other.sum_ * std::exp(other.max_ - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - other.max_) + other.sum_;
      max_ = other.max_;
    }
  }
  double value() const { return is_log_zero(max_) ? log_zero : max_ + std::log(sum_); }

 private:
  double max_ = log_zero;
  double sum_ = 0.0;
};

}  // namespace varis

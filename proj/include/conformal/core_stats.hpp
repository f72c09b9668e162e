#pragma once

// Test statistics and threshold rules for split conformal prediction.
//
// Two predictors share one calibration vector of non-negative scores L_1..L_n:
//   * the rank (p-value) rule keeps a candidate whose score is at most the
//     ceil((1-eps)(n+1))-th smallest calibration score;
//   * the bounded-from-below (bb) rule rejects a candidate whose score reaches
//     n / (alpha (n+1) - 1) times the calibration mean, which is the Markov
//     bound P{F >= 1/alpha} <= alpha on the e-statistic F = L_{n+1} / mean(L).
//
// Everything here is a pure function templated on the scalar type.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "conformal/diagnostics.hpp"
#include "conformal/errors.hpp"

namespace conformal {

template <typename Scalar>
using ScoreVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
using ScoreVectorXd = ScoreVector<double>;

enum class Method { p_value, bb };

inline const char* to_string(Method m) { return m == Method::bb ? "bb" : "p_value"; }

template <typename Scalar>
inline constexpr Scalar kInfinity = std::numeric_limits<Scalar>::infinity();

// ---------------------------------------------------------------------------
// Validation

template <typename Scalar>
void check_alpha(Scalar alpha) {
  if (!(alpha > Scalar(0) && alpha <= Scalar(1)))
    throw DomainError("alpha must lie in (0, 1], got " + std::to_string(double(alpha)));
}

template <typename Scalar>
void check_epsilon(Scalar epsilon) {
  if (!(epsilon >= Scalar(0) && epsilon <= Scalar(1)))
    throw DomainError("epsilon must lie in [0, 1], got " + std::to_string(double(epsilon)));
}

inline void check_level(Method method, double level) {
  if (method == Method::bb)
    check_alpha(level);
  else
    check_epsilon(level);
}

/// Throws unless `scores` is non-empty with every entry finite and >= 0.
template <typename Derived>
void check_scores(const Eigen::DenseBase<Derived>& scores, const char* what = "score vector") {
  if (scores.size() == 0) throw DomainError(std::string(what) + " is empty");
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const auto v = scores.derived().coeff(i);
    if (!(v >= 0) || !std::isfinite(double(v)))
      throw DomainError(std::string(what) + " entry " + std::to_string(i) +
                        " is negative or not finite");
  }
}

// ---------------------------------------------------------------------------
// Summation

/// Neumaier-compensated sum; error stays O(eps) independent of length.
template <typename Derived>
typename Derived::Scalar compensated_sum(const Eigen::DenseBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  Scalar sum(0), carry(0);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const Scalar v = x.derived().coeff(i);
    const Scalar t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      carry += (sum - t) + v;
    else
      carry += (v - t) + sum;
    sum = t;
  }
  return sum + carry;
}

template <typename Derived>
typename Derived::Scalar compensated_mean(const Eigen::DenseBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return compensated_sum(x) / Scalar(x.size());
}

// ---------------------------------------------------------------------------
// BB (e-statistic) rule

/// Factor c(alpha, n) = (1/alpha) / (1 + (1 - 1/alpha)/n) = n / (alpha (n+1) - 1).
/// A test score >= c * mean(calibration) is rejected at level alpha.
/// Returns +inf when alpha <= 1/(n+1); F never exceeds n+1 so nothing is rejected.
template <typename Scalar>
Scalar bb_multiplier(Scalar alpha, Eigen::Index n) {
  check_alpha(alpha);
  if (n < 1) throw DomainError("calibration size must be at least 1");
  const Scalar denom = alpha * Scalar(n + 1) - Scalar(1);
  if (denom <= Scalar(0)) {
    diagnostics::warn("alpha <= 1/(n+1): bb threshold is +inf and every label is kept");
    return kInfinity<Scalar>;
  }
  return Scalar(n) / denom;
}

/// bb_multiplier(alpha, n) * mean(calib). An all-zero calibration set gives 0,
/// so every strictly positive test score is rejected.
template <typename Derived>
typename Derived::Scalar bb_threshold(typename Derived::Scalar alpha,
                                      const Eigen::DenseBase<Derived>& calib) {
  using Scalar = typename Derived::Scalar;
  check_scores(calib, "calibration set");
  const Scalar mult = bb_multiplier(alpha, calib.size());
  const Scalar mean = compensated_mean(calib);
  if (std::isinf(mult)) return mult;
  return mult * mean;
}

template <typename Scalar>
struct EStatistic {
  ScoreVector<Scalar> f_values;  // F_i = L_i / mean(L); sums to n+1
  Scalar f_last;
};

/// F_i = L_i / (sum L / (n+1)) for a length-(n+1) vector.
template <typename Derived>
EStatistic<typename Derived::Scalar> e_statistic(const Eigen::DenseBase<Derived>& scores) {
  using Scalar = typename Derived::Scalar;
  if (scores.size() < 2) throw DomainError("e_statistic needs at least two scores");
  check_scores(scores);
  const Scalar mean = compensated_mean(scores);
  if (!(mean > Scalar(0))) throw DegenerateInputError("e_statistic undefined for an all-zero vector");
  EStatistic<Scalar> out;
  out.f_values = scores.derived().template cast<Scalar>() / mean;
  out.f_last = out.f_values(out.f_values.size() - 1);
  return out;
}

// ---------------------------------------------------------------------------
// Rank (p-value) rule

struct RankStatistic {
  Eigen::Index u;      // #{i : L_i >= L_last}, includes the last element itself
  Eigen::Index total;  // n + 1
  double p() const { return double(u) / double(total); }
};

template <typename Derived>
RankStatistic rank_statistic(const Eigen::DenseBase<Derived>& scores) {
  if (scores.size() == 0) throw DomainError("rank_statistic needs a non-empty vector");
  const auto last = scores.derived().coeff(scores.size() - 1);
  Eigen::Index u = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    if (scores.derived().coeff(i) >= last) ++u;
  return {u, scores.size()};
}

/// 1-based order statistic k = ceil((1 - epsilon)(n + 1)); k == n + 1 means no finite
/// quantile, k == 0 (epsilon = 1) means every candidate is rejected.
/// A product within a few ulps of an integer is taken as that integer, so that
/// decimal levels such as 0.1 with n = 9 give k = 9 rather than 10.
template <typename Scalar>
Eigen::Index quantile_rank(Scalar epsilon, Eigen::Index n) {
  check_epsilon(epsilon);
  if (n < 1) throw DomainError("calibration size must be at least 1");
  const Scalar x = (Scalar(1) - epsilon) * Scalar(n + 1);
  const Scalar nearest = std::round(x);
  const Scalar tol = Scalar(64) * std::numeric_limits<Scalar>::epsilon() * Scalar(n + 1);
  const Scalar k = std::abs(x - nearest) <= tol ? nearest : std::ceil(x);
  return std::clamp<Eigen::Index>(static_cast<Eigen::Index>(k), 0, n + 1);
}

/// k-th smallest calibration score; +inf when k > n, -inf when k == 0.
template <typename Derived>
typename Derived::Scalar p_quantile_threshold(typename Derived::Scalar epsilon,
                                              const Eigen::DenseBase<Derived>& calib) {
  using Scalar = typename Derived::Scalar;
  if (calib.size() == 0) throw DomainError("calibration set is empty");
  const Eigen::Index n = calib.size();
  const Eigen::Index k = quantile_rank(epsilon, n);
  if (k > n) return kInfinity<Scalar>;
  if (k == 0) return -kInfinity<Scalar>;
  std::vector<Scalar> sorted(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) sorted[std::size_t(i)] = calib.derived().coeff(i);
  auto kth = sorted.begin() + (k - 1);
  std::nth_element(sorted.begin(), kth, sorted.end());
  return *kth;
}

/// Dispatches to bb_threshold or p_quantile_threshold.
template <typename Derived>
typename Derived::Scalar method_threshold(Method method, typename Derived::Scalar level,
                                          const Eigen::DenseBase<Derived>& calib) {
  return method == Method::bb ? bb_threshold(level, calib) : p_quantile_threshold(level, calib);
}

/// Whether a test score lies inside the prediction set for `threshold`.
/// bb keeps score < T (rejects the event score >= T); p keeps score <= T.
/// A zero score is never rejected by bb: its F is 0, or 0/0 when T is 0.
template <typename Scalar>
bool accepts(Method method, Scalar threshold, Scalar score) {
  if (std::isinf(threshold) && threshold > 0) return true;
  if (method == Method::bb) return score < threshold || score == Scalar(0);
  return score <= threshold;
}

}  // namespace conformal

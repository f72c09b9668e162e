#pragma once

// Exchangeable score generators and coverage certification for both predictors.

#include <cstdint>
#include <memory>
#include <variant>
#include <vector>

#include "conformal/core_stats.hpp"

namespace conformal {

struct Exponential {
  double rate = 1;
};
struct LogNormal {
  double mu = 0;
  double sigma = 1;
};
struct Uniform {
  double a = 0;
  double b = 1;
};
/// Draws without replacement from a fixed multiset: exchangeable, not i.i.d.
struct PermutedPool {
  std::vector<double> values;
};

struct DistributionSpec;
using ScaleLaw = std::variant<Exponential, LogNormal, Uniform>;
/// One scale S per sequence, then i.i.d. base draws times S: exchangeable, not i.i.d.
struct ScaleMixture {
  std::shared_ptr<const DistributionSpec> base;
  ScaleLaw scale;
};

struct DistributionSpec {
  std::variant<Exponential, LogNormal, Uniform, PermutedPool, ScaleMixture> kind;
};

/// Throws DomainError for invalid parameters or an all-zero pool.
void validate(const DistributionSpec& spec);

/// Counter-based seed for stream `index` under `master`; independent of call order.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Deterministic in (spec, length, seed); every value is >= 0.
ScoreVectorXd gen_exchangeable(const DistributionSpec& spec, Eigen::Index length, std::uint64_t seed);

struct CoverageReport {
  Method method = Method::bb;
  double level = 0;
  Eigen::Index n = 0;
  std::uint64_t trials = 0;
  std::uint64_t violations = 0;
  double rate = 0;     // violations / trials
  double std_err = 0;  // sqrt(bound (1 - bound) / trials)
  double bound = 0;    // nominal level
  bool pass = false;   // rate <= bound + 3 std_err
};

CoverageReport make_coverage_report(Method method, double level, Eigen::Index n, std::uint64_t trials,
                                    std::uint64_t violations);

/// Each trial draws n+1 scores, calibrates on the first n and tests the last one.
/// A violation is the test score falling outside the prediction set. The result
/// is bit-identical for any `threads`.
CoverageReport monte_carlo_coverage(Method method, double level, const DistributionSpec& spec, Eigen::Index n,
                                    std::uint64_t trials, std::uint64_t master_seed, unsigned threads = 1);

/// Exact violation probability under a uniformly random ordering of `scores`:
/// the fraction of positions i that violate when placed last.
///   bb:      #{i : F_i >= 1/alpha} / (n+1)
///   p_value: #{i : rank p-value of i <= epsilon} / (n+1)
double exact_violation_fraction(const ScoreVectorXd& scores, Method method, double level);

/// |sum(F_i)/(n+1) - 1|.
double mean_identity_residual(const ScoreVectorXd& scores);

}  // namespace conformal

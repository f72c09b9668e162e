#include "conformal/simulation.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <thread>

namespace conformal {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

template <typename... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void validate_law(const ScaleLaw& law) {
  std::visit(overloaded{
                 [](const Exponential& e) {
                   if (!(e.rate > 0) || !std::isfinite(e.rate)) throw DomainError("exponential rate must be > 0");
                 },
                 [](const LogNormal& l) {
                   if (!std::isfinite(l.mu) || !(l.sigma >= 0) || !std::isfinite(l.sigma))
                     throw DomainError("lognormal needs finite mu and sigma >= 0");
                 },
                 [](const Uniform& u) {
                   if (!(u.a >= 0) || !(u.b > u.a) || !std::isfinite(u.b))
                     throw DomainError("uniform needs 0 <= a < b");
                 },
             },
             law);
}

double draw(const ScaleLaw& law, std::mt19937_64& rng) {
  return std::visit(overloaded{
                        [&](const Exponential& e) { return std::exponential_distribution<double>(e.rate)(rng); },
                        [&](const LogNormal& l) { return std::lognormal_distribution<double>(l.mu, l.sigma)(rng); },
                        [&](const Uniform& u) { return std::uniform_real_distribution<double>(u.a, u.b)(rng); },
                    },
                    law);
}

void fill(const DistributionSpec& spec, ScoreVectorXd& out, std::mt19937_64& rng) {
  std::visit(overloaded{
                 [&](const PermutedPool& pool) {
                   if (static_cast<Eigen::Index>(pool.values.size()) < out.size())
                     throw DomainError("pool has " + std::to_string(pool.values.size()) + " values but " +
                                       std::to_string(out.size()) + " were requested");
                   std::vector<double> values = pool.values;
                   // Partial Fisher-Yates: the first `length` slots are a uniform draw without replacement.
                   for (Eigen::Index i = 0; i < out.size(); ++i) {
                     std::uniform_int_distribution<std::size_t> pick(std::size_t(i), values.size() - 1);
                     std::swap(values[std::size_t(i)], values[pick(rng)]);
                     out(i) = values[std::size_t(i)];
                   }
                 },
                 [&](const ScaleMixture& mix) {
                   const double scale = draw(mix.scale, rng);
                   fill(*mix.base, out, rng);
                   out *= scale;
                 },
                 [&](const auto& law) {
                   const ScaleLaw l = law;
                   for (Eigen::Index i = 0; i < out.size(); ++i) out(i) = draw(l, rng);
                 },
             },
             spec.kind);
}

}  // namespace

void validate(const DistributionSpec& spec) {
  std::visit(overloaded{
                 [](const PermutedPool& pool) {
                   if (pool.values.empty()) throw DomainError("pool is empty");
                   for (double v : pool.values)
                     if (!(v >= 0) || !std::isfinite(v)) throw DomainError("pool values must be finite and >= 0");
                   if (std::all_of(pool.values.begin(), pool.values.end(), [](double v) { return v == 0; }))
                     throw DomainError("pool is all zeros");
                 },
                 [](const ScaleMixture& mix) {
                   if (!mix.base) throw DomainError("scale mixture has no base distribution");
                   validate(*mix.base);
                   validate_law(mix.scale);
                 },
                 [](const auto& law) { validate_law(law); },
             },
             spec.kind);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632be59bd9b4e019ull));
}

ScoreVectorXd gen_exchangeable(const DistributionSpec& spec, Eigen::Index length, std::uint64_t seed) {
  if (length < 2) throw DomainError("sequence length must be at least 2");
  validate(spec);
  std::mt19937_64 rng(seed);
  ScoreVectorXd out(length);
  fill(spec, out, rng);
  return out;
}

CoverageReport make_coverage_report(Method method, double level, Eigen::Index n, std::uint64_t trials,
                                    std::uint64_t violations) {
  CoverageReport r;
  r.method = method;
  r.level = level;
  r.n = n;
  r.trials = trials;
  r.violations = violations;
  r.rate = double(violations) / double(trials);
  r.bound = level;
  r.std_err = std::sqrt(level * (1 - level) / double(trials));
  r.pass = r.rate <= r.bound + 3 * r.std_err;
  return r;
}

CoverageReport monte_carlo_coverage(Method method, double level, const DistributionSpec& spec, Eigen::Index n,
                                    std::uint64_t trials, std::uint64_t master_seed, unsigned threads) {
  check_level(method, level);
  if (trials < 1) throw DomainError("trials must be at least 1");
  if (n < 1) throw DomainError("calibration size must be at least 1");
  validate(spec);

  auto run = [&](std::uint64_t begin, std::uint64_t end) {
    std::uint64_t violations = 0;
    for (std::uint64_t t = begin; t < end; ++t) {
      const ScoreVectorXd seq = gen_exchangeable(spec, n + 1, derive_seed(master_seed, t));
      const double threshold = method_threshold(method, level, seq.head(n));
      if (!accepts(method, threshold, seq(n))) ++violations;
    }
    return violations;
  };

  threads = static_cast<unsigned>(std::clamp<std::uint64_t>(threads, 1, trials));
  if (threads == 1) return make_coverage_report(method, level, n, trials, run(0, trials));

  std::vector<std::uint64_t> partial(threads, 0);
  {
    std::vector<std::jthread> pool;
    const std::uint64_t chunk = (trials + threads - 1) / threads;
    for (unsigned w = 0; w < threads; ++w) {
      const std::uint64_t begin = std::min(trials, w * chunk);
      const std::uint64_t end = std::min(trials, begin + chunk);
      pool.emplace_back([&, w, begin, end] { partial[w] = run(begin, end); });
    }
  }
  const std::uint64_t total = std::accumulate(partial.begin(), partial.end(), std::uint64_t{0});
  return make_coverage_report(method, level, n, trials, total);
}

double exact_violation_fraction(const ScoreVectorXd& scores, Method method, double level) {
  check_level(method, level);
  if (scores.size() < 2) throw DomainError("need at least two scores");
  const auto total = double(scores.size());
  std::size_t count = 0;
  if (method == Method::bb) {
    const auto stat = e_statistic(scores);
    const double cut = 1.0 / level;
    count = static_cast<std::size_t>((stat.f_values.array() >= cut).count());
  } else {
    std::vector<double> sorted(scores.data(), scores.data() + scores.size());
    std::sort(sorted.begin(), sorted.end());
    for (Eigen::Index i = 0; i < scores.size(); ++i) {
      const auto below = std::lower_bound(sorted.begin(), sorted.end(), scores(i)) - sorted.begin();
      const RankStatistic rank{scores.size() - below, scores.size()};
      if (rank.p() <= level) ++count;
    }
  }
  return double(count) / total;
}

double mean_identity_residual(const ScoreVectorXd& scores) {
  const auto stat = e_statistic(scores);
  return std::abs(compensated_sum(stat.f_values) / double(scores.size()) - 1.0);
}

}  // namespace conformal

#include "sophia/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sophia/core.hpp"

namespace sophia {
namespace {

void require_nonempty(std::span<const ToySample> records) {
  if (records.empty()) throw InvariantError("empty record set");
}

void axpy(std::vector<double>& acc, double scale, const std::vector<double>& v) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += scale * v[i];
}

double ratio(const ToyPolicy& pi, const ToyPolicy& mu, const ToySample& s) {
  const double log_mu = mu.log_prob(s.context, s.sequence);
  if (!std::isfinite(log_mu)) {
    throw InvariantError("behavior policy assigns zero probability to a record");
  }
  return std::exp(pi.log_prob(s.context, s.sequence) - log_mu);
}

}  // namespace

double l2_norm(std::span<const double> v) {
  double total = 0.0;
  for (double x : v) total += x * x;
  return std::sqrt(total);
}

double mean_abs(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double total = 0.0;
  for (double x : v) total += std::abs(x);
  return total / static_cast<double>(v.size());
}

double estimate_objective_is(std::span<const ToySample> records, const ToyPolicy& pi,
                             const ToyPolicy& mu) {
  require_nonempty(records);
  double total = 0.0;
  for (const auto& s : records) total += ratio(pi, mu, s) * s.reward;
  return total / static_cast<double>(records.size());
}

double estimate_objective_plain(std::span<const ToySample> records) {
  require_nonempty(records);
  double total = 0.0;
  for (const auto& s : records) total += s.reward;
  return total / static_cast<double>(records.size());
}

std::vector<double> policy_gradient(std::span<const ToySample> records, const ToyPolicy& pi) {
  require_nonempty(records);
  std::vector<double> grad(pi.num_params(), 0.0);
  const double scale = 1.0 / static_cast<double>(records.size());
  // Fixed-order reduction keeps results bit-reproducible.
  for (const auto& s : records) {
    if (s.reward == 0.0) continue;
    axpy(grad, scale * s.reward, pi.grad_log_prob(s.context, s.sequence));
  }
  return grad;
}

std::vector<double> importance_weighted_gradient(std::span<const ToySample> records,
                                                 const ToyPolicy& pi, const ToyPolicy& mu) {
  require_nonempty(records);
  std::vector<double> grad(pi.num_params(), 0.0);
  const double scale = 1.0 / static_cast<double>(records.size());
  for (const auto& s : records) {
    if (s.reward == 0.0) continue;
    axpy(grad, scale * s.reward * ratio(pi, mu, s), pi.grad_log_prob(s.context, s.sequence));
  }
  return grad;
}

BiasReport check_bias_bound(const ToyPolicy& pi, const ToyPolicy& mu, const RewardFn& reward,
                            std::span<const double> context) {
  BiasReport report;
  for (const auto& [seq, mu_p] : mu.enumerate(context)) {
    if (mu_p <= 0.0) continue;
    const double r = reward(seq);
    const double pi_p = std::exp(pi.log_prob(context, seq));
    const double w = pi_p / mu_p;
    report.g_is += mu_p * w * r;
    report.g_1 += mu_p * r;
    if (r != 0.0) report.delta = std::max(report.delta, std::abs(w - 1.0));
  }
  report.bound_satisfied = std::abs(report.g_is - report.g_1) <= report.delta + 1e-12;
  return report;
}

GradientBiasReport compare_gradients(const ToyPolicy& pi, const ToyPolicy& mu,
                                     const RewardFn& reward, std::span<const double> context) {
  GradientBiasReport report;
  report.with_ratio.assign(pi.num_params(), 0.0);
  report.without_ratio.assign(pi.num_params(), 0.0);
  for (const auto& [seq, mu_p] : mu.enumerate(context)) {
    const double r = reward(seq);
    if (mu_p <= 0.0 || r == 0.0) continue;
    const double w = std::exp(pi.log_prob(context, seq)) / mu_p;
    const auto score = pi.grad_log_prob(context, seq);
    axpy(report.with_ratio, mu_p * w * r, score);
    axpy(report.without_ratio, mu_p * r, score);
    report.delta = std::max(report.delta, std::abs(w - 1.0));
    report.max_score_norm = std::max(report.max_score_norm, l2_norm(score));
  }
  std::vector<double> diff(report.with_ratio.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = report.with_ratio[i] - report.without_ratio[i];
  report.difference_norm = l2_norm(diff);
  return report;
}

double expected_reward(const ToyPolicy& policy, const RewardFn& reward,
                       std::span<const double> context) {
  double total = 0.0;
  for (const auto& [seq, p] : policy.enumerate(context)) total += p * reward(seq);
  return total;
}

namespace {

double support_deviation(const ToyPolicy& pi, const ToyPolicy& mu, const RewardFn& reward,
                         std::span<const double> context) {
  return check_bias_bound(pi, mu, reward, context).delta;
}

ToyPolicy shifted(const ToyPolicy& base, const std::vector<double>& direction, double eps) {
  auto params = std::vector<double>(base.params().begin(), base.params().end());
  for (std::size_t i = 0; i < params.size(); ++i) params[i] += eps * direction[i];
  return ToyPolicy(base.shape(), std::move(params));
}

}  // namespace

EngineeredPair engineer_policy_pair(const ToyPolicyShape& shape, std::span<const double> context,
                                    const RewardFn& reward, double target_delta,
                                    std::uint64_t seed) {
  if (!(target_delta > 0.0)) throw InvariantError("target delta must be positive");
  Rng rng(seed);
  ToyPolicy mu(shape);
  for (auto& v : mu.mutable_params()) v = 2.0 * rng.uniform01() - 1.0;
  std::vector<double> direction(mu.num_params());
  for (auto& v : direction) v = 2.0 * rng.uniform01() - 1.0;

  double lo = 0.0;
  double hi = 1e-3;
  while (support_deviation(shifted(mu, direction, hi), mu, reward, context) < target_delta) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e6) throw InvariantError("cannot reach the target delta (empty rewarded support?)");
  }
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (support_deviation(shifted(mu, direction, mid), mu, reward, context) < target_delta) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  EngineeredPair pair{shifted(mu, direction, lo), mu, 0.0};
  pair.delta = support_deviation(pair.pi, pair.mu, reward, context);
  return pair;
}

RewardFn hashed_reward(std::uint64_t seed, double density) {
  return [seed, density](const Sequence& seq) {
    std::string key;
    for (int t : seq) key += std::to_string(t) + ",";
    Rng rng(derive_seed(seed, "reward", key));
    return rng.uniform01() < density ? 1.0 : 0.0;
  };
}

}  // namespace sophia

#pragma once

#include <functional>
#include <span>
#include <vector>

#include "sophia/toy_policy.hpp"

namespace sophia {

/// One element of the off-policy dataset at toy scale.
struct ToySample {
  Context context;
  Sequence sequence;
  double reward = 0.0;
};

using RewardFn = std::function<double(const Sequence&)>;

/// Mean of (pi(y|x) / mu(y|x)) * R over the records. Throws InvariantError on
/// an empty set or when mu gives a record zero probability.
double estimate_objective_is(std::span<const ToySample> records, const ToyPolicy& pi,
                             const ToyPolicy& mu);

/// Mean of R over the records, i.e. the IS estimate with the ratio set to one.
double estimate_objective_plain(std::span<const ToySample> records);

/// Mean of R * grad log pi(y|x): the update direction with the importance
/// ratio dropped.
std::vector<double> policy_gradient(std::span<const ToySample> records, const ToyPolicy& pi);

/// Mean of (pi/mu) * R * grad log pi(y|x).
std::vector<double> importance_weighted_gradient(std::span<const ToySample> records,
                                                 const ToyPolicy& pi, const ToyPolicy& mu);

struct BiasReport {
  double g_is = 0.0;
  double g_1 = 0.0;
  double delta = 0.0;  // max |pi/mu - 1| over rewarded sequences with mu > 0
  bool bound_satisfied = false;
};

/// Exact G_IS = E_mu[(pi/mu) R] and G_1 = E_mu[R] by enumerating every
/// sequence, with delta taken over the rewarded support only.
BiasReport check_bias_bound(const ToyPolicy& pi, const ToyPolicy& mu, const RewardFn& reward,
                            std::span<const double> context);

struct GradientBiasReport {
  std::vector<double> with_ratio;     // E_mu[(pi/mu) R grad log pi]
  std::vector<double> without_ratio;  // E_mu[R grad log pi]
  double difference_norm = 0.0;
  double delta = 0.0;
  double max_score_norm = 0.0;  // max ||grad log pi|| over the rewarded support
};

/// Exact effect of dropping the importance ratio from the gradient.
GradientBiasReport compare_gradients(const ToyPolicy& pi, const ToyPolicy& mu,
                                     const RewardFn& reward, std::span<const double> context);

/// Exact E_pi[R] by enumeration.
double expected_reward(const ToyPolicy& policy, const RewardFn& reward,
                       std::span<const double> context);

struct EngineeredPair {
  ToyPolicy pi;
  ToyPolicy mu;
  double delta = 0.0;  // achieved, just below the target
};

/// Random behavior policy mu and pi = mu + eps * d along a random direction d,
/// with eps found by bisection so the rewarded-support ratio deviation sits
/// just below `target_delta`.
EngineeredPair engineer_policy_pair(const ToyPolicyShape& shape, std::span<const double> context,
                                    const RewardFn& reward, double target_delta,
                                    std::uint64_t seed);

/// Deterministic pseudo-random reward set: each sequence is rewarded with
/// probability `density`, keyed by (seed, sequence).
RewardFn hashed_reward(std::uint64_t seed, double density);

double l2_norm(std::span<const double> v);
double mean_abs(std::span<const double> v);

}  // namespace sophia

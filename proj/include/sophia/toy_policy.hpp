#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sophia/rng.hpp"

namespace sophia {

using Sequence = std::vector<int>;
using Context = std::vector<double>;

struct ToyPolicyShape {
  int vocab = 3;        // emitted tokens are 0..vocab-1; `vocab` itself is STOP
  int max_len = 3;
  int context_dim = 1;
  int window = 2;       // previous tokens visible to each step

  friend bool operator==(const ToyPolicyShape&, const ToyPolicyShape&) = default;
};

/// Finite autoregressive softmax policy.
///
/// At step l (0-based) the logits over {0..vocab-1, STOP} are theta * phi with
///   phi = [context (x) onehot(l),  onehot(y_{l-1}), ..., onehot(y_{l-W}),  1]
/// where each window slot has vocab+1 categories, the last meaning "before the
/// start". A sequence shorter than max_len ends with an explicit STOP; one of
/// length max_len ends at the cap, so the enumerated distribution sums to one.
class ToyPolicy {
 public:
  explicit ToyPolicy(ToyPolicyShape shape);
  ToyPolicy(ToyPolicyShape shape, std::vector<double> params);

  const ToyPolicyShape& shape() const { return shape_; }
  int stop_token() const { return shape_.vocab; }
  int num_actions() const { return shape_.vocab + 1; }
  int feature_dim() const;
  std::size_t num_params() const { return params_.size(); }

  std::span<const double> params() const { return params_; }
  std::vector<double>& mutable_params() { return params_; }

  std::vector<double> features(std::span<const double> context, std::span<const int> history) const;

  /// Next-token distribution after `history`; strictly positive, sums to one.
  std::vector<double> step_distribution(std::span<const double> context,
                                        std::span<const int> history) const;

  /// Sum of step log-probabilities, including the terminating STOP when the
  /// sequence is shorter than max_len. Throws InvariantError on tokens outside
  /// the vocabulary or sequences longer than max_len.
  double log_prob(std::span<const double> context, std::span<const int> sequence) const;

  /// Gradient of log_prob with respect to the flat parameter array.
  std::vector<double> grad_log_prob(std::span<const double> context,
                                    std::span<const int> sequence) const;

  Sequence sample(std::span<const double> context, Rng& rng) const;

  /// Every sequence of length 0..max_len with its probability. Throws
  /// InvariantError when the support would exceed `guard` sequences.
  std::vector<std::pair<Sequence, double>> enumerate(std::span<const double> context,
                                                     std::int64_t guard = 1'000'000) const;

  static std::int64_t support_size(const ToyPolicyShape& shape);

 private:
  void check_sequence(std::span<const double> context, std::span<const int> sequence) const;
  std::vector<double> logits(std::span<const double> phi) const;

  ToyPolicyShape shape_;
  std::vector<double> params_;  // row-major [num_actions][feature_dim]
};

/// Header lines (format, vocab, max_len, context_dim, window, params) followed
/// by one parameter per line at full precision.
std::string serialize_policy(const ToyPolicy& policy);
ToyPolicy deserialize_policy(std::string_view text);
void save_policy(const ToyPolicy& policy, const std::filesystem::path& path);
ToyPolicy load_policy(const std::filesystem::path& path);

}  // namespace sophia

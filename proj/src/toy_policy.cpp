#include "sophia/toy_policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "sophia/core.hpp"
#include "sophia/records.hpp"

namespace sophia {

ToyPolicy::ToyPolicy(ToyPolicyShape shape) : shape_(shape) {
  if (shape_.vocab < 1 || shape_.max_len < 0 || shape_.context_dim < 0 || shape_.window < 0) {
    throw InvariantError("invalid toy policy shape");
  }
  params_.assign(static_cast<std::size_t>(num_actions()) * static_cast<std::size_t>(feature_dim()),
                 0.0);
}

ToyPolicy::ToyPolicy(ToyPolicyShape shape, std::vector<double> params) : ToyPolicy(shape) {
  if (params.size() != params_.size()) {
    throw InvariantError("parameter count does not match the policy shape");
  }
  params_ = std::move(params);
}

int ToyPolicy::feature_dim() const {
  return shape_.context_dim * std::max(shape_.max_len, 1) + shape_.window * (shape_.vocab + 1) + 1;
}

std::vector<double> ToyPolicy::features(std::span<const double> context,
                                        std::span<const int> history) const {
  std::vector<double> phi(static_cast<std::size_t>(feature_dim()), 0.0);
  const std::size_t pos = history.size();
  const std::size_t stride = static_cast<std::size_t>(std::max(shape_.max_len, 1));
  for (std::size_t c = 0; c < context.size(); ++c) phi[c * stride + pos] = context[c];
  std::size_t offset = static_cast<std::size_t>(shape_.context_dim) * stride;
  const std::size_t slot = static_cast<std::size_t>(shape_.vocab + 1);
  for (int w = 0; w < shape_.window; ++w) {
    const auto back = static_cast<std::size_t>(w) + 1;
    const int token = history.size() >= back ? history[history.size() - back] : shape_.vocab;
    phi[offset + static_cast<std::size_t>(token)] = 1.0;
    offset += slot;
  }
  phi.back() = 1.0;
  return phi;
}

std::vector<double> ToyPolicy::logits(std::span<const double> phi) const {
  const std::size_t F = phi.size();
  std::vector<double> z(static_cast<std::size_t>(num_actions()), 0.0);
  for (std::size_t a = 0; a < z.size(); ++a) {
    const double* row = params_.data() + a * F;
    double acc = 0.0;
    for (std::size_t f = 0; f < F; ++f) acc += row[f] * phi[f];
    z[a] = acc;
  }
  return z;
}

std::vector<double> ToyPolicy::step_distribution(std::span<const double> context,
                                                 std::span<const int> history) const {
  auto z = logits(features(context, history));
  const double peak = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (auto& v : z) {
    v = std::exp(v - peak);
    total += v;
  }
  for (auto& v : z) v /= total;
  return z;
}

void ToyPolicy::check_sequence(std::span<const double> context, std::span<const int> sequence) const {
  if (context.size() != static_cast<std::size_t>(shape_.context_dim)) {
    throw InvariantError("context dimension mismatch");
  }
  if (sequence.size() > static_cast<std::size_t>(shape_.max_len)) {
    throw InvariantError("sequence longer than max_len");
  }
  for (int token : sequence) {
    if (token < 0 || token >= shape_.vocab) throw InvariantError("token outside the vocabulary");
  }
}

namespace {

// Log-softmax entry computed from logits without forming probabilities.
double log_softmax_at(const std::vector<double>& z, int index) {
  const double peak = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z) total += std::exp(v - peak);
  return z[static_cast<std::size_t>(index)] - peak - std::log(total);
}

}  // namespace

double ToyPolicy::log_prob(std::span<const double> context, std::span<const int> sequence) const {
  check_sequence(context, sequence);
  double total = 0.0;
  const std::size_t steps = sequence.size() + (sequence.size() < static_cast<std::size_t>(shape_.max_len) ? 1 : 0);
  for (std::size_t l = 0; l < steps; ++l) {
    const int action = l < sequence.size() ? sequence[l] : stop_token();
    total += log_softmax_at(logits(features(context, sequence.first(l))), action);
  }
  return total;
}

std::vector<double> ToyPolicy::grad_log_prob(std::span<const double> context,
                                             std::span<const int> sequence) const {
  check_sequence(context, sequence);
  std::vector<double> grad(params_.size(), 0.0);
  const std::size_t F = static_cast<std::size_t>(feature_dim());
  const std::size_t steps = sequence.size() + (sequence.size() < static_cast<std::size_t>(shape_.max_len) ? 1 : 0);
  for (std::size_t l = 0; l < steps; ++l) {
    const auto history = sequence.first(l);
    const int action = l < sequence.size() ? sequence[l] : stop_token();
    const auto phi = features(context, history);
    const auto p = step_distribution(context, history);
    // d log softmax_a / d theta[b][f] = (1[a == b] - p_b) * phi_f
    for (std::size_t b = 0; b < p.size(); ++b) {
      const double coeff = (static_cast<int>(b) == action ? 1.0 : 0.0) - p[b];
      double* row = grad.data() + b * F;
      for (std::size_t f = 0; f < F; ++f) row[f] += coeff * phi[f];
    }
  }
  return grad;
}

Sequence ToyPolicy::sample(std::span<const double> context, Rng& rng) const {
  if (context.size() != static_cast<std::size_t>(shape_.context_dim)) {
    throw InvariantError("context dimension mismatch");
  }
  Sequence out;
  while (out.size() < static_cast<std::size_t>(shape_.max_len)) {
    const auto p = step_distribution(context, out);
    const double u = rng.uniform01();
    double acc = 0.0;
    int action = num_actions() - 1;
    for (std::size_t a = 0; a < p.size(); ++a) {
      acc += p[a];
      if (u < acc) {
        action = static_cast<int>(a);
        break;
      }
    }
    if (action == stop_token()) break;
    out.push_back(action);
  }
  return out;
}

std::int64_t ToyPolicy::support_size(const ToyPolicyShape& shape) {
  std::int64_t total = 0;
  std::int64_t level = 1;
  for (int l = 0; l <= shape.max_len; ++l) {
    total += level;
    if (total > (std::int64_t{1} << 50)) return total;
    level *= shape.vocab;
  }
  return total;
}

std::vector<std::pair<Sequence, double>> ToyPolicy::enumerate(std::span<const double> context,
                                                              std::int64_t guard) const {
  if (support_size(shape_) > guard) {
    throw InvariantError("sequence space exceeds the enumeration guard");
  }
  if (context.size() != static_cast<std::size_t>(shape_.context_dim)) {
    throw InvariantError("context dimension mismatch");
  }
  std::vector<std::pair<Sequence, double>> out;
  // Depth-first over prefixes carrying the prefix probability.
  std::vector<std::pair<Sequence, double>> stack{{Sequence{}, 1.0}};
  while (!stack.empty()) {
    auto [prefix, mass] = std::move(stack.back());
    stack.pop_back();
    if (prefix.size() == static_cast<std::size_t>(shape_.max_len)) {
      out.emplace_back(std::move(prefix), mass);
      continue;
    }
    const auto p = step_distribution(context, prefix);
    out.emplace_back(prefix, mass * p[static_cast<std::size_t>(stop_token())]);
    for (int token = shape_.vocab - 1; token >= 0; --token) {
      Sequence next = prefix;
      next.push_back(token);
      stack.emplace_back(std::move(next), mass * p[static_cast<std::size_t>(token)]);
    }
  }
  return out;
}

std::string serialize_policy(const ToyPolicy& policy) {
  const auto& s = policy.shape();
  std::string out = "toy_policy 1\n";
  out += "vocab " + std::to_string(s.vocab) + "\n";
  out += "max_len " + std::to_string(s.max_len) + "\n";
  out += "context_dim " + std::to_string(s.context_dim) + "\n";
  out += "window " + std::to_string(s.window) + "\n";
  out += "params " + std::to_string(policy.num_params()) + "\n";
  char buf[40];
  for (double v : policy.params()) {
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    out += buf;
  }
  return out;
}

ToyPolicy deserialize_policy(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "toy_policy" || version != 1) {
    throw InvariantError("not a toy_policy v1 file");
  }
  ToyPolicyShape shape;
  std::size_t count = 0;
  const auto expect = [&](const char* key, auto& value) {
    std::string k;
    if (!(in >> k >> value) || k != key) throw InvariantError(std::string("policy header: expected ") + key);
  };
  expect("vocab", shape.vocab);
  expect("max_len", shape.max_len);
  expect("context_dim", shape.context_dim);
  expect("window", shape.window);
  expect("params", count);
  std::vector<double> params(count);
  for (auto& v : params) {
    if (!(in >> v)) throw InvariantError("policy file truncated");
  }
  return ToyPolicy(shape, std::move(params));
}

void save_policy(const ToyPolicy& policy, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_policy(policy));
}

ToyPolicy load_policy(const std::filesystem::path& path) { return deserialize_policy(read_file(path)); }

}  // namespace sophia

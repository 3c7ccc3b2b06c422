#include "sophia/stub_backend.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>

namespace sophia {
namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::optional<int> read_int(std::string_view s, std::size_t& pos) {
  const std::size_t start = pos;
  long long value = 0;
  while (pos < s.size() && is_digit(s[pos]) && pos - start < 9) {
    value = value * 10 + (s[pos] - '0');
    ++pos;
  }
  if (pos == start) return std::nullopt;
  return static_cast<int>(value);
}

const char* ordinal_word(int count) {
  static const char* kWords[] = {"zero", "one", "two", "three", "four", "five",
                                 "six",  "seven", "eight", "nine", "ten"};
  return count >= 0 && count <= 10 ? kWords[count] : "several";
}

}  // namespace

SyntheticWorld::SyntheticWorld(std::uint64_t seed, WorldConfig config)
    : seed_(seed), config_(config) {}

void SyntheticWorld::register_image(const std::string& image_ref) { images_.insert(image_ref); }

bool SyntheticWorld::knows(std::string_view image_ref) const {
  return images_.find(image_ref) != images_.end();
}

std::vector<int> SyntheticWorld::attributes(std::string_view image_ref) const {
  if (!knows(image_ref)) {
    throw InvariantError("unknown image_ref '" + std::string(image_ref) + "'");
  }
  Rng rng(derive_seed(seed_, "world", image_ref));
  std::vector<int> values(static_cast<std::size_t>(config_.attributes));
  for (auto& v : values) v = static_cast<int>(rng.uniform_below(config_.value_range));
  return values;
}

int apply_gold(GoldFunction fn, const std::vector<int>& values, int value_range) {
  switch (fn) {
    case GoldFunction::kSum:
      return std::accumulate(values.begin(), values.end(), 0);
    case GoldFunction::kMax:
      return values.empty() ? 0 : *std::max_element(values.begin(), values.end());
    case GoldFunction::kCount:
      return static_cast<int>(std::count_if(values.begin(), values.end(),
                                            [&](int v) { return 2 * v >= value_range; }));
  }
  return 0;
}

int SyntheticWorld::gold_value(const std::vector<int>& attributes) const {
  return apply_gold(config_.gold, attributes, config_.value_range);
}

std::string SyntheticWorld::query_text() const {
  switch (config_.gold) {
    case GoldFunction::kSum:
      return "What is the sum of all attribute values shown in the image?";
    case GoldFunction::kMax:
      return "What is the largest attribute value shown in the image?";
    case GoldFunction::kCount:
      return "How many attribute values shown in the image are at least " +
             std::to_string((config_.value_range + 1) / 2) + "?";
  }
  return {};
}

std::string render_attribute_caption(const std::vector<int>& reported) {
  std::string out = "The image shows " + std::string(ordinal_word(static_cast<int>(reported.size()))) +
                    " labelled objects: ";
  for (std::size_t i = 0; i < reported.size(); ++i) {
    if (i) out += "; ";
    out += "attribute " + std::to_string(i + 1) + " = " + std::to_string(reported[i]);
  }
  out += ".";
  return out;
}

std::optional<std::vector<int>> parse_attribute_caption(std::string_view text) {
  static constexpr std::string_view kKey = "attribute ";
  std::vector<std::pair<int, int>> found;
  std::size_t pos = 0;
  while ((pos = text.find(kKey, pos)) != std::string_view::npos) {
    std::size_t cur = pos + kKey.size();
    pos = cur;
    const auto index = read_int(text, cur);
    if (!index || text.substr(cur, 3) != " = ") continue;
    cur += 3;
    const auto value = read_int(text, cur);
    if (!value) continue;
    found.emplace_back(*index, *value);
    pos = cur;
  }
  if (found.empty()) return std::nullopt;
  std::vector<int> values;
  for (std::size_t i = 0; i < found.size(); ++i) {
    if (found[i].first != static_cast<int>(i) + 1) return std::nullopt;
    values.push_back(found[i].second);
  }
  return values;
}

std::string stub_vision_caption(const SyntheticWorld& world, std::string_view image_ref, Rng& rng) {
  auto reported = world.attributes(image_ref);
  const int range = world.config().value_range;
  for (auto& v : reported) {
    if (!rng.bernoulli(world.config().fidelity)) {
      v += 1 + static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(range - 1)));
    }
  }
  return render_attribute_caption(reported);
}

std::string stub_reasoner(const SyntheticWorld& world, std::string_view prompt, Rng& rng) {
  const auto parsed = parse_attribute_caption(prompt);
  if (!parsed || static_cast<int>(parsed->size()) != world.config().attributes) {
    return "<think>\nThe description does not list the attributes clearly, so I cannot "
           "work out the values.\n</think>\nI am unable to determine the answer from this "
           "description.";
  }
  const auto& values = *parsed;
  const int look_backs = static_cast<int>(rng.uniform_below(4));
  const bool slip = !rng.bernoulli(world.config().reasoner_skill);
  const bool slip_up = rng.bernoulli(0.5);

  std::string out = "<think>\nI can see " + std::string(ordinal_word(static_cast<int>(values.size()))) +
                    " attributes in the image.\n";
  int running = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::vector<int> prefix(values.begin(), values.begin() + static_cast<long>(i) + 1);
    running = apply_gold(world.config().gold, prefix, world.config().value_range);
    out += "Attribute " + std::to_string(i + 1) + " is " + std::to_string(values[i]) +
           ", so far " + std::to_string(running) + ".\n";
  }
  for (int k = 0; k < look_backs; ++k) {
    const std::size_t i = static_cast<std::size_t>(k) % values.size();
    out += "Wait, let me look back at the image. Attribute " + std::to_string(i + 1) +
           " is indeed " + std::to_string(values[i]) + ".\n";
  }
  int answer = running;
  if (slip) answer += slip_up ? 1 : -1;
  out += "</think>\nCombining the attribute values gives " + std::to_string(answer) +
         ".\nThe final answer is \\boxed{" + std::to_string(answer) + "}.";
  return out;
}

std::vector<TaskItem> make_synthetic_dataset(SyntheticWorld& world, int tasks) {
  std::vector<TaskItem> items;
  items.reserve(static_cast<std::size_t>(tasks));
  for (int i = 0; i < tasks; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "task-%04d", i);
    TaskItem item;
    item.id = id;
    item.image_ref = "img-" + std::to_string(i);
    world.register_image(item.image_ref);
    item.query = world.query_text();
    item.gold_answer = std::to_string(world.gold_value(world.attributes(item.image_ref)));
    items.push_back(std::move(item));
  }
  return items;
}

GenResponse StubVisionBackend::generate(const GenRequest& request) const {
  if (!request.image_ref) {
    throw BackendError(BackendErrorKind::kInvalidRequest, "vision request without an image");
  }
  Rng rng(request.seed);
  GenResponse response;
  response.text = stub_vision_caption(*world_, *request.image_ref, rng);
  response.token_count = count_tokens(response.text);
  response.backend_id = id();
  return response;
}

GenResponse StubReasonerBackend::generate(const GenRequest& request) const {
  Rng rng(request.seed);
  GenResponse response;
  response.text = stub_reasoner(*world_, request.user_prompt, rng);
  response.token_count = count_tokens(response.text);
  response.backend_id = id();
  return response;
}

}  // namespace sophia

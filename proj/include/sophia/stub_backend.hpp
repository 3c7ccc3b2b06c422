#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "sophia/backends.hpp"
#include "sophia/config.hpp"
#include "sophia/core.hpp"
#include "sophia/rng.hpp"

namespace sophia {

/// Deterministic stand-in for the image encoder and the behavior models.
///
/// Every registered image carries M hidden integer attributes derived from
/// (seed, image_ref). Captions report them with per-attribute corruption; the
/// reasoner reads a caption back and applies the gold function. A corrupted
/// attribute is reported as its true value plus an offset in [1, range), so a
/// sum over a caption with any corruption is strictly too large and caption
/// correctness depends only on which attributes survived.
class SyntheticWorld {
 public:
  SyntheticWorld(std::uint64_t seed, WorldConfig config);

  void register_image(const std::string& image_ref);
  bool knows(std::string_view image_ref) const;

  /// Throws InvariantError for an unregistered image_ref.
  std::vector<int> attributes(std::string_view image_ref) const;

  int gold_value(const std::vector<int>& attributes) const;
  std::string query_text() const;

  const WorldConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  WorldConfig config_;
  std::set<std::string, std::less<>> images_;
};

int apply_gold(GoldFunction fn, const std::vector<int>& values, int value_range);

/// "attribute 1 = 3; attribute 2 = 7; ..." wrapped in a sentence.
std::string render_attribute_caption(const std::vector<int>& reported);

/// Parses the reported attribute list from any text holding one caption.
/// Returns nullopt when the indices are not exactly 1..count.
std::optional<std::vector<int>> parse_attribute_caption(std::string_view text);

/// Draws the kept/corrupted pattern and decoys, then renders the caption.
std::string stub_vision_caption(const SyntheticWorld& world, std::string_view image_ref, Rng& rng);

/// Reasoning text for a prompt embedding one caption. Ends in a boxed answer
/// unless the caption is malformed; with probability 1 - skill the final
/// arithmetic slips by one.
std::string stub_reasoner(const SyntheticWorld& world, std::string_view prompt, Rng& rng);

std::vector<TaskItem> make_synthetic_dataset(SyntheticWorld& world, int tasks);

class StubVisionBackend final : public TextBackend {
 public:
  explicit StubVisionBackend(std::shared_ptr<const SyntheticWorld> world)
      : world_(std::move(world)) {}
  GenResponse generate(const GenRequest& request) const override;
  std::string id() const override { return "stub-vision"; }

 private:
  std::shared_ptr<const SyntheticWorld> world_;
};

class StubReasonerBackend final : public TextBackend {
 public:
  explicit StubReasonerBackend(std::shared_ptr<const SyntheticWorld> world)
      : world_(std::move(world)) {}
  GenResponse generate(const GenRequest& request) const override;
  std::string id() const override { return "stub-reasoner"; }

 private:
  std::shared_ptr<const SyntheticWorld> world_;
};

}  // namespace sophia

#include "sophia/sampler.hpp"

namespace sophia {
namespace {

constexpr std::string_view kCaptionSystem =
    "You are a careful visual observer. You describe images faithfully and completely.";

constexpr std::string_view kCaptionUser =
    "Describe this image in as much detail as you can. Cover every object and its colors, "
    "size and position; the spatial layout of the scene and how objects relate to each "
    "other; any text, numbers, labels or symbols written in the image, transcribed exactly; "
    "and any chart, table, diagram or geometric figure with all of its values. Report only "
    "what is visible and do not speculate about anything you cannot see.";

// In-context example responses. Fixed text, refined by hand with explicit
// visual re-checks so the reasoner imitates a model that is looking at the
// image rather than reading about it.
constexpr std::string_view kReasoningSystem =
    "You are a vision-language assistant. You cannot receive the image directly; instead "
    "the user gives you a detailed description of it. Treat that description as what you "
    "see: reason as if you were looking at the image yourself, and never mention the "
    "description. Think slowly and carefully inside <think></think>, re-examining the "
    "image whenever you are unsure, then state the result and put the final answer in "
    "\\boxed{}.\n"
    "\n"
    "Example image: a bar chart with three bars labelled A, B and C of heights 4, 7 and 1.\n"
    "Example question: How much taller is the tallest bar than the shortest bar?\n"
    "Example response:\n"
    "<think>\n"
    "I see three bars. Bar A reaches 4 and bar B reaches 7. Let me look back at the image "
    "to check bar C: it reaches 1. The tallest is B at 7 and the shortest is C at 1, so the "
    "difference is 7 - 1 = 6.\n"
    "</think>\n"
    "The tallest bar exceeds the shortest by 6.\n"
    "The final answer is \\boxed{6}.\n"
    "\n"
    "Example image: a right triangle with legs marked 3 cm and 4 cm.\n"
    "Example question: What is the length of the hypotenuse?\n"
    "Example response:\n"
    "<think>\n"
    "The two legs are labelled 3 cm and 4 cm. Zooming in on the right-angle marker confirms "
    "the angle between them is 90 degrees. By Pythagoras the hypotenuse is sqrt(9 + 16) = 5.\n"
    "</think>\n"
    "The hypotenuse is 5 cm.\n"
    "The final answer is \\boxed{5}.";

}  // namespace

PromptPair build_caption_prompt() {
  return {std::string(kCaptionSystem), std::string(kCaptionUser)};
}

PromptPair build_reasoning_prompt(std::string_view query, std::string_view caption) {
  if (caption.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw InvariantError("reasoning prompt needs a non-empty caption");
  }
  std::string user;
  user.reserve(caption.size() + query.size() + 64);
  user += "<image>\n";
  user += caption;
  user += "\n</image>\n\nQuestion: ";
  user += query;
  return {std::string(kReasoningSystem), std::move(user)};
}

}  // namespace sophia

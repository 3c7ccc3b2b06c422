#include "sophia/records.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

namespace sophia {

void to_json(Json& j, const Fraction& f) { j = Json{{"num", f.num}, {"den", f.den}}; }

void from_json(const Json& j, Fraction& f) {
  j.at("num").get_to(f.num);
  j.at("den").get_to(f.den);
  if (f.den <= 0) throw InvariantError("fraction denominator must be positive");
}

void to_json(Json& j, const TaskItem& item) {
  j = Json{{"id", item.id},
           {"image_ref", item.image_ref},
           {"query", item.query},
           {"gold_answer", item.gold_answer}};
}

void from_json(const Json& j, TaskItem& item) {
  j.at("id").get_to(item.id);
  j.at("image_ref").get_to(item.image_ref);
  j.at("query").get_to(item.query);
  j.at("gold_answer").get_to(item.gold_answer);
}

void to_json(Json& j, const Caption& caption) {
  j = Json{{"task_id", caption.task_id},
           {"index", caption.index},
           {"text", caption.text},
           {"reward", caption.reward ? Json(*caption.reward) : Json(nullptr)},
           {"backend_id", caption.backend_id}};
}

void from_json(const Json& j, Caption& caption) {
  j.at("task_id").get_to(caption.task_id);
  j.at("index").get_to(caption.index);
  j.at("text").get_to(caption.text);
  const auto& reward = j.at("reward");
  caption.reward = reward.is_null() ? std::nullopt : std::optional<Fraction>(reward.get<Fraction>());
  j.at("backend_id").get_to(caption.backend_id);
}

void to_json(Json& j, const Trajectory& t) {
  j = Json{{"task_id", t.task_id},
           {"caption_index", t.caption_index},
           {"index", t.index},
           {"text", t.text},
           {"extracted_answer", t.extracted_answer ? Json(*t.extracted_answer) : Json(nullptr)},
           {"outcome_reward", t.outcome_reward ? Json(*t.outcome_reward) : Json(nullptr)},
           {"length_tokens", t.length_tokens},
           {"has_think_tag", t.has_think_tag},
           {"backend_id", t.backend_id}};
}

void from_json(const Json& j, Trajectory& t) {
  j.at("task_id").get_to(t.task_id);
  j.at("caption_index").get_to(t.caption_index);
  j.at("index").get_to(t.index);
  j.at("text").get_to(t.text);
  const auto& answer = j.at("extracted_answer");
  t.extracted_answer =
      answer.is_null() ? std::nullopt : std::optional<std::string>(answer.get<std::string>());
  const auto& reward = j.at("outcome_reward");
  t.outcome_reward = reward.is_null() ? std::nullopt : std::optional<int>(reward.get<int>());
  j.at("length_tokens").get_to(t.length_tokens);
  j.at("has_think_tag").get_to(t.has_think_tag);
  j.at("backend_id").get_to(t.backend_id);
}

void to_json(Json& j, const OffPolicyRecord& r) {
  j = Json{{"task_id", r.task_id},
           {"query", r.query},
           {"image_ref", r.image_ref},
           {"caption_index", r.caption_index},
           {"trajectory", r.trajectory},
           {"dataset_reward", r.dataset_reward},
           {"system_prompt_id", to_string(r.system_prompt_id)}};
}

void from_json(const Json& j, OffPolicyRecord& r) {
  j.at("task_id").get_to(r.task_id);
  j.at("query").get_to(r.query);
  j.at("image_ref").get_to(r.image_ref);
  j.at("caption_index").get_to(r.caption_index);
  j.at("trajectory").get_to(r.trajectory);
  j.at("dataset_reward").get_to(r.dataset_reward);
  r.system_prompt_id = parse_system_prompt_id(j.at("system_prompt_id").get<std::string>());
}

std::string to_jsonl(const std::vector<Json>& lines) {
  std::string out;
  for (const auto& line : lines) {
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::vector<Json> parse_jsonl(std::string_view text) {
  std::vector<Json> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    const auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(Json::parse(line));
    } catch (const Json::parse_error& e) {
      throw std::runtime_error("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Json> read_jsonl(const std::filesystem::path& path) {
  try {
    return parse_jsonl(read_file(path));
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<TaskItem> load_dataset(const std::filesystem::path& path) {
  auto items = decode_all<TaskItem>(read_jsonl(path));
  validate_dataset(items);
  return items;
}

std::vector<OffPolicyRecord> load_records(const std::filesystem::path& path) {
  return decode_all<OffPolicyRecord>(read_jsonl(path));
}

}  // namespace sophia

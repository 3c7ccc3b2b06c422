#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sophia/core.hpp"

namespace sophia {

using Json = nlohmann::ordered_json;

// Field names match the domain types one-to-one. Decoding is strict: missing
// or mistyped fields throw nlohmann::json exceptions.
void to_json(Json& j, const Fraction& f);
void from_json(const Json& j, Fraction& f);
void to_json(Json& j, const TaskItem& item);
void from_json(const Json& j, TaskItem& item);
void to_json(Json& j, const Caption& caption);
void from_json(const Json& j, Caption& caption);
void to_json(Json& j, const Trajectory& trajectory);
void from_json(const Json& j, Trajectory& trajectory);
void to_json(Json& j, const OffPolicyRecord& record);
void from_json(const Json& j, OffPolicyRecord& record);

/// One compact object per line, `\n` terminated.
std::string to_jsonl(const std::vector<Json>& lines);

/// Parses a line-delimited file; blank lines are skipped. Errors carry the
/// 1-based line number.
std::vector<Json> parse_jsonl(std::string_view text);
std::vector<Json> read_jsonl(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temporary and rename, so readers never observe a
/// partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

template <typename T>
std::vector<Json> encode_all(const std::vector<T>& values) {
  std::vector<Json> out;
  out.reserve(values.size());
  for (const auto& v : values) out.emplace_back(v);
  return out;
}

template <typename T>
std::vector<T> decode_all(const std::vector<Json>& lines) {
  std::vector<T> out;
  out.reserve(lines.size());
  for (const auto& line : lines) out.push_back(line.get<T>());
  return out;
}

std::vector<TaskItem> load_dataset(const std::filesystem::path& path);
std::vector<OffPolicyRecord> load_records(const std::filesystem::path& path);

}  // namespace sophia

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace ontoext {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temp file, then renames over the target so readers
// never observe a half-written file.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// Regular files with the given extension (e.g. ".txt"), sorted by filename.
std::vector<std::filesystem::path> list_files_sorted(const std::filesystem::path& dir,
                                                     const std::string& extension);

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
std::string to_jsonl(const std::vector<nlohmann::json>& records);

std::string hash_file(const std::filesystem::path& path);

}  // namespace ontoext

#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace imbp::cli {

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Inventory of every regular file in `dir` except the manifest itself, sorted by name.
nlohmann::json file_inventory(const std::filesystem::path& dir);

inline constexpr const char* kManifestName = "manifest.json";

}  // namespace imbp::cli

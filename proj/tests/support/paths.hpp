#pragma once

#include <filesystem>
#include <string>

inline std::filesystem::path data_dir() { return RSAGAME_TEST_DATA_DIR; }
inline std::filesystem::path asset_dir() { return RSAGAME_ASSET_DIR; }

/// Fresh empty directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::path(RSAGAME_SCRATCH_DIR) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

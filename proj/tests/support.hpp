#pragma once

#include "vrpg/envs.hpp"

#include <filesystem>
#include <string>

namespace vrpg::test {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(VRPG_TEST_FIXTURE_DIR) / name;
}

inline TabularMdpSpec load_fixture(const std::string& name) {
  return load_tabular_mdp(fixture(name));
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("vrpg_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace vrpg::test

#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

namespace testutil {

// Fresh scratch directory under $WARPLUT_TEST_TMP (set by ctest) or the
// system temp directory.
inline std::filesystem::path scratch(const std::string& name) {
  const char* env = std::getenv("WARPLUT_TEST_TMP");
  std::filesystem::path root = env && *env ? std::filesystem::path(env)
                                           : std::filesystem::temp_directory_path() / "warplut_tests";
  const auto dir = root / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil

#pragma once

#include <atomic>
#include <filesystem>
#include <string>

namespace testutil {

/// Unique scratch directory, removed on destruction.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("markush_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

inline std::filesystem::path data_dir() {
#ifdef MARKUSH_TEST_DATA_DIR
  return std::filesystem::path(MARKUSH_TEST_DATA_DIR);
#else
  return std::filesystem::path("tests/data");
#endif
}

}  // namespace testutil

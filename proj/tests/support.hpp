#pragma once

#include <filesystem>
#include <random>
#include <sstream>
#include <string>

#include "lmkbqa/kb_store.hpp"

namespace testing {

inline lmkbqa::KnowledgeGraph kb_from(const std::string& triples, const std::string& names = "") {
  std::istringstream t(triples), n(names);
  return lmkbqa::load_kb(t, n, "is_a");
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("lmkbqa_test_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace testing

#pragma once

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>

#include "rsgan/networks.hpp"
#include "rsgan/synth.hpp"

namespace test_support {

/// Smallest model that still exercises every block: 16x16 images, two stages,
/// attribute count matching the synthetic set.
inline rsgan::ModelConfig tiny_model(std::uint64_t seed = 1) {
  rsgan::ModelConfig c;
  c.resolution = 16;
  c.d_face = 4;
  c.d_hair = 4;
  c.d_attr_face = 2;
  c.d_attr_hair = 2;
  c.n_attr = rsgan::kSynthAttrCount;
  c.widths = {6, 8};
  c.attr_hidden = 8;
  c.inject_channels = 2;
  c.patch_stages = 2;
  c.init_seed = seed;
  return c;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("rsgan_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::filesystem::path path_;
};

}  // namespace test_support

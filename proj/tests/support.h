#pragma once

#include "mdt/random.h"
#include "mdt/tensor.h"

#include <filesystem>
#include <string>

#include <unistd.h>

namespace testing {

inline mdt::Tensor randomTensor(mdt::Shape shape, mdt::Rng& rng, bool requiresGrad = true) {
  std::vector<double> data(static_cast<size_t>(mdt::shapeSize(shape)));
  for (auto& v : data) {
    v = mdt::uniformReal(rng, -1.0, 1.0);
  }
  return mdt::Tensor::fromData(std::move(shape), std::move(data), requiresGrad);
}

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("mdt_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const std::filesystem::path& path() const {
    return path_;
  }

 private:
  std::filesystem::path path_;
};

} // namespace testing

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tvq/tensor.hpp"

namespace tvqtest {

/// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    auto base = std::filesystem::temp_directory_path();
    for (int i = 0;; ++i) {
      path_ = base / (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(i));
      std::error_code ec;
      if (std::filesystem::create_directory(path_, ec)) break;
      if (i > 1000) throw std::runtime_error("TempDir: cannot create scratch directory");
    }
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::vector<char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_bytes: cannot open " + path);
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline bool same_bytes(const std::string& a, const std::string& b) {
  return read_bytes(a) == read_bytes(b);
}

inline bool same_tensor(const tvq::Tensor& a, const tvq::Tensor& b) {
  return a.shape() == b.shape() && a.values() == b.values();
}

/// True when `loaded` is exactly the single-precision rounding of `orig`
/// (model containers store tensors as 32-bit floats and widen on load).
inline bool matches_f32(const tvq::Tensor& loaded, const tvq::Tensor& orig) {
  if (loaded.shape() != orig.shape()) return false;
  for (std::int64_t i = 0; i < loaded.size(); ++i) {
    if (loaded.at(i) != static_cast<double>(static_cast<float>(orig.at(i)))) return false;
  }
  return true;
}

inline double max_abs_diff(const tvq::Tensor& a, const tvq::Tensor& b) {
  if (a.shape() != b.shape()) return 1e300;
  double worst = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    double d = std::fabs(a.at(i) - b.at(i));
    if (d > worst) worst = d;
  }
  return worst;
}

}  // namespace tvqtest

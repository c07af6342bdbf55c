#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "tvq/hash.hpp"
#include "tvq/tensor.hpp"

namespace tvq {

/// Little-endian binary writer for the model containers. Values are packed
/// byte by byte so files are identical regardless of host endianness.
class BinWriter {
 public:
  explicit BinWriter(const std::string& path);
  ~BinWriter();

  void magic(const char m[4]);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void str(const std::string& s);
  /// Rank + dims + float32 payload (training doubles narrowed for storage).
  void tensor_f32(const Tensor& t);

  void close();

 private:
  std::ofstream out_;
  std::string path_;
};

class BinReader {
 public:
  explicit BinReader(const std::string& path);

  void expect_magic(const char m[4], const std::string& what);
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string str();
  Tensor tensor_f32();

  bool at_eof();

 private:
  void need(std::size_t n);
  std::ifstream in_;
  std::string path_;
};

/// Fingerprint of a tensor's float32 serialized form; shape included.
void hash_tensor_f32(Fnv1a& h, const Tensor& t);

}  // namespace tvq

#include "tvq/binio.hpp"

#include <cstring>

#include "tvq/errors.hpp"

namespace tvq {

namespace {
void pack_u32(std::uint32_t v, unsigned char out[4]) {
  out[0] = static_cast<unsigned char>(v & 0xff);
  out[1] = static_cast<unsigned char>((v >> 8) & 0xff);
  out[2] = static_cast<unsigned char>((v >> 16) & 0xff);
  out[3] = static_cast<unsigned char>((v >> 24) & 0xff);
}

std::uint32_t unpack_u32(const unsigned char in[4]) {
  return static_cast<std::uint32_t>(in[0]) | (static_cast<std::uint32_t>(in[1]) << 8) |
         (static_cast<std::uint32_t>(in[2]) << 16) | (static_cast<std::uint32_t>(in[3]) << 24);
}
}  // namespace

std::string hash_to_hex(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

BinWriter::BinWriter(const std::string& path) : out_(path, std::ios::binary), path_(path) {
  if (!out_) throw FormatError("cannot open for writing: " + path);
}

BinWriter::~BinWriter() = default;

void BinWriter::magic(const char m[4]) { out_.write(m, 4); }

void BinWriter::u32(std::uint32_t v) {
  unsigned char buf[4];
  pack_u32(v, buf);
  out_.write(reinterpret_cast<const char*>(buf), 4);
}

void BinWriter::u64(std::uint64_t v) {
  u32(static_cast<std::uint32_t>(v & 0xffffffffULL));
  u32(static_cast<std::uint32_t>(v >> 32));
}

void BinWriter::f32(float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  u32(bits);
}

void BinWriter::f64(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  u64(bits);
}

void BinWriter::str(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  out_.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void BinWriter::tensor_f32(const Tensor& t) {
  u32(static_cast<std::uint32_t>(t.ndim()));
  for (int i = 0; i < t.ndim(); ++i) u32(static_cast<std::uint32_t>(t.dim(i)));
  for (std::int64_t i = 0; i < t.size(); ++i) f32(static_cast<float>(t.at(i)));
}

void BinWriter::close() {
  out_.close();
  if (!out_) throw FormatError("write failed: " + path_);
}

BinReader::BinReader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
  if (!in_) throw FormatError("cannot open for reading: " + path);
}

void BinReader::need(std::size_t n) {
  if (!in_) throw FormatError("truncated file: " + path_ + " (short read of " + std::to_string(n) + " bytes)");
}

void BinReader::expect_magic(const char m[4], const std::string& what) {
  char buf[4] = {0, 0, 0, 0};
  in_.read(buf, 4);
  need(4);
  if (std::memcmp(buf, m, 4) != 0) {
    throw FormatError(path_ + ": bad magic, not a " + what + " file");
  }
}

std::uint32_t BinReader::u32() {
  unsigned char buf[4];
  in_.read(reinterpret_cast<char*>(buf), 4);
  need(4);
  return unpack_u32(buf);
}

std::uint64_t BinReader::u64() {
  std::uint64_t lo = u32();
  std::uint64_t hi = u32();
  return lo | (hi << 32);
}

float BinReader::f32() {
  std::uint32_t bits = u32();
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

double BinReader::f64() {
  std::uint64_t bits = u64();
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

std::string BinReader::str() {
  std::uint32_t len = u32();
  if (len > (1u << 24)) throw FormatError(path_ + ": unreasonable string length");
  std::string s(len, '\0');
  in_.read(s.data(), static_cast<std::streamsize>(len));
  need(len);
  return s;
}

Tensor BinReader::tensor_f32() {
  std::uint32_t nd = u32();
  if (nd > 8) throw FormatError(path_ + ": unreasonable tensor rank");
  std::vector<int> shape;
  for (std::uint32_t i = 0; i < nd; ++i) shape.push_back(static_cast<int>(u32()));
  std::int64_t count = shape_product(shape);
  std::vector<double> values(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) values[static_cast<std::size_t>(i)] = static_cast<double>(f32());
  Tensor t = Tensor::from(shape, std::move(values));
  if (!t.all_finite()) throw FormatError(path_ + ": non-finite tensor entries");
  return t;
}

bool BinReader::at_eof() {
  in_.peek();
  return in_.eof();
}

void hash_tensor_f32(Fnv1a& h, const Tensor& t) {
  std::uint32_t nd = static_cast<std::uint32_t>(t.ndim());
  h.update(&nd, sizeof(nd));
  for (int i = 0; i < t.ndim(); ++i) {
    std::uint32_t d = static_cast<std::uint32_t>(t.dim(i));
    h.update(&d, sizeof(d));
  }
  for (std::int64_t i = 0; i < t.size(); ++i) {
    float f = static_cast<float>(t.at(i));
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    h.update(&bits, sizeof(bits));
  }
}

}  // namespace tvq

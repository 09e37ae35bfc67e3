#include "structkv/binary_io.hpp"

namespace structkv {

BinaryWriter::BinaryWriter(const std::string& path)
    : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
  if (!out_) {
    throw UsageError("cannot open for writing: " + path);
  }
}

BinaryWriter::~BinaryWriter() = default;

void BinaryWriter::u32(std::uint32_t v) {
  out_.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void BinaryWriter::u64(std::uint64_t v) {
  out_.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void BinaryWriter::i64(std::int64_t v) {
  out_.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void BinaryWriter::f64(double v) {
  out_.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void BinaryWriter::str(const std::string& s) {
  u64(s.size());
  out_.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void BinaryWriter::index_list(const IndexList& v) {
  u64(v.size());
  for (Index x : v) i64(static_cast<std::int64_t>(x));
}

void BinaryWriter::vec(const Vec& v) {
  u64(static_cast<std::uint64_t>(v.size()));
  out_.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(sizeof(Scalar) * v.size()));
}

void BinaryWriter::mat(const Mat& m) {
  u64(static_cast<std::uint64_t>(m.rows()));
  u64(static_cast<std::uint64_t>(m.cols()));
  out_.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(sizeof(Scalar) * m.size()));
}

void BinaryWriter::close() {
  out_.close();
  if (!out_) {
    throw UsageError("write failed: " + path_);
  }
}

BinaryReader::BinaryReader(const std::string& path)
    : in_(path, std::ios::binary), path_(path) {
  if (!in_) {
    throw UsageError("cannot open for reading: " + path);
  }
}

void BinaryReader::need(std::size_t) {
  if (!in_) {
    throw UsageError("truncated or unreadable file: " + path_);
  }
}

std::uint32_t BinaryReader::u32() {
  std::uint32_t v = 0;
  in_.read(reinterpret_cast<char*>(&v), sizeof(v));
  need(sizeof(v));
  return v;
}

std::uint64_t BinaryReader::u64() {
  std::uint64_t v = 0;
  in_.read(reinterpret_cast<char*>(&v), sizeof(v));
  need(sizeof(v));
  return v;
}

std::int64_t BinaryReader::i64() {
  std::int64_t v = 0;
  in_.read(reinterpret_cast<char*>(&v), sizeof(v));
  need(sizeof(v));
  return v;
}

double BinaryReader::f64() {
  double v = 0;
  in_.read(reinterpret_cast<char*>(&v), sizeof(v));
  need(sizeof(v));
  return v;
}

std::string BinaryReader::str() {
  const std::uint64_t n = u64();
  std::string s(n, '\0');
  in_.read(s.data(), static_cast<std::streamsize>(n));
  need(n);
  return s;
}

IndexList BinaryReader::index_list() {
  const std::uint64_t n = u64();
  IndexList v(n);
  for (std::uint64_t i = 0; i < n; ++i) v[i] = static_cast<Index>(i64());
  return v;
}

Vec BinaryReader::vec() {
  const std::uint64_t n = u64();
  Vec v(static_cast<Index>(n));
  in_.read(reinterpret_cast<char*>(v.data()),
           static_cast<std::streamsize>(sizeof(Scalar) * n));
  need(n);
  return v;
}

Mat BinaryReader::mat() {
  const std::uint64_t rows = u64();
  const std::uint64_t cols = u64();
  Mat m(static_cast<Index>(rows), static_cast<Index>(cols));
  in_.read(reinterpret_cast<char*>(m.data()),
           static_cast<std::streamsize>(sizeof(Scalar) * rows * cols));
  need(rows * cols);
  return m;
}

}  // namespace structkv

#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "structkv/common.hpp"

namespace structkv {

// Little-endian fixed-width binary helpers shared by the weight blob, the
// cache container and the trace file. Host is assumed little-endian.
class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path);
  ~BinaryWriter();

  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v);
  void f64(double v);
  void str(const std::string& s);           // u64 length + bytes
  void index_list(const IndexList& v);      // u64 count + i64 entries
  void vec(const Vec& v);                   // u64 size + doubles
  void mat(const Mat& m);                   // u64 rows, u64 cols, col-major doubles

  void close();

 private:
  std::ofstream out_;
  std::string path_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& path);

  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64();
  double f64();
  std::string str();
  IndexList index_list();
  Vec vec();
  Mat mat();

 private:
  void need(std::size_t n);
  std::ifstream in_;
  std::string path_;
};

}  // namespace structkv

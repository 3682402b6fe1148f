#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace vqseg::io {

// Little-endian byte-buffer codecs used by the sequence and checkpoint
// formats. Throws ParseError on underrun.

class ByteWriter {
 public:
  void u32(uint32_t v);
  void u64(uint64_t v);
  void f32(float v);
  void f64(double v);
  void bytes(const void* data, std::size_t n);
  void str(std::string_view s);  // u64 length + payload

  const std::string& buffer() const { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data, std::string context = "")
      : data_(data), context_(std::move(context)) {}

  uint32_t u32();
  uint64_t u64();
  float f32();
  double f64();
  void bytes(void* out, std::size_t n);
  std::string str();
  std::string_view raw(std::size_t n);

  std::size_t offset() const { return off_; }
  std::size_t remaining() const { return data_.size() - off_; }
  bool at_end() const { return off_ == data_.size(); }

 private:
  void need(std::size_t n) const;
  std::string_view data_;
  std::size_t off_ = 0;
  std::string context_;
};

uint32_t crc32(const void* data, std::size_t n);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view data);

}  // namespace vqseg::io

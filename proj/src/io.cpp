#include "vqseg/io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "vqseg/errors.hpp"

namespace vqseg::io {

namespace {

template <typename T>
void append_le(std::string& buf, T v) {
  // Engine targets little-endian hosts; serialize by direct copy.
  char tmp[sizeof(T)];
  std::memcpy(tmp, &v, sizeof(T));
  buf.append(tmp, sizeof(T));
}

}  // namespace

void ByteWriter::u32(uint32_t v) { append_le(buf_, v); }
void ByteWriter::u64(uint64_t v) { append_le(buf_, v); }
void ByteWriter::f32(float v) { append_le(buf_, v); }
void ByteWriter::f64(double v) { append_le(buf_, v); }

void ByteWriter::bytes(const void* data, std::size_t n) {
  buf_.append(static_cast<const char*>(data), n);
}

void ByteWriter::str(std::string_view s) {
  u64(s.size());
  buf_.append(s);
}

void ByteReader::need(std::size_t n) const {
  if (off_ + n > data_.size())
    throw ParseError(context_ + ": truncated input at offset " +
                     std::to_string(off_));
}

uint32_t ByteReader::u32() {
  need(4);
  uint32_t v;
  std::memcpy(&v, data_.data() + off_, 4);
  off_ += 4;
  return v;
}

uint64_t ByteReader::u64() {
  need(8);
  uint64_t v;
  std::memcpy(&v, data_.data() + off_, 8);
  off_ += 8;
  return v;
}

float ByteReader::f32() {
  need(4);
  float v;
  std::memcpy(&v, data_.data() + off_, 4);
  off_ += 4;
  return v;
}

double ByteReader::f64() {
  need(8);
  double v;
  std::memcpy(&v, data_.data() + off_, 8);
  off_ += 8;
  return v;
}

void ByteReader::bytes(void* out, std::size_t n) {
  need(n);
  std::memcpy(out, data_.data() + off_, n);
  off_ += n;
}

std::string ByteReader::str() {
  const uint64_t n = u64();
  need(n);
  std::string s(data_.substr(off_, n));
  off_ += n;
  return s;
}

std::string_view ByteReader::raw(std::size_t n) {
  need(n);
  std::string_view s = data_.substr(off_, n);
  off_ += n;
  return s;
}

uint32_t crc32(const void* data, std::size_t n) {
  return static_cast<uint32_t>(
      ::crc32(0UL, static_cast<const Bytef*>(data), static_cast<uInt>(n)));
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file: " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return data;
}

void write_file(const std::filesystem::path& path, std::string_view data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("cannot open file for writing: " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw ParseError("write failed: " + path.string());
}

}  // namespace vqseg::io

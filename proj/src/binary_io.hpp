#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "odc/error.hpp"

namespace odc::detail {

// Explicit little-endian encoding so files are identical across hosts.
class BinaryWriter {
 public:
  void magic(std::string_view m) { bytes_.insert(bytes_.end(), m.begin(), m.end()); }

  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void i32(std::int32_t v) {
    const auto u = static_cast<std::uint32_t>(v);
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void write_to(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    out.write(bytes_.data(), static_cast<std::streamsize>(bytes_.size()));
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
  }

 private:
  std::vector<char> bytes_;
};

class BinaryReader {
 public:
  BinaryReader(const std::filesystem::path& path, ErrorCode on_error) : on_error_(on_error) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(on_error_, "cannot open " + path.string());
    bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }

  void expect_magic(std::string_view m) {
    need(m.size());
    if (std::string_view(bytes_.data() + pos_, m.size()) != m) fail("bad magic");
    pos_ += m.size();
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::int32_t i32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return static_cast<std::int32_t>(v);
  }
  double f64() { return std::bit_cast<double>(u64()); }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  void expect_end() {
    if (remaining() != 0) fail("trailing bytes");
  }
  [[noreturn]] void fail(const std::string& why) const { throw Error(on_error_, why); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("truncated file");
  }

  ErrorCode on_error_;
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace odc::detail

#pragma once

// Shared envelope for every on-disk artifact:
//   4-byte magic | u32 LE header length | UTF-8 JSON header | LE payload

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace mmk::binio {

class Writer {
 public:
  void putMagic(std::string_view magic);
  void putHeader(const nlohmann::json& header);
  void putF32(double v);
  void putF32s(std::span<const float> v);
  void putF64(double v);

  const std::vector<std::uint8_t>& bytes() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void expectMagic(std::string_view magic);
  nlohmann::json header();
  float f32();
  double f64();
  void f32s(std::span<float> out);

  std::size_t offset() const { return pos_; }
  bool atEnd() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what);

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

// Canonical JSON text: sorted keys, no whitespace.
std::string canonicalDump(const nlohmann::json& j);

std::vector<std::uint8_t> readFile(const std::string& path);
void writeFile(const std::string& path, std::span<const std::uint8_t> bytes);

} // namespace mmk::binio

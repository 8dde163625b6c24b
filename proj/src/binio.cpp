#include "mmk/binio.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mmk/error.hpp"

namespace mmk::binio {

static_assert(std::endian::native == std::endian::little,
              "payload encoding assumes a little-endian host");

namespace {

template <typename T>
void append(std::vector<std::uint8_t>& buf, T v) {
  std::uint8_t raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.insert(buf.end(), raw, raw + sizeof(T));
}

} // namespace

void Writer::putMagic(std::string_view magic) {
  buf_.insert(buf_.end(), magic.begin(), magic.end());
}

void Writer::putHeader(const nlohmann::json& header) {
  const std::string text = canonicalDump(header);
  append<std::uint32_t>(buf_, static_cast<std::uint32_t>(text.size()));
  buf_.insert(buf_.end(), text.begin(), text.end());
}

void Writer::putF32(double v) {
  append<float>(buf_, static_cast<float>(v));
}

void Writer::putF32s(std::span<const float> v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
  buf_.insert(buf_.end(), p, p + v.size_bytes());
}

void Writer::putF64(double v) {
  append<double>(buf_, v);
}

void Reader::need(std::size_t n, const char* what) {
  if (remaining() < n) {
    throwData(std::string("truncated file reading ") + what + " at byte offset " +
              std::to_string(pos_));
  }
}

void Reader::expectMagic(std::string_view magic) {
  need(magic.size(), "magic");
  if (std::memcmp(bytes_.data() + pos_, magic.data(), magic.size()) != 0) {
    throwData("bad magic at byte offset 0, expected " + std::string(magic));
  }
  pos_ += magic.size();
}

nlohmann::json Reader::header() {
  need(4, "header length");
  std::uint32_t len = 0;
  std::memcpy(&len, bytes_.data() + pos_, 4);
  pos_ += 4;
  need(len, "header");
  const auto* begin = reinterpret_cast<const char*>(bytes_.data() + pos_);
  const std::size_t at = pos_;
  pos_ += len;
  try {
    return nlohmann::json::parse(begin, begin + len);
  } catch (const nlohmann::json::exception& e) {
    throwData("malformed header at byte offset " + std::to_string(at) + ": " + e.what());
  }
}

float Reader::f32() {
  need(4, "float32");
  float v;
  std::memcpy(&v, bytes_.data() + pos_, 4);
  pos_ += 4;
  return v;
}

double Reader::f64() {
  need(8, "float64");
  double v;
  std::memcpy(&v, bytes_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

void Reader::f32s(std::span<float> out) {
  need(out.size_bytes(), "float32 payload");
  std::memcpy(out.data(), bytes_.data() + pos_, out.size_bytes());
  pos_ += out.size_bytes();
}

std::string canonicalDump(const nlohmann::json& j) {
  // nlohmann::json objects are std::map-backed, so keys are already sorted.
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::strict);
}

std::vector<std::uint8_t> readFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throwData("cannot open file: " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void writeFile(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throwData("cannot write file: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throwData("short write: " + path);
}

} // namespace mmk::binio

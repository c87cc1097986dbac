#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace sshlab {

std::uint32_t crc32(std::span<const std::uint8_t> bytes) noexcept;

// Little-endian append-only buffer.
class ByteWriter {
 public:
  void u8(std::uint8_t x) { buf_.push_back(x); }
  void u16(std::uint16_t x);
  void u32(std::uint32_t x);
  void u64(std::uint64_t x);
  void f64(double x);
  void raw(std::string_view bytes);
  // Appends the CRC32 of everything written so far.
  void seal();

  [[nodiscard]] const std::vector<std::uint8_t>& bytes() const noexcept { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

// Bounds-checked little-endian reader; throws FormatError on truncation.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  void expect_magic(std::string_view magic);

  [[nodiscard]] std::size_t position() const noexcept { return pos_; }
  [[nodiscard]] std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const;
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

// Checks the trailing CRC32 and returns the payload without it.
std::span<const std::uint8_t> verify_crc(std::span<const std::uint8_t> bytes);

}  // namespace sshlab

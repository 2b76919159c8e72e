#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace modechain {

// Little-endian encoder. Artifacts end with an FNV-1a 64 checksum of every
// preceding byte (see seal()).
class ByteWriter {
 public:
  void put_bytes(std::string_view bytes);
  void put_u32(std::uint32_t v);
  void put_u64(std::uint64_t v);
  void put_f64(double v);
  void put_f64s(std::span<const double> values);

  // Appends the checksum trailer and hands back the buffer.
  std::vector<unsigned char> seal() &&;
  const std::vector<unsigned char>& bytes() const noexcept { return buf_; }

 private:
  std::vector<unsigned char> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  std::string_view get_bytes(std::size_t n);
  std::uint32_t get_u32();
  std::uint64_t get_u64();
  double get_f64();
  void get_f64s(std::span<double> out);
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

 private:
  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

// Verifies the trailer and returns the payload without it. Throws
// ValidationError("bad checksum") on truncation or corruption.
std::span<const unsigned char> checked_payload(std::span<const unsigned char> bytes);

// Reads the 4-byte magic of a file, or an empty string when unreadable.
std::string read_magic(const std::filesystem::path& path);

std::vector<unsigned char> read_file(const std::filesystem::path& path);
// Writes via a temporary sibling and rename, so readers never see partial files.
void write_file(const std::filesystem::path& path, std::span<const unsigned char> bytes);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace modechain

#include "modechain/binary_io.hpp"

#include <unistd.h>

#include <bit>
#include <fstream>
#include <iterator>
#include <string>
#include <thread>

#include "modechain/error.hpp"
#include "modechain/rng.hpp"

namespace modechain {

void ByteWriter::put_bytes(std::string_view bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

void ByteWriter::put_u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void ByteWriter::put_u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void ByteWriter::put_f64(double v) { put_u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::put_f64s(std::span<const double> values) {
  buf_.reserve(buf_.size() + 8 * values.size());
  for (double v : values) put_f64(v);
}

std::vector<unsigned char> ByteWriter::seal() && {
  const std::uint64_t sum = fnv1a64(buf_);
  put_u64(sum);
  return std::move(buf_);
}

std::string_view ByteReader::get_bytes(std::size_t n) {
  if (remaining() < n) throw ValidationError("unexpected end of data");
  std::string_view out(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
  pos_ += n;
  return out;
}

std::uint32_t ByteReader::get_u32() {
  if (remaining() < 4) throw ValidationError("unexpected end of data");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::get_u64() {
  if (remaining() < 8) throw ValidationError("unexpected end of data");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

double ByteReader::get_f64() { return std::bit_cast<double>(get_u64()); }

void ByteReader::get_f64s(std::span<double> out) {
  if (remaining() < 8 * out.size()) throw ValidationError("unexpected end of data");
  for (double& v : out) v = get_f64();
}

std::span<const unsigned char> checked_payload(std::span<const unsigned char> bytes) {
  if (bytes.size() < 12) throw ValidationError("bad checksum (file too short)");
  const auto payload = bytes.first(bytes.size() - 8);
  ByteReader trailer(bytes.last(8));
  if (trailer.get_u64() != fnv1a64(payload)) throw ValidationError("bad checksum");
  return payload;
}

std::string read_magic(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[4] = {};
  if (!in.read(magic, 4)) return {};
  return std::string(magic, 4);
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." +
         std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  write_file(path, std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

}  // namespace modechain

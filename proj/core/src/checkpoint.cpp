#include "modechain/checkpoint.hpp"

#include <string>

#include "modechain/binary_io.hpp"
#include "modechain/error.hpp"

namespace modechain {

namespace {
constexpr std::string_view kMagic = "MRC1";
}

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt) {
  const LstmDims& d = ckpt.params.dims;
  ByteWriter w;
  w.put_bytes(kMagic);
  w.put_u32(d.vocab_size);
  w.put_u32(d.embed_dim);
  w.put_u32(d.hidden_size);
  w.put_u32(kNumLayers);
  w.put_u64(ckpt.seed);
  w.put_u64(ckpt.step);
  ckpt.params.for_each_tensor([&](std::string_view, std::span<const double> t) { w.put_f64s(t); });
  return std::move(w).seal();
}

Checkpoint decode_checkpoint(std::span<const unsigned char> bytes) {
  if (bytes.size() < 4 || std::string_view(reinterpret_cast<const char*>(bytes.data()), 4) != kMagic) {
    throw ValidationError("bad magic (expected MRC1)");
  }
  ByteReader r(checked_payload(bytes));
  r.get_bytes(4);
  LstmDims dims;
  dims.vocab_size = r.get_u32();
  dims.embed_dim = r.get_u32();
  dims.hidden_size = r.get_u32();
  const std::uint32_t layers = r.get_u32();
  if (layers != kNumLayers) throw ValidationError("checkpoint has " + std::to_string(layers) + " layers, expected 2");
  try {
    dims.validate();
  } catch (const ConfigError& e) {
    throw ValidationError(std::string("checkpoint shape: ") + e.what());
  }
  Checkpoint out;
  out.seed = r.get_u64();
  out.step = r.get_u64();
  out.params = LstmParams::zeros(dims);
  std::size_t expected = 0;
  out.params.for_each_tensor([&](std::string_view, std::span<double> t) { expected += t.size(); });
  if (r.remaining() != 8 * expected) {
    throw ValidationError("checkpoint shape: payload holds " + std::to_string(r.remaining() / 8) +
                          " values, header implies " + std::to_string(expected));
  }
  out.params.for_each_tensor([&](std::string_view, std::span<double> t) { r.get_f64s(t); });
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace modechain

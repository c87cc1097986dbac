#include <string>

#include "sshlab/binary_io.hpp"
#include "sshlab/cnn.hpp"
#include "sshlab/errors.hpp"

namespace sshlab {

std::vector<std::uint8_t> encode_checkpoint(const CnnModel& model) {
  ByteWriter out;
  out.raw("SSHW");
  out.u16(kCheckpointVersion);
  const auto& a = model.arch;
  out.u32(static_cast<std::uint32_t>(a.in_channels));
  out.u32(static_cast<std::uint32_t>(a.height));
  out.u32(static_cast<std::uint32_t>(a.width));
  out.u32(static_cast<std::uint32_t>(kConvLayers));
  for (int l = 0; l < kConvLayers; ++l) {
    out.u32(static_cast<std::uint32_t>(a.widths[static_cast<std::size_t>(l)]));
    out.u32(static_cast<std::uint32_t>(a.kernels[static_cast<std::size_t>(l)]));
  }
  out.u32(static_cast<std::uint32_t>(a.classes));
  out.f64(a.input_scale);
  out.u64(model.seed);
  model.params.for_each([&](const std::vector<double>& t, bool) {
    for (double x : t) out.f64(x);
  });
  out.seal();
  return out.bytes();
}

CnnModel decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  in.expect_magic("SSHW");
  const std::uint16_t version = in.u16();
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  CnnModel m;
  auto& a = m.arch;
  a.in_channels = static_cast<int>(in.u32());
  a.height = static_cast<int>(in.u32());
  a.width = static_cast<int>(in.u32());
  if (in.u32() != kConvLayers) throw ShapeError("checkpoint does not hold three convolution layers");
  for (int l = 0; l < kConvLayers; ++l) {
    a.widths[static_cast<std::size_t>(l)] = static_cast<int>(in.u32());
    a.kernels[static_cast<std::size_t>(l)] = static_cast<int>(in.u32());
  }
  a.classes = static_cast<int>(in.u32());
  a.input_scale = in.f64();
  m.seed = in.u64();
  a.validate();
  m.params = Parameters::zeros(a);
  const std::size_t expected = in.position() + 8 * m.params.size() + 4;
  if (bytes.size() < expected) throw FormatError("truncated checkpoint");
  if (bytes.size() > expected) throw ShapeError("checkpoint holds more tensor data than its architecture");
  verify_crc(bytes);
  m.params.for_each([&](std::vector<double>& t, bool) {
    for (double& x : t) x = in.f64();
  });
  return m;
}

void save_checkpoint(const std::filesystem::path& path, const CnnModel& model) {
  write_file(path, encode_checkpoint(model));
}

CnnModel load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace sshlab

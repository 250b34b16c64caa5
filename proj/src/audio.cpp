#include "pnp/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

#include "pnp/binary_io.hpp"
#include "pnp/errors.hpp"

namespace pnp {

void validate(const AudioBuffer& buffer) {
  require(buffer.sample_rate > 0.0 && std::isfinite(buffer.sample_rate), ErrorKind::kInvalidArgument,
          "sample rate must be positive");
  require(!buffer.samples.empty(), ErrorKind::kInvalidArgument, "audio buffer is empty");
  for (double v : buffer.samples) {
    require(std::isfinite(v), ErrorKind::kInvalidArgument, "audio buffer contains non-finite samples");
  }
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& buffer) {
  validate(buffer);
  double peak = 0.0;
  for (double v : buffer.samples) peak = std::max(peak, std::abs(v));
  const double gain = peak > 0.0 ? kWavPeak / peak : 0.0;

  const auto n = static_cast<std::uint32_t>(buffer.length());
  const auto rate = static_cast<std::uint32_t>(std::lround(buffer.sample_rate));
  BinaryWriter w;
  w.bytes("RIFF");
  w.u32(36 + 2 * n);
  w.bytes("WAVE");
  w.bytes("fmt ");
  w.u32(16);
  w.u16(1);  // PCM
  w.u16(1);  // mono
  w.u32(rate);
  w.u32(rate * 2);
  w.u16(2);
  w.u16(16);
  w.bytes("data");
  w.u32(2 * n);
  for (double v : buffer.samples) {
    const double scaled = std::clamp(v * gain * 32767.0, -32768.0, 32767.0);
    w.u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lround(scaled))));
  }
  w.save(path);
}

AudioBuffer read_wav(const std::filesystem::path& path) {
  BinaryReader r = BinaryReader::open(path);
  r.expect_bytes("RIFF");
  r.u32();
  r.expect_bytes("WAVE");
  r.expect_bytes("fmt ");
  const auto fmt_size = r.u32();
  require(r.u16() == 1, ErrorKind::kIo, "only PCM WAV is supported");
  require(r.u16() == 1, ErrorKind::kIo, "only mono WAV is supported");
  const auto rate = r.u32();
  r.u32();
  r.u16();
  require(r.u16() == 16, ErrorKind::kIo, "only 16-bit WAV is supported");
  r.skip(fmt_size - 16);
  r.expect_bytes("data");
  const auto size = r.u32();
  AudioBuffer out;
  out.sample_rate = rate;
  out.samples.resize(size / 2);
  for (double& v : out.samples) v = static_cast<std::int16_t>(r.u16()) / 32767.0;
  return out;
}

}  // namespace pnp

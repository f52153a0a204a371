#include "polysed/wav.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace polysed {
namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                              static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b.data(), 4);
}

void put_u16(std::ostream& os, std::uint16_t v) {
  const std::array<char, 2> b{static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
  os.write(b.data(), 2);
}

}  // namespace

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw InvalidInput(path.string() + " is not a RIFF/WAVE file");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_len = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t len = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + len > bytes.size()) throw InvalidInput(path.string() + ": truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0 && len >= 16) {
      format = read_u16(bytes.data() + body);
      channels = read_u16(bytes.data() + body + 2);
      rate = read_u32(bytes.data() + body + 4);
      bits = read_u16(bytes.data() + body + 14);
      if (format == 0xFFFE && len >= 26) format = read_u16(bytes.data() + body + 24);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_len = len;
    }
    pos = body + len + (len & 1U);
  }
  if (format != 1) throw InvalidInput(path.string() + ": only PCM WAV is supported");
  if (bits != 16 && bits != 24) throw InvalidInput(path.string() + ": only 16/24-bit PCM is supported");
  if (channels == 0 || rate == 0 || data == nullptr) throw InvalidInput(path.string() + ": malformed header");

  const std::size_t width = bits / 8;
  const std::size_t n_frames = data_len / (width * channels);
  const double scale = bits == 16 ? 32768.0 : 8388608.0;

  AudioClip clip;
  clip.sample_rate = static_cast<double>(rate);
  clip.recording_id = path.stem().string();
  clip.samples.resize(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + (i * channels + c) * width;
      std::int32_t v = 0;
      if (bits == 16) {
        v = static_cast<std::int16_t>(read_u16(p));
      } else {
        v = static_cast<std::int32_t>(static_cast<std::uint32_t>(p[0]) << 8 | static_cast<std::uint32_t>(p[1]) << 16 |
                                      static_cast<std::uint32_t>(p[2]) << 24) >> 8;
      }
      acc += static_cast<double>(v) / scale;
    }
    clip.samples[i] = acc / static_cast<double>(channels);
  }
  return clip;
}

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInput("cannot write " + path.string());
  const auto rate = static_cast<std::uint32_t>(std::lround(clip.sample_rate));
  const auto data_len = static_cast<std::uint32_t>(clip.samples.size() * 2);
  out.write("RIFF", 4);
  put_u32(out, 36 + data_len);
  out.write("WAVEfmt ", 8);
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, 1);
  put_u32(out, rate);
  put_u32(out, rate * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  out.write("data", 4);
  put_u32(out, data_len);
  for (double s : clip.samples) {
    const double clipped = std::clamp(s, -1.0, 1.0);
    const auto v = static_cast<std::int16_t>(std::lround(clipped * 32767.0));
    put_u16(out, static_cast<std::uint16_t>(v));
  }
  if (!out) throw InvalidInput("failed writing " + path.string());
}

}  // namespace polysed

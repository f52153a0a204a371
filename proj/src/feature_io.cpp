#include "polysed/feature_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "polysed/csv.hpp"

namespace polysed {
namespace {

constexpr const char* kMagic = "POLYSED-FEAT v1";

void check_id(const std::string& id, const char* what) {
  if (id.find_first_of(",\n\r") != std::string::npos) {
    throw InvalidInput(std::string(what) + " must not contain commas or newlines: '" + id + "'");
  }
}

}  // namespace

void write_f64(std::ostream& os, const double* data, std::size_t n) {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, data + i, 8);
      bits = __builtin_bswap64(bits);
      os.write(reinterpret_cast<const char*>(&bits), 8);
    }
  }
}

void read_f64(std::istream& is, double* data, std::size_t n) {
  is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
  if (static_cast<std::size_t>(is.gcount()) != n * sizeof(double)) {
    throw InvalidInput("unexpected end of binary payload");
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint64_t bits;
      std::memcpy(&bits, data + i, 8);
      bits = __builtin_bswap64(bits);
      std::memcpy(data + i, &bits, 8);
    }
  }
}

void write_features(std::ostream& os, const MelSpectrogram& spec) {
  check_id(spec.context_id, "context_id");
  check_id(spec.recording_id, "recording_id");
  os << kMagic << ", " << spec.n_frames() << ", " << spec.n_bands() << ", "
     << csv::format_double(spec.frame_hop_s) << ", " << spec.context_id << ", " << spec.recording_id << '\n';
  write_f64(os, spec.values.data(), static_cast<std::size_t>(spec.values.size()));
  if (!os) throw InvalidInput("failed writing feature payload");
}

MelSpectrogram read_features(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidInput("missing POLYSED-FEAT header");
  const auto fields = csv::split_line(line);
  if (fields.size() != 6 || fields[0] != kMagic) throw InvalidInput("not a POLYSED-FEAT v1 stream");
  const long long n_frames = csv::parse_int(fields[1], "n_frames");
  const long long n_bands = csv::parse_int(fields[2], "n_bands");
  if (n_frames < 0 || n_bands < 1) throw InvalidInput("invalid feature dimensions");
  MelSpectrogram spec;
  spec.frame_hop_s = csv::parse_double(fields[3], "frame_hop_s");
  spec.frame_len_s = 2.0 * spec.frame_hop_s;
  spec.context_id = fields[4];
  spec.recording_id = fields[5];
  spec.values.resize(n_frames, n_bands);
  read_f64(is, spec.values.data(), static_cast<std::size_t>(spec.values.size()));
  return spec;
}

void save_features(const std::filesystem::path& path, const MelSpectrogram& spec) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidInput("cannot write " + path.string());
  write_features(os, spec);
}

MelSpectrogram load_features(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidInput("cannot open " + path.string());
  return read_features(is);
}

}  // namespace polysed

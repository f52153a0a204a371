#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "polysed/feature_io.hpp"
#include "polysed/model_io.hpp"
#include "polysed/sequence.hpp"
#include "polysed/wav.hpp"

using namespace polysed;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "polysed_io_test";
  fs::create_directories(dir);
  return dir / name;
}

void put_u32(std::string& s, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) s.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}
void put_u16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}

}  // namespace

TEST_CASE("feature files round trip bit-exactly") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 50.0);
  for (int trial = 0; trial < 10; ++trial) {
    MelSpectrogram s;
    s.values.resize(1 + trial * 13, 40);
    for (Eigen::Index k = 0; k < s.values.size(); ++k) s.values.data()[k] = n(rng);
    s.frame_hop_s = 1102.0 / 44100.0;
    s.context_id = "ctx";
    s.recording_id = "rec" + std::to_string(trial);
    std::stringstream buf;
    write_features(buf, s);
    const auto back = read_features(buf);
    CHECK(std::memcmp(back.values.data(), s.values.data(), sizeof(double) * static_cast<std::size_t>(s.values.size())) == 0);
    CHECK(back.frame_hop_s == s.frame_hop_s);
    CHECK(back.frame_len_s == 2.0 * s.frame_hop_s);
    CHECK(back.recording_id == s.recording_id);
    CHECK(back.context_id == "ctx");
  }
}

TEST_CASE("feature header is plain text") {
  MelSpectrogram s;
  s.values = Matrix::Zero(3, 2);
  s.frame_hop_s = 0.025;
  s.context_id = "c";
  s.recording_id = "r";
  std::stringstream buf;
  write_features(buf, s);
  std::string header;
  std::getline(buf, header);
  CHECK(header == "POLYSED-FEAT v1, 3, 2, 0.025, c, r");
  std::stringstream bad("POLYSED-FEAT v2, 1, 1, 0.025, c, r\n");
  CHECK_THROWS_AS(read_features(bad), Error);
  std::stringstream truncated("POLYSED-FEAT v1, 4, 4, 0.025, c, r\nabc");
  CHECK_THROWS_AS(read_features(truncated), Error);
}

TEST_CASE("model files round trip bit-exactly") {
  const ArchDescriptor arch{5, {4, 3}, 3};
  auto net = init_network(arch, 9);
  net.normalizer.means = Vector::LinSpaced(5, -3.0, 2.0);
  net.normalizer.std_devs = Vector::LinSpaced(5, 0.5, 1.5);
  net.classes.names = {"a", "b", "c"};
  net.config_snapshot = "eta=0.005\nrho=0.9\n";
  std::stringstream first;
  write_model(first, net);
  const auto back = read_model(first);
  CHECK(back.arch == arch);
  CHECK(back.classes.names == net.classes.names);
  CHECK(back.config_snapshot == net.config_snapshot);
  CHECK(back.normalizer.means == net.normalizer.means);
  const auto a = net.params.tensors();
  const auto b = back.params.tensors();
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    REQUIRE(a[k].size() == b[k].size());
    CHECK(std::memcmp(a[k].data(), b[k].data(), a[k].size() * sizeof(double)) == 0);
  }
  std::stringstream second;
  write_model(second, back);
  std::stringstream again;
  write_model(again, net);
  CHECK(second.str() == again.str());
}

TEST_CASE("corrupt model files are rejected") {
  std::stringstream junk("not a model\n");
  CHECK_THROWS_AS(read_model(junk), Error);
  const auto net = init_network(ArchDescriptor{2, {2}, 1}, 1);
  std::stringstream buf;
  write_model(buf, net);
  std::string bytes = buf.str();
  bytes.resize(bytes.size() - 8);
  std::stringstream cut(bytes);
  CHECK_THROWS_AS(read_model(cut), Error);
}

TEST_CASE("wav round trip quantizes to 16 bits") {
  AudioClip clip;
  clip.sample_rate = 16000.0;
  for (int n = 0; n < 1000; ++n) clip.samples.push_back(std::sin(0.01 * n) * 0.8);
  const auto path = scratch("tone.wav");
  write_wav(path, clip);
  const auto back = read_wav(path);
  CHECK(back.sample_rate == 16000.0);
  CHECK(back.recording_id == "tone");
  REQUIRE(back.samples.size() == 1000);
  for (std::size_t k = 0; k < 1000; ++k) CHECK(std::abs(back.samples[k] - clip.samples[k]) < 1.5 / 32768.0 + 1e-12);
}

TEST_CASE("stereo 24-bit wav is averaged to mono") {
  std::string data;
  // Two frames: (L, R) = (0.5, -0.5) and (0.25, 0.75) in 24-bit.
  auto put24 = [&](double v) {
    const auto i = static_cast<std::int32_t>(std::lround(v * 8388607.0));
    for (int k = 0; k < 3; ++k) data.push_back(static_cast<char>((i >> (8 * k)) & 0xff));
  };
  put24(0.5);
  put24(-0.5);
  put24(0.25);
  put24(0.75);
  std::string file = "RIFF";
  put_u32(file, static_cast<std::uint32_t>(36 + data.size()));
  file += "WAVEfmt ";
  put_u32(file, 16);
  put_u16(file, 1);
  put_u16(file, 2);
  put_u32(file, 48000);
  put_u32(file, 48000 * 6);
  put_u16(file, 6);
  put_u16(file, 24);
  file += "data";
  put_u32(file, static_cast<std::uint32_t>(data.size()));
  file += data;
  const auto path = scratch("stereo.wav");
  std::ofstream(path, std::ios::binary) << file;
  const auto clip = read_wav(path);
  CHECK(clip.sample_rate == 48000.0);
  REQUIRE(clip.samples.size() == 2);
  CHECK(clip.samples[0] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(clip.samples[1] == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("unreadable wav fails cleanly") {
  const auto path = scratch("broken.wav");
  std::ofstream(path, std::ios::binary) << "RIFF0000WAVE";
  CHECK_THROWS_AS(read_wav(path), Error);
  CHECK_THROWS_AS(read_wav(scratch("missing.wav")), Error);
}

TEST_CASE("annotation, class map and fold csv round trip") {
  std::vector<AnnotationRecord> rows{{"r1", "c1", 0.5, 1.75, "dog"}, {"r2", "c1", 0.0, 3.0, "car"}};
  const auto ann = scratch("ann.csv");
  write_annotations(ann, rows);
  const auto back = read_annotations(ann);
  REQUIRE(back.size() == 2);
  CHECK(back[0].offset_s == 1.75);
  CHECK(back[1].class_name == "car");

  ClassMap classes{{"car", "dog"}};
  const auto cls = scratch("classes.csv");
  write_class_map(cls, classes);
  CHECK(read_class_map(cls).names == classes.names);
  CHECK(classes.index_of("dog") == 1);
  CHECK_THROWS_AS((void)classes.index_of("cat"), InvalidInput);

  const auto events = events_for_recording(back, "r1", classes);
  REQUIRE(events.size() == 1);
  CHECK(events[0].class_id == 1);

  std::map<std::string, int> folds{{"r1", 0}, {"r2", 1}};
  const auto fp = scratch("folds.csv");
  write_fold_assignment(fp, folds);
  CHECK(read_fold_assignment(fp) == folds);

  const auto bad = scratch("bad.csv");
  std::ofstream(bad) << "wrong,header\n";
  CHECK_THROWS_AS(read_annotations(bad), Error);
}

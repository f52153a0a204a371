#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "polysed/features.hpp"

using namespace polysed;

namespace {

AudioClip sine(double freq, double seconds, double sr = 44100.0, double amp = 0.5) {
  AudioClip clip;
  clip.sample_rate = sr;
  clip.samples.resize(static_cast<std::size_t>(seconds * sr));
  for (std::size_t n = 0; n < clip.samples.size(); ++n) {
    clip.samples[n] = amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(n) / sr);
  }
  return clip;
}

std::vector<MelSpectrogram> random_pool(std::uint64_t seed, int n_specs, Eigen::Index bands) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<int> frames(20, 120);
  std::vector<MelSpectrogram> pool(static_cast<std::size_t>(n_specs));
  for (auto& s : pool) {
    s.values.resize(frames(rng), bands);
    for (Eigen::Index j = 0; j < bands; ++j) {
      const double offset = 10.0 * noise(rng), scale = 0.1 + std::abs(3.0 * noise(rng));
      for (Eigen::Index t = 0; t < s.values.rows(); ++t) s.values(t, j) = offset + scale * noise(rng);
    }
  }
  return pool;
}

}  // namespace

TEST_CASE("normalize_amplitude scales peak to one") {
  AudioClip a;
  a.samples = {0.5, -0.25};
  CHECK(normalize_amplitude(a).samples == std::vector<double>{1.0, -0.5});
  a.samples = {0.0, 0.0, 0.0};
  CHECK(normalize_amplitude(a).samples == std::vector<double>{0.0, 0.0, 0.0});
  a.samples = {-2.0, 1.0};
  CHECK(normalize_amplitude(a).samples == std::vector<double>{-1.0, 0.5});
}

TEST_CASE("normalize_amplitude is idempotent") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-7.0, 7.0);
  for (int trial = 0; trial < 20; ++trial) {
    AudioClip a;
    for (int n = 0; n < 200; ++n) a.samples.push_back(u(rng));
    const auto once = normalize_amplitude(a);
    const auto twice = normalize_amplitude(once);
    CHECK(once.samples == twice.samples);
    double peak = 0.0;
    for (double s : once.samples) peak = std::max(peak, std::abs(s));
    CHECK(peak == 1.0);
  }
}

TEST_CASE("mel scale conversions invert") {
  for (double hz : {0.0, 100.0, 700.0, 1000.0, 8000.0, 22050.0}) {
    CHECK(mel_to_hz(hz_to_mel(hz)) == doctest::Approx(hz).epsilon(1e-12));
  }
  CHECK(hz_to_mel(700.0) == doctest::Approx(2595.0 * std::log10(2.0)));
}

TEST_CASE("filterbank covers the band between first and last center") {
  const auto fb = build_mel_filterbank(44100.0, 2048, 40);
  REQUIRE(fb.n_bands() == 40);
  REQUIRE(fb.weights.cols() == 1025);
  const double bin_hz = 44100.0 / 2048.0;
  for (Eigen::Index k = 0; k < fb.weights.cols(); ++k) {
    const double f = static_cast<double>(k) * bin_hz;
    if (f < fb.center_hz(0) || f > fb.center_hz(39)) continue;
    double total = 0.0;
    for (Eigen::Index b = 0; b < 40; ++b) total += fb.weights(b, k);
    CHECK_MESSAGE(total > 0.0, "bin " << k);
  }
  CHECK((fb.weights.array() >= 0.0).all());
}

TEST_CASE("filterbank centers increase") {
  const auto fb = build_mel_filterbank(44100.0, 2048, 40);
  CHECK(fb.center_hz(0) < fb.center_hz(39));
  for (Eigen::Index b = 1; b < 40; ++b) CHECK(fb.center_hz(b - 1) < fb.center_hz(b));
  CHECK(fb.band_edges_hz.front() == 0.0);
  CHECK(fb.band_edges_hz.back() == doctest::Approx(22050.0));
}

TEST_CASE("filterbank rows are unimodal triangles") {
  const auto fb = build_mel_filterbank(44100.0, 4096, 40);
  for (Eigen::Index b = 0; b < fb.n_bands(); ++b) {
    Eigen::Index peak = 0;
    fb.weights.row(b).maxCoeff(&peak);
    for (Eigen::Index k = 1; k <= peak; ++k) CHECK(fb.weights(b, k) >= fb.weights(b, k - 1));
    for (Eigen::Index k = peak + 1; k < fb.weights.cols(); ++k) CHECK(fb.weights(b, k) <= fb.weights(b, k - 1));
  }
}

TEST_CASE("single band spans the whole spectrum") {
  const auto fb = build_mel_filterbank(16000.0, 512, 1);
  REQUIRE(fb.n_bands() == 1);
  REQUIRE(fb.band_edges_hz.size() == 3);
  CHECK(fb.band_edges_hz[0] == 0.0);
  CHECK(fb.band_edges_hz[2] == doctest::Approx(8000.0));
  for (Eigen::Index k = 1; k < 256; ++k) CHECK(fb.weights(0, k) > 0.0);
}

TEST_CASE("filterbank rejects degenerate requests") {
  CHECK_THROWS_AS(build_mel_filterbank(16000.0, 64, 40), InvalidInput);
  CHECK_THROWS_AS(build_mel_filterbank(16000.0, 512, 0), InvalidInput);
  CHECK_THROWS_AS(build_mel_filterbank(0.0, 512, 4), InvalidInput);
}

TEST_CASE("frame counts") {
  const std::size_t len = frame_length_samples(0.05, 44100.0);
  const std::size_t hop = hop_length_samples(len, 0.5);
  CHECK(len == 2205);
  CHECK(hop == 1102);
  CHECK(frame_count(44100, len, hop) == (44100 - 2205) / 1102 + 1);
  CHECK(frame_count(44100, len, hop) == 39);
  CHECK(frame_count(30 * 44100, len, hop) == 1199);
  CHECK(frame_count(2204, len, hop) == 0);
  CHECK(frame_count(2205, len, hop) == 1);
}

TEST_CASE("frame count agrees with enumeration of frame starts") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> n_dist(0, 5000), len_dist(1, 600), hop_dist(1, 300);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = n_dist(rng), len = len_dist(rng), hop = hop_dist(rng);
    std::size_t expected = 0;
    for (std::size_t s = 0; s + len <= n; s += hop) ++expected;
    CHECK(frame_count(n, len, hop) == expected);
  }
}

TEST_CASE("next_pow2") {
  CHECK(next_pow2(1) == 1);
  CHECK(next_pow2(2205) == 4096);
  CHECK(next_pow2(2048) == 2048);
}

TEST_CASE("extraction shape and timing") {
  const auto spec = extract_features(sine(440.0, 1.0), FrameSettings{});
  CHECK(spec.n_frames() == 39);
  CHECK(spec.n_bands() == 40);
  CHECK(spec.frame_hop_s == doctest::Approx(1102.0 / 44100.0));
  CHECK(spec.values.allFinite());
}

TEST_CASE("silent input sits on the log floor") {
  AudioClip clip;
  clip.samples.assign(44100, 0.0);
  const auto spec = extract_features(clip, FrameSettings{});
  CHECK((spec.values.array() == std::log(kLogFloor)).all());
}

TEST_CASE("a 1 kHz tone peaks in the band weighted most at 1 kHz") {
  const auto spec = extract_features(sine(1000.0, 1.0), FrameSettings{});
  const auto fb = build_mel_filterbank(44100.0, 4096, 40);
  // Triangle weight at 1 kHz from the edge list alone.
  Eigen::Index expected = -1;
  double best = -1.0;
  for (Eigen::Index b = 0; b < 40; ++b) {
    const double lo = fb.band_edges_hz[static_cast<std::size_t>(b)];
    const double mid = fb.band_edges_hz[static_cast<std::size_t>(b) + 1];
    const double hi = fb.band_edges_hz[static_cast<std::size_t>(b) + 2];
    double w = 0.0;
    if (1000.0 > lo && 1000.0 <= mid) w = (1000.0 - lo) / (mid - lo);
    if (1000.0 > mid && 1000.0 < hi) w = (hi - 1000.0) / (hi - mid);
    if (w > best) best = w, expected = b;
  }
  for (Eigen::Index t = 0; t < spec.n_frames(); ++t) {
    Eigen::Index arg = 0;
    spec.values.row(t).maxCoeff(&arg);
    CHECK(arg == expected);
  }
}

TEST_CASE("features are invariant to input gain") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.1);
  auto clip = sine(300.0, 0.5);
  for (auto& s : clip.samples) s += noise(rng);
  const auto ref = extract_features(clip, FrameSettings{});
  for (double gain : {0.01, 0.5, 3.0, 100.0}) {
    auto scaled = clip;
    for (auto& s : scaled.samples) s *= gain;
    const auto spec = extract_features(scaled, FrameSettings{});
    CHECK((spec.values - ref.values).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("extraction rejects clips shorter than one frame") {
  AudioClip clip;
  clip.samples.assign(2000, 0.1);
  CHECK_THROWS_AS(extract_features(clip, FrameSettings{}), InvalidInput);
}

TEST_CASE("fit_normalizer examples") {
  MelSpectrogram s;
  s.values.resize(2, 1);
  s.values << 1.0, 3.0;
  std::vector<MelSpectrogram> one{s};
  const auto n = fit_normalizer(one);
  CHECK(n.means(0) == 2.0);
  CHECK(n.std_devs(0) == 1.0);

  MelSpectrogram c;
  c.values = Matrix::Constant(5, 3, 4.5);
  std::vector<MelSpectrogram> two{c, c};
  const auto k = fit_normalizer(two);
  CHECK((k.means.array() == 4.5).all());
  CHECK((k.std_devs.array() == 1.0).all());

  CHECK_THROWS_AS(fit_normalizer(std::vector<MelSpectrogram>{}), InvalidInput);
}

TEST_CASE("fit then apply standardizes every band") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto pool = random_pool(seed, 1 + static_cast<int>(seed % 4), 40);
    const auto norm = fit_normalizer(pool);
    Eigen::Index rows = 0;
    for (const auto& s : pool) rows += s.n_frames();
    Matrix all(rows, 40);
    Eigen::Index r = 0;
    for (const auto& s : pool) {
      all.middleRows(r, s.n_frames()) = apply_normalizer(s, norm).values;
      r += s.n_frames();
    }
    for (Eigen::Index j = 0; j < 40; ++j) {
      const double mean = all.col(j).mean();
      const double sd = std::sqrt((all.col(j).array() - mean).square().mean());
      CHECK(std::abs(mean) < 1e-9);
      CHECK(std::abs(sd - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("apply_normalizer examples") {
  MelSpectrogram s;
  s.values = Matrix::Constant(1, 1, 5.0);
  BandNormalizer n{Vector::Constant(1, 3.0), Vector::Constant(1, 2.0)};
  CHECK(apply_normalizer(s, n).values(0, 0) == 1.0);

  auto pool = random_pool(9, 1, 6);
  BandNormalizer id{Vector::Zero(6), Vector::Ones(6)};
  CHECK(apply_normalizer(pool[0], id).values == pool[0].values);

  BandNormalizer wrong{Vector::Zero(5), Vector::Ones(5)};
  CHECK_THROWS_AS(apply_normalizer(pool[0], wrong), InvalidInput);
}

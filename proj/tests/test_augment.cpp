#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "polysed/augment.hpp"
#include "polysed/features.hpp"

using namespace polysed;

namespace {

std::pair<MelSpectrogram, TargetRoll> random_pair(std::mt19937_64& rng, Eigen::Index frames, Eigen::Index bands,
                                                  Eigen::Index classes) {
  std::normal_distribution<double> n(0.0, 3.0);
  std::bernoulli_distribution on(0.3);
  MelSpectrogram s;
  s.values.resize(frames, bands);
  for (Eigen::Index k = 0; k < s.values.size(); ++k) s.values.data()[k] = n(rng);
  TargetRoll r;
  r.values.resize(frames, classes);
  for (Eigen::Index k = 0; k < r.values.size(); ++k) r.values.data()[k] = on(rng) ? 1 : 0;
  return {s, r};
}

LabeledSpectrogram labeled(std::mt19937_64& rng, Eigen::Index frames, const std::string& rec,
                           const std::string& ctx) {
  auto [s, r] = random_pair(rng, frames, 4, 3);
  return {s, r, Provenance{rec, ctx, {rec}, false}};
}

}  // namespace

TEST_CASE("unit stretch is the identity") {
  std::mt19937_64 rng(1);
  auto [s, r] = random_pair(rng, 37, 5, 3);
  auto [out, roll] = time_stretch(s, r, 1.0);
  CHECK(out.values == s.values);
  CHECK(roll == r);
}

TEST_CASE("stretch interpolates on an endpoint-preserving grid") {
  MelSpectrogram s;
  s.values.resize(2, 2);
  s.values << 1.0, 4.0, 3.0, 8.0;
  TargetRoll r;
  r.values = BinaryMatrix::Zero(2, 1);
  auto [out, roll] = time_stretch(s, r, 1.5);
  REQUIRE(out.n_frames() == 3);
  CHECK(out.values.row(0) == s.values.row(0));
  CHECK(out.values(1, 0) == 2.0);
  CHECK(out.values(1, 1) == 6.0);
  CHECK(out.values.row(2) == s.values.row(1));
}

TEST_CASE("stretch lengths and target support") {
  std::mt19937_64 rng(2);
  auto [s, r] = random_pair(rng, 100, 3, 2);
  CHECK(time_stretch(s, r, 0.7).first.n_frames() == 70);
  for (double f : {0.7, 0.85, 1.2, 1.5}) {
    auto [out, roll] = time_stretch(s, r, f);
    CHECK(out.n_frames() == std::llround(100 * f));
    CHECK(roll.n_frames() == out.n_frames());
    // Every output target row is one of the input rows.
    for (Eigen::Index t = 0; t < roll.n_frames(); ++t) {
      bool found = false;
      for (Eigen::Index u = 0; u < r.n_frames() && !found; ++u) found = roll.values.row(t) == r.values.row(u);
      CHECK(found);
    }
  }
  CHECK_THROWS_AS(time_stretch(s, r, 0.001), InvalidInput);
  CHECK_THROWS_AS(time_stretch(s, r, -1.0), InvalidInput);
}

TEST_CASE("subframe shift examples") {
  MelSpectrogram s;
  s.values.resize(3, 1);
  s.values << 1.0, 3.0, 7.0;
  TargetRoll r;
  r.values = BinaryMatrix::Zero(3, 1);
  r.values(2, 0) = 1;
  auto [half, half_roll] = subframe_shift(s, r, 0.5);
  REQUIRE(half.n_frames() == 2);
  CHECK(half.values(0, 0) == 2.0);
  CHECK(half.values(1, 0) == 5.0);

  auto [tiny, tiny_roll] = subframe_shift(s, r, 1e-9);
  CHECK(tiny.values(0, 0) == doctest::Approx(1.0));
  CHECK(tiny.values(1, 0) == doctest::Approx(3.0));
  CHECK(tiny_roll.values(0, 0) == 0);
  CHECK(tiny_roll.values(1, 0) == 0);

  MelSpectrogram c;
  c.values = Matrix::Constant(6, 4, -2.5);
  TargetRoll cr;
  cr.values = BinaryMatrix::Zero(6, 2);
  auto [cs, crr] = subframe_shift(c, cr, 0.75);
  CHECK(cs.n_frames() == 5);
  CHECK((cs.values.array() == -2.5).all());

  CHECK_THROWS_AS(subframe_shift(s, r, 0.0), InvalidInput);
  CHECK_THROWS_AS(subframe_shift(s, r, 1.0), InvalidInput);
}

TEST_CASE("subframe shift values stay between neighbours") {
  std::mt19937_64 rng(4);
  auto [s, r] = random_pair(rng, 50, 6, 2);
  for (double shift : {0.25, 0.5, 0.75}) {
    auto [out, roll] = subframe_shift(s, r, shift);
    for (Eigen::Index t = 0; t < out.n_frames(); ++t) {
      for (Eigen::Index j = 0; j < 6; ++j) {
        const double lo = std::min(s.values(t, j), s.values(t + 1, j));
        const double hi = std::max(s.values(t, j), s.values(t + 1, j));
        CHECK(out.values(t, j) >= lo - 1e-12);
        CHECK(out.values(t, j) <= hi + 1e-12);
      }
      CHECK(roll.values.row(t) == r.values.row(t + (shift < 0.5 ? 0 : 1)));
    }
  }
}

TEST_CASE("block mix examples") {
  std::mt19937_64 rng(5);
  auto [x, xr] = random_pair(rng, 20, 4, 3);
  auto [xx, xxr] = block_mix(x, xr, x, xr);
  CHECK(xx.values == x.values);
  CHECK(xxr == xr);

  auto [b, br] = random_pair(rng, 20, 4, 3);
  MelSpectrogram floor_spec;
  floor_spec.values = Matrix::Constant(20, 4, std::log(kLogFloor));
  TargetRoll empty;
  empty.values = BinaryMatrix::Zero(20, 3);
  auto [m, mr] = block_mix(floor_spec, empty, b, br);
  CHECK(m.values == b.values);
  CHECK(mr == br);

  auto [w, wr] = random_pair(rng, 20, 5, 3);
  CHECK_THROWS_AS(block_mix(x, xr, w, wr), InvalidInput);
}

TEST_CASE("block mix is commutative and dominating") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    auto [a, ar] = random_pair(rng, 15, 4, 3);
    auto [b, br] = random_pair(rng, 15, 4, 3);
    auto [ab, abr] = block_mix(a, ar, b, br);
    auto [ba, bar] = block_mix(b, br, a, ar);
    CHECK(ab.values == ba.values);
    CHECK(abr == bar);
    CHECK((ab.values.array() >= a.values.array()).all());
    CHECK((ab.values.array() >= b.values.array()).all());
    CHECK((abr.values.array() >= ar.values.array()).all());
    CHECK((abr.values.array() >= br.values.array()).all());
  }
}

TEST_CASE("single recording under the default plan") {
  std::mt19937_64 rng(7);
  std::vector<LabeledSpectrogram> data{labeled(rng, 400, "r0", "c0")};
  const auto out = augment_dataset(data, AugmentationPlan{});
  std::size_t stretched = 0, shifted = 0, mixed = 0;
  for (const auto& item : out) {
    CHECK(item.provenance.augmented);
    CHECK(item.provenance.context_id == "c0");
    CHECK(item.provenance.sources == std::vector<std::string>{"r0"});
    const auto& id = item.provenance.recording_id;
    if (id.find("_stretch") != std::string::npos) ++stretched;
    else if (id.find("_shift") != std::string::npos) ++shifted;
    else if (id.find("_mix") != std::string::npos) ++mixed;
  }
  CHECK(stretched == 4);
  CHECK(shifted == 3);
  CHECK(mixed > 0);
  CHECK(stretched + shifted + mixed == out.size());
}

TEST_CASE("empty plan produces nothing") {
  std::mt19937_64 rng(8);
  std::vector<LabeledSpectrogram> data{labeled(rng, 100, "r0", "c0")};
  AugmentationPlan plan;
  plan.stretch_factors.clear();
  plan.subframe_shifts.clear();
  plan.mix_pair_count_per_context = 0;
  CHECK(augment_dataset(data, plan).empty());
}

TEST_CASE("default expansion ratio") {
  std::mt19937_64 rng(9);
  std::vector<LabeledSpectrogram> data;
  Eigen::Index original = 0;
  for (int c = 0; c < 3; ++c) {
    for (int r = 0; r < 4; ++r) {
      data.push_back(labeled(rng, 500 + 37 * r, "r" + std::to_string(r), "c" + std::to_string(c)));
      original += data.back().spec.n_frames();
    }
  }
  const auto out = augment_dataset(data, AugmentationPlan{});
  Eigen::Index augmented = 0;
  for (const auto& item : out) augmented += item.spec.n_frames();
  const double ratio = static_cast<double>(augmented) / static_cast<double>(original);
  CHECK(ratio >= 14.0);
  CHECK(ratio <= 18.0);
}

TEST_CASE("augmentation is deterministic for a seed") {
  std::mt19937_64 rng(10);
  std::vector<LabeledSpectrogram> data{labeled(rng, 300, "a", "c"), labeled(rng, 300, "b", "c")};
  AugmentationPlan plan;
  plan.rng_seed = 77;
  const auto x = augment_dataset(data, plan);
  const auto y = augment_dataset(data, plan);
  REQUIRE(x.size() == y.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    CHECK(x[k].spec.values == y[k].spec.values);
    CHECK(x[k].provenance.recording_id == y[k].provenance.recording_id);
  }
  std::set<std::string> ids;
  for (const auto& item : x) ids.insert(item.provenance.recording_id);
  CHECK(ids.size() == x.size());
}

TEST_CASE("short contexts reduce the block count") {
  std::mt19937_64 rng(11);
  std::vector<LabeledSpectrogram> data{labeled(rng, 8, "a", "c")};
  AugmentationPlan plan;
  plan.stretch_factors.clear();
  plan.subframe_shifts.clear();
  const auto out = augment_dataset(data, plan);
  CHECK(!out.empty());
  for (const auto& item : out) CHECK(item.spec.n_frames() == 1);
}

TEST_CASE("plan validation") {
  AugmentationPlan plan;
  plan.subframe_shifts = {1.2};
  CHECK_THROWS_AS(plan.validate(), InvalidInput);
  plan = AugmentationPlan{};
  plan.stretch_factors = {0.0};
  CHECK_THROWS_AS(plan.validate(), InvalidInput);
}

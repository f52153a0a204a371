#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "polysed/commands.hpp"
#include "polysed/detection.hpp"
#include "polysed/feature_io.hpp"
#include "polysed/csv.hpp"

using namespace polysed;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "polysed_cli_test";

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Run run_cli(const std::string& args) {
  const auto out = kRoot / "stdout.txt", err = kRoot / "stderr.txt";
  const std::string cmd = std::string(POLYSED_CLI) + " " + args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return {status, slurp(out), slurp(err)};
}

/// Small dataset shared by the tests: 3 contexts x 2 recordings x 10 s.
const fs::path& dataset() {
  static const fs::path dir = [] {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
    const auto d = kRoot / "data";
    std::ofstream(kRoot / "cfg.txt") << "n_contexts = 3\nrecordings_per_context = 2\nrecording_len_s = 10\n"
                                        "n_folds = 3\ncells_per_layer = 4\nmax_epochs = 2\nn_restarts = 1\n"
                                        "batch_size = 50\n";
    const auto synth = run_cli("--config " + (kRoot / "cfg.txt").string() + " --out " + d.string() + " synth");
    REQUIRE(synth.code == 0);
    const auto extract = run_cli("--config " + (kRoot / "cfg.txt").string() + " --out " + d.string() + " extract");
    REQUIRE(extract.code == 0);
    return d;
  }();
  return dir;
}

std::string base() { return "--config " + (kRoot / "cfg.txt").string() + " --out " + dataset().string(); }

std::size_t count_files(const fs::path& dir, const std::string& ext) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ext;
  return n;
}

}  // namespace

TEST_CASE("synth writes every recording and is reproducible") {
  const auto d = dataset();
  CHECK(count_files(d / "audio", ".wav") == 6);
  CHECK(fs::exists(d / "annotations.csv"));
  CHECK(fs::exists(d / "classes.csv"));
  CHECK(fs::exists(d / "folds.csv"));
  const auto again = kRoot / "again";
  REQUIRE(run_cli("--config " + (kRoot / "cfg.txt").string() + " --out " + again.string() + " synth").code == 0);
  CHECK(slurp(again / "annotations.csv") == slurp(d / "annotations.csv"));
  for (const auto& e : fs::directory_iterator(d / "audio")) {
    CHECK(slurp(e.path()) == slurp(again / "audio" / e.path().filename()));
  }
}

TEST_CASE("synth into an unwritable path fails with a diagnostic") {
  const auto r = run_cli("--out /proc/polysed/nowhere synth");
  CHECK(r.code != 0);
  CHECK(r.err.find("error") != std::string::npos);
  CHECK(r.out.empty());
}

TEST_CASE("extract writes one feature file per recording") {
  const auto d = dataset();
  CHECK(count_files(d / "features", ".feat") == 6);
  const auto spec = load_features(d / "features" / "ctx00_rec00.feat");
  CHECK(spec.n_frames() == (441000 - 2205) / 1102 + 1);
  CHECK(spec.n_bands() == 40);
  CHECK(spec.context_id == "ctx00");
  const auto before = slurp(d / "features" / "ctx01_rec01.feat");
  REQUIRE(run_cli(base() + " extract").code == 0);
  CHECK(slurp(d / "features" / "ctx01_rec01.feat") == before);
}

TEST_CASE("extract on an empty audio directory fails") {
  const auto empty = kRoot / "empty";
  fs::create_directories(empty / "audio");
  const auto r = run_cli("--out " + empty.string() + " extract");
  CHECK(r.code != 0);
  CHECK(r.err.find("no recordings") != std::string::npos);
}

TEST_CASE("train without a fold file stops before training") {
  const auto d = dataset();
  const auto bare = kRoot / "bare";
  fs::create_directories(bare);
  fs::copy(d / "features", bare / "features");
  fs::copy_file(d / "annotations.csv", bare / "annotations.csv");
  fs::copy_file(d / "classes.csv", bare / "classes.csv");
  const auto r = run_cli("--config " + (kRoot / "cfg.txt").string() + " --out " + bare.string() + " train");
  CHECK(r.code != 0);
  CHECK(r.err.find("folds") != std::string::npos);
  CHECK(!fs::exists(bare / "models"));
}

TEST_CASE("train writes a model per fold, detect and eval consume it") {
  const auto d = dataset();
  const auto train = run_cli(base() + " train");
  REQUIRE(train.code == 0);
  CHECK(count_files(d / "models", ".model") == 3);
  CHECK(fs::exists(d / "logs" / "fold0_restart0.log"));
  CHECK(train.out.find("average") != std::string::npos);

  // Empty feature directory: header-only CSV.
  const auto nofeat = kRoot / "nofeat";
  fs::create_directories(nofeat);
  const auto det_empty = kRoot / "det_empty.csv";
  std::ofstream(kRoot / "det_cfg.txt") << "detections = " << det_empty.string() << "\n";
  REQUIRE(run_cli("--config " + (kRoot / "det_cfg.txt").string() + " --out " + d.string() + " detect --features " +
                  nofeat.string()).code == 0);
  CHECK(slurp(det_empty) == "recording_id,class_name,onset_s,offset_s\n");

  // A higher threshold keeps a subset of the active frames.
  REQUIRE(run_cli(base() + " --threshold 0.5 detect").code == 0);
  fs::copy_file(d / "detections.csv", kRoot / "det_low.csv", fs::copy_options::overwrite_existing);
  REQUIRE(run_cli(base() + " --threshold 0.99 detect").code == 0);
  const auto classes = read_class_map(d / "classes.csv");
  const auto lo_ev = read_detections(kRoot / "det_low.csv", classes);
  const auto hi_ev = read_detections(d / "detections.csv", classes);
  for (const auto& h : hi_ev) {
    bool inside = false;
    for (const auto& l : lo_ev) {
      inside |= l.recording_id == h.recording_id && l.class_id == h.class_id && l.onset_s <= h.onset_s + 1e-9 &&
                h.offset_s <= l.offset_s + 1e-9;
    }
    CHECK(inside);
  }

  const auto eval = run_cli(base() + " eval --predictions " + (kRoot / "det_low.csv").string());
  CHECK(eval.code == 0);
  CHECK(eval.out.find("average") != std::string::npos);
  CHECK(fs::exists(d / "report.csv"));
}

TEST_CASE("eval with the truth as predictions scores one") {
  const auto d = dataset();
  const auto classes = read_class_map(d / "classes.csv");
  const auto recs = load_labeled_features(d / "features", d / "annotations.csv", classes);
  std::vector<DetectedEvent> events;
  for (const auto& r : recs) {
    const auto ev = roll_to_events(r.roll, r.spec.frame_hop_s, r.spec.frame_len_s, r.provenance.recording_id);
    events.insert(events.end(), ev.begin(), ev.end());
  }
  const auto truth = kRoot / "truth.csv";
  write_detections(truth, events, classes);
  const auto report_cfg = kRoot / "truth_cfg.txt";
  std::ofstream(report_cfg) << "report_csv = " << (kRoot / "truth_report.csv").string() << "\n";
  const auto r = run_cli("--config " + report_cfg.string() + " --out " + d.string() + " eval --predictions " +
                         truth.string());
  REQUIRE(r.code == 0);
  const auto table = csv::read(kRoot / "truth_report.csv", "context,f1_avgframe,f1_1sec");
  REQUIRE(table.rows.size() == 4);
  for (const auto& row : table.rows) {
    CHECK(csv::parse_double(row[1], "f1") == 1.0);
    CHECK(csv::parse_double(row[2], "f1") == 1.0);
  }
  CHECK(table.rows.back()[0] == "average");
}

TEST_CASE("eval rejects predictions for unknown recordings") {
  const auto d = dataset();
  const auto bogus = kRoot / "bogus.csv";
  std::ofstream(bogus) << "recording_id,class_name,onset_s,offset_s\nghost_rec,class00,0,1\n";
  const auto r = run_cli(base() + " eval --predictions " + bogus.string());
  CHECK(r.code != 0);
  CHECK(r.err.find("ghost_rec") != std::string::npos);
}

TEST_CASE("detect rejects features with the wrong band count") {
  const auto d = dataset();
  const auto odd = kRoot / "odd";
  fs::create_directories(odd);
  MelSpectrogram s;
  s.values = Matrix::Zero(20, 12);
  s.frame_hop_s = 0.025;
  s.context_id = "c";
  s.recording_id = "x";
  save_features(odd / "x.feat", s);
  const auto r = run_cli(base() + " detect --features " + odd.string());
  CHECK(r.code != 0);
  CHECK(r.err.find("band") != std::string::npos);
}

TEST_CASE("bad flags are rejected") {
  CHECK(run_cli("--augment maybe train").code != 0);
  CHECK(run_cli("frobnicate").code != 0);
  CHECK(run_cli("--config /nonexistent/cfg.txt synth").code != 0);
}

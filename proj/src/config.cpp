#include "polysed/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "polysed/csv.hpp"

namespace polysed {
namespace {

std::vector<double> parse_doubles(const std::string& value, const std::string& key) {
  std::vector<double> out;
  if (csv::trim(value).empty()) return out;
  for (const auto& f : csv::split_line(value)) out.push_back(csv::parse_double(f, key));
  return out;
}

std::vector<std::size_t> parse_counts(const std::string& value, const std::string& key) {
  std::vector<std::size_t> out;
  if (csv::trim(value).empty()) return out;
  for (const auto& f : csv::split_line(value)) {
    const auto v = csv::parse_int(f, key);
    if (v < 0) throw InvalidInput("config: " + key + " must be non-negative");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::size_t parse_count(const std::string& value, const std::string& key) {
  const auto v = csv::parse_int(value, key);
  if (v < 0) throw InvalidInput("config: " + key + " must be non-negative");
  return static_cast<std::size_t>(v);
}

bool parse_flag(const std::string& value, const std::string& key) {
  if (value == "on" || value == "true" || value == "1") return true;
  if (value == "off" || value == "false" || value == "0") return false;
  throw InvalidInput("config: " + key + " must be on or off");
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) out += ',';
    if constexpr (std::is_floating_point_v<T>) out += csv::format_double(v[k]);
    else out += std::to_string(v[k]);
  }
  return out;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  using Setter = std::function<void(RunConfig&, const std::string&)>;
  static const std::map<std::string, Setter> setters = {
      // training
      {"eta", [](RunConfig& c, const std::string& v) { c.train.eta = csv::parse_double(v, "eta"); }},
      {"rho", [](RunConfig& c, const std::string& v) { c.train.rho = csv::parse_double(v, "rho"); }},
      {"epsilon", [](RunConfig& c, const std::string& v) { c.train.epsilon = csv::parse_double(v, "epsilon"); }},
      {"noise_sigma", [](RunConfig& c, const std::string& v) { c.train.noise_sigma = csv::parse_double(v, "noise_sigma"); }},
      {"batch_size", [](RunConfig& c, const std::string& v) { c.train.batch_size = parse_count(v, "batch_size"); }},
      {"patience_epochs", [](RunConfig& c, const std::string& v) { c.train.patience_epochs = parse_count(v, "patience_epochs"); }},
      {"max_epochs", [](RunConfig& c, const std::string& v) { c.train.max_epochs = parse_count(v, "max_epochs"); }},
      {"n_restarts", [](RunConfig& c, const std::string& v) { c.train.n_restarts = parse_count(v, "n_restarts"); }},
      {"sequence_lengths", [](RunConfig& c, const std::string& v) { c.train.sequence_lengths = parse_counts(v, "sequence_lengths"); }},
      {"augmented_sequence_length", [](RunConfig& c, const std::string& v) { c.train.augmented_sequence_length = parse_count(v, "augmented_sequence_length"); }},
      {"test_sequence_length", [](RunConfig& c, const std::string& v) { c.train.test_sequence_length = parse_count(v, "test_sequence_length"); }},
      {"threshold", [](RunConfig& c, const std::string& v) { c.train.threshold = csv::parse_double(v, "threshold"); }},
      {"rng_seed", [](RunConfig& c, const std::string& v) {
         c.train.rng_seed = parse_count(v, "rng_seed");
         c.synth.rng_seed = c.train.rng_seed;
         c.train.plan.rng_seed = c.train.rng_seed;
       }},
      {"cells_per_layer", [](RunConfig& c, const std::string& v) { c.train.cells_per_layer = parse_counts(v, "cells_per_layer"); }},
      {"jobs", [](RunConfig& c, const std::string& v) { c.train.jobs = parse_count(v, "jobs"); }},
      {"chunk_size", [](RunConfig& c, const std::string& v) { c.train.chunk_size = parse_count(v, "chunk_size"); }},
      {"augment", [](RunConfig& c, const std::string& v) { c.train.augment = parse_flag(v, "augment"); }},
      // augmentation
      {"stretch_factors", [](RunConfig& c, const std::string& v) { c.train.plan.stretch_factors = parse_doubles(v, "stretch_factors"); }},
      {"subframe_shifts", [](RunConfig& c, const std::string& v) { c.train.plan.subframe_shifts = parse_doubles(v, "subframe_shifts"); }},
      {"mix_blocks_per_context", [](RunConfig& c, const std::string& v) { c.train.plan.mix_blocks_per_context = parse_count(v, "mix_blocks_per_context"); }},
      {"mix_pair_count_per_context", [](RunConfig& c, const std::string& v) { c.train.plan.mix_pair_count_per_context = parse_count(v, "mix_pair_count_per_context"); }},
      // synthesis
      {"n_contexts", [](RunConfig& c, const std::string& v) { c.synth.n_contexts = parse_count(v, "n_contexts"); }},
      {"n_classes", [](RunConfig& c, const std::string& v) { c.synth.n_classes = parse_count(v, "n_classes"); }},
      {"classes_per_context", [](RunConfig& c, const std::string& v) { c.synth.classes_per_context = parse_count(v, "classes_per_context"); }},
      {"recordings_per_context", [](RunConfig& c, const std::string& v) { c.synth.recordings_per_context = parse_count(v, "recordings_per_context"); }},
      {"recording_len_s", [](RunConfig& c, const std::string& v) { c.synth.recording_len_s = csv::parse_double(v, "recording_len_s"); }},
      {"polyphony_distribution", [](RunConfig& c, const std::string& v) { c.synth.polyphony = parse_doubles(v, "polyphony_distribution"); }},
      {"sample_rate", [](RunConfig& c, const std::string& v) { c.synth.sample_rate = csv::parse_double(v, "sample_rate"); }},
      // features
      {"n_bands", [](RunConfig& c, const std::string& v) { c.features.n_bands = parse_count(v, "n_bands"); }},
      {"frame_len_s", [](RunConfig& c, const std::string& v) { c.features.frame_len_s = csv::parse_double(v, "frame_len_s"); }},
      {"overlap", [](RunConfig& c, const std::string& v) { c.features.overlap = csv::parse_double(v, "overlap"); }},
      // evaluation
      {"n_folds", [](RunConfig& c, const std::string& v) { c.n_folds = static_cast<int>(parse_count(v, "n_folds")); }},
      {"block_s", [](RunConfig& c, const std::string& v) { c.block_s = csv::parse_double(v, "block_s"); }},
      {"framewise", [](RunConfig& c, const std::string& v) {
         if (v == "per_frame") c.framewise = FramewiseMode::per_frame_mean;
         else if (v == "pooled") c.framewise = FramewiseMode::pooled_counts;
         else throw InvalidInput("config: framewise must be per_frame or pooled");
       }},
      // paths
      {"out_dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; }},
      {"audio_dir", [](RunConfig& c, const std::string& v) { c.audio_dir = v; }},
      {"features_dir", [](RunConfig& c, const std::string& v) { c.features_dir = v; }},
      {"augmented_dir", [](RunConfig& c, const std::string& v) { c.augmented_dir = v; }},
      {"annotations", [](RunConfig& c, const std::string& v) { c.annotations = v; }},
      {"classes", [](RunConfig& c, const std::string& v) { c.classes = v; }},
      {"folds", [](RunConfig& c, const std::string& v) { c.folds = v; }},
      {"models_dir", [](RunConfig& c, const std::string& v) { c.models_dir = v; }},
      {"logs_dir", [](RunConfig& c, const std::string& v) { c.logs_dir = v; }},
      {"model", [](RunConfig& c, const std::string& v) { c.model = v; }},
      {"detections", [](RunConfig& c, const std::string& v) { c.detections = v; }},
      {"report_csv", [](RunConfig& c, const std::string& v) { c.report_csv = v; }},
      {"report_txt", [](RunConfig& c, const std::string& v) { c.report_txt = v; }},
  };
  const auto it = setters.find(key);
  if (it == setters.end()) throw InvalidInput("config: unknown key '" + key + "'");
  it->second(*this, value);
}

RunConfig RunConfig::resolved() const {
  RunConfig r = *this;
  auto fill = [&](std::filesystem::path& p, const char* name) {
    if (p.empty()) p = out_dir / name;
  };
  fill(r.audio_dir, "audio");
  fill(r.features_dir, "features");
  fill(r.augmented_dir, "augmented");
  fill(r.annotations, "annotations.csv");
  fill(r.classes, "classes.csv");
  fill(r.folds, "folds.csv");
  fill(r.models_dir, "models");
  fill(r.logs_dir, "logs");
  fill(r.model, "models/fold0.model");
  fill(r.detections, "detections.csv");
  fill(r.report_csv, "report.csv");
  fill(r.report_txt, "report.txt");
  return r;
}

void RunConfig::validate() const {
  train.validate();
  train.plan.validate();
  synth.validate();
  if (features.n_bands == 0) throw InvalidInput("config: n_bands must be positive");
  if (!(features.frame_len_s > 0.0)) throw InvalidInput("config: frame_len_s must be positive");
  if (!(features.overlap >= 0.0 && features.overlap < 1.0)) throw InvalidInput("config: overlap must lie in [0, 1)");
  if (n_folds < 3) throw InvalidInput("config: n_folds must be at least 3");
  if (!(block_s > 0.0)) throw InvalidInput("config: block_s must be positive");
}

std::string RunConfig::training_snapshot() const {
  std::ostringstream os;
  os << "eta=" << csv::format_double(train.eta) << '\n'
     << "rho=" << csv::format_double(train.rho) << '\n'
     << "epsilon=" << csv::format_double(train.epsilon) << '\n'
     << "noise_sigma=" << csv::format_double(train.noise_sigma) << '\n'
     << "batch_size=" << train.batch_size << '\n'
     << "patience_epochs=" << train.patience_epochs << '\n'
     << "max_epochs=" << train.max_epochs << '\n'
     << "n_restarts=" << train.n_restarts << '\n'
     << "sequence_lengths=" << join(train.sequence_lengths) << '\n'
     << "augmented_sequence_length=" << train.augmented_sequence_length << '\n'
     << "test_sequence_length=" << train.test_sequence_length << '\n'
     << "threshold=" << csv::format_double(train.threshold) << '\n'
     << "rng_seed=" << train.rng_seed << '\n'
     << "cells_per_layer=" << join(train.cells_per_layer) << '\n'
     << "chunk_size=" << train.chunk_size << '\n'
     << "augment=" << (train.augment ? "on" : "off") << '\n'
     << "stretch_factors=" << join(train.plan.stretch_factors) << '\n'
     << "subframe_shifts=" << join(train.plan.subframe_shifts) << '\n'
     << "mix_blocks_per_context=" << train.plan.mix_blocks_per_context << '\n'
     << "mix_pair_count_per_context=" << train.plan.mix_pair_count_per_context << '\n'
     << "n_bands=" << features.n_bands << '\n'
     << "frame_len_s=" << csv::format_double(features.frame_len_s) << '\n'
     << "overlap=" << csv::format_double(features.overlap) << '\n';
  return os.str();
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config " + path.string());
  RunConfig cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (csv::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidInput(path.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    cfg.set(csv::trim(line.substr(0, eq)), csv::trim(line.substr(eq + 1)));
  }
  return cfg;
}

}  // namespace polysed

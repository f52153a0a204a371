#include "polysed/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include "polysed/csv.hpp"
#include "polysed/detection.hpp"
#include "polysed/feature_io.hpp"
#include "polysed/log.hpp"
#include "polysed/model_io.hpp"
#include "polysed/wav.hpp"

namespace fs = std::filesystem;

namespace polysed {
namespace {

std::vector<fs::path> files_with_extension(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw InvalidInput("directory not found: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InvalidInput("cannot create directory " + dir.string());
}

}  // namespace

void cmd_synth(const RunConfig& cfg) {
  const auto ds = generate_dataset(cfg.synth, cfg.n_folds);
  ensure_dir(cfg.audio_dir);
  if (cfg.annotations.has_parent_path()) ensure_dir(cfg.annotations.parent_path());
  for (const auto& clip : ds.clips) write_wav(cfg.audio_dir / (clip.recording_id + ".wav"), clip);
  write_annotations(cfg.annotations, ds.annotations);
  write_class_map(cfg.classes, ds.classes);
  write_fold_assignment(cfg.folds, ds.folds);
  logger()->info("synthesized {} recordings, {} events", ds.clips.size(), ds.annotations.size());
}

ExtractSummary cmd_extract(const RunConfig& cfg) {
  const auto wavs = files_with_extension(cfg.audio_dir, ".wav");
  if (wavs.empty()) throw InvalidInput("no recordings in " + cfg.audio_dir.string());

  std::map<std::string, std::string> contexts;
  if (fs::exists(cfg.annotations)) {
    for (const auto& a : read_annotations(cfg.annotations)) contexts.emplace(a.recording_id, a.context_id);
  }
  ensure_dir(cfg.features_dir);
  ExtractSummary summary;
  for (const auto& path : wavs) {
    try {
      auto clip = read_wav(path);
      const auto ctx = contexts.find(clip.recording_id);
      clip.context_id = ctx != contexts.end() ? ctx->second : "unknown";
      const auto spec = extract_features(clip, cfg.features);
      save_features(cfg.features_dir / (clip.recording_id + ".feat"), spec);
      ++summary.written;
    } catch (const Error& e) {
      logger()->error("{}: {}", path.string(), e.what());
      ++summary.failed;
    }
  }
  logger()->info("extracted {} feature files, {} failures", summary.written, summary.failed);
  return summary;
}

std::vector<LabeledSpectrogram> load_labeled_features(const fs::path& features_dir, const fs::path& annotations,
                                                      const ClassMap& classes) {
  const auto rows = read_annotations(annotations);
  std::vector<LabeledSpectrogram> out;
  for (const auto& path : files_with_extension(features_dir, ".feat")) {
    LabeledSpectrogram item;
    item.spec = load_features(path);
    const auto events = events_for_recording(rows, item.spec.recording_id, classes);
    item.roll = annotations_to_roll(events, static_cast<std::size_t>(item.spec.n_frames()), item.spec.frame_hop_s,
                                    item.spec.frame_len_s, classes.size());
    item.provenance.recording_id = item.spec.recording_id;
    item.provenance.context_id = item.spec.context_id;
    item.provenance.sources = {item.spec.recording_id};
    out.push_back(std::move(item));
  }
  return out;
}

void cmd_augment(const RunConfig& cfg) {
  const auto classes = read_class_map(cfg.classes);
  const auto data = load_labeled_features(cfg.features_dir, cfg.annotations, classes);
  if (data.empty()) throw InvalidInput("no feature files in " + cfg.features_dir.string());
  const auto augmented = augment_dataset(data, cfg.train.plan);
  ensure_dir(cfg.augmented_dir);
  std::vector<AnnotationRecord> rows;
  for (const auto& item : augmented) {
    save_features(cfg.augmented_dir / (item.provenance.recording_id + ".feat"), item.spec);
    for (const auto& ev : roll_to_events(item.roll, item.spec.frame_hop_s, item.spec.frame_len_s)) {
      rows.push_back({item.provenance.recording_id, item.provenance.context_id, ev.onset_s, ev.offset_s,
                      classes.names[ev.class_id]});
    }
  }
  write_annotations(cfg.augmented_dir / "annotations.csv", rows);
  logger()->info("wrote {} augmented items to {}", augmented.size(), cfg.augmented_dir.string());
}

CrossValidationResult cmd_train(const RunConfig& cfg, std::span<const int> folds) {
  for (const auto& p : {cfg.folds, cfg.classes, cfg.annotations}) {
    if (!fs::exists(p)) throw InvalidInput("missing input file " + p.string());
  }
  const auto assignment = read_fold_assignment(cfg.folds);
  const auto classes = read_class_map(cfg.classes);
  const auto data = load_labeled_features(cfg.features_dir, cfg.annotations, classes);
  if (data.empty()) throw InvalidInput("no feature files in " + cfg.features_dir.string());
  const int n_folds = fold_count(assignment);
  for (int f : folds) {
    if (f < 0 || f >= n_folds) throw InvalidInput("fold " + std::to_string(f) + " is not in " + cfg.folds.string());
  }
  ensure_dir(cfg.models_dir);
  ensure_dir(cfg.logs_dir);

  std::map<std::pair<int, std::size_t>, std::ofstream> logs;
  CrossValidationHooks hooks;
  hooks.on_epoch = [&](int fold, std::size_t restart, const EpochStats& s) {
    auto& os = logs[{fold, restart}];
    if (!os.is_open()) {
      os.open(cfg.logs_dir / ("fold" + std::to_string(fold) + "_restart" + std::to_string(restart) + ".log"));
      os << "epoch,train_rmse,val_rmse,elapsed_s\n";
    }
    os << s.epoch << ',' << csv::format_double(s.train_rmse) << ',' << csv::format_double(s.val_rmse) << ','
       << csv::format_double(s.elapsed_s) << '\n';
    os.flush();
    logger()->debug("fold {} restart {} epoch {}: train {:.4f} val {:.4f}", fold, restart, s.epoch, s.train_rmse,
                    s.val_rmse);
  };

  auto result = cross_validate(data, assignment, cfg.train, classes, folds, hooks);
  const auto snapshot = cfg.training_snapshot();
  for (auto& fold : result.folds) {
    fold.net.config_snapshot = snapshot;
    save_model(cfg.models_dir / ("fold" + std::to_string(fold.fold_id) + ".model"), fold.net);
  }
  write_report_csv(cfg.logs_dir / "cv_report.csv", result.overall);
  return result;
}

void cmd_detect(const RunConfig& cfg, const fs::path& model_path, const fs::path& features_dir) {
  const auto net = load_model(model_path);
  std::vector<DetectedEvent> events;
  for (const auto& path : files_with_extension(features_dir, ".feat")) {
    const auto spec = load_features(path);
    if (static_cast<std::size_t>(spec.n_bands()) != net.arch.n_bands) {
      throw InvalidInput(path.string() + " has " + std::to_string(spec.n_bands()) + " bands, model expects " +
                         std::to_string(net.arch.n_bands));
    }
    const auto normalized = apply_normalizer(spec, net.normalizer);
    const Matrix y = infer_posteriors(net.params, normalized.values, cfg.train.test_sequence_length);
    const auto roll = threshold_outputs(y, cfg.train.threshold);
    auto found = roll_to_events(roll, spec.frame_hop_s, spec.frame_len_s, spec.recording_id);
    events.insert(events.end(), found.begin(), found.end());
  }
  if (cfg.detections.has_parent_path()) ensure_dir(cfg.detections.parent_path());
  write_detections(cfg.detections, events, net.classes);
  logger()->info("wrote {} events to {}", events.size(), cfg.detections.string());
}

EvalReport cmd_eval(const RunConfig& cfg, const fs::path& predictions, const fs::path& features_dir) {
  const auto classes = read_class_map(cfg.classes);
  const auto truth_rows = read_annotations(cfg.annotations);
  const auto detected = read_detections(predictions, classes);

  std::vector<MelSpectrogram> specs;
  std::set<std::string> known;
  for (const auto& path : files_with_extension(features_dir, ".feat")) {
    specs.push_back(load_features(path));
    known.insert(specs.back().recording_id);
  }
  std::set<std::string> offenders;
  for (const auto& ev : detected) {
    if (!known.count(ev.recording_id)) offenders.insert(ev.recording_id);
  }
  if (!offenders.empty()) {
    std::string list;
    for (const auto& o : offenders) list += (list.empty() ? "" : ", ") + o;
    throw InvalidInput("predictions reference recordings without features: " + list);
  }

  std::vector<RecordingOutcome> outcomes;
  for (const auto& spec : specs) {
    const auto n = static_cast<std::size_t>(spec.n_frames());
    std::vector<DetectedEvent> mine;
    for (const auto& ev : detected) {
      if (ev.recording_id == spec.recording_id) mine.push_back(ev);
    }
    RecordingOutcome o;
    o.pred = events_to_roll(mine, n, spec.frame_hop_s, spec.frame_len_s, classes.size());
    o.truth = annotations_to_roll(events_for_recording(truth_rows, spec.recording_id, classes), n, spec.frame_hop_s,
                                  spec.frame_len_s, classes.size());
    o.context_id = spec.context_id;
    o.recording_id = spec.recording_id;
    o.frame_hop_s = spec.frame_hop_s;
    outcomes.push_back(std::move(o));
  }
  const auto report = evaluate_contexts(outcomes, {cfg.block_s, cfg.framewise});
  if (cfg.report_csv.has_parent_path()) ensure_dir(cfg.report_csv.parent_path());
  write_report_csv(cfg.report_csv, report);
  std::ofstream txt(cfg.report_txt);
  if (!txt) throw InvalidInput("cannot write " + cfg.report_txt.string());
  txt << format_report_table(report);
  return report;
}

}  // namespace polysed

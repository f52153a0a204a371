#include "polysed/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <random>
#include <set>
#include <thread>

#include "polysed/detection.hpp"
#include "polysed/log.hpp"
#include "polysed/rmsprop.hpp"

namespace polysed {
namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

ArchDescriptor arch_for(const FoldData& data, const TrainConfig& cfg, const ClassMap& classes) {
  ArchDescriptor arch;
  arch.n_bands = static_cast<std::size_t>(data.normalizer.n_bands());
  arch.cells_per_layer = cfg.cells_per_layer;
  arch.n_classes = classes.size();
  return arch;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(eta > 0.0) || !(rho > 0.0 && rho < 1.0) || !(epsilon > 0.0)) {
    throw InvalidInput("config: eta, rho and epsilon must be positive (rho < 1)");
  }
  if (noise_sigma < 0.0) throw InvalidInput("config: noise_sigma must be non-negative");
  if (batch_size == 0 || patience_epochs == 0 || max_epochs == 0 || n_restarts == 0) {
    throw InvalidInput("config: batch_size, patience_epochs, max_epochs and n_restarts must be positive");
  }
  if (sequence_lengths.empty()) throw InvalidInput("config: sequence_lengths must not be empty");
  for (auto l : sequence_lengths) {
    if (l == 0) throw InvalidInput("config: sequence lengths must be positive");
  }
  if (augmented_sequence_length == 0 || test_sequence_length == 0) {
    throw InvalidInput("config: sequence lengths must be positive");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) throw InvalidInput("config: threshold must lie in (0, 1)");
  if (cells_per_layer.empty()) throw InvalidInput("config: need at least one LSTM layer");
  if (jobs == 0 || chunk_size == 0) throw InvalidInput("config: jobs and chunk_size must be positive");
  if (augment) plan.validate();
}

int fold_count(const std::map<std::string, int>& assignment) {
  std::set<int> ids;
  for (const auto& [rec, fold] : assignment) {
    if (fold < 0) throw InvalidInput("fold ids must be non-negative ('" + rec + "')");
    ids.insert(fold);
  }
  const int k = ids.empty() ? 0 : *ids.rbegin() + 1;
  if (static_cast<int>(ids.size()) != k) throw InvalidInput("fold ids must cover 0.." + std::to_string(k - 1));
  return k;
}

FoldSplit make_fold_split(const std::map<std::string, int>& assignment, int test_fold) {
  const int k = fold_count(assignment);
  if (k < 3) throw InvalidInput("cross-validation needs at least three folds");
  if (test_fold < 0 || test_fold >= k) throw InvalidInput("fold " + std::to_string(test_fold) + " does not exist");
  FoldSplit split;
  split.fold_id = test_fold;
  const int val_fold = (test_fold + 1) % k;
  for (const auto& [rec, fold] : assignment) {
    if (fold == test_fold) split.test.insert(rec);
    else if (fold == val_fold) split.validation.insert(rec);
    else split.train.insert(rec);
  }
  if (split.train.empty() || split.validation.empty() || split.test.empty()) {
    throw InvalidInput("fold " + std::to_string(test_fold) + " has an empty partition");
  }
  return split;
}

const char* to_string(StopReason reason) {
  switch (reason) {
    case StopReason::patience: return "patience";
    case StopReason::max_epochs: return "max_epochs";
    case StopReason::diverged: return "diverged";
  }
  return "unknown";
}

bool EarlyStopping::observe(std::size_t epoch, double cost) {
  if (cost < best_cost_) {
    best_cost_ = cost;
    best_epoch_ = epoch;
    return true;
  }
  return false;
}

FoldData prepare_fold(std::span<const LabeledSpectrogram> recordings, const FoldSplit& split,
                      const TrainConfig& cfg) {
  FoldData data;
  data.split = split;
  std::vector<LabeledSpectrogram> train_raw;
  for (const auto& rec : recordings) {
    const auto& id = rec.provenance.recording_id;
    if (split.train.count(id)) train_raw.push_back(rec);
    else if (split.validation.count(id)) data.validation.push_back(rec);
    else if (split.test.count(id)) data.test.push_back(rec);
  }
  if (train_raw.empty() || data.validation.empty()) {
    throw InvalidInput("fold " + std::to_string(split.fold_id) + ": no training or validation recordings");
  }

  std::vector<MelSpectrogram> pool;
  pool.reserve(train_raw.size());
  for (const auto& r : train_raw) pool.push_back(r.spec);
  data.normalizer = fit_normalizer(pool);

  if (cfg.augment) {
    auto plan = cfg.plan;
    plan.rng_seed = mix_seed(cfg.plan.rng_seed, static_cast<std::uint64_t>(split.fold_id));
    auto augmented = augment_dataset(train_raw, plan);
    logger()->info("fold {}: {} augmented items from {} training recordings", split.fold_id, augmented.size(),
                   train_raw.size());
    train_raw.insert(train_raw.end(), std::make_move_iterator(augmented.begin()),
                     std::make_move_iterator(augmented.end()));
  }

  auto normalize = [&](std::vector<LabeledSpectrogram>& items) {
    for (auto& item : items) item.spec = apply_normalizer(item.spec, data.normalizer);
  };
  normalize(train_raw);
  normalize(data.validation);
  normalize(data.test);
  data.train = std::move(train_raw);
  return data;
}

void check_leakage(const FoldData& data) {
  auto held_out = [&](const std::vector<LabeledSpectrogram>& items, const std::set<std::string>& allowed,
                      const char* name) {
    for (const auto& item : items) {
      if (item.provenance.augmented) {
        throw LeakageError(std::string("augmented item '") + item.provenance.recording_id + "' in " + name +
                           " partition of fold " + std::to_string(data.split.fold_id));
      }
      if (!allowed.count(item.provenance.recording_id)) {
        throw LeakageError(std::string("recording '") + item.provenance.recording_id + "' does not belong to the " +
                           name + " partition of fold " + std::to_string(data.split.fold_id));
      }
    }
  };
  held_out(data.validation, data.split.validation, "validation");
  held_out(data.test, data.split.test, "test");
  for (const auto& item : data.train) {
    for (const auto& src : item.provenance.sources) {
      if (!data.split.train.count(src)) {
        throw LeakageError("training item '" + item.provenance.recording_id + "' derives from held-out recording '" +
                           src + "' in fold " + std::to_string(data.split.fold_id));
      }
    }
  }
}

std::vector<TrainingSequence> build_training_sequences(std::span<const LabeledSpectrogram> train,
                                                       const TrainConfig& cfg) {
  std::vector<TrainingSequence> out;
  const std::vector<std::size_t> aug_lengths{cfg.augmented_sequence_length};
  for (const auto& item : train) {
    auto seqs = split_multiscale(item, item.provenance.augmented ? std::span<const std::size_t>(aug_lengths)
                                                                 : std::span<const std::size_t>(cfg.sequence_lengths));
    out.insert(out.end(), std::make_move_iterator(seqs.begin()), std::make_move_iterator(seqs.end()));
  }
  return out;
}

BatchGradient batch_gradient(const NetworkParams& params, const SequenceBatch& batch, const TrainConfig& cfg,
                             std::uint64_t noise_seed) {
  const std::size_t n = batch.batch_size();
  BatchGradient out{params.zeros_like(), 0.0, 0.0};
  if (n == 0) return out;
  const Eigen::Index steps = batch.length();
  const auto n_classes = batch.sequences.front().targets.cols();
  const double normalizer = static_cast<double>(n) * static_cast<double>(steps) * static_cast<double>(n_classes);
  out.count = normalizer;

  const std::size_t n_chunks = (n + cfg.chunk_size - 1) / cfg.chunk_size;
  std::vector<NetworkParams> chunk_grads(n_chunks);
  std::vector<double> chunk_sse(n_chunks, 0.0);

  auto work = [&](std::size_t c) {
    const std::size_t first = c * cfg.chunk_size;
    const std::size_t last = std::min(n, first + cfg.chunk_size);
    std::vector<Matrix> feats;
    std::vector<BinaryMatrix> targets;
    for (std::size_t k = first; k < last; ++k) {
      feats.push_back(batch.sequences[k].features);
      targets.push_back(batch.sequences[k].targets);
    }
    const auto b = static_cast<Eigen::Index>(last - first);
    const auto trace = forward_batch(params, stack_time_major(feats), steps, b, cfg.noise_sigma,
                                     mix_seed(noise_seed, c));
    chunk_grads[c] = params.zeros_like();
    chunk_sse[c] = accumulate_gradients(params, trace, stack_time_major(targets), normalizer, chunk_grads[c]);
  };

  const std::size_t workers = std::min(cfg.jobs, n_chunks);
  if (workers <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) work(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < n_chunks; c = next++) work(c);
      });
    }
  }

  // Fixed reduction order.
  auto total = out.grads.tensors();
  for (std::size_t c = 0; c < n_chunks; ++c) {
    const auto part = chunk_grads[c].tensors();
    for (std::size_t k = 0; k < total.size(); ++k) {
      for (std::size_t j = 0; j < total[k].size(); ++j) total[k][j] += part[k][j];
    }
    out.sse += chunk_sse[c];
  }
  return out;
}

Matrix infer_posteriors(const NetworkParams& params, const Matrix& features, std::size_t sequence_length) {
  if (sequence_length == 0) throw InvalidInput("sequence length must be positive");
  const Eigen::Index total = features.rows();
  const auto n_classes = params.output.b_y.size();
  Matrix y(total, n_classes);
  if (total == 0) return y;
  const auto len = static_cast<Eigen::Index>(sequence_length);
  const Eigen::Index n_full = total / len;
  if (n_full > 0) {
    std::vector<Matrix> seqs;
    for (Eigen::Index s = 0; s < n_full; ++s) seqs.push_back(features.middleRows(s * len, len));
    const auto trace = forward_batch(params, stack_time_major(seqs), len, n_full);
    for (Eigen::Index s = 0; s < n_full; ++s) y.middleRows(s * len, len) = unstack_sequence(trace.y, n_full, s);
  }
  const Eigen::Index tail = total - n_full * len;
  if (tail > 0) y.bottomRows(tail) = forward(params, features.bottomRows(tail)).y;
  return y;
}

double evaluate_rmse(const NetworkParams& params, std::span<const LabeledSpectrogram> data,
                     std::size_t sequence_length) {
  double sse = 0.0, count = 0.0;
  for (const auto& item : data) {
    const Matrix y = infer_posteriors(params, item.spec.values, sequence_length);
    sse += (y.array() - item.roll.values.cast<double>().array()).square().sum();
    count += static_cast<double>(y.size());
  }
  return count > 0 ? std::sqrt(sse / count) : 0.0;
}

EvalReport evaluate_network(const NetworkParams& params, std::span<const LabeledSpectrogram> data,
                            const TrainConfig& cfg, const EvalOptions& options) {
  std::vector<RecordingOutcome> outcomes;
  for (const auto& item : data) {
    RecordingOutcome o;
    o.pred = threshold_outputs(infer_posteriors(params, item.spec.values, cfg.test_sequence_length), cfg.threshold);
    o.truth = item.roll;
    o.context_id = item.provenance.context_id;
    o.recording_id = item.provenance.recording_id;
    o.frame_hop_s = item.spec.frame_hop_s;
    outcomes.push_back(std::move(o));
  }
  return evaluate_contexts(outcomes, options);
}

TrainResult train_fold(const FoldData& data, const TrainConfig& cfg, const ClassMap& classes, std::uint64_t seed,
                       const EpochCallback& on_epoch) {
  cfg.validate();
  check_leakage(data);
  if (data.train.empty() || data.validation.empty()) throw InvalidInput("train_fold: empty train or validation set");

  const auto started = Clock::now();
  TrainResult result;
  result.net = init_network(arch_for(data, cfg, classes), seed);
  result.net.normalizer = data.normalizer;
  result.net.classes = classes;

  const auto sequences = build_training_sequences(data.train, cfg);
  if (sequences.empty()) throw InvalidInput("train_fold: recordings are shorter than every sequence length");

  auto state = RmsPropState::for_params(result.net.params, cfg.eta, cfg.rho, cfg.epsilon);
  NetworkParams best = result.net.params;
  EarlyStopping stopper(cfg.patience_epochs);
  auto& record = result.record;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const std::uint64_t epoch_seed = mix_seed(seed, epoch);
    const auto batches = make_minibatches(sequences, cfg.batch_size, epoch_seed);
    double sse = 0.0, count = 0.0;
    bool diverged = false;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      auto g = batch_gradient(result.net.params, batches[b], cfg, mix_seed(epoch_seed, b + 1));
      sse += g.sse;
      count += g.count;
      try {
        rmsprop_update(result.net.params, g.grads, state);
      } catch (const DivergenceError& e) {
        logger()->warn("epoch {}: {}", epoch, e.what());
        diverged = true;
        break;
      }
    }
    if (diverged) {
      record.stop = StopReason::diverged;
      break;
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_rmse = count > 0 ? std::sqrt(sse / count) : 0.0;
    stats.val_rmse = evaluate_rmse(result.net.params, data.validation, cfg.test_sequence_length);
    stats.elapsed_s = std::chrono::duration<double>(Clock::now() - started).count();
    record.epochs.push_back(stats);
    if (on_epoch) on_epoch(stats);

    if (!std::isfinite(stats.val_rmse)) {
      record.stop = StopReason::diverged;
      break;
    }
    if (stopper.observe(epoch, stats.val_rmse)) best = result.net.params;
    if (stopper.exhausted(epoch)) {
      record.stop = StopReason::patience;
      break;
    }
  }

  record.best_epoch = stopper.best_epoch();
  record.best_val_rmse = stopper.best_cost();
  record.wall_time_s = std::chrono::duration<double>(Clock::now() - started).count();
  result.net.params = std::move(best);
  return result;
}

std::size_t select_best_index(std::span<const CandidateScore> scores) {
  if (scores.empty()) throw InvalidInput("select_best: no candidates");
  std::size_t best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k) {
    const auto& a = scores[k];
    const auto& b = scores[best];
    if (a.f1 > b.f1 || (a.f1 == b.f1 && a.rmse < b.rmse)) best = k;
  }
  return best;
}

std::size_t select_best(std::span<const TrainResult> candidates, std::span<const LabeledSpectrogram> validation,
                        const TrainConfig& cfg) {
  std::vector<CandidateScore> scores;
  for (const auto& c : candidates) {
    const auto report = evaluate_network(c.net.params, validation, cfg);
    scores.push_back({report.f1_avgframe, c.record.best_val_rmse});
  }
  return select_best_index(scores);
}

std::uint64_t restart_seed(std::uint64_t base, int fold, std::size_t restart) {
  return mix_seed(mix_seed(base, static_cast<std::uint64_t>(fold) + 1), restart);
}

CrossValidationResult cross_validate(std::span<const LabeledSpectrogram> recordings,
                                     const std::map<std::string, int>& assignment, const TrainConfig& cfg,
                                     const ClassMap& classes, std::span<const int> folds_to_run,
                                     const CrossValidationHooks& hooks) {
  cfg.validate();
  for (const auto& rec : recordings) {
    if (!assignment.count(rec.provenance.recording_id)) {
      throw InvalidInput("recording '" + rec.provenance.recording_id + "' has no fold assignment");
    }
  }
  std::vector<int> folds(folds_to_run.begin(), folds_to_run.end());
  if (folds.empty()) {
    for (int f = 0; f < fold_count(assignment); ++f) folds.push_back(f);
  }

  CrossValidationResult result;
  std::vector<EvalReport> reports;
  for (int fold : folds) {
    const auto split = make_fold_split(assignment, fold);
    auto data = prepare_fold(recordings, split, cfg);
    if (hooks.on_fold_prepared) hooks.on_fold_prepared(data);
    if (data.test.empty()) throw InvalidInput("fold " + std::to_string(fold) + " has no test recordings");

    std::vector<TrainResult> candidates;
    for (std::size_t r = 0; r < cfg.n_restarts; ++r) {
      EpochCallback cb;
      if (hooks.on_epoch) cb = [&, r](const EpochStats& s) { hooks.on_epoch(fold, r, s); };
      candidates.push_back(train_fold(data, cfg, classes, restart_seed(cfg.rng_seed, fold, r), cb));
      const auto& rec = candidates.back().record;
      logger()->info("fold {} restart {}: best epoch {} val RMSE {:.4f} ({}, {:.1f} s)", fold, r, rec.best_epoch,
                     rec.best_val_rmse, to_string(rec.stop), rec.wall_time_s);
    }
    const std::size_t chosen = candidates.size() == 1 ? 0 : select_best(candidates, data.validation, cfg);

    FoldResult fr;
    fr.fold_id = fold;
    fr.selected_restart = chosen;
    for (const auto& c : candidates) fr.records.push_back(c.record);
    fr.net = std::move(candidates[chosen].net);
    fr.report = evaluate_network(fr.net.params, data.test, cfg);
    logger()->info("fold {}: test F1_AvgFram {:.4f} F1_1-sec {:.4f}", fold, fr.report.f1_avgframe,
                   fr.report.f1_1sec);
    reports.push_back(fr.report);
    result.folds.push_back(std::move(fr));
  }
  result.overall = average_reports(reports);
  return result;
}

}  // namespace polysed

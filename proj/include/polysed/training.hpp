#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "polysed/augment.hpp"
#include "polysed/evaluation.hpp"
#include "polysed/network.hpp"

namespace polysed {

struct TrainConfig {
  double eta = 0.005;
  double rho = 0.9;
  double epsilon = 1e-8;
  double noise_sigma = 0.2;
  std::size_t batch_size = 600;
  std::size_t patience_epochs = 20;
  std::size_t max_epochs = 500;
  std::size_t n_restarts = 5;
  std::vector<std::size_t> sequence_lengths{10, 25, 100};
  std::size_t augmented_sequence_length = 25;
  std::size_t test_sequence_length = 100;
  double threshold = 0.5;
  std::uint64_t rng_seed = 1;
  std::vector<std::size_t> cells_per_layer{100, 100, 100, 100};
  bool augment = false;
  AugmentationPlan plan;
  /// Worker threads for gradient computation.
  std::size_t jobs = 1;
  /// Sequences per gradient work item. Gradients are summed per chunk and the
  /// chunks reduced in index order, so results do not depend on `jobs`.
  std::size_t chunk_size = 64;

  void validate() const;
};

/// Recording ids of one train/validation/test partition.
struct FoldSplit {
  int fold_id = 0;
  std::set<std::string> train;
  std::set<std::string> validation;
  std::set<std::string> test;
};

/// Test fold f, validation fold (f + 1) mod K, training on the rest.
FoldSplit make_fold_split(const std::map<std::string, int>& assignment, int test_fold);
/// Number of folds in an assignment (largest id + 1); ids must be 0..K-1.
int fold_count(const std::map<std::string, int>& assignment);

enum class StopReason { patience, max_epochs, diverged };
const char* to_string(StopReason reason);

struct EpochStats {
  std::size_t epoch = 0;
  double train_rmse = 0.0;
  double val_rmse = 0.0;
  double elapsed_s = 0.0;
};

struct TrainRecord {
  std::vector<EpochStats> epochs;
  std::size_t best_epoch = 0;
  double best_val_rmse = std::numeric_limits<double>::infinity();
  StopReason stop = StopReason::max_epochs;
  double wall_time_s = 0.0;
};

/// Patience bookkeeping: the cost must strictly decrease to count as progress.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Records the cost of `epoch`; true when it is a new best.
  bool observe(std::size_t epoch, double cost);
  [[nodiscard]] bool exhausted(std::size_t epoch) const { return epoch >= best_epoch_ + patience_; }
  [[nodiscard]] std::size_t best_epoch() const { return best_epoch_; }
  [[nodiscard]] double best_cost() const { return best_cost_; }

 private:
  std::size_t patience_;
  std::size_t best_epoch_ = 0;
  double best_cost_ = std::numeric_limits<double>::infinity();
};

/// Normalized material of one fold.
struct FoldData {
  FoldSplit split;
  BandNormalizer normalizer;
  std::vector<LabeledSpectrogram> train;
  std::vector<LabeledSpectrogram> validation;
  std::vector<LabeledSpectrogram> test;
};

/// Partitions whole recordings, augments the training partition when
/// configured, fits the normalizer on the original training recordings and
/// applies it everywhere.
FoldData prepare_fold(std::span<const LabeledSpectrogram> recordings, const FoldSplit& split, const TrainConfig& cfg);

/// Throws LeakageError if held-out partitions contain augmented material or
/// foreign recordings, or training material derives from held-out recordings.
void check_leakage(const FoldData& data);

/// Originals cut at every configured length; augmented items at the
/// augmented length only.
std::vector<TrainingSequence> build_training_sequences(std::span<const LabeledSpectrogram> train,
                                                       const TrainConfig& cfg);

struct BatchGradient {
  NetworkParams grads;
  double sse = 0.0;
  double count = 0.0;
};

/// Mean-squared-error gradient over a batch, with fresh input noise per chunk.
BatchGradient batch_gradient(const NetworkParams& params, const SequenceBatch& batch, const TrainConfig& cfg,
                             std::uint64_t noise_seed);

/// Posteriors (T x L) for an already-normalized feature matrix presented in
/// sequences of `sequence_length` frames; the shorter tail is a final sequence.
Matrix infer_posteriors(const NetworkParams& params, const Matrix& features, std::size_t sequence_length);

/// Noise-free RMSE over every frame of the given recordings.
double evaluate_rmse(const NetworkParams& params, std::span<const LabeledSpectrogram> data,
                     std::size_t sequence_length);

/// Thresholded predictions for each recording, scored per context.
EvalReport evaluate_network(const NetworkParams& params, std::span<const LabeledSpectrogram> data,
                            const TrainConfig& cfg, const EvalOptions& options = {});

struct TrainResult {
  BlstmNetwork net;
  TrainRecord record;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Minibatch BPTT + RMSProp with early stopping on validation RMSE. Returns
/// the best-validation snapshot.
TrainResult train_fold(const FoldData& data, const TrainConfig& cfg, const ClassMap& classes, std::uint64_t seed,
                       const EpochCallback& on_epoch = {});

struct CandidateScore {
  double f1 = 0.0;
  double rmse = 0.0;
};

/// Highest F1; ties go to lower RMSE, then lower index.
std::size_t select_best_index(std::span<const CandidateScore> scores);

/// Scores each candidate on the validation data and returns the index of the best.
std::size_t select_best(std::span<const TrainResult> candidates, std::span<const LabeledSpectrogram> validation,
                        const TrainConfig& cfg);

struct FoldResult {
  int fold_id = 0;
  BlstmNetwork net;
  EvalReport report;
  std::vector<TrainRecord> records;
  std::size_t selected_restart = 0;
};

struct CrossValidationResult {
  std::vector<FoldResult> folds;
  EvalReport overall;
};

/// Hooks for progress reporting; all optional.
struct CrossValidationHooks {
  std::function<void(int fold, std::size_t restart, const EpochStats&)> on_epoch;
  /// Called after prepare_fold, before the guard runs in train_fold.
  std::function<void(FoldData&)> on_fold_prepared;
};

/// Full protocol per fold: augment (optional), normalize, n_restarts x
/// train_fold, select_best, evaluate on the test partition.
CrossValidationResult cross_validate(std::span<const LabeledSpectrogram> recordings,
                                     const std::map<std::string, int>& assignment, const TrainConfig& cfg,
                                     const ClassMap& classes, std::span<const int> folds_to_run = {},
                                     const CrossValidationHooks& hooks = {});

/// Seed for restart `restart` of fold `fold`.
std::uint64_t restart_seed(std::uint64_t base, int fold, std::size_t restart);

}  // namespace polysed

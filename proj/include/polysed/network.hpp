#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "polysed/features.hpp"
#include "polysed/sequence.hpp"
#include "polysed/types.hpp"

namespace polysed {

/// Layer sizes of a stacked bidirectional LSTM with a logistic output layer.
struct ArchDescriptor {
  std::size_t n_bands = 40;
  /// Memory cells per direction, bottom layer first.
  std::vector<std::size_t> cells_per_layer{100, 100, 100, 100};
  std::size_t n_classes = 61;

  /// Throws InvalidInput on empty or zero-sized layers.
  void validate() const;
  [[nodiscard]] std::size_t layer_input_size(std::size_t layer) const;
  bool operator==(const ArchDescriptor&) const = default;
};

enum class Gate : int { input = 0, forget = 1, cell = 2, output = 3 };

/// Parameters of one reading direction of an LSTM layer.
///
/// Gate weights are stored side by side in the order input, forget, cell
/// input, output; use the `*_gate` accessors for a single gate. Peepholes are
/// diagonal: one weight per cell.
struct DirectionParams {
  Matrix w_x;        // n_in x 4n
  Matrix w_h;        // n x 4n
  RowVector peep_i;  // n
  RowVector peep_f;  // n
  RowVector peep_o;  // n
  RowVector bias;    // 4n

  [[nodiscard]] Eigen::Index n_cells() const { return w_h.rows(); }
  [[nodiscard]] Eigen::Index n_in() const { return w_x.rows(); }

  [[nodiscard]] auto input_gate(Gate g) const { return w_x.middleCols(static_cast<int>(g) * n_cells(), n_cells()); }
  [[nodiscard]] auto recurrent_gate(Gate g) const { return w_h.middleCols(static_cast<int>(g) * n_cells(), n_cells()); }
  [[nodiscard]] auto bias_gate(Gate g) const { return bias.segment(static_cast<int>(g) * n_cells(), n_cells()); }

  static DirectionParams zeros(Eigen::Index n_in, Eigen::Index n_cells);
};

struct LayerParams {
  DirectionParams fwd;
  DirectionParams bwd;
};

struct OutputParams {
  Matrix w_hy;     // 2n_top x L
  RowVector b_y;   // L
};

/// Every trainable tensor of the network. Also used for gradients and
/// optimizer accumulators, which mirror the parameter shapes exactly.
struct NetworkParams {
  std::vector<LayerParams> layers;
  OutputParams output;

  static NetworkParams zeros(const ArchDescriptor& arch);
  [[nodiscard]] NetworkParams zeros_like() const;

  /// Flat views over every tensor in a fixed canonical order.
  std::vector<std::span<double>> tensors();
  [[nodiscard]] std::vector<std::span<const double>> tensors() const;
  [[nodiscard]] std::vector<std::string> tensor_names() const;
  [[nodiscard]] std::size_t parameter_count() const;
};

struct BlstmNetwork {
  ArchDescriptor arch;
  NetworkParams params;
  BandNormalizer normalizer;
  ClassMap classes;
  /// Flat key=value text of the configuration that produced the model.
  std::string config_snapshot;
};

/// Every weight and bias i.i.d. uniform on [-0.1, 0.1].
BlstmNetwork init_network(const ArchDescriptor& arch, std::uint64_t rng_seed);

struct LstmStepResult {
  RowVector i, f, g, o, c, h;
};

/// One step of a peephole LSTM direction for a single vector input.
LstmStepResult lstm_step(const DirectionParams& params, const RowVector& x, const RowVector& h_prev,
                         const RowVector& c_prev);

/// Activations of one direction over a batch. Rows are time-major:
/// row t * batch + b holds sequence b at time t.
struct DirectionTrace {
  Matrix i, f, g, o, c, tanh_c, h;
};

struct LayerTrace {
  Matrix input;   // (T*B) x n_in
  DirectionTrace fwd;
  DirectionTrace bwd;
  Matrix output;  // (T*B) x 2n, forward cells first
};

struct ForwardTrace {
  Eigen::Index steps = 0;
  Eigen::Index batch = 0;
  std::vector<LayerTrace> layers;
  Matrix y;  // (T*B) x L, posterior per class
};

/// Stacks same-length sequences (each T x width) into one time-major matrix.
Matrix stack_time_major(std::span<const Matrix> sequences);
BinaryMatrix stack_time_major(std::span<const BinaryMatrix> sequences);
/// Inverse of stack_time_major for one sequence of the batch.
Matrix unstack_sequence(const Matrix& stacked, Eigen::Index batch, Eigen::Index index);

/// Forward pass over a time-major batch. Gaussian noise of std `noise_sigma`
/// is added to the inputs when positive.
ForwardTrace forward_batch(const NetworkParams& params, const Matrix& inputs, Eigen::Index steps,
                           Eigen::Index batch, double noise_sigma = 0.0, std::uint64_t rng_seed = 0);

/// Forward pass over a single sequence (T x n_bands).
ForwardTrace forward(const NetworkParams& params, const Matrix& sequence, double noise_sigma = 0.0,
                     std::uint64_t rng_seed = 0);

/// Accumulates into `grads` the gradient of sum((y - d)^2) / normalizer and
/// returns the unnormalized sum of squared errors.
double accumulate_gradients(const NetworkParams& params, const ForwardTrace& trace, const BinaryMatrix& targets,
                            double normalizer, NetworkParams& grads);

/// Backpropagation through time. Returns the gradient of the mean squared
/// error and the root mean squared error.
std::pair<NetworkParams, double> bptt(const NetworkParams& params, const ForwardTrace& trace,
                                      const BinaryMatrix& targets);

/// Noise-free posteriors for one sequence, T x L.
Matrix predict(const NetworkParams& params, const Matrix& sequence);

/// Root mean squared error between posteriors and binary targets.
double rmse(const Matrix& y, const BinaryMatrix& targets);

}  // namespace polysed

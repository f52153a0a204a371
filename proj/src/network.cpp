#include "polysed/network.hpp"

#include <cmath>
#include <random>

namespace polysed {
namespace {

inline auto sigmoid(const Eigen::ArrayXXd& z) { return (1.0 + (-z).exp()).inverse(); }

using Rows = Eigen::Block<Matrix, Eigen::Dynamic, Eigen::Dynamic, true>;
using ConstRows = Eigen::Block<const Matrix, Eigen::Dynamic, Eigen::Dynamic, true>;

/// Gate arithmetic for one step given z = W_x x + W_h h_prev + b (B x 4n).
template <class Z, class CPrev>
void step_kernel(const DirectionParams& p, const Z& z, const CPrev& c_prev, Eigen::Ref<Matrix> i,
                 Eigen::Ref<Matrix> f, Eigen::Ref<Matrix> g, Eigen::Ref<Matrix> o, Eigen::Ref<Matrix> c,
                 Eigen::Ref<Matrix> tanh_c, Eigen::Ref<Matrix> h) {
  const Eigen::Index n = p.n_cells();
  const auto cp = c_prev.array();
  i = sigmoid((z.middleCols(0, n).array() + cp.rowwise() * p.peep_i.array()).eval()).matrix();
  f = sigmoid((z.middleCols(n, n).array() + cp.rowwise() * p.peep_f.array()).eval()).matrix();
  g = z.middleCols(2 * n, n).array().tanh().matrix();
  c = (f.array() * cp + i.array() * g.array()).matrix();
  o = sigmoid((z.middleCols(3 * n, n).array() + c.array().rowwise() * p.peep_o.array()).eval()).matrix();
  tanh_c = c.array().tanh().matrix();
  h = (o.array() * tanh_c.array()).matrix();
}

void resize_trace(DirectionTrace& tr, Eigen::Index rows, Eigen::Index n) {
  for (Matrix* m : {&tr.i, &tr.f, &tr.g, &tr.o, &tr.c, &tr.tanh_c, &tr.h}) m->resize(rows, n);
}

void run_direction(const DirectionParams& p, const Matrix& x, Eigen::Index steps, Eigen::Index batch,
                   bool reverse, DirectionTrace& tr) {
  const Eigen::Index n = p.n_cells();
  Matrix z = x * p.w_x;
  z.rowwise() += p.bias;
  resize_trace(tr, steps * batch, n);
  Matrix h_prev = Matrix::Zero(batch, n);
  Matrix c_prev = Matrix::Zero(batch, n);
  for (Eigen::Index s = 0; s < steps; ++s) {
    const Eigen::Index t = reverse ? steps - 1 - s : s;
    const Eigen::Index r = t * batch;
    auto zt = z.middleRows(r, batch);
    zt.noalias() += h_prev * p.w_h;
    step_kernel(p, zt, c_prev, tr.i.middleRows(r, batch), tr.f.middleRows(r, batch), tr.g.middleRows(r, batch),
                tr.o.middleRows(r, batch), tr.c.middleRows(r, batch), tr.tanh_c.middleRows(r, batch),
                tr.h.middleRows(r, batch));
    h_prev = tr.h.middleRows(r, batch);
    c_prev = tr.c.middleRows(r, batch);
  }
}

/// Rows of `m` shifted one step back along the recurrence; zero at the first step.
Matrix previous_rows(const Matrix& m, Eigen::Index steps, Eigen::Index batch, bool reverse) {
  Matrix prev = Matrix::Zero(m.rows(), m.cols());
  for (Eigen::Index t = 0; t < steps; ++t) {
    const Eigen::Index src = reverse ? t + 1 : t - 1;
    if (src < 0 || src >= steps) continue;
    prev.middleRows(t * batch, batch) = m.middleRows(src * batch, batch);
  }
  return prev;
}

void backprop_direction(const DirectionParams& p, const Matrix& x, const DirectionTrace& tr, const Matrix& d_h,
                        Eigen::Index steps, Eigen::Index batch, bool reverse, DirectionParams& grads,
                        Matrix& d_x) {
  const Eigen::Index n = p.n_cells();
  Matrix d_z(steps * batch, 4 * n);
  Matrix d_h_rec = Matrix::Zero(batch, n);
  Eigen::ArrayXXd d_c_carry = Eigen::ArrayXXd::Zero(batch, n);
  const Matrix w_h_t = p.w_h.transpose();

  for (Eigen::Index s = steps - 1; s >= 0; --s) {
    const Eigen::Index t = reverse ? steps - 1 - s : s;
    const Eigen::Index r = t * batch;
    const bool has_prev = s > 0;
    const Eigen::Index r_prev = (reverse ? t + 1 : t - 1) * batch;

    const auto i = tr.i.middleRows(r, batch).array();
    const auto f = tr.f.middleRows(r, batch).array();
    const auto g = tr.g.middleRows(r, batch).array();
    const auto o = tr.o.middleRows(r, batch).array();
    const auto tc = tr.tanh_c.middleRows(r, batch).array();

    const Eigen::ArrayXXd dh = d_h.middleRows(r, batch).array() + d_h_rec.array();
    const Eigen::ArrayXXd dzo = dh * tc * o * (1.0 - o);
    const Eigen::ArrayXXd dc = dh * o * (1.0 - tc.square()) + dzo.rowwise() * p.peep_o.array() + d_c_carry;
    Eigen::ArrayXXd c_prev = has_prev ? Eigen::ArrayXXd(tr.c.middleRows(r_prev, batch).array())
                                      : Eigen::ArrayXXd::Zero(batch, n);
    const Eigen::ArrayXXd dzi = dc * g * i * (1.0 - i);
    const Eigen::ArrayXXd dzg = dc * i * (1.0 - g.square());
    const Eigen::ArrayXXd dzf = dc * c_prev * f * (1.0 - f);

    auto dzt = d_z.middleRows(r, batch);
    dzt.middleCols(0, n) = dzi.matrix();
    dzt.middleCols(n, n) = dzf.matrix();
    dzt.middleCols(2 * n, n) = dzg.matrix();
    dzt.middleCols(3 * n, n) = dzo.matrix();

    d_h_rec.noalias() = dzt * w_h_t;
    d_c_carry = dc * f + dzi.rowwise() * p.peep_i.array() + dzf.rowwise() * p.peep_f.array();
  }

  const Matrix h_prev = previous_rows(tr.h, steps, batch, reverse);
  const Matrix c_prev = previous_rows(tr.c, steps, batch, reverse);
  grads.w_x.noalias() += x.transpose() * d_z;
  grads.w_h.noalias() += h_prev.transpose() * d_z;
  grads.bias += d_z.colwise().sum();
  grads.peep_i += (d_z.middleCols(0, n).array() * c_prev.array()).matrix().colwise().sum();
  grads.peep_f += (d_z.middleCols(n, n).array() * c_prev.array()).matrix().colwise().sum();
  grads.peep_o += (d_z.middleCols(3 * n, n).array() * tr.c.array()).matrix().colwise().sum();
  d_x.noalias() += d_z * p.w_x.transpose();
}

void fill_uniform(std::span<double> t, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  for (double& v : t) v = dist(rng);
}

template <class Params, class Span>
std::vector<Span> collect(Params& p) {
  std::vector<Span> out;
  auto add = [&](auto& m) { out.emplace_back(m.data(), static_cast<std::size_t>(m.size())); };
  for (auto& layer : p.layers) {
    for (auto* d : {&layer.fwd, &layer.bwd}) {
      add(d->w_x);
      add(d->w_h);
      add(d->peep_i);
      add(d->peep_f);
      add(d->peep_o);
      add(d->bias);
    }
  }
  add(p.output.w_hy);
  add(p.output.b_y);
  return out;
}

}  // namespace

void ArchDescriptor::validate() const {
  if (n_bands == 0) throw InvalidInput("architecture needs at least one input band");
  if (n_classes == 0) throw InvalidInput("architecture needs at least one class");
  if (cells_per_layer.empty()) throw InvalidInput("architecture needs at least one LSTM layer");
  for (auto c : cells_per_layer) {
    if (c == 0) throw InvalidInput("LSTM layers need at least one cell");
  }
}

std::size_t ArchDescriptor::layer_input_size(std::size_t layer) const {
  return layer == 0 ? n_bands : 2 * cells_per_layer[layer - 1];
}

DirectionParams DirectionParams::zeros(Eigen::Index n_in, Eigen::Index n_cells) {
  DirectionParams p;
  p.w_x = Matrix::Zero(n_in, 4 * n_cells);
  p.w_h = Matrix::Zero(n_cells, 4 * n_cells);
  p.peep_i = RowVector::Zero(n_cells);
  p.peep_f = RowVector::Zero(n_cells);
  p.peep_o = RowVector::Zero(n_cells);
  p.bias = RowVector::Zero(4 * n_cells);
  return p;
}

NetworkParams NetworkParams::zeros(const ArchDescriptor& arch) {
  arch.validate();
  NetworkParams p;
  for (std::size_t l = 0; l < arch.cells_per_layer.size(); ++l) {
    const auto n_in = static_cast<Eigen::Index>(arch.layer_input_size(l));
    const auto n = static_cast<Eigen::Index>(arch.cells_per_layer[l]);
    p.layers.push_back({DirectionParams::zeros(n_in, n), DirectionParams::zeros(n_in, n)});
  }
  const auto top = static_cast<Eigen::Index>(2 * arch.cells_per_layer.back());
  p.output.w_hy = Matrix::Zero(top, static_cast<Eigen::Index>(arch.n_classes));
  p.output.b_y = RowVector::Zero(static_cast<Eigen::Index>(arch.n_classes));
  return p;
}

NetworkParams NetworkParams::zeros_like() const {
  NetworkParams z = *this;
  for (auto t : z.tensors()) std::fill(t.begin(), t.end(), 0.0);
  return z;
}

std::vector<std::span<double>> NetworkParams::tensors() { return collect<NetworkParams, std::span<double>>(*this); }

std::vector<std::span<const double>> NetworkParams::tensors() const {
  return collect<const NetworkParams, std::span<const double>>(*this);
}

std::vector<std::string> NetworkParams::tensor_names() const {
  std::vector<std::string> names;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (const char* dir : {"fwd", "bwd"}) {
      for (const char* t : {"w_x", "w_h", "peep_i", "peep_f", "peep_o", "bias"}) {
        names.push_back("layer" + std::to_string(l) + "." + dir + "." + t);
      }
    }
  }
  names.emplace_back("output.w_hy");
  names.emplace_back("output.b_y");
  return names;
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (auto t : tensors()) n += t.size();
  return n;
}

BlstmNetwork init_network(const ArchDescriptor& arch, std::uint64_t rng_seed) {
  BlstmNetwork net;
  net.arch = arch;
  net.params = NetworkParams::zeros(arch);
  std::mt19937_64 rng(rng_seed);
  for (auto t : net.params.tensors()) fill_uniform(t, rng);
  net.normalizer.means = Vector::Zero(static_cast<Eigen::Index>(arch.n_bands));
  net.normalizer.std_devs = Vector::Ones(static_cast<Eigen::Index>(arch.n_bands));
  return net;
}

LstmStepResult lstm_step(const DirectionParams& params, const RowVector& x, const RowVector& h_prev,
                         const RowVector& c_prev) {
  const Eigen::Index n = params.n_cells();
  if (x.size() != params.n_in() || h_prev.size() != n || c_prev.size() != n) {
    throw InvalidInput("lstm_step: dimension mismatch");
  }
  Matrix z = x * params.w_x + h_prev * params.w_h + params.bias;
  Matrix i(1, n), f(1, n), g(1, n), o(1, n), c(1, n), tc(1, n), h(1, n);
  step_kernel(params, z, Matrix(c_prev), i, f, g, o, c, tc, h);
  return {i, f, g, o, c, h};
}

Matrix stack_time_major(std::span<const Matrix> sequences) {
  if (sequences.empty()) return {};
  const Eigen::Index steps = sequences.front().rows();
  const Eigen::Index width = sequences.front().cols();
  const auto batch = static_cast<Eigen::Index>(sequences.size());
  Matrix out(steps * batch, width);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto& s = sequences[static_cast<std::size_t>(b)];
    if (s.rows() != steps || s.cols() != width) throw InvalidInput("batch sequences differ in shape");
    for (Eigen::Index t = 0; t < steps; ++t) out.row(t * batch + b) = s.row(t);
  }
  return out;
}

BinaryMatrix stack_time_major(std::span<const BinaryMatrix> sequences) {
  if (sequences.empty()) return {};
  const Eigen::Index steps = sequences.front().rows();
  const Eigen::Index width = sequences.front().cols();
  const auto batch = static_cast<Eigen::Index>(sequences.size());
  BinaryMatrix out(steps * batch, width);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const auto& s = sequences[static_cast<std::size_t>(b)];
    if (s.rows() != steps || s.cols() != width) throw InvalidInput("batch targets differ in shape");
    for (Eigen::Index t = 0; t < steps; ++t) out.row(t * batch + b) = s.row(t);
  }
  return out;
}

Matrix unstack_sequence(const Matrix& stacked, Eigen::Index batch, Eigen::Index index) {
  const Eigen::Index steps = stacked.rows() / batch;
  Matrix out(steps, stacked.cols());
  for (Eigen::Index t = 0; t < steps; ++t) out.row(t) = stacked.row(t * batch + index);
  return out;
}

ForwardTrace forward_batch(const NetworkParams& params, const Matrix& inputs, Eigen::Index steps,
                           Eigen::Index batch, double noise_sigma, std::uint64_t rng_seed) {
  if (params.layers.empty()) throw InvalidInput("network has no layers");
  if (steps < 1 || batch < 1 || inputs.rows() != steps * batch) {
    throw InvalidInput("forward: input rows do not match steps x batch");
  }
  if (inputs.cols() != params.layers.front().fwd.n_in()) {
    throw InvalidInput("forward: input has " + std::to_string(inputs.cols()) + " bands, network expects " +
                       std::to_string(params.layers.front().fwd.n_in()));
  }

  ForwardTrace trace;
  trace.steps = steps;
  trace.batch = batch;
  trace.layers.resize(params.layers.size());

  Matrix x = inputs;
  if (noise_sigma > 0.0) {
    std::mt19937_64 rng(rng_seed);
    std::normal_distribution<double> noise(0.0, noise_sigma);
    for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] += noise(rng);
  }

  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& lt = trace.layers[l];
    lt.input = std::move(x);
    run_direction(params.layers[l].fwd, lt.input, steps, batch, false, lt.fwd);
    run_direction(params.layers[l].bwd, lt.input, steps, batch, true, lt.bwd);
    const Eigen::Index n = params.layers[l].fwd.n_cells();
    lt.output.resize(steps * batch, 2 * n);
    lt.output.leftCols(n) = lt.fwd.h;
    lt.output.rightCols(n) = lt.bwd.h;
    x = lt.output;
  }
  Matrix z = trace.layers.back().output * params.output.w_hy;
  z.rowwise() += params.output.b_y;
  trace.y = sigmoid(z.array()).matrix();
  return trace;
}

ForwardTrace forward(const NetworkParams& params, const Matrix& sequence, double noise_sigma,
                     std::uint64_t rng_seed) {
  return forward_batch(params, sequence, sequence.rows(), 1, noise_sigma, rng_seed);
}

double accumulate_gradients(const NetworkParams& params, const ForwardTrace& trace, const BinaryMatrix& targets,
                            double normalizer, NetworkParams& grads) {
  if (targets.rows() != trace.y.rows() || targets.cols() != trace.y.cols()) {
    throw InvalidInput("bptt: targets do not align with the forward trace");
  }
  const Eigen::Index steps = trace.steps;
  const Eigen::Index batch = trace.batch;
  const Eigen::ArrayXXd y = trace.y.array();
  const Eigen::ArrayXXd err = y - targets.cast<double>().array();
  const double sse = err.square().sum();

  const Matrix d_zy = ((2.0 / normalizer) * err * y * (1.0 - y)).matrix();
  const Matrix& top = trace.layers.back().output;
  grads.output.w_hy.noalias() += top.transpose() * d_zy;
  grads.output.b_y += d_zy.colwise().sum();
  Matrix d_out = d_zy * params.output.w_hy.transpose();

  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const auto& p = params.layers[l];
    const auto& lt = trace.layers[l];
    const Eigen::Index n = p.fwd.n_cells();
    Matrix d_x = Matrix::Zero(lt.input.rows(), lt.input.cols());
    backprop_direction(p.fwd, lt.input, lt.fwd, d_out.leftCols(n), steps, batch, false, grads.layers[l].fwd, d_x);
    backprop_direction(p.bwd, lt.input, lt.bwd, d_out.rightCols(n), steps, batch, true, grads.layers[l].bwd, d_x);
    d_out = std::move(d_x);
  }
  return sse;
}

std::pair<NetworkParams, double> bptt(const NetworkParams& params, const ForwardTrace& trace,
                                      const BinaryMatrix& targets) {
  NetworkParams grads = params.zeros_like();
  const auto count = static_cast<double>(trace.y.size());
  const double sse = accumulate_gradients(params, trace, targets, count, grads);
  return {std::move(grads), std::sqrt(sse / count)};
}

Matrix predict(const NetworkParams& params, const Matrix& sequence) { return forward(params, sequence).y; }

double rmse(const Matrix& y, const BinaryMatrix& targets) {
  if (y.rows() != targets.rows() || y.cols() != targets.cols()) throw InvalidInput("rmse: shape mismatch");
  if (y.size() == 0) return 0.0;
  return std::sqrt((y.array() - targets.cast<double>().array()).square().mean());
}

}  // namespace polysed

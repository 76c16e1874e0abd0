#pragma once

#include "qasched/ising.hpp"
#include "qasched/parallel.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace qasched {

/// One LSTM layer. Gate blocks are stacked row-wise in the order
/// input, forget, cell candidate, output.
struct LstmLayer {
  Eigen::MatrixXd input_weights;      // 4H x I
  Eigen::MatrixXd recurrent_weights;  // 4H x H
  Eigen::VectorXd bias;               // 4H

  int width() const { return static_cast<int>(recurrent_weights.cols()); }
};

/// Stacked LSTM over scalar tokens with a logistic dense head reading the
/// last hidden state of the top layer.
struct LstmModel {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::vector<int> widths;
  int input_size = 1;
  int output_size = 500;
  double dropout_rate = 0.2;
  std::vector<LstmLayer> layers;
  Eigen::MatrixXd head_weights;  // O x H_last
  Eigen::VectorXd head_bias;     // O
  /// Feature layout the model was trained on, if known.
  std::optional<Layout> layout;

  /// Throws UsageError on inconsistent shapes or non-finite weights.
  void validate() const;
  std::size_t parameter_count() const;
};

/// Glorot-uniform input and head weights, orthogonal recurrent weights,
/// zero biases except a unit forget-gate bias.
LstmModel init_model(const std::vector<int>& widths, int output_size,
                     double dropout_rate, std::uint64_t seed);

/// A model with the same architecture and all parameters zero.
LstmModel zeros_like(const LstmModel& model);

/// Every parameter tensor in declared order: per layer input weights,
/// recurrent weights, bias; then head weights and head bias.
std::vector<std::span<double>> parameter_spans(LstmModel& model);
std::vector<std::span<const double>> parameter_spans(const LstmModel& model);

/// Single-sample cell update. Returns (h_t, c_t).
std::pair<Eigen::VectorXd, Eigen::VectorXd> lstm_cell_step(
    const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev,
    const Eigen::VectorXd& c_prev, const LstmLayer& layer);

/// Activations kept by a training-mode forward pass for backpropagation.
struct ForwardCache {
  int batch = 0;
  int steps = 0;
  // [layer][t], each column one sample.
  std::vector<std::vector<Eigen::MatrixXd>> inputs;   // I_l x B (after dropout)
  std::vector<std::vector<Eigen::MatrixXd>> gates;    // 4H x B, activated
  std::vector<std::vector<Eigen::MatrixXd>> cells;    // H x B
  std::vector<std::vector<Eigen::MatrixXd>> hiddens;  // H x B
  // Inverted-dropout multipliers applied to each layer's output, [layer][t].
  std::vector<std::vector<Eigen::MatrixXd>> masks;
  Eigen::MatrixXd head_input;  // H_last x B
  Eigen::MatrixXd output;      // O x B
};

/// Batched forward pass. `features` is steps x batch (one column per sample).
/// With training_mode, dropout masks are drawn per sample from
/// (dropout_seed, first_sample + column) so they do not depend on how a batch
/// is split. Fills `cache` when given.
Eigen::MatrixXd forward_batch(const LstmModel& model,
                              const Eigen::MatrixXd& features,
                              bool training_mode, std::uint64_t dropout_seed,
                              std::uint64_t first_sample = 0,
                              ForwardCache* cache = nullptr);

/// Single-sample forward pass; 500 outputs in (0, 1).
std::vector<double> forward(const LstmModel& model,
                            std::span<const double> features,
                            bool training_mode = false,
                            std::uint64_t dropout_seed = 0);

/// BPTT. `output_gradients` is dL/d(output), O x B. Returns gradients shaped
/// like the model. Reuses the cached dropout masks.
LstmModel backward(const LstmModel& model, const ForwardCache& cache,
                   const Eigen::MatrixXd& output_gradients);

/// Mean squared error over all entries (batch x points).
double loss_mse(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& targets);

/// dL/d(pred) of loss_mse.
Eigen::MatrixXd loss_mse_gradient(const Eigen::MatrixXd& predictions,
                                  const Eigen::MatrixXd& targets);

struct MreResult {
  double value = 0.0;
  std::size_t excluded = 0;  // indices with target <= kMreTargetFloor
};

inline constexpr double kMreTargetFloor = 1e-6;

/// Mean of |pred - target| / target over indices with target > 1e-6.
/// Throws UsageError on shape mismatch or no admissible index.
MreResult metric_mre(std::span<const double> predictions,
                     std::span<const double> targets);

/// Loss and summed gradients of a minibatch (MSE normalised by the whole
/// batch). The parallel path splits the batch into fixed shards and reduces
/// them in shard order, so the result does not depend on the thread count.
struct BatchGradient {
  double loss = 0.0;
  LstmModel gradients;
};

BatchGradient batch_gradient(const LstmModel& model,
                             const Eigen::MatrixXd& features,
                             const Eigen::MatrixXd& targets,
                             std::uint64_t dropout_seed,
                             std::uint64_t first_sample,
                             Execution execution = Execution::parallel);

/// Binary checkpoint: magic, version, architecture, layout, weights as
/// little-endian doubles in parameter_spans order, FNV-1a checksum.
void save_model(const LstmModel& model, const std::filesystem::path& path);
LstmModel load_model(const std::filesystem::path& path);

}  // namespace qasched

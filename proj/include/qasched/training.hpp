#pragma once

#include "qasched/errors.hpp"
#include "qasched/ising.hpp"
#include "qasched/lstm.hpp"
#include "qasched/parallel.hpp"
#include "qasched/schedule.hpp"

#include <json.hpp>

#include <cstdint>
#include <vector>

namespace qasched {

struct Record {
  std::vector<double> features;
  std::vector<double> target;  // kSchedulePoints samples of s(t)
  double t_f = 0.0;
  nlohmann::json meta;
};

struct Dataset {
  Layout layout;
  std::vector<Record> records;

  /// Throws UsageError when a record does not fit the layout or its target
  /// is not a valid schedule.
  void validate() const;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

/// Seeded shuffle, then the first round(fraction * n) indices (at least one,
/// leaving at least one for training) go to validation.
Split split_dataset(std::size_t n_records, double validation_fraction,
                    std::uint64_t seed);

struct TrainConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-7;
  int batch_size = 64;
  int epochs = 100;
  double validation_fraction = 0.2;
  std::uint64_t seed = 1;
  bool monotonize_predictions = false;
  std::vector<int> widths = {64, 64};
  double dropout_rate = 0.2;
  Execution execution = Execution::parallel;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  double train_mre = 0.0;
  double val_mre = 0.0;
};

struct TrainResult {
  LstmModel model;
  std::vector<EpochMetrics> history;
  Split split;
};

/// Raised when a minibatch loss or an updated weight is not finite. Carries
/// the model from before the failing update.
class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(const std::string& what, LstmModel last_good,
                   std::vector<EpochMetrics> history)
      : NumericalError(what), last_good(std::move(last_good)),
        history(std::move(history)) {}
  LstmModel last_good;
  std::vector<EpochMetrics> history;
};

/// Minibatch Adam on the MSE loss. History metrics are measured in inference
/// mode after every epoch.
TrainResult train(const Dataset& dataset, const TrainConfig& config);

/// Continues from `initial` instead of a fresh initialisation.
TrainResult train(const Dataset& dataset, const TrainConfig& config,
                  LstmModel initial);

/// Inference-mode outputs for many feature vectors, one column per input.
Eigen::MatrixXd predict_outputs(const LstmModel& model,
                                const std::vector<std::vector<double>>& features,
                                Execution execution = Execution::parallel);

/// Mean MSE and mean per-record MRE of the model on `indices`.
struct Evaluation {
  double mse = 0.0;
  double mre = 0.0;
  std::vector<double> per_record_mre;
};
Evaluation evaluate(const LstmModel& model, const Dataset& dataset,
                    const std::vector<std::size_t>& indices,
                    Execution execution = Execution::parallel);

/// Inference-mode forward pass turned into a schedule with the given t_f.
/// Throws UsageError when `layout` is not the model's training layout.
Schedule predict(const LstmModel& model, const IsingInstance& instance,
                 const Layout& layout, double t_f, bool monotonize = false);

}  // namespace qasched

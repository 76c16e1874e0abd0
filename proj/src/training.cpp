#include "qasched/training.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>
#include <string>

namespace qasched {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr Eigen::Index kInferenceChunk = 64;

Eigen::MatrixXd gather_features(const Dataset& data, const std::vector<std::size_t>& idx,
                                std::size_t begin, std::size_t count) {
  const auto steps = static_cast<Eigen::Index>(data.layout.feature_count());
  Eigen::MatrixXd f(steps, static_cast<Eigen::Index>(count));
  for (std::size_t c = 0; c < count; ++c) {
    const auto& v = data.records[idx[begin + c]].features;
    f.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::VectorXd>(v.data(), steps);
  }
  return f;
}

Eigen::MatrixXd gather_targets(const Dataset& data, const std::vector<std::size_t>& idx,
                               std::size_t begin, std::size_t count) {
  Eigen::MatrixXd t(kSchedulePoints, static_cast<Eigen::Index>(count));
  for (std::size_t c = 0; c < count; ++c) {
    const auto& v = data.records[idx[begin + c]].target;
    t.col(static_cast<Eigen::Index>(c)) = Eigen::Map<const Eigen::VectorXd>(v.data(), kSchedulePoints);
  }
  return t;
}

bool all_finite(const LstmModel& model) {
  for (auto span : parameter_spans(model))
    for (double v : span)
      if (!std::isfinite(v)) return false;
  return true;
}

struct Adam {
  LstmModel m, v;
  long long step = 0;

  explicit Adam(const LstmModel& model) : m(zeros_like(model)), v(zeros_like(model)) {}

  void update(LstmModel& model, LstmModel& grads, const TrainConfig& cfg) {
    ++step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    auto p = parameter_spans(model);
    auto g = parameter_spans(grads);
    auto ms = parameter_spans(m);
    auto vs = parameter_spans(v);
    for (std::size_t k = 0; k < p.size(); ++k)
      for (std::size_t e = 0; e < p[k].size(); ++e) {
        const double grad = g[k][e];
        ms[k][e] = cfg.beta1 * ms[k][e] + (1.0 - cfg.beta1) * grad;
        vs[k][e] = cfg.beta2 * vs[k][e] + (1.0 - cfg.beta2) * grad * grad;
        const double m_hat = ms[k][e] / c1;
        const double v_hat = vs[k][e] / c2;
        p[k][e] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.adam_epsilon);
      }
  }
};

}  // namespace

void Dataset::validate() const {
  const std::size_t width = layout.feature_count();
  for (std::size_t r = 0; r < records.size(); ++r) {
    const Record& rec = records[r];
    if (rec.features.size() != width)
      throw UsageError("record " + std::to_string(r) + " has " +
                       std::to_string(rec.features.size()) + " features, layout needs " +
                       std::to_string(width));
    Schedule s{ScheduleKind::local_adiabatic, rec.t_f, rec.target, std::nullopt};
    if (rec.target.size() != static_cast<std::size_t>(kSchedulePoints))
      throw UsageError("record " + std::to_string(r) + " target has wrong length");
    try {
      s.validate();
    } catch (const UsageError& e) {
      throw UsageError("record " + std::to_string(r) + ": " + e.what());
    }
  }
}

Split split_dataset(std::size_t n_records, double validation_fraction,
                    std::uint64_t seed) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw ConfigError("validation fraction must lie in (0, 1)");
  if (n_records < 2) throw UsageError("need at least two records to split");
  std::vector<std::size_t> order(n_records);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 engine(mix(seed, 0x5917));
  std::shuffle(order.begin(), order.end(), engine);
  auto n_val = static_cast<std::size_t>(
      std::llround(validation_fraction * static_cast<double>(n_records)));
  n_val = std::clamp<std::size_t>(n_val, 1, n_records - 1);
  Split split;
  split.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be finite and >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("adam decay rates must lie in [0, 1)");
  if (!(adam_epsilon > 0.0)) throw ConfigError("adam epsilon must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (epochs < 1) throw ConfigError("epochs must be positive");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw ConfigError("validation_fraction must lie in (0, 1)");
  if (widths.empty()) throw ConfigError("widths must name at least one layer");
  for (int w : widths)
    if (w < 1) throw ConfigError("layer widths must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
    throw ConfigError("dropout_rate must lie in [0, 1)");
}

Eigen::MatrixXd predict_outputs(const LstmModel& model,
                                const std::vector<std::vector<double>>& features,
                                Execution execution) {
  const auto n = static_cast<Eigen::Index>(features.size());
  Eigen::MatrixXd out(model.output_size, n);
  if (n == 0) return out;
  const auto steps = static_cast<Eigen::Index>(features.front().size());
  for (const auto& f : features)
    if (static_cast<Eigen::Index>(f.size()) != steps)
      throw UsageError("feature vectors of different lengths in one batch");
  const Eigen::Index chunks = (n + kInferenceChunk - 1) / kInferenceChunk;
  std::vector<std::exception_ptr> errors(chunks);
  auto run_chunk = [&](Eigen::Index c) {
    const Eigen::Index begin = c * kInferenceChunk;
    const Eigen::Index count = std::min(kInferenceChunk, n - begin);
    Eigen::MatrixXd x(steps, count);
    for (Eigen::Index k = 0; k < count; ++k)
      x.col(k) = Eigen::Map<const Eigen::VectorXd>(features[begin + k].data(), steps);
    out.middleCols(begin, count) = forward_batch(model, x, false, 0);
  };
  if (execution == Execution::serial) {
    for (Eigen::Index c = 0; c < chunks; ++c) run_chunk(c);
    return out;
  }
#pragma omp parallel for schedule(static)
  for (Eigen::Index c = 0; c < chunks; ++c) {
    try {
      run_chunk(c);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

Evaluation evaluate(const LstmModel& model, const Dataset& dataset,
                    const std::vector<std::size_t>& indices, Execution execution) {
  Evaluation ev;
  if (indices.empty()) return ev;
  std::vector<std::vector<double>> features;
  features.reserve(indices.size());
  for (std::size_t i : indices) features.push_back(dataset.records.at(i).features);
  const Eigen::MatrixXd out = predict_outputs(model, features, execution);
  const Eigen::MatrixXd targets = gather_targets(dataset, indices, 0, indices.size());
  ev.mse = loss_mse(out, targets);
  ev.per_record_mre.resize(indices.size());
  double sum = 0.0;
  for (std::size_t c = 0; c < indices.size(); ++c) {
    const auto col = static_cast<Eigen::Index>(c);
    ev.per_record_mre[c] =
        metric_mre({out.col(col).data(), static_cast<std::size_t>(out.rows())},
                   {targets.col(col).data(), static_cast<std::size_t>(targets.rows())})
            .value;
    sum += ev.per_record_mre[c];
  }
  ev.mre = sum / static_cast<double>(indices.size());
  return ev;
}

TrainResult train(const Dataset& dataset, const TrainConfig& config) {
  config.validate();
  LstmModel initial = init_model(config.widths, kSchedulePoints, config.dropout_rate,
                                 mix(config.seed, 0x1417));
  return train(dataset, config, std::move(initial));
}

TrainResult train(const Dataset& dataset, const TrainConfig& config,
                  LstmModel initial) {
  config.validate();
  if (dataset.records.empty()) throw UsageError("cannot train on an empty dataset");
  dataset.validate();
  initial.validate();
  if (initial.output_size != kSchedulePoints)
    throw UsageError("model head must have " + std::to_string(kSchedulePoints) + " outputs");

  TrainResult result;
  result.split = split_dataset(dataset.records.size(), config.validation_fraction, config.seed);
  {
    std::vector<std::size_t> overlap;
    std::set_intersection(result.split.train.begin(), result.split.train.end(),
                          result.split.validation.begin(), result.split.validation.end(),
                          std::back_inserter(overlap));
    if (!overlap.empty()) throw NumericalError("train and validation splits overlap");
  }
  result.model = std::move(initial);
  result.model.layout = dataset.layout;
  LstmModel& model = result.model;
  Adam adam(model);

  std::vector<std::size_t> order = result.split.train;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::mt19937_64 engine(mix(config.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), engine);
    const std::uint64_t dropout_seed = mix(config.seed ^ 0xd509, static_cast<std::uint64_t>(epoch));
    for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t count = std::min<std::size_t>(config.batch_size, order.size() - begin);
      const Eigen::MatrixXd x = gather_features(dataset, order, begin, count);
      const Eigen::MatrixXd y = gather_targets(dataset, order, begin, count);
      BatchGradient bg = batch_gradient(model, x, y, dropout_seed, begin, config.execution);
      if (!std::isfinite(bg.loss))
        throw TrainingDiverged("non-finite loss in epoch " + std::to_string(epoch), model,
                               result.history);
      LstmModel last_good = model;
      adam.update(model, bg.gradients, config);
      if (!all_finite(model))
        throw TrainingDiverged("non-finite weights in epoch " + std::to_string(epoch),
                               std::move(last_good), result.history);
    }
    const Evaluation tr = evaluate(model, dataset, result.split.train, config.execution);
    const Evaluation va = evaluate(model, dataset, result.split.validation, config.execution);
    result.history.push_back({epoch, tr.mse, va.mse, tr.mre, va.mre});
  }
  return result;
}

Schedule predict(const LstmModel& model, const IsingInstance& instance,
                 const Layout& layout, double t_f, bool monotonize) {
  if (model.layout && !(*model.layout == layout))
    throw UsageError("layout " + std::string(to_string(layout.kind)) + "/" +
                     std::to_string(layout.n_spins) +
                     " differs from the model's training layout " +
                     std::string(to_string(model.layout->kind)) + "/" +
                     std::to_string(model.layout->n_spins));
  const std::vector<double> features = feature_vector(instance, layout);
  const std::vector<double> out = forward(model, features, false, 0);
  return schedule_from_prediction(out, t_f, monotonize);
}

}  // namespace qasched

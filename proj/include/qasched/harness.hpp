#pragma once

#include "qasched/dynamics.hpp"
#include "qasched/ising.hpp"
#include "qasched/lstm.hpp"
#include "qasched/schedule.hpp"
#include "qasched/training.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qasched {

inline constexpr const char* kVersion = "1.0.0";

enum class ExperimentKind { same_size, extrapolate_chains, extrapolate_cliques, symmetry };
std::string_view to_string(ExperimentKind kind);
/// Throws ConfigError on unknown names.
ExperimentKind parse_experiment_kind(std::string_view name);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::same_size;
  TopologyKind topology = TopologyKind::nearest_neighbor_open;
  int n_spins = 4;
  /// Open-chain lengths used for sub-graph training (extrapolate_chains).
  /// Empty means {n_spins - 1}.
  std::vector<int> train_sizes;
  std::size_t train_instances = 2000;
  /// Records per masking configuration in sub-graph training sets.
  std::size_t subgraph_instances_per_config = 400;
  std::size_t test_instances = 200;
  /// Test instances that are also annealed under every schedule.
  std::size_t anneal_instances = 200;
  /// Test instances whose full traces are written.
  std::size_t trace_instances = 1;
  /// symmetry: also train and evaluate a sub-graph-trained model.
  bool symmetry_subgraph_model = false;
  double epsilon = 0.1;
  int m_max = 4;
  int grid = 500;
  /// Instances with more flagged grid points than this fraction are
  /// regenerated with the next seed.
  double max_flagged_fraction = 0.5;
  TrainConfig train;
  StepControl step;
  std::uint64_t seed = 1;
  std::filesystem::path out = "out";

  /// Throws ConfigError.
  void validate() const;
  ScheduleOptions schedule_options() const;
};

/// Switches counts and architecture to the published values.
void apply_full_scale(ExperimentSpec& spec);

nlohmann::json to_json(const TrainConfig& config);
/// Overrides the fields present in `value`; unknown keys are a ConfigError.
void update_from_json(TrainConfig& config, const nlohmann::json& value);
nlohmann::json to_json(const ExperimentSpec& spec);
void update_from_json(ExperimentSpec& spec, const nlohmann::json& value);

/// Seed of instance `index` in `stream`; `attempt` > 0 after regeneration.
std::uint64_t instance_seed(std::uint64_t base, std::uint64_t stream,
                            std::uint64_t index, std::uint32_t attempt = 0);

struct GenerationRequest {
  TopologyKind topology = TopologyKind::nearest_neighbor_open;
  int n_spins = 4;
  /// Defaults to (topology, n_spins).
  std::optional<Layout> layout;
  /// With a scheme, `count` instances are drawn for every configuration.
  std::optional<MaskScheme> mask;
  std::size_t count = 0;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
  ScheduleOptions schedule;
  double max_flagged_fraction = 0.5;
  int max_attempts = 64;
  Execution execution = Execution::parallel;
};

struct GenerationLog {
  std::size_t regenerated = 0;
  std::vector<std::string> events;
};

/// One record per instance: features in the layout, the locally-adiabatic
/// schedule samples, t_f, and the instance itself under meta.instance.
/// Workers own disjoint index ranges; records come out in index order.
Dataset generate_dataset(const GenerationRequest& request, GenerationLog* log = nullptr);

/// Maps an instance to the 500 raw network outputs for a layout.
using Predictor = std::function<std::vector<double>(const IsingInstance&, const Layout&)>;
Predictor model_predictor(const LstmModel& model);

struct Distribution {
  std::string name;
  std::vector<double> values;
  std::size_t excluded = 0;
};

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct Report {
  std::string name;
  std::vector<Distribution> distributions;
  std::vector<Table> tables;
  nlohmann::json summary = nlohmann::json::object();
  nlohmann::json provenance = nlohmann::json::object();
  std::vector<std::string> log;
  std::map<std::string, LstmModel> models;
};

struct Histogram {
  std::vector<double> edges;
  std::vector<std::size_t> counts;
};
inline constexpr int kHistogramBins = 50;
/// Uniform bins over [0, max value]; the maximum lands in the last bin.
Histogram histogram(const std::vector<double>& values, int bins = kHistogramBins);

struct Summary {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
};
/// Quartiles by linear interpolation between order statistics.
Summary summarize(std::vector<double> values);
double median(std::vector<double> values);

/// summary.json, hist_<distribution>.csv and <table>.csv under `dir`, plus
/// <model>.model checkpoints. Output bytes depend only on the report.
void emit_report(const Report& report, const std::filesystem::path& dir);

/// Runs every schedule on the instance. Throws UsageError unless all share
/// one t_f.
std::vector<AnnealResult> compare_schedules(const IsingInstance& instance,
                                            const std::vector<Schedule>& schedules,
                                            const StepControl& control = {},
                                            Execution execution = Execution::parallel);

Report experiment_same_size(const ExperimentSpec& spec,
                            std::optional<Predictor> predictor = std::nullopt);
Report experiment_extrapolate_chains(const ExperimentSpec& spec);
Report experiment_extrapolate_cliques(const ExperimentSpec& spec);
Report experiment_symmetry(const ExperimentSpec& spec,
                           std::optional<Predictor> predictor = std::nullopt);
Report run_experiment(const ExperimentSpec& spec);

}  // namespace qasched

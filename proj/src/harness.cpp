#include "qasched/harness.hpp"

#include "qasched/errors.hpp"
#include "qasched/io.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <set>

namespace qasched {

using nlohmann::json;

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

// Seed streams of the experiments.
constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kTestStream = 2;
constexpr std::uint64_t kSubgraphStream = 16;

std::string hex(std::uint64_t v) {
  char buffer[20];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(v));
  return buffer;
}

struct Labelled {
  std::vector<IsingInstance> instances;
  Dataset data;
};

std::set<std::uint64_t> seeds_of(const Labelled& set) {
  std::set<std::uint64_t> seeds;
  for (const auto& inst : set.instances) seeds.insert(inst.seed);
  return seeds;
}

void assert_disjoint(const std::set<std::uint64_t>& a, const std::set<std::uint64_t>& b,
                     const std::string& what) {
  for (auto s : a)
    if (b.contains(s)) throw NumericalError(what + ": seed " + std::to_string(s) + " reused");
}

GenerationRequest request_for(const ExperimentSpec& spec) {
  GenerationRequest r;
  r.seed = spec.seed;
  r.schedule = spec.schedule_options();
  r.max_flagged_fraction = spec.max_flagged_fraction;
  r.execution = spec.train.execution;
  return r;
}

Labelled generate(const ExperimentSpec& spec, TopologyKind topology, int n_spins,
                  Layout layout, std::optional<MaskScheme> mask, std::size_t count,
                  std::uint64_t stream, Report& report,
                  const std::set<std::uint64_t>* avoid = nullptr) {
  GenerationRequest r = request_for(spec);
  r.topology = topology;
  r.n_spins = n_spins;
  r.layout = layout;
  r.mask = mask;
  r.count = count;
  r.stream = stream;
  GenerationLog log;
  Labelled out;
  if (avoid) {
    // Regenerate any instance whose seed collides with the other set.
    for (std::uint32_t pass = 0;; ++pass) {
      out.data = generate_dataset(r, &log);
      bool clash = false;
      for (const auto& rec : out.data.records)
        clash = clash || avoid->contains(rec.meta.at("instance").at("seed").get<std::uint64_t>());
      if (!clash) break;
      if (pass > 8) throw NumericalError("cannot draw disjoint test seeds");
      r.seed = splitmix(r.seed + pass);
      report.log.push_back("test seeds collided with training seeds; redrawn");
    }
  } else {
    out.data = generate_dataset(r, &log);
  }
  for (auto& e : log.events) report.log.push_back(std::move(e));
  for (const auto& rec : out.data.records)
    out.instances.push_back(instance_from_json(rec.meta.at("instance")));
  return out;
}

void merge_into(Dataset& into, const Dataset& from) {
  into.records.insert(into.records.end(), from.records.begin(), from.records.end());
}

LstmModel train_model(const ExperimentSpec& spec, const Dataset& data,
                      const std::string& label, Report& report) {
  TrainResult result = train(data, spec.train);
  Table history{"history_" + label, {"epoch", "train_mse", "val_mse", "train_mre", "val_mre"}, {}};
  for (const auto& h : result.history)
    history.rows.push_back({static_cast<double>(h.epoch), h.train_mse, h.val_mse, h.train_mre, h.val_mre});
  report.tables.push_back(std::move(history));
  const auto& last = result.history.back();
  report.summary["training"][label] = {{"records", data.records.size()},
                                       {"train_records", result.split.train.size()},
                                       {"validation_records", result.split.validation.size()},
                                       {"final_train_mse", last.train_mse},
                                       {"final_val_mse", last.val_mse},
                                       {"final_train_mre", last.train_mre},
                                       {"final_val_mre", last.val_mre}};
  report.models[label] = result.model;
  return std::move(result.model);
}

Schedule predicted_schedule(const Predictor& predictor, const IsingInstance& inst,
                            const Layout& layout, double t_f, bool monotonize) {
  return schedule_from_prediction(predictor(inst, layout), t_f, monotonize);
}

Distribution mre_distribution(const std::string& name, const Predictor& predictor,
                              const std::vector<IsingInstance>& instances,
                              const std::vector<Record>& records, const Layout& layout,
                              bool monotonize) {
  Distribution d{name, {}, 0};
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const Schedule s = predicted_schedule(predictor, instances[i], layout, records[i].t_f, monotonize);
    d.values.push_back(metric_mre(s.samples, records[i].target).value);
  }
  return d;
}

Schedule la_schedule(const Record& rec, double epsilon) {
  Schedule s{ScheduleKind::local_adiabatic, rec.t_f, rec.target, epsilon};
  return s;
}

/// Anneals the first spec.anneal_instances test instances under linear,
/// local-adiabatic and every named predictor's schedule at the
/// local-adiabatic t_f.
void anneal_comparison(const ExperimentSpec& spec, const Labelled& test, const Layout& layout,
                       const std::vector<std::pair<std::string, Predictor>>& predictors,
                       Report& report) {
  const std::size_t n = std::min(spec.anneal_instances, test.instances.size());
  std::vector<std::string> names = {"linear", "local_adiabatic"};
  for (const auto& [name, p] : predictors) names.push_back("predicted_" + name);
  const std::size_t per = names.size();

  std::vector<AnnealJob> jobs;
  jobs.reserve(n * per);
  for (std::size_t i = 0; i < n; ++i) {
    const Record& rec = test.data.records[i];
    jobs.push_back({test.instances[i], linear_schedule(rec.t_f)});
    jobs.push_back({test.instances[i], la_schedule(rec, spec.epsilon)});
    for (const auto& [name, p] : predictors)
      jobs.push_back({test.instances[i], predicted_schedule(p, test.instances[i], layout, rec.t_f,
                                                            spec.train.monotonize_predictions)});
  }
  const auto results = evolve_batch(jobs, spec.step, spec.train.execution);

  double max_drift = 0.0, max_convergence = 0.0;
  std::size_t la_wins = 0;
  for (std::size_t k = 0; k < per; ++k) {
    Distribution residual{"residual_" + names[k], {}, 0};
    Distribution fidelity{"fidelity_" + names[k], {}, 0};
    for (std::size_t i = 0; i < n; ++i) {
      const AnnealResult& r = results[i * per + k];
      fidelity.values.push_back(r.fidelity);
      if (r.residual.excluded)
        ++residual.excluded;
      else
        residual.values.push_back(r.residual.value);
      max_drift = std::max(max_drift, r.norm_drift);
      max_convergence = std::max(max_convergence, r.report.self_convergence);
    }
    report.distributions.push_back(std::move(residual));
    report.distributions.push_back(std::move(fidelity));
  }
  for (std::size_t i = 0; i < n; ++i)
    if (results[i * per + 1].fidelity >= results[i * per].fidelity) ++la_wins;
  report.summary["annealing"] = {
      {"instances", n},
      {"local_adiabatic_ge_linear", la_wins},
      {"local_adiabatic_ge_linear_fraction", n ? static_cast<double>(la_wins) / static_cast<double>(n) : 0.0},
      {"max_norm_drift", max_drift},
      {"max_self_convergence", max_convergence}};

  for (std::size_t i = 0; i < std::min(spec.trace_instances, n); ++i) {
    Table t{"trace_" + std::to_string(i), {"t"}, {}};
    for (const auto& name : names) {
      t.columns.push_back("s_" + name);
      t.columns.push_back("ground_prob_" + name);
      t.columns.push_back("gap_" + name);
    }
    const auto& first = results[i * per];
    for (std::size_t row = 0; row < first.times.size(); ++row) {
      std::vector<double> values = {first.times[row]};
      for (std::size_t k = 0; k < per; ++k) {
        const auto& r = results[i * per + k];
        values.insert(values.end(), {r.s_trace[row], r.ground_prob_trace[row], r.gap_trace[row]});
      }
      t.rows.push_back(std::move(values));
    }
    report.tables.push_back(std::move(t));
  }
}

void start_report(Report& report, const ExperimentSpec& spec) {
  report.name = std::string(to_string(spec.kind));
  json config = to_json(spec);
  config.erase("out");
  report.provenance = {{"version", kVersion},
                       {"experiment", report.name},
                       {"seed", spec.seed},
                       {"config_hash", hex(fnv1a(config.dump()))},
                       {"config", config}};
}

Labelled relabel(const std::vector<IsingInstance>& instances, const Layout& layout,
                 const ScheduleOptions& options, Execution execution) {
  Labelled out;
  out.instances = instances;
  out.data.layout = layout;
  out.data.records.resize(instances.size());
  ScheduleOptions inner = options;
  inner.profile.execution = Execution::serial;
  std::vector<std::exception_ptr> errors(instances.size());
  const long long n = static_cast<long long>(instances.size());
  auto label = [&](long long i) {
    const auto la = local_adiabatic_schedule(instances[i], inner);
    Record& rec = out.data.records[i];
    rec.features = feature_vector(instances[i], layout);
    rec.target = la.schedule.samples;
    rec.t_f = la.schedule.t_f;
    rec.meta = {{"instance", to_json(instances[i])}};
  };
  if (execution == Execution::serial) {
    for (long long i = 0; i < n; ++i) label(i);
    return out;
  }
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < n; ++i) {
    try {
      label(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

}  // namespace

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::same_size: return "same_size";
    case ExperimentKind::extrapolate_chains: return "extrapolate_chains";
    case ExperimentKind::extrapolate_cliques: return "extrapolate_cliques";
    case ExperimentKind::symmetry: return "symmetry";
  }
  return "?";
}

ExperimentKind parse_experiment_kind(std::string_view name) {
  for (auto k : {ExperimentKind::same_size, ExperimentKind::extrapolate_chains,
                 ExperimentKind::extrapolate_cliques, ExperimentKind::symmetry})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown experiment '" + std::string(name) +
                    "' (same_size, extrapolate_chains, extrapolate_cliques, symmetry)");
}

void ExperimentSpec::validate() const {
  validate_topology(topology, n_spins);
  if (train_instances < 2) throw ConfigError("train_instances must be at least 2");
  if (subgraph_instances_per_config < 1) throw ConfigError("subgraph_instances_per_config must be positive");
  if (test_instances < 1) throw ConfigError("test_instances must be positive");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (m_max < 1) throw ConfigError("m_max must be positive");
  if (grid < 2) throw ConfigError("grid must have at least 2 points");
  if (!(max_flagged_fraction >= 0.0 && max_flagged_fraction <= 1.0))
    throw ConfigError("max_flagged_fraction must lie in [0, 1]");
  train.validate();
  switch (kind) {
    case ExperimentKind::same_size: break;
    case ExperimentKind::extrapolate_chains:
      if (topology != TopologyKind::nearest_neighbor_periodic)
        throw ConfigError("extrapolate_chains needs a nearest-neighbor-periodic target");
      for (int n : train_sizes)
        if (n < 1 || n >= n_spins)
          throw ConfigError("training chain length " + std::to_string(n) +
                            " does not embed into a ring of " + std::to_string(n_spins));
      break;
    case ExperimentKind::extrapolate_cliques:
      if (topology != TopologyKind::all_to_all || n_spins < 4)
        throw ConfigError("extrapolate_cliques needs an all-to-all target with n >= 4");
      break;
    case ExperimentKind::symmetry:
      if (topology != TopologyKind::nearest_neighbor_periodic && topology != TopologyKind::all_to_all)
        throw ConfigError("symmetry needs a periodic or all-to-all topology");
      if (symmetry_subgraph_model && topology == TopologyKind::all_to_all && n_spins < 4)
        throw ConfigError("sub-graph model on a complete graph needs n >= 4");
      break;
  }
}

ScheduleOptions ExperimentSpec::schedule_options() const {
  ScheduleOptions o;
  o.epsilon = epsilon;
  o.profile.m_max = m_max;
  o.profile.n_grid = grid;
  return o;
}

void apply_full_scale(ExperimentSpec& spec) {
  spec.train_instances = 50000;
  spec.test_instances = 1000;
  spec.anneal_instances = 1000;
  spec.subgraph_instances_per_config =
      spec.kind == ExperimentKind::extrapolate_cliques ? 20000 : 40000;
  spec.train.widths = {500, 500, 500};
}

json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_epsilon", c.adam_epsilon},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"validation_fraction", c.validation_fraction},
          {"seed", c.seed},
          {"monotonize_predictions", c.monotonize_predictions},
          {"widths", c.widths},
          {"dropout_rate", c.dropout_rate},
          {"execution", c.execution == Execution::serial ? "serial" : "parallel"}};
}

namespace {

template <class T>
void take(const json& obj, const char* key, T& into) {
  if (!obj.contains(key)) return;
  try {
    into = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const char* where) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + " must be an object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ConfigError(std::string("unknown key '") + key + "' in " + where);
  }
}

}  // namespace

void update_from_json(TrainConfig& c, const json& v) {
  reject_unknown(v, {"learning_rate", "beta1", "beta2", "adam_epsilon", "batch_size", "epochs",
                     "validation_fraction", "seed", "monotonize_predictions", "widths",
                     "dropout_rate", "execution"},
                 "train");
  take(v, "learning_rate", c.learning_rate);
  take(v, "beta1", c.beta1);
  take(v, "beta2", c.beta2);
  take(v, "adam_epsilon", c.adam_epsilon);
  take(v, "batch_size", c.batch_size);
  take(v, "epochs", c.epochs);
  take(v, "validation_fraction", c.validation_fraction);
  take(v, "seed", c.seed);
  take(v, "monotonize_predictions", c.monotonize_predictions);
  take(v, "widths", c.widths);
  take(v, "dropout_rate", c.dropout_rate);
  if (v.contains("execution")) {
    std::string e;
    take(v, "execution", e);
    if (e == "serial") c.execution = Execution::serial;
    else if (e == "parallel") c.execution = Execution::parallel;
    else throw ConfigError("execution must be serial or parallel");
  }
}

json to_json(const ExperimentSpec& s) {
  return {{"name", std::string(to_string(s.kind))},
          {"topology", std::string(to_string(s.topology))},
          {"n_spins", s.n_spins},
          {"train_sizes", s.train_sizes},
          {"train_instances", s.train_instances},
          {"subgraph_instances_per_config", s.subgraph_instances_per_config},
          {"test_instances", s.test_instances},
          {"anneal_instances", s.anneal_instances},
          {"trace_instances", s.trace_instances},
          {"symmetry_subgraph_model", s.symmetry_subgraph_model},
          {"epsilon", s.epsilon},
          {"m_max", s.m_max},
          {"grid", s.grid},
          {"max_flagged_fraction", s.max_flagged_fraction},
          {"train", to_json(s.train)},
          {"step",
           {{"initial_step", s.step.initial_step},
            {"probability_tolerance", s.step.probability_tolerance},
            {"norm_tolerance", s.step.norm_tolerance},
            {"max_refinements", s.step.max_refinements}}},
          {"seed", s.seed},
          {"out", s.out.string()}};
}

void update_from_json(ExperimentSpec& s, const json& v) {
  reject_unknown(v, {"name", "topology", "n_spins", "train_sizes", "train_instances",
                     "subgraph_instances_per_config", "test_instances", "anneal_instances",
                     "trace_instances", "symmetry_subgraph_model", "epsilon", "m_max", "grid",
                     "max_flagged_fraction", "train", "step", "seed", "out"},
                 "experiment config");
  if (v.contains("name")) {
    std::string name;
    take(v, "name", name);
    s.kind = parse_experiment_kind(name);
  }
  if (v.contains("topology")) {
    std::string t;
    take(v, "topology", t);
    s.topology = parse_topology_kind(t);
  }
  take(v, "n_spins", s.n_spins);
  take(v, "train_sizes", s.train_sizes);
  take(v, "train_instances", s.train_instances);
  take(v, "subgraph_instances_per_config", s.subgraph_instances_per_config);
  take(v, "test_instances", s.test_instances);
  take(v, "anneal_instances", s.anneal_instances);
  take(v, "trace_instances", s.trace_instances);
  take(v, "symmetry_subgraph_model", s.symmetry_subgraph_model);
  take(v, "epsilon", s.epsilon);
  take(v, "m_max", s.m_max);
  take(v, "grid", s.grid);
  take(v, "max_flagged_fraction", s.max_flagged_fraction);
  take(v, "seed", s.seed);
  if (v.contains("train")) update_from_json(s.train, v.at("train"));
  if (v.contains("step")) {
    const json& st = v.at("step");
    reject_unknown(st, {"initial_step", "probability_tolerance", "norm_tolerance", "max_refinements"}, "step");
    take(st, "initial_step", s.step.initial_step);
    take(st, "probability_tolerance", s.step.probability_tolerance);
    take(st, "norm_tolerance", s.step.norm_tolerance);
    take(st, "max_refinements", s.step.max_refinements);
  }
  if (v.contains("out")) {
    std::string out;
    take(v, "out", out);
    s.out = out;
  }
}

std::uint64_t instance_seed(std::uint64_t base, std::uint64_t stream,
                            std::uint64_t index, std::uint32_t attempt) {
  return splitmix(splitmix(splitmix(base) ^ stream) ^ (index * 0x10001ULL + attempt));
}

Dataset generate_dataset(const GenerationRequest& request, GenerationLog* log) {
  validate_topology(request.topology, request.n_spins);
  const Layout layout = request.layout.value_or(Layout{request.topology, request.n_spins});
  validate_topology(layout.kind, layout.n_spins);
  if (!(request.max_flagged_fraction >= 0.0 && request.max_flagged_fraction <= 1.0))
    throw ConfigError("max_flagged_fraction must lie in [0, 1]");
  int configs = 1;
  if (request.mask)
    configs = mask_config_count(*request.mask,
                                sample_instance(Topology{request.topology, {}, {}}, request.n_spins, 0));
  const std::size_t total = request.count * static_cast<std::size_t>(configs);

  ScheduleOptions options = request.schedule;
  options.profile.execution = Execution::serial;
  const double grid = static_cast<double>(options.profile.n_grid);

  Dataset dataset;
  dataset.layout = layout;
  dataset.records.resize(total);
  std::vector<std::vector<std::string>> events(total);
  std::vector<std::exception_ptr> errors(total);

  auto make = [&](std::size_t i) {
    const int config = request.mask ? static_cast<int>(i / request.count) : -1;
    for (int attempt = 0; attempt < request.max_attempts; ++attempt) {
      const std::uint64_t seed =
          instance_seed(request.seed, request.stream, i, static_cast<std::uint32_t>(attempt));
      IsingInstance inst = sample_instance(Topology{request.topology, {}, {}}, request.n_spins, seed);
      if (request.mask) inst = mask_subgraph(inst, config, *request.mask);
      try {
        const auto la = local_adiabatic_schedule(inst, options);
        const double flagged = static_cast<double>(la.flagged_points) / grid;
        // Fewer than m_max excited levels is structural for tiny systems;
        // redrawing cannot help there.
        const bool structural = (1LL << la.effective_spins) - 1 < options.profile.m_max;
        if (flagged > request.max_flagged_fraction && !structural) {
          events[i].push_back("instance " + std::to_string(i) + " seed " + std::to_string(seed) +
                              ": flagged fraction " + format_real(flagged) + ", regenerated");
          continue;
        }
        Record& rec = dataset.records[i];
        rec.features = feature_vector(inst, layout);
        rec.target = la.schedule.samples;
        rec.t_f = la.schedule.t_f;
        rec.meta = {{"instance", to_json(inst)},
                    {"config", config},
                    {"attempt", attempt},
                    {"flagged_points", la.flagged_points},
                    {"effective_spins", la.effective_spins},
                    {"numerator_bound", la.numerator_bound}};
        if (request.mask) rec.meta["mask"] = std::string(to_string(*request.mask));
        return;
      } catch (const NumericalError& e) {
        events[i].push_back("instance " + std::to_string(i) + " seed " + std::to_string(seed) +
                            ": " + e.what() + ", regenerated");
      }
    }
    throw NumericalError("instance " + std::to_string(i) + " failed " +
                         std::to_string(request.max_attempts) + " attempts");
  };

  const long long n = static_cast<long long>(total);
  if (request.execution == Execution::serial) {
    for (long long i = 0; i < n; ++i) make(static_cast<std::size_t>(i));
  } else {
#pragma omp parallel for schedule(dynamic, 4)
    for (long long i = 0; i < n; ++i) {
      try {
        make(static_cast<std::size_t>(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  if (log)
    for (auto& per : events)
      for (auto& e : per) {
        ++log->regenerated;
        log->events.push_back(std::move(e));
      }
  return dataset;
}

Predictor model_predictor(const LstmModel& model) {
  return [model](const IsingInstance& inst, const Layout& layout) {
    if (model.layout && !(*model.layout == layout))
      throw UsageError("predictor layout differs from the model's training layout");
    return forward(model, feature_vector(inst, layout), false, 0);
  };
}

Histogram histogram(const std::vector<double>& values, int bins) {
  if (bins < 1) throw UsageError("histogram needs at least one bin");
  Histogram h;
  h.counts.assign(bins, 0);
  double hi = 0.0;
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0) throw UsageError("histogram values must be finite and >= 0");
    hi = std::max(hi, v);
  }
  if (hi == 0.0) hi = 1.0;
  for (int b = 0; b <= bins; ++b) h.edges.push_back(hi * b / bins);
  for (double v : values) {
    auto b = static_cast<int>(v / hi * bins);
    h.counts[std::min(b, bins - 1)]++;
  }
  return h;
}

namespace {

double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

Summary summarize(std::vector<double> values) {
  if (values.empty()) throw UsageError("cannot summarise an empty sample");
  std::sort(values.begin(), values.end());
  Summary s;
  s.median = quantile(values, 0.5);
  s.q1 = quantile(values, 0.25);
  s.q3 = quantile(values, 0.75);
  s.min = values.front();
  s.max = values.back();
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  return s;
}

double median(std::vector<double> values) { return summarize(std::move(values)).median; }

void emit_report(const Report& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());

  json dists = json::array();
  for (const auto& d : report.distributions) {
    const std::string file = "hist_" + d.name + ".csv";
    std::string csv = "bin_lo,bin_hi,count\n";
    json entry = {{"name", d.name},
                  {"processed", d.values.size() + d.excluded},
                  {"excluded", d.excluded},
                  {"count", d.values.size()},
                  {"bins", kHistogramBins},
                  {"file", file}};
    if (!d.values.empty()) {
      const Histogram h = histogram(d.values);
      for (int b = 0; b < kHistogramBins; ++b)
        csv += format_real(h.edges[b]) + "," + format_real(h.edges[b + 1]) + "," +
               std::to_string(h.counts[b]) + "\n";
      const Summary s = summarize(d.values);
      entry["median"] = s.median;
      entry["q1"] = s.q1;
      entry["q3"] = s.q3;
      entry["min"] = s.min;
      entry["max"] = s.max;
      entry["mean"] = s.mean;
    }
    write_text(dir / file, csv);
    dists.push_back(std::move(entry));
  }

  json tables = json::array();
  for (const auto& t : report.tables) {
    std::string csv;
    for (std::size_t c = 0; c < t.columns.size(); ++c) csv += (c ? "," : "") + t.columns[c];
    csv += "\n";
    for (const auto& row : t.rows) {
      for (std::size_t c = 0; c < row.size(); ++c) csv += (c ? "," : "") + format_real(row[c]);
      csv += "\n";
    }
    write_text(dir / (t.name + ".csv"), csv);
    tables.push_back(t.name + ".csv");
  }

  json models = json::array();
  for (const auto& [name, model] : report.models) {
    save_model(model, dir / (name + ".model"));
    models.push_back(name + ".model");
  }

  write_json(dir / "summary.json", {{"report", report.name},
                                    {"provenance", report.provenance},
                                    {"summary", report.summary},
                                    {"distributions", dists},
                                    {"tables", tables},
                                    {"models", models},
                                    {"log", report.log}});
}

std::vector<AnnealResult> compare_schedules(const IsingInstance& instance,
                                            const std::vector<Schedule>& schedules,
                                            const StepControl& control, Execution execution) {
  for (const auto& s : schedules)
    if (std::abs(s.t_f - schedules.front().t_f) > 1e-12 * schedules.front().t_f)
      throw UsageError("compared schedules must share t_f");
  std::vector<AnnealJob> jobs;
  for (const auto& s : schedules) jobs.push_back({instance, s});
  return evolve_batch(jobs, control, execution);
}

Report experiment_same_size(const ExperimentSpec& spec, std::optional<Predictor> predictor) {
  spec.validate();
  Report report;
  start_report(report, spec);
  const Layout layout{spec.topology, spec.n_spins};

  std::set<std::uint64_t> train_seeds;
  if (!predictor) {
    const Labelled train_set = generate(spec, spec.topology, spec.n_spins, layout, std::nullopt,
                                        spec.train_instances, kTrainStream, report);
    train_seeds = seeds_of(train_set);
    predictor = model_predictor(train_model(spec, train_set.data, "model", report));
  }
  const Labelled test = generate(spec, spec.topology, spec.n_spins, layout, std::nullopt,
                                 spec.test_instances, kTestStream, report, &train_seeds);
  assert_disjoint(train_seeds, seeds_of(test), "train/test");

  report.distributions.push_back(mre_distribution("mre", *predictor, test.instances,
                                                  test.data.records, layout,
                                                  spec.train.monotonize_predictions));
  anneal_comparison(spec, test, layout, {{"model", *predictor}}, report);
  return report;
}

Report experiment_extrapolate_chains(const ExperimentSpec& spec) {
  spec.validate();
  Report report;
  start_report(report, spec);
  const Layout ring{TopologyKind::nearest_neighbor_periodic, spec.n_spins};
  std::vector<int> sizes = spec.train_sizes;
  if (sizes.empty()) sizes = {spec.n_spins - 1};

  Dataset sub;
  sub.layout = ring;
  std::set<std::uint64_t> train_seeds;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    const int n = sizes[k];
    Labelled part =
        n == spec.n_spins - 1
            ? generate(spec, TopologyKind::nearest_neighbor_periodic, spec.n_spins, ring,
                       MaskScheme::ring_to_open_chain, spec.subgraph_instances_per_config,
                       kSubgraphStream + k, report)
            : generate(spec, TopologyKind::nearest_neighbor_open, n, ring, std::nullopt,
                       spec.subgraph_instances_per_config, kSubgraphStream + k, report);
    merge_into(sub, part.data);
    train_seeds.merge(seeds_of(part));
  }
  const Labelled full = generate(spec, TopologyKind::nearest_neighbor_periodic, spec.n_spins,
                                 ring, std::nullopt, spec.train_instances, kTrainStream, report);
  train_seeds.merge(seeds_of(full));
  const LstmModel sub_model = train_model(spec, sub, "subgraph", report);
  const LstmModel full_model = train_model(spec, full.data, "full", report);

  const Labelled test = generate(spec, TopologyKind::nearest_neighbor_periodic, spec.n_spins,
                                 ring, std::nullopt, spec.test_instances, kTestStream, report,
                                 &train_seeds);
  assert_disjoint(train_seeds, seeds_of(test), "train/test");
  const bool mono = spec.train.monotonize_predictions;
  report.distributions.push_back(mre_distribution("mre_subgraph", model_predictor(sub_model),
                                                  test.instances, test.data.records, ring, mono));
  report.distributions.push_back(mre_distribution("mre_full", model_predictor(full_model),
                                                  test.instances, test.data.records, ring, mono));
  anneal_comparison(spec, test, ring,
                    {{"subgraph", model_predictor(sub_model)}, {"full", model_predictor(full_model)}},
                    report);
  return report;
}

Report experiment_extrapolate_cliques(const ExperimentSpec& spec) {
  spec.validate();
  Report report;
  start_report(report, spec);
  const Layout clique{TopologyKind::all_to_all, spec.n_spins};
  std::set<std::uint64_t> train_seeds;

  const Labelled tri = generate(spec, TopologyKind::all_to_all, spec.n_spins, clique,
                                MaskScheme::triangle, spec.subgraph_instances_per_config,
                                kSubgraphStream, report);
  const Labelled quad = generate(spec, TopologyKind::all_to_all, spec.n_spins, clique,
                                 MaskScheme::quadrilateral, spec.subgraph_instances_per_config,
                                 kSubgraphStream + 1, report);
  const Labelled full = generate(spec, TopologyKind::all_to_all, spec.n_spins, clique,
                                 std::nullopt, spec.train_instances, kTrainStream, report);
  for (const auto* set : {&tri, &quad, &full}) train_seeds.merge(seeds_of(*set));
  const LstmModel tri_model = train_model(spec, tri.data, "triangle", report);
  const LstmModel quad_model = train_model(spec, quad.data, "quadrilateral", report);
  const LstmModel full_model = train_model(spec, full.data, "full", report);

  const Labelled test = generate(spec, TopologyKind::all_to_all, spec.n_spins, clique,
                                 std::nullopt, spec.test_instances, kTestStream, report,
                                 &train_seeds);
  assert_disjoint(train_seeds, seeds_of(test), "train/test");
  const bool mono = spec.train.monotonize_predictions;
  const std::vector<std::pair<std::string, Predictor>> predictors = {
      {"triangle", model_predictor(tri_model)},
      {"quadrilateral", model_predictor(quad_model)},
      {"full", model_predictor(full_model)}};
  for (const auto& [name, p] : predictors)
    report.distributions.push_back(
        mre_distribution("mre_" + name, p, test.instances, test.data.records, clique, mono));
  const double tri_median = median(report.distributions[0].values);
  const double quad_median = median(report.distributions[1].values);
  report.summary["quadrilateral_le_triangle_median_mre"] = quad_median <= tri_median;
  anneal_comparison(spec, test, clique, predictors, report);
  return report;
}

Report experiment_symmetry(const ExperimentSpec& spec, std::optional<Predictor> predictor) {
  spec.validate();
  Report report;
  start_report(report, spec);
  const Layout layout{spec.topology, spec.n_spins};
  const bool ring = spec.topology == TopologyKind::nearest_neighbor_periodic;

  std::vector<std::pair<std::string, Predictor>> predictors;
  std::set<std::uint64_t> train_seeds;
  if (predictor) {
    predictors.emplace_back("full", *predictor);
  } else {
    const Labelled full = generate(spec, spec.topology, spec.n_spins, layout, std::nullopt,
                                   spec.train_instances, kTrainStream, report);
    train_seeds.merge(seeds_of(full));
    predictors.emplace_back("full", model_predictor(train_model(spec, full.data, "full", report)));
    if (spec.symmetry_subgraph_model) {
      const Labelled sub = generate(spec, spec.topology, spec.n_spins, layout,
                                    ring ? MaskScheme::ring_to_open_chain : MaskScheme::quadrilateral,
                                    spec.subgraph_instances_per_config, kSubgraphStream, report);
      train_seeds.merge(seeds_of(sub));
      predictors.emplace_back("subgraph",
                              model_predictor(train_model(spec, sub.data, "subgraph", report)));
    }
  }
  const Labelled base = generate(spec, spec.topology, spec.n_spins, layout, std::nullopt,
                                 spec.test_instances, kTestStream, report, &train_seeds);
  assert_disjoint(train_seeds, seeds_of(base), "train/test");

  // Configuration 0 of the ring case is the identity translation.
  std::vector<std::string> names;
  std::vector<std::function<IsingInstance(const IsingInstance&)>> transforms;
  if (ring) {
    for (int k = 0; k < spec.n_spins; ++k) {
      names.push_back("translation_" + std::to_string(k));
      transforms.push_back([k](const IsingInstance& i) { return cyclic_translate(i, k); });
    }
  } else {
    for (const auto& [a, b] : label_swap_pairs(spec.n_spins)) {
      names.push_back("swap_" + std::to_string(a) + "_" + std::to_string(b));
      transforms.push_back([a = a, b = b](const IsingInstance& i) { return swap_labels(i, a, b); });
    }
  }

  json medians = json::object();
  for (std::size_t c = 0; c < transforms.size(); ++c) {
    std::vector<IsingInstance> moved;
    for (const auto& inst : base.instances) moved.push_back(transforms[c](inst));
    const Labelled labelled = relabel(moved, layout, spec.schedule_options(), spec.train.execution);
    for (const auto& [model_name, p] : predictors) {
      Distribution d = mre_distribution("mre_" + model_name + "_" + names[c], p, labelled.instances,
                                        labelled.data.records, layout,
                                        spec.train.monotonize_predictions);
      medians[model_name][names[c]] = median(d.values);
      report.distributions.push_back(std::move(d));
    }
    for (std::size_t i = 0; i < std::min(spec.trace_instances, moved.size()); ++i) {
      Table t{"overlay_" + std::to_string(i) + "_" + names[c], {"t", "s_local_adiabatic"}, {}};
      std::vector<Schedule> predicted;
      for (const auto& [model_name, p] : predictors) {
        t.columns.push_back("s_predicted_" + model_name);
        predicted.push_back(predicted_schedule(p, moved[i], layout, labelled.data.records[i].t_f,
                                               spec.train.monotonize_predictions));
      }
      for (const auto& [model_name, p] : predictors) t.columns.push_back("ground_prob_" + model_name);
      const auto results = compare_schedules(moved[i], predicted, spec.step, spec.train.execution);
      const Schedule la = la_schedule(labelled.data.records[i], spec.epsilon);
      for (std::size_t k = 0; k < la.samples.size(); ++k) {
        std::vector<double> row = {la.time(k), la.samples[k]};
        for (const auto& s : predicted) row.push_back(s.samples[k]);
        for (const auto& r : results) row.push_back(r.ground_prob_trace[k]);
        t.rows.push_back(std::move(row));
      }
      report.tables.push_back(std::move(t));
    }
  }
  for (const auto& [model_name, per] : medians.items()) {
    double lo = INFINITY, hi = 0.0;
    for (const auto& [cfg, m] : per.items()) {
      lo = std::min(lo, m.get<double>());
      hi = std::max(hi, m.get<double>());
    }
    report.summary["median_mre_spread"][model_name] = hi == lo ? 1.0 : lo > 0.0 ? hi / lo : INFINITY;
  }
  report.summary["median_mre"] = medians;
  report.summary["configurations"] = names.size();
  return report;
}

Report run_experiment(const ExperimentSpec& spec) {
  switch (spec.kind) {
    case ExperimentKind::same_size: return experiment_same_size(spec);
    case ExperimentKind::extrapolate_chains: return experiment_extrapolate_chains(spec);
    case ExperimentKind::extrapolate_cliques: return experiment_extrapolate_cliques(spec);
    case ExperimentKind::symmetry: return experiment_symmetry(spec);
  }
  throw ConfigError("unknown experiment");
}

}  // namespace qasched

// qasched command line: dataset generation, training, prediction, simulation,
// evaluation and the experiment families.

#include "qasched/errors.hpp"
#include "qasched/harness.hpp"
#include "qasched/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

using namespace qasched;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<double> epsilon;
  std::optional<int> m_max;
  std::optional<int> grid;
  bool paper_scale = false;
  std::optional<std::string> out;
  std::optional<std::string> config;
};

// Defaults, then the config file, then --paper-scale, then explicit flags.
ExperimentSpec resolve_spec(const Globals& g, std::optional<ExperimentKind> kind) {
  ExperimentSpec spec;
  if (g.config) update_from_json(spec, read_json(*g.config));
  if (kind) spec.kind = *kind;
  if (g.paper_scale) apply_full_scale(spec);
  if (g.seed) spec.seed = *g.seed;
  if (g.epsilon) spec.epsilon = *g.epsilon;
  if (g.m_max) spec.m_max = *g.m_max;
  if (g.grid) spec.grid = *g.grid;
  if (g.out) spec.out = *g.out;
  return spec;
}

IsingInstance read_instance(const std::string& path) {
  return instance_from_json(read_json(path));
}

void print_json(const json& value) { std::cout << value.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Locally-adiabatic annealing schedules and their LSTM surrogate"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Globals g;
  app.add_option("--seed", g.seed, "Base seed of every random stream");
  app.add_option("--epsilon", g.epsilon, "Local-adiabatic tolerance (default 0.1)");
  app.add_option("--m-max", g.m_max, "Excited levels entering the schedule (default 4)");
  app.add_option("--grid", g.grid, "Spectral grid points on [0, 1] (default 500)");
  app.add_flag("--paper-scale", g.paper_scale, "Published instance counts and [500,500,500] network");
  app.add_option("--out", g.out, "Output directory (default out)");
  app.add_option("--config", g.config, "JSON file with ExperimentSpec fields")->check(CLI::ExistingFile);

  // generate
  auto* gen = app.add_subcommand("generate", "Sample instances and label them with local-adiabatic schedules");
  std::string gen_topology = "nearest-neighbor-open", gen_mask, gen_layout_topology;
  int gen_n = 4, gen_layout_n = 0;
  std::size_t gen_count = 100;
  std::uint64_t gen_stream = 1;
  gen->add_option("--topology", gen_topology, "nearest-neighbor-open, nearest-neighbor-periodic, next-nearest-neighbor, all-to-all");
  gen->add_option("-n,--spins", gen_n, "Number of spins");
  gen->add_option("--count", gen_count, "Instances (per masking configuration with --mask)");
  gen->add_option("--stream", gen_stream, "Seed stream (1 train, 2 test)");
  gen->add_option("--mask", gen_mask, "ring-to-open-chain, triangle or quadrilateral");
  gen->add_option("--layout-topology", gen_layout_topology, "Embed features into this topology's layout");
  gen->add_option("--layout-n", gen_layout_n, "Spin count of the embedding layout");

  // train
  auto* tr = app.add_subcommand("train", "Train the LSTM surrogate on a dataset");
  std::string tr_data;
  std::optional<int> tr_epochs, tr_batch;
  std::optional<double> tr_lr, tr_dropout, tr_val;
  std::optional<std::vector<int>> tr_widths;
  tr->add_option("--data", tr_data, "Dataset JSONL from generate")->required()->check(CLI::ExistingFile);
  tr->add_option("--epochs", tr_epochs);
  tr->add_option("--batch-size", tr_batch);
  tr->add_option("--lr", tr_lr, "Adam learning rate");
  tr->add_option("--dropout", tr_dropout);
  tr->add_option("--validation-fraction", tr_val);
  tr->add_option("--widths", tr_widths, "LSTM layer widths")->delimiter(',');

  // predict
  auto* pr = app.add_subcommand("predict", "Predict a schedule for one instance");
  std::string pr_model, pr_instance;
  std::optional<double> pr_tf;
  bool pr_monotonize = false;
  pr->add_option("--model", pr_model)->required()->check(CLI::ExistingFile);
  pr->add_option("--instance", pr_instance, "Instance JSON")->required()->check(CLI::ExistingFile);
  pr->add_option("--t-f", pr_tf, "Annealing time; default: the local-adiabatic t_f");
  pr->add_flag("--monotonize", pr_monotonize, "Project the prediction onto nondecreasing curves");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Anneal one instance under a schedule");
  std::string sim_instance, sim_schedule, sim_kind = "local-adiabatic";
  std::optional<double> sim_tf;
  sim->add_option("--instance", sim_instance, "Instance JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--schedule", sim_schedule, "Schedule JSON (overrides --kind)")->check(CLI::ExistingFile);
  sim->add_option("--kind", sim_kind, "linear or local-adiabatic");
  sim->add_option("--t-f", sim_tf, "Annealing time of a linear schedule; default: the local-adiabatic t_f");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "MSE and MRE of a model on a dataset");
  std::string ev_model, ev_data;
  ev->add_option("--model", ev_model)->required()->check(CLI::ExistingFile);
  ev->add_option("--data", ev_data)->required()->check(CLI::ExistingFile);

  // experiment
  auto* ex = app.add_subcommand("experiment", "Run an experiment family and emit its report");
  std::string ex_name;
  std::optional<int> ex_n;
  std::optional<std::string> ex_topology;
  ex->add_option("name", ex_name, "same_size, extrapolate_chains, extrapolate_cliques, symmetry")->required();
  ex->add_option("-n,--spins", ex_n, "Target spin count");
  ex->add_option("--topology", ex_topology, "Target topology");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    ExperimentSpec spec =
        resolve_spec(g, *ex ? std::optional(parse_experiment_kind(ex_name)) : std::nullopt);
    const fs::path out = spec.out;

    if (*gen) {
      GenerationRequest req;
      req.topology = parse_topology_kind(gen_topology);
      req.n_spins = gen_n;
      validate_topology(req.topology, req.n_spins);
      if (!gen_layout_topology.empty())
        req.layout = Layout{parse_topology_kind(gen_layout_topology), gen_layout_n ? gen_layout_n : gen_n};
      if (!gen_mask.empty()) req.mask = parse_mask_scheme(gen_mask);
      req.count = gen_count;
      req.seed = spec.seed;
      req.stream = gen_stream;
      req.schedule = spec.schedule_options();
      req.max_flagged_fraction = spec.max_flagged_fraction;
      GenerationLog log;
      const Dataset data = generate_dataset(req, &log);
      write_dataset(out / "dataset.jsonl", data);
      print_json({{"records", data.records.size()},
                  {"regenerated", log.events.size()},
                  {"file", (out / "dataset.jsonl").string()}});
      for (const auto& e : log.events) std::cerr << e << "\n";
    } else if (*tr) {
      TrainConfig cfg = spec.train;
      if (g.seed) cfg.seed = *g.seed;
      if (tr_epochs) cfg.epochs = *tr_epochs;
      if (tr_batch) cfg.batch_size = *tr_batch;
      if (tr_lr) cfg.learning_rate = *tr_lr;
      if (tr_dropout) cfg.dropout_rate = *tr_dropout;
      if (tr_val) cfg.validation_fraction = *tr_val;
      if (tr_widths) cfg.widths = *tr_widths;
      cfg.validate();
      const Dataset data = read_dataset(tr_data);
      const TrainResult result = train(data, cfg);
      save_model(result.model, out / "model.model");
      write_text(out / "history.csv", history_csv(result.history));
      const auto& last = result.history.back();
      const json summary = {{"config", to_json(cfg)},
                            {"records", data.records.size()},
                            {"train_records", result.split.train.size()},
                            {"validation_records", result.split.validation.size()},
                            {"final_train_mse", last.train_mse},
                            {"final_val_mse", last.val_mse},
                            {"final_train_mre", last.train_mre},
                            {"final_val_mre", last.val_mre}};
      write_json(out / "train_summary.json", summary);
      print_json(summary);
    } else if (*pr) {
      const LstmModel model = load_model(pr_model);
      if (!model.layout) throw UsageError("model carries no training layout");
      const IsingInstance instance = read_instance(pr_instance);
      const double t_f = pr_tf ? *pr_tf : local_adiabatic_schedule(instance, spec.schedule_options()).schedule.t_f;
      const Schedule s = predict(model, instance, *model.layout, t_f, pr_monotonize);
      write_json(out / "schedule_predicted.json", to_json(s));
      write_text(out / "schedule_predicted.csv", schedule_csv(s));
      print_json({{"t_f", s.t_f}, {"file", (out / "schedule_predicted.json").string()}});
    } else if (*sim) {
      const IsingInstance instance = read_instance(sim_instance);
      Schedule s;
      if (!sim_schedule.empty()) {
        s = schedule_from_json(read_json(sim_schedule));
      } else {
        const ScheduleKind kind = parse_schedule_kind(sim_kind);
        if (kind == ScheduleKind::predicted) throw ConfigError("use predict, then simulate --schedule");
        const auto la = local_adiabatic_schedule(instance, spec.schedule_options());
        s = kind == ScheduleKind::linear ? linear_schedule(sim_tf ? *sim_tf : la.schedule.t_f) : la.schedule;
      }
      const AnnealResult r = evolve(instance, s, spec.step);
      const json result = to_json(r, false);
      write_json(out / "simulation.json", {{"schedule", to_json(s)}, {"result", to_json(r, true)}});
      write_text(out / "trace.csv", result_csv(r));
      print_json(result);
    } else if (*ev) {
      const LstmModel model = load_model(ev_model);
      const Dataset data = read_dataset(ev_data);
      std::vector<std::size_t> all(data.records.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      const Evaluation e = evaluate(model, data, all);
      Report report;
      report.name = "evaluate";
      report.provenance = {{"version", kVersion}, {"model", ev_model}, {"data", ev_data}};
      report.distributions.push_back({"mre", e.per_record_mre, 0});
      report.summary = {{"records", all.size()}, {"mse", e.mse}, {"mean_mre", e.mre}};
      if (!all.empty()) report.summary["median_mre"] = median(e.per_record_mre);
      emit_report(report, out);
      print_json(report.summary);
    } else if (*ex) {
      if (ex_n) spec.n_spins = *ex_n;
      if (ex_topology) spec.topology = parse_topology_kind(*ex_topology);
      spec.validate();
      const Report report = run_experiment(spec);
      emit_report(report, out);
      print_json(report.summary);
      for (const auto& line : report.log) std::cerr << line << "\n";
    }
    return 0;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "unexpected failure: " << e.what() << "\n";
    return 1;
  }
}

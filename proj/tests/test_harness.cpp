#include "qasched/errors.hpp"
#include "qasched/harness.hpp"
#include "qasched/io.hpp"

#include <doctest.h>

#include <filesystem>
#include <set>

using namespace qasched;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "qasched_harness_tests" / name;
  fs::remove_all(dir);
  return dir;
}

ExperimentSpec tiny(ExperimentKind kind, TopologyKind topology, int n) {
  ExperimentSpec spec;
  spec.kind = kind;
  spec.topology = topology;
  spec.n_spins = n;
  spec.train_instances = 24;
  spec.subgraph_instances_per_config = 6;
  spec.test_instances = 4;
  spec.anneal_instances = 2;
  spec.trace_instances = 1;
  spec.train.epochs = 2;
  spec.train.widths = {8};
  spec.train.batch_size = 8;
  spec.seed = 3;
  return spec;
}

Predictor oracle(const ExperimentSpec& spec) {
  return [options = spec.schedule_options()](const IsingInstance& inst, const Layout&) {
    return local_adiabatic_schedule(inst, options).schedule.samples;
  };
}

std::map<std::string, std::string> directory_bytes(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file())
      files[fs::relative(entry.path(), dir).string()] = read_text(entry.path());
  return files;
}

const Distribution& find(const Report& r, const std::string& name) {
  for (const auto& d : r.distributions)
    if (d.name == name) return d;
  throw std::runtime_error("no distribution " + name);
}

}  // namespace

TEST_CASE("histogram and summaries") {
  const std::vector<double> values = {0.0, 0.1, 0.5, 0.5, 2.0, 1.99, 0.7};
  const auto h = histogram(values);
  REQUIRE(h.counts.size() == kHistogramBins);
  REQUIRE(h.edges.size() == kHistogramBins + 1);
  std::size_t total = 0;
  for (auto c : h.counts) total += c;
  CHECK(total == values.size());
  CHECK(h.edges.back() == 2.0);
  CHECK(h.counts.back() == 2);
  CHECK(h.counts.front() == 1);
  const auto zeros = histogram({0.0, 0.0});
  CHECK(zeros.counts[0] == 2);
  CHECK(zeros.edges.back() == 1.0);
  CHECK(histogram({}).edges.size() == kHistogramBins + 1);
  CHECK_THROWS_AS(histogram({-1.0}), UsageError);

  const auto s = summarize({4, 1, 3, 2});
  CHECK(s.median == 2.5);
  CHECK(s.q1 == 1.75);
  CHECK(s.q3 == 3.25);
  CHECK(s.min == 1);
  CHECK(s.max == 4);
  CHECK(s.mean == 2.5);
  CHECK(median({5}) == 5);
  CHECK_THROWS_AS(summarize({}), UsageError);
}

TEST_CASE("emit_report") {
  Report empty;
  empty.name = "empty";
  empty.distributions.push_back({"nothing", {}, 3});
  empty.tables.push_back({"table", {"a", "b"}, {}});
  const auto dir = scratch_dir("empty");
  emit_report(empty, dir);
  CHECK(read_text(dir / "hist_nothing.csv") == "bin_lo,bin_hi,count\n");
  CHECK(read_text(dir / "table.csv") == "a,b\n");
  const auto summary = read_json(dir / "summary.json");
  CHECK(summary["distributions"][0]["excluded"] == 3);
  CHECK(summary["distributions"][0]["processed"] == 3);
  CHECK(!summary["distributions"][0].contains("median"));

  Report full;
  full.name = "full";
  full.distributions.push_back({"d", {0.5, 1.0, 0.25}, 1});
  const auto dir2 = scratch_dir("full");
  emit_report(full, dir2);
  const std::string csv = read_text(dir2 / "hist_d.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == kHistogramBins + 1);
  const auto s2 = read_json(dir2 / "summary.json");
  CHECK(s2["distributions"][0]["median"] == 0.5);
  CHECK(s2["distributions"][0]["processed"] == 4);
}

TEST_CASE("experiment configuration") {
  ExperimentSpec spec;
  spec.kind = ExperimentKind::symmetry;
  spec.topology = TopologyKind::all_to_all;
  spec.train.widths = {3, 7};
  spec.step.initial_step = 0.01;
  ExperimentSpec back;
  update_from_json(back, nlohmann::json::parse(to_json(spec).dump()));
  CHECK(to_json(back) == to_json(spec));
  CHECK_THROWS_AS(update_from_json(back, {{"bogus", 1}}), ConfigError);
  CHECK_THROWS_AS(update_from_json(back, {{"train", {{"lr", 1}}}}), ConfigError);
  CHECK_THROWS_AS(update_from_json(back, {{"n_spins", "four"}}), ConfigError);
  CHECK_THROWS_AS(update_from_json(back, {{"name", "nope"}}), ConfigError);
  CHECK_THROWS_AS(parse_experiment_kind("nope"), ConfigError);
  CHECK(parse_experiment_kind("extrapolate_cliques") == ExperimentKind::extrapolate_cliques);

  ExperimentSpec chains;
  chains.kind = ExperimentKind::extrapolate_chains;
  CHECK_THROWS_AS(chains.validate(), ConfigError);
  chains.topology = TopologyKind::nearest_neighbor_periodic;
  CHECK_NOTHROW(chains.validate());
  chains.train_sizes = {4};
  CHECK_THROWS_AS(chains.validate(), ConfigError);

  ExperimentSpec full;
  full.kind = ExperimentKind::extrapolate_cliques;
  apply_full_scale(full);
  CHECK(full.train_instances == 50000);
  CHECK(full.test_instances == 1000);
  CHECK(full.subgraph_instances_per_config == 20000);
  CHECK(full.train.widths == std::vector<int>{500, 500, 500});
}

TEST_CASE("instance seeds and generation") {
  std::set<std::uint64_t> seeds;
  for (std::uint64_t stream : {1, 2, 16})
    for (std::uint64_t i = 0; i < 200; ++i)
      for (std::uint32_t a = 0; a < 3; ++a) seeds.insert(instance_seed(7, stream, i, a));
  CHECK(seeds.size() == 3 * 200 * 3);

  GenerationRequest req;
  req.topology = TopologyKind::nearest_neighbor_periodic;
  req.n_spins = 4;
  req.count = 3;
  req.seed = 5;
  req.mask = MaskScheme::ring_to_open_chain;
  const Dataset par = generate_dataset(req);
  req.execution = Execution::serial;
  const Dataset ser = generate_dataset(req);
  REQUIRE(par.records.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(par.records[i].target == ser.records[i].target);
    CHECK(par.records[i].meta == ser.records[i].meta);
    CHECK(par.records[i].meta["config"] == static_cast<int>(i / 3));
    const auto inst = instance_from_json(par.records[i].meta["instance"]);
    CHECK(inst.topology.masked_spins == std::set<int>{static_cast<int>(i / 3)});
  }

  req.mask.reset();
  req.max_flagged_fraction = 0.0;
  req.max_attempts = 2;
  req.topology = TopologyKind::nearest_neighbor_open;
  req.count = 40;
  GenerationLog log;
  try {
    const Dataset strict = generate_dataset(req, &log);
    for (const auto& r : strict.records) CHECK(r.meta["flagged_points"] == 0);
  } catch (const NumericalError&) {
    // Every attempt of some instance was flagged; the failure is reported.
  }
}

TEST_CASE("compare_schedules") {
  const auto inst = sample_instance(Topology{TopologyKind::nearest_neighbor_open, {}, {}}, 2, 1);
  CHECK_THROWS_AS(compare_schedules(inst, {linear_schedule(1.0), linear_schedule(2.0)}), UsageError);
  const auto r = compare_schedules(inst, {linear_schedule(2.0), linear_schedule(2.0)});
  REQUIRE(r.size() == 2);
  CHECK(r[0].fidelity == r[1].fidelity);
}

TEST_CASE("same_size with an oracle predictor") {
  auto spec = tiny(ExperimentKind::same_size, TopologyKind::nearest_neighbor_open, 3);
  const Report report = experiment_same_size(spec, oracle(spec));
  const auto& mre = find(report, "mre");
  CHECK(mre.values.size() == spec.test_instances);
  for (double v : mre.values) CHECK(v == 0.0);
  CHECK(find(report, "fidelity_predicted_model").values == find(report, "fidelity_local_adiabatic").values);
  CHECK(report.summary["annealing"]["instances"] == 2);
  CHECK(report.models.empty());
}

TEST_CASE("symmetry with permutation-invariant predictors") {
  auto ring = tiny(ExperimentKind::symmetry, TopologyKind::nearest_neighbor_periodic, 5);
  ring.test_instances = 3;
  const Report r = experiment_symmetry(ring, oracle(ring));
  CHECK(r.summary["configurations"] == 5);
  for (int k = 0; k < 5; ++k)
    for (double v : find(r, "mre_full_translation_" + std::to_string(k)).values) CHECK(v == 0.0);
  CHECK(r.summary["median_mre_spread"]["full"] == 1.0);

  // A prediction that ignores the labels entirely.
  Predictor constant = [](const IsingInstance&, const Layout&) {
    return linear_schedule(1.0).samples;
  };
  auto clique = tiny(ExperimentKind::symmetry, TopologyKind::all_to_all, 5);
  clique.test_instances = 3;
  clique.trace_instances = 0;
  const Report c = experiment_symmetry(clique, constant);
  CHECK(c.summary["configurations"] == 10);
  const auto& first = find(c, "mre_full_swap_0_1").values;
  for (const auto& [a, b] : label_swap_pairs(5)) {
    const auto& values =
        find(c, "mre_full_swap_" + std::to_string(a) + "_" + std::to_string(b)).values;
    REQUIRE(values.size() == first.size());
    for (std::size_t i = 0; i < values.size(); ++i)
      CHECK(std::abs(values[i] - first[i]) <= 1e-9 * (1 + first[i]));
  }
}

TEST_CASE("small experiments run end to end") {
  const auto same = tiny(ExperimentKind::same_size, TopologyKind::nearest_neighbor_open, 3);
  const Report a = run_experiment(same);
  CHECK(a.models.contains("model"));
  CHECK(find(a, "mre").values.size() == 4);

  auto chains = tiny(ExperimentKind::extrapolate_chains, TopologyKind::nearest_neighbor_periodic, 4);
  chains.train_sizes = {3, 2};
  const Report b = run_experiment(chains);
  CHECK(b.summary["training"]["subgraph"]["records"] == 4 * 6 + 6);
  CHECK(find(b, "mre_subgraph").values.size() == 4);
  CHECK(find(b, "mre_full").values.size() == 4);

  const auto cliques = tiny(ExperimentKind::extrapolate_cliques, TopologyKind::all_to_all, 4);
  const Report c = run_experiment(cliques);
  CHECK(c.summary["training"]["triangle"]["records"] == 4 * 6);
  CHECK(c.summary["training"]["quadrilateral"]["records"] == 6);
  CHECK(c.summary.contains("quadrilateral_le_triangle_median_mre"));

  auto sym = tiny(ExperimentKind::symmetry, TopologyKind::nearest_neighbor_periodic, 4);
  sym.symmetry_subgraph_model = true;
  const Report d = run_experiment(sym);
  CHECK(d.summary["median_mre"].contains("subgraph"));
  CHECK(d.summary["median_mre"]["full"].size() == 4);
}

TEST_CASE("reports are byte-identical across runs") {
  const auto spec = tiny(ExperimentKind::same_size, TopologyKind::nearest_neighbor_open, 3);
  const auto d1 = scratch_dir("run1");
  const auto d2 = scratch_dir("run2");
  emit_report(run_experiment(spec), d1);
  emit_report(run_experiment(spec), d2);
  const auto a = directory_bytes(d1);
  const auto b = directory_bytes(d2);
  CHECK(a.size() > 5);
  CHECK(a == b);
  CHECK(a.contains("summary.json"));
  CHECK(a.contains("hist_mre.csv"));
  CHECK(a.contains("model.model"));
}

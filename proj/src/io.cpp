#include "qasched/io.hpp"

#include "qasched/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace qasched {

using nlohmann::json;

namespace {

template <class T>
T field(const json& value, const char* key) {
  if (!value.is_object() || !value.contains(key))
    throw FormatError(std::string("missing field '") + key + "'");
  try {
    return value.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("field '") + key + "': " + e.what());
  }
}

json real_array(const std::vector<double>& values) {
  json out = json::array();
  for (double v : values) out.push_back(v);
  return out;
}

constexpr const char* kDatasetFormat = "qasched-dataset";
constexpr int kDatasetVersion = 1;

}  // namespace

std::string format_real(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create '" + path.parent_path().string() + "': " + ec.message());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw FormatError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& value) {
  write_text(path, value.dump(2) + "\n");
}

json to_json(const Layout& layout) {
  return {{"topology", std::string(to_string(layout.kind))}, {"n", layout.n_spins}};
}

Layout layout_from_json(const json& value) {
  Layout layout;
  try {
    layout.kind = parse_topology_kind(field<std::string>(value, "topology"));
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  layout.n_spins = field<int>(value, "n");
  validate_topology(layout.kind, layout.n_spins);
  return layout;
}

json to_json(const IsingInstance& instance) {
  json j = json::array();
  for (const auto& [edge, value] : instance.j) j.push_back({edge.first, edge.second, value});
  json out = {{"n", instance.n_spins},
              {"topology", std::string(to_string(instance.topology.kind))},
              {"h", real_array(instance.h)},
              {"j", j},
              {"seed", instance.seed}};
  if (!instance.topology.masked_edges.empty()) {
    json masked = json::array();
    for (const auto& e : instance.topology.masked_edges) masked.push_back({e.first, e.second});
    out["masked_edges"] = masked;
  }
  if (!instance.topology.masked_spins.empty())
    out["masked_spins"] = instance.topology.masked_spins;
  return out;
}

IsingInstance instance_from_json(const json& value) {
  const int n = field<int>(value, "n");
  TopologyKind kind;
  try {
    kind = parse_topology_kind(field<std::string>(value, "topology"));
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  validate_topology(kind, n);
  const auto edges = edges_of(kind, n);
  auto admitted = [&](Edge e) {
    if (e.first > e.second) std::swap(e.first, e.second);
    if (!std::binary_search(edges.begin(), edges.end(), e))
      throw ConfigError("edge (" + std::to_string(e.first) + "," + std::to_string(e.second) +
                        ") is not admitted by " + std::string(to_string(kind)));
    return e;
  };

  Topology topology{kind, {}, {}};
  if (value.contains("masked_edges"))
    for (const auto& e : value.at("masked_edges")) {
      if (!e.is_array() || e.size() != 2) throw FormatError("masked edge must be [i, j]");
      topology.masked_edges.insert(admitted({e[0].get<int>(), e[1].get<int>()}));
    }
  if (value.contains("masked_spins"))
    for (const auto& s : value.at("masked_spins")) {
      const int spin = s.get<int>();
      if (spin < 0 || spin >= n) throw ConfigError("masked spin out of range");
      topology.masked_spins.insert(spin);
    }

  const auto h = field<std::vector<double>>(value, "h");
  if (static_cast<int>(h.size()) != n)
    throw FormatError("h has " + std::to_string(h.size()) + " entries, expected " + std::to_string(n));
  std::map<Edge, double> couplings;
  const json& jarr = value.contains("j") ? value.at("j") : json::array();
  if (!jarr.is_array()) throw FormatError("j must be an array of [i, j, value]");
  for (const auto& entry : jarr) {
    if (!entry.is_array() || entry.size() != 3)
      throw FormatError("j entries must be [i, j, value]");
    const Edge e = admitted({entry[0].get<int>(), entry[1].get<int>()});
    couplings[e] = entry[2].get<double>();
  }
  for (int i = 0; i < n; ++i) {
    const bool masked = topology.masked_spins.contains(i);
    if (masked ? h[i] != 0.0 : !on_parameter_grid(h[i]))
      throw ConfigError("field h_" + std::to_string(i) + " is off the parameter grid");
  }
  for (const auto& [e, v] : couplings) {
    if (topology.masked_edges.contains(e)) {
      if (v != 0.0) throw ConfigError("masked edge carries a nonzero coupling");
    } else if (!on_parameter_grid(v)) {
      throw ConfigError("coupling off the parameter grid");
    }
  }

  IsingInstance instance = make_instance(kind, n, h, couplings);
  instance.topology = topology;
  for (const auto& e : topology.masked_edges) instance.j.erase(e);
  if (value.contains("seed")) instance.seed = value.at("seed").get<std::uint64_t>();
  return instance;
}

json to_json(const Schedule& schedule) {
  json out = {{"kind", std::string(to_string(schedule.kind))},
              {"t_f", schedule.t_f},
              {"epsilon", nullptr},
              {"s", real_array(schedule.samples)}};
  if (schedule.epsilon) out["epsilon"] = *schedule.epsilon;
  return out;
}

Schedule schedule_from_json(const json& value) {
  Schedule s;
  try {
    s.kind = parse_schedule_kind(field<std::string>(value, "kind"));
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  s.t_f = field<double>(value, "t_f");
  s.samples = field<std::vector<double>>(value, "s");
  if (value.contains("epsilon") && !value.at("epsilon").is_null())
    s.epsilon = value.at("epsilon").get<double>();
  s.validate();
  return s;
}

std::string schedule_csv(const Schedule& schedule) {
  std::string out = "t,s\n";
  for (std::size_t k = 0; k < schedule.samples.size(); ++k)
    out += format_real(schedule.time(k)) + "," + format_real(schedule.samples[k]) + "\n";
  return out;
}

json to_json(const SpectralProfile& profile) {
  json s = json::array(), gaps = json::array(), matel = json::array(), flags = json::array();
  for (const auto& p : profile.points) {
    s.push_back(p.s);
    json g = json::array(), m = json::array();
    for (int k = 0; k < profile.m_max; ++k) {
      if (k < static_cast<int>(p.gaps.size())) {
        g.push_back(p.gaps[k]);
        m.push_back(p.matrix_elements[k]);
      } else {
        g.push_back(nullptr);
        m.push_back(nullptr);
      }
    }
    gaps.push_back(g);
    matel.push_back(m);
    flags.push_back(p.flagged);
  }
  return {{"m_max", profile.m_max}, {"s", s}, {"gaps", gaps}, {"matel", matel}, {"flags", flags}};
}

json to_json(const AnnealResult& result, bool with_trace) {
  json out = {{"fidelity", result.fidelity},
              {"residual_energy", result.residual.excluded ? json(nullptr) : json(result.residual.value)},
              {"energy", result.residual.energy},
              {"ground_energy", result.residual.ground_energy},
              {"residual_excluded", result.residual.excluded},
              {"norm_drift", result.norm_drift},
              {"substeps_per_interval", result.report.substeps_per_interval},
              {"self_convergence", result.report.self_convergence}};
  if (with_trace)
    out["trace"] = {{"t", real_array(result.times)},
                    {"s", real_array(result.s_trace)},
                    {"ground_prob", real_array(result.ground_prob_trace)},
                    {"gap", real_array(result.gap_trace)},
                    {"energy", real_array(result.energy_trace)}};
  return out;
}

std::string result_csv(const AnnealResult& result) {
  std::string out = "t,s,ground_prob,gap\n";
  for (std::size_t k = 0; k < result.times.size(); ++k)
    out += format_real(result.times[k]) + "," + format_real(result.s_trace[k]) + "," +
           format_real(result.ground_prob_trace[k]) + "," + format_real(result.gap_trace[k]) + "\n";
  return out;
}

void write_dataset(const std::filesystem::path& path, const Dataset& dataset) {
  std::string text = json{{"format", kDatasetFormat},
                          {"version", kDatasetVersion},
                          {"layout", to_json(dataset.layout)},
                          {"records", dataset.records.size()},
                          {"points", kSchedulePoints}}
                         .dump() +
                     "\n";
  for (const auto& r : dataset.records)
    text += json{{"features", real_array(r.features)},
                 {"target", real_array(r.target)},
                 {"t_f", r.t_f},
                 {"meta", r.meta}}
                .dump() +
            "\n";
  write_text(path, text);
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw FormatError("'" + path.string() + "' is empty");
  Dataset dataset;
  std::size_t expected = 0;
  try {
    const json header = json::parse(line);
    if (field<std::string>(header, "format") != kDatasetFormat)
      throw FormatError("not a dataset file");
    if (field<int>(header, "version") != kDatasetVersion)
      throw FormatError("unsupported dataset version");
    dataset.layout = layout_from_json(header.at("layout"));
    expected = field<std::size_t>(header, "records");
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const json r = json::parse(line);
      Record rec;
      rec.features = field<std::vector<double>>(r, "features");
      rec.target = field<std::vector<double>>(r, "target");
      rec.t_f = field<double>(r, "t_f");
      rec.meta = r.contains("meta") ? r.at("meta") : json::object();
      dataset.records.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
  if (dataset.records.size() != expected)
    throw FormatError("'" + path.string() + "' holds " + std::to_string(dataset.records.size()) +
                      " records, header says " + std::to_string(expected));
  try {
    dataset.validate();
  } catch (const UsageError& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
  return dataset;
}

std::string history_csv(const std::vector<EpochMetrics>& history) {
  std::string out = "epoch,train_mse,val_mse,train_mre,val_mre\n";
  for (const auto& h : history)
    out += std::to_string(h.epoch) + "," + format_real(h.train_mse) + "," +
           format_real(h.val_mse) + "," + format_real(h.train_mre) + "," +
           format_real(h.val_mre) + "\n";
  return out;
}

}  // namespace qasched

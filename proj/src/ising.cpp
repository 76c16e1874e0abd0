#include "qasched/ising.hpp"

#include "qasched/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace qasched {

namespace {

int uniform_level(std::mt19937_64& engine) {
  // Rejection keeps the draw exactly uniform and independent of the standard
  // library's distribution implementation.
  constexpr std::uint64_t range = kLevelCount;
  constexpr std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t draw = engine();
  while (draw >= limit) draw = engine();
  return static_cast<int>(draw % range);
}

Edge ordered(int a, int b) { return a < b ? Edge{a, b} : Edge{b, a}; }

void combinations(int n, int k, int start, std::vector<int>& current,
                  std::vector<std::vector<int>>& out) {
  if (static_cast<int>(current.size()) == k) {
    out.push_back(current);
    return;
  }
  for (int i = start; i < n; ++i) {
    current.push_back(i);
    combinations(n, k, i + 1, current, out);
    current.pop_back();
  }
}

std::vector<std::vector<int>> all_subsets(int n, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> current;
  combinations(n, k, 0, current, out);
  return out;
}

/// Applies a spin relabeling old -> perm[old] to fields, couplings and masks.
IsingInstance relabel(const IsingInstance& in, const std::vector<int>& perm) {
  IsingInstance out = in;
  out.topology.masked_edges.clear();
  out.topology.masked_spins.clear();
  out.j.clear();
  for (int i = 0; i < in.n_spins; ++i) out.h[perm[i]] = in.h[i];
  for (const auto& [edge, value] : in.j)
    out.j[ordered(perm[edge.first], perm[edge.second])] = value;
  for (const auto& edge : in.topology.masked_edges)
    out.topology.masked_edges.insert(
        ordered(perm[edge.first], perm[edge.second]));
  for (int spin : in.topology.masked_spins)
    out.topology.masked_spins.insert(perm[spin]);
  return out;
}

}  // namespace

std::string_view to_string(TopologyKind kind) {
  switch (kind) {
    case TopologyKind::nearest_neighbor_open:
      return "nearest-neighbor-open";
    case TopologyKind::nearest_neighbor_periodic:
      return "nearest-neighbor-periodic";
    case TopologyKind::next_nearest_neighbor:
      return "next-nearest-neighbor";
    case TopologyKind::all_to_all:
      return "all-to-all";
  }
  return "unknown";
}

TopologyKind parse_topology_kind(std::string_view name) {
  for (auto kind : {TopologyKind::nearest_neighbor_open,
                    TopologyKind::nearest_neighbor_periodic,
                    TopologyKind::next_nearest_neighbor,
                    TopologyKind::all_to_all}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown topology '" + std::string(name) + "'");
}

void validate_topology(TopologyKind kind, int n_spins) {
  if (n_spins < 1) throw ConfigError("n_spins must be >= 1");
  if (n_spins > 24) throw ConfigError("n_spins > 24 exceeds the dense state budget");
  switch (kind) {
    case TopologyKind::nearest_neighbor_periodic:
      if (n_spins < 3)
        throw ConfigError("a periodic chain needs at least 3 spins");
      break;
    case TopologyKind::next_nearest_neighbor:
      if (n_spins < 2)
        throw ConfigError("a next-nearest-neighbor chain needs at least 2 spins");
      break;
    default:
      break;
  }
}

std::vector<Edge> edges_of(TopologyKind kind, int n_spins) {
  validate_topology(kind, n_spins);
  std::vector<Edge> edges;
  switch (kind) {
    case TopologyKind::nearest_neighbor_open:
      for (int i = 0; i + 1 < n_spins; ++i) edges.emplace_back(i, i + 1);
      break;
    case TopologyKind::nearest_neighbor_periodic:
      for (int i = 0; i + 1 < n_spins; ++i) edges.emplace_back(i, i + 1);
      edges.emplace_back(0, n_spins - 1);
      break;
    case TopologyKind::next_nearest_neighbor:
      for (int i = 0; i + 1 < n_spins; ++i) {
        edges.emplace_back(i, i + 1);
        if (i + 2 < n_spins) edges.emplace_back(i, i + 2);
      }
      break;
    case TopologyKind::all_to_all:
      for (int i = 0; i < n_spins; ++i)
        for (int k = i + 1; k < n_spins; ++k) edges.emplace_back(i, k);
      break;
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

std::size_t feature_count(TopologyKind kind, int n_spins) {
  return static_cast<std::size_t>(n_spins) + edges_of(kind, n_spins).size();
}

std::size_t Layout::feature_count() const {
  return qasched::feature_count(kind, n_spins);
}

std::vector<Edge> IsingInstance::admitted_edges() const {
  std::vector<Edge> edges;
  for (const auto& edge : edges_of(topology.kind, n_spins))
    if (!topology.masked_edges.contains(edge)) edges.push_back(edge);
  return edges;
}

double IsingInstance::coupling(int a, int b) const {
  auto it = j.find(ordered(a, b));
  return it == j.end() ? 0.0 : it->second;
}

double parameter_level(int index) {
  // (k - 5) / 5 is the correctly rounded double of each grid value.
  return static_cast<double>(index - 5) / 5.0;
}

bool on_parameter_grid(double value, double tol) {
  const double scaled = value * 5.0;
  const double nearest = std::round(scaled);
  return std::abs(nearest) <= 5.0 && std::abs(value - nearest / 5.0) <= tol;
}

IsingInstance sample_instance(const Topology& topology, int n_spins,
                              std::uint64_t seed) {
  const auto edges = edges_of(topology.kind, n_spins);
  for (const auto& edge : topology.masked_edges)
    if (!std::binary_search(edges.begin(), edges.end(), edge))
      throw ConfigError("masked edge is not part of the topology");
  for (int spin : topology.masked_spins)
    if (spin < 0 || spin >= n_spins)
      throw ConfigError("masked spin out of range");

  std::mt19937_64 engine(seed);
  IsingInstance instance;
  instance.n_spins = n_spins;
  instance.topology = topology;
  instance.seed = seed;
  instance.h.resize(n_spins);
  for (int i = 0; i < n_spins; ++i) {
    const double value = parameter_level(uniform_level(engine));
    instance.h[i] = topology.masked_spins.contains(i) ? 0.0 : value;
  }
  for (const auto& edge : edges) {
    const double value = parameter_level(uniform_level(engine));
    if (!topology.masked_edges.contains(edge)) instance.j[edge] = value;
  }
  return instance;
}

IsingInstance make_instance(TopologyKind kind, int n_spins,
                            std::vector<double> h,
                            const std::map<Edge, double>& j) {
  const auto edges = edges_of(kind, n_spins);
  if (static_cast<int>(h.size()) != n_spins)
    throw ConfigError("field vector length differs from n_spins");
  IsingInstance instance;
  instance.n_spins = n_spins;
  instance.topology.kind = kind;
  instance.h = std::move(h);
  for (const auto& edge : edges) instance.j[edge] = 0.0;
  for (const auto& [edge, value] : j) {
    const Edge key = ordered(edge.first, edge.second);
    if (!std::binary_search(edges.begin(), edges.end(), key))
      throw ConfigError("coupling on an edge the topology does not admit");
    instance.j[key] = value;
  }
  return instance;
}

Eigen::VectorXd problem_energies(const IsingInstance& instance) {
  const int n = instance.n_spins;
  const Eigen::Index dim = Eigen::Index{1} << n;
  Eigen::VectorXd energies(dim);
  for (Eigen::Index basis = 0; basis < dim; ++basis) {
    auto z = [basis](int spin) { return ((basis >> spin) & 1) ? -1.0 : 1.0; };
    double energy = 0.0;
    for (int i = 0; i < n; ++i) energy -= instance.h[i] * z(i);
    for (const auto& [edge, value] : instance.j)
      energy += value * (1.0 - z(edge.first) * z(edge.second)) / 2.0;
    energies[basis] = energy;
  }
  return energies;
}

HamiltonianMatrix build_problem_hamiltonian(const IsingInstance& instance) {
  return problem_energies(instance).asDiagonal();
}

HamiltonianMatrix build_driver_hamiltonian(int n_spins) {
  if (n_spins < 1) throw ConfigError("n_spins must be >= 1");
  const Eigen::Index dim = Eigen::Index{1} << n_spins;
  HamiltonianMatrix driver = HamiltonianMatrix::Zero(dim, dim);
  for (Eigen::Index basis = 0; basis < dim; ++basis)
    for (int spin = 0; spin < n_spins; ++spin)
      driver(basis ^ (Eigen::Index{1} << spin), basis) = -1.0;
  return driver;
}

void apply_driver(int n_spins, const Eigen::VectorXd& in, Eigen::VectorXd& out) {
  const Eigen::Index dim = in.size();
  out.setZero(dim);
  for (Eigen::Index basis = 0; basis < dim; ++basis)
    for (int spin = 0; spin < n_spins; ++spin)
      out[basis] -= in[basis ^ (Eigen::Index{1} << spin)];
}

std::vector<double> feature_vector(const IsingInstance& instance,
                                   const Layout& layout) {
  const auto layout_edges = edges_of(layout.kind, layout.n_spins);
  if (instance.n_spins > layout.n_spins)
    throw LayoutError("instance has more spins than the layout");
  std::vector<double> features(layout.n_spins + layout_edges.size(), 0.0);
  std::copy(instance.h.begin(), instance.h.end(), features.begin());
  for (const auto& [edge, value] : instance.j) {
    auto it = std::lower_bound(layout_edges.begin(), layout_edges.end(), edge);
    if (it == layout_edges.end() || *it != edge) {
      if (value == 0.0) continue;
      throw LayoutError("coupling (" + std::to_string(edge.first) + "," +
                        std::to_string(edge.second) +
                        ") has no slot in the layout");
    }
    features[layout.n_spins + (it - layout_edges.begin())] = value;
  }
  return features;
}

std::string_view to_string(MaskScheme scheme) {
  switch (scheme) {
    case MaskScheme::ring_to_open_chain:
      return "ring-to-open-chain";
    case MaskScheme::triangle:
      return "triangle";
    case MaskScheme::quadrilateral:
      return "quadrilateral";
  }
  return "unknown";
}

MaskScheme parse_mask_scheme(std::string_view name) {
  for (auto scheme : {MaskScheme::ring_to_open_chain, MaskScheme::triangle,
                      MaskScheme::quadrilateral})
    if (to_string(scheme) == name) return scheme;
  throw ConfigError("unknown mask scheme '" + std::string(name) + "'");
}

int mask_config_count(MaskScheme scheme, const IsingInstance& instance) {
  const int n = instance.n_spins;
  switch (scheme) {
    case MaskScheme::ring_to_open_chain:
      if (instance.topology.kind != TopologyKind::nearest_neighbor_periodic)
        throw ConfigError("ring-to-open-chain masking needs a periodic chain");
      return n;
    case MaskScheme::triangle:
    case MaskScheme::quadrilateral: {
      if (instance.topology.kind != TopologyKind::all_to_all)
        throw ConfigError("clique masking needs an all-to-all instance");
      const int k = scheme == MaskScheme::triangle ? 3 : 4;
      if (n < k) throw ConfigError("too few spins for the clique scheme");
      return static_cast<int>(all_subsets(n, k).size());
    }
  }
  return 0;
}

std::vector<int> mask_kept_spins(MaskScheme scheme, int n_spins,
                                 int config_index) {
  if (scheme == MaskScheme::ring_to_open_chain) {
    if (config_index < 0 || config_index >= n_spins)
      throw ConfigError("mask config index out of range");
    std::vector<int> kept;
    for (int i = 0; i < n_spins; ++i)
      if (i != config_index) kept.push_back(i);
    return kept;
  }
  const auto subsets =
      all_subsets(n_spins, scheme == MaskScheme::triangle ? 3 : 4);
  if (config_index < 0 || config_index >= static_cast<int>(subsets.size()))
    throw ConfigError("mask config index out of range");
  return subsets[config_index];
}

IsingInstance mask_subgraph(const IsingInstance& instance, int config_index,
                            MaskScheme scheme) {
  const int count = mask_config_count(scheme, instance);
  if (config_index < 0 || config_index >= count)
    throw ConfigError("mask config index " + std::to_string(config_index) +
                      " out of range [0, " + std::to_string(count) + ")");
  const auto kept = mask_kept_spins(scheme, instance.n_spins, config_index);
  std::vector<bool> keep(instance.n_spins, false);
  for (int spin : kept) keep[spin] = true;

  IsingInstance out = instance;
  for (int i = 0; i < instance.n_spins; ++i) {
    if (keep[i]) continue;
    out.h[i] = 0.0;
    out.topology.masked_spins.insert(i);
  }
  for (const auto& edge : edges_of(instance.topology.kind, instance.n_spins)) {
    if (keep[edge.first] && keep[edge.second]) continue;
    out.topology.masked_edges.insert(edge);
    out.j.erase(edge);
  }
  return out;
}

IsingInstance cyclic_translate(const IsingInstance& instance, int steps) {
  if (instance.topology.kind != TopologyKind::nearest_neighbor_periodic)
    throw ConfigError("cyclic translation needs a periodic chain");
  const int n = instance.n_spins;
  const int shift = ((steps % n) + n) % n;
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = (i + shift) % n;
  return relabel(instance, perm);
}

IsingInstance swap_labels(const IsingInstance& instance, int a, int b) {
  if (instance.topology.kind != TopologyKind::all_to_all)
    throw ConfigError("label swaps need an all-to-all instance");
  const int n = instance.n_spins;
  if (a == b || a < 0 || b < 0 || a >= n || b >= n)
    throw ConfigError("invalid spin pair for label swap");
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::swap(perm[a], perm[b]);
  return relabel(instance, perm);
}

std::vector<Edge> label_swap_pairs(int n_spins) {
  return edges_of(TopologyKind::all_to_all, n_spins);
}

IsingInstance drop_free_spins(const IsingInstance& instance) {
  const int n = instance.n_spins;
  std::vector<bool> coupled(n, false);
  for (const auto& [edge, value] : instance.j) {
    if (value == 0.0) continue;
    coupled[edge.first] = coupled[edge.second] = true;
  }
  std::vector<int> new_index(n, -1);
  int kept = 0;
  for (int i = 0; i < n; ++i)
    if (coupled[i] || instance.h[i] != 0.0) new_index[i] = kept++;
  if (kept == n) return instance;

  IsingInstance out;
  out.n_spins = kept;
  out.seed = instance.seed;
  out.topology.kind = TopologyKind::all_to_all;
  out.h.resize(kept);
  for (int i = 0; i < n; ++i)
    if (new_index[i] >= 0) out.h[new_index[i]] = instance.h[i];
  for (const auto& [edge, value] : instance.j) {
    const int a = new_index[edge.first];
    const int b = new_index[edge.second];
    if (a >= 0 && b >= 0) out.j[ordered(a, b)] = value;
  }
  if (kept > 0) {
    for (const auto& edge : edges_of(TopologyKind::all_to_all, kept))
      if (!out.j.contains(edge)) out.topology.masked_edges.insert(edge);
  }
  return out;
}

}  // namespace qasched

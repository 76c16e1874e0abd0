#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace qasched {

enum class TopologyKind {
  nearest_neighbor_open,
  nearest_neighbor_periodic,
  next_nearest_neighbor,
  all_to_all,
};

std::string_view to_string(TopologyKind kind);
TopologyKind parse_topology_kind(std::string_view name);

/// Spin pair (i, j) with i < j; spins are 0-based.
using Edge = std::pair<int, int>;

/// Coupling graph kind plus the entries forced to zero by sub-graph masking.
struct Topology {
  TopologyKind kind = TopologyKind::nearest_neighbor_open;
  std::set<Edge> masked_edges;
  std::set<int> masked_spins;

  friend bool operator==(const Topology&, const Topology&) = default;
};

/// Fixed-length feature layout that instances are embedded into.
struct Layout {
  TopologyKind kind = TopologyKind::nearest_neighbor_open;
  int n_spins = 1;

  std::size_t feature_count() const;
  friend bool operator==(const Layout&, const Layout&) = default;
};

/// Throws ConfigError if `kind` has no valid graph on `n_spins` spins.
void validate_topology(TopologyKind kind, int n_spins);

/// Edges of the unmasked graph, sorted lexicographically.
std::vector<Edge> edges_of(TopologyKind kind, int n_spins);

/// n_spins fields plus one coupling per edge.
std::size_t feature_count(TopologyKind kind, int n_spins);

/// Random Ising problem
///   H_I = -sum_i h_i z_i + sum_{i<j} J_ij (1 - z_i z_j) / 2
/// with h and J in units of J0.
struct IsingInstance {
  int n_spins = 0;
  Topology topology;
  std::vector<double> h;
  std::map<Edge, double> j;  // admitted (unmasked) edges only
  std::uint64_t seed = 0;

  Layout layout() const { return {topology.kind, n_spins}; }
  /// Edges admitted by the topology after masking, lexicographic.
  std::vector<Edge> admitted_edges() const;
  double coupling(int a, int b) const;

  friend bool operator==(const IsingInstance&, const IsingInstance&) = default;
};

/// The 11 allowed parameter values -1.0, -0.8, ..., 1.0.
inline constexpr int kLevelCount = 11;
double parameter_level(int index);
bool on_parameter_grid(double value, double tol = 1e-12);

/// Draws every field and coupling independently and uniformly from the
/// 11-value grid. Masked entries are drawn too and then zeroed, so a masked
/// sample equals the masked unmasked sample for the same seed.
IsingInstance sample_instance(const Topology& topology, int n_spins,
                              std::uint64_t seed);

/// Builds an instance from explicit values; validates grid membership is NOT
/// enforced so tests may use arbitrary reals.
IsingInstance make_instance(TopologyKind kind, int n_spins,
                            std::vector<double> h,
                            const std::map<Edge, double>& j);

/// Real symmetric Hamiltonian in the computational sigma^z basis. Spin i is
/// bit i of the basis index; bit value 0 means sigma^z = +1. Every matrix in
/// this project is real, so a real representation is exact.
using HamiltonianMatrix = Eigen::MatrixXd;

/// Diagonal of H_I, one classical energy per basis state.
Eigen::VectorXd problem_energies(const IsingInstance& instance);
HamiltonianMatrix build_problem_hamiltonian(const IsingInstance& instance);

/// H_x = -sum_i sigma^x_i.
HamiltonianMatrix build_driver_hamiltonian(int n_spins);

/// out = H_x * in without forming the matrix.
void apply_driver(int n_spins, const Eigen::VectorXd& in, Eigen::VectorXd& out);

/// Canonical feature vector: h_0..h_{n-1}, then couplings in lexicographic
/// edge order of `layout`. Throws LayoutError when the instance's spins or
/// admitted edges do not fit inside the layout.
std::vector<double> feature_vector(const IsingInstance& instance,
                                   const Layout& layout);

enum class MaskScheme { ring_to_open_chain, triangle, quadrilateral };

std::string_view to_string(MaskScheme scheme);
MaskScheme parse_mask_scheme(std::string_view name);

/// Number of masking configurations `scheme` admits on `instance`.
int mask_config_count(MaskScheme scheme, const IsingInstance& instance);

/// Spins kept by configuration `config_index` (the rest are isolated).
std::vector<int> mask_kept_spins(MaskScheme scheme, int n_spins,
                                 int config_index);

/// Zeroes every coupling touching an isolated spin and the isolated spins'
/// fields. ring_to_open_chain isolates spin `config_index` of a ring;
/// triangle/quadrilateral keep the config_index-th 3-/4-subset
/// (lexicographic) of a complete graph.
IsingInstance mask_subgraph(const IsingInstance& instance, int config_index,
                            MaskScheme scheme);

/// Moves spin i to position (i + steps) mod n on a periodic chain.
IsingInstance cyclic_translate(const IsingInstance& instance, int steps);

/// Exchanges the labels of spins a and b on a complete graph.
IsingInstance swap_labels(const IsingInstance& instance, int a, int b);

/// All (a, b), a < b, label swaps of an n-spin complete graph.
std::vector<Edge> label_swap_pairs(int n_spins);

/// Removes spins with zero field and no nonzero coupling and relabels the
/// rest in order. Such spins stay in |+> for the whole anneal and only add a
/// closing 2(1-s) gap with vanishing transition matrix element.
IsingInstance drop_free_spins(const IsingInstance& instance);

}  // namespace qasched

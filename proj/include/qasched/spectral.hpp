#pragma once

#include "qasched/ising.hpp"
#include "qasched/parallel.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace qasched {

/// Two consecutive sorted eigenvalues are degenerate when their difference is
/// at most max(absolute, relative * max(1, |E|)).
struct DegeneracyTolerance {
  double relative = 1e-8;
  double absolute = 1e-10;

  double threshold(double energy) const;
};

struct EigenSystem {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // orthonormal columns
};

/// Dense symmetric eigendecomposition. Throws NumericalError when the input
/// is not symmetric to 1e-12 relative.
EigenSystem eigendecompose(const HamiltonianMatrix& hamiltonian);

/// Half-open index range [begin, end) of one degenerate cluster.
struct LevelCluster {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
};

/// Groups sorted eigenvalues into degenerate clusters in energy order.
std::vector<LevelCluster> distinct_levels(std::span<const double> sorted,
                                          const DegeneracyTolerance& tol = {});
std::vector<LevelCluster> distinct_levels(std::span<const double> sorted,
                                          double relative_tolerance);

/// H(s) = (1 - s) H_x + s H_I.
HamiltonianMatrix annealing_hamiltonian(const HamiltonianMatrix& driver,
                                        const Eigen::VectorXd& problem,
                                        double s);

/// Low-energy spectral data of H(s) at one grid point.
struct SpectralPoint {
  double s = 0.0;
  std::vector<double> eigenvalues;
  std::vector<int> cluster_sizes;
  /// Number of lowest states treated as the ground level.
  int ground_size = 1;
  /// g_{0,m} for m = 1..available (available <= m_max).
  std::vector<double> gaps;
  /// Largest |<m| H_I - H_x |0>| over unit states of both levels.
  std::vector<double> matrix_elements;
  /// Fewer than m_max distinct excited levels exist here.
  bool flagged = false;
};

struct SpectralProfile {
  int m_max = 4;
  DegeneracyTolerance tolerance;
  int ground_band = 1;
  std::vector<SpectralPoint> points;

  std::size_t flagged_count() const;
};

struct ProfileOptions {
  int m_max = 4;
  int n_grid = 500;
  DegeneracyTolerance tolerance;
  /// Treat the levels that merge into a degenerate H_I ground manifold as
  /// part of the ground level for every s. Off: plain clustering only.
  bool ground_manifold_band = true;
  Execution execution = Execution::parallel;
};

/// Samples H(s) on n_grid equidistant points of [0, 1] (endpoints included).
SpectralProfile gap_profile(const IsingInstance& instance,
                            const ProfileOptions& options = {});

/// Spectral data at a single s; shared by gap_profile and the dynamics
/// diagnostics. The ground level is the lowest max(ground_band, c0) states,
/// c0 being the size of the lowest degenerate cluster; excited levels are
/// the distinct clusters above it.
SpectralPoint spectral_point(const HamiltonianMatrix& driver,
                             const Eigen::VectorXd& problem, double s,
                             int m_max, const DegeneracyTolerance& tol,
                             int ground_band = 1);

/// Degeneracy of the lowest classical energy.
int ground_degeneracy(const Eigen::VectorXd& problem,
                      const DegeneracyTolerance& tol = {});

/// max over grid points and stored m of the matrix elements.
double numerator_bound(const SpectralProfile& profile);

}  // namespace qasched

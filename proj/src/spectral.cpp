#include "qasched/spectral.hpp"

#include "qasched/errors.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace qasched {

double DegeneracyTolerance::threshold(double energy) const {
  return std::max(absolute, relative * std::max(1.0, std::abs(energy)));
}

EigenSystem eigendecompose(const HamiltonianMatrix& hamiltonian) {
  if (hamiltonian.rows() != hamiltonian.cols() || hamiltonian.rows() == 0)
    throw NumericalError("eigendecompose needs a non-empty square matrix");
  const double scale = std::max(1.0, hamiltonian.cwiseAbs().maxCoeff());
  const double asymmetry =
      (hamiltonian - hamiltonian.transpose()).cwiseAbs().maxCoeff();
  if (asymmetry > 1e-12 * scale)
    throw NumericalError("matrix is not Hermitian (asymmetry " +
                         std::to_string(asymmetry) + ")");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(hamiltonian);
  if (solver.info() != Eigen::Success)
    throw NumericalError("symmetric eigensolver did not converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

std::vector<LevelCluster> distinct_levels(std::span<const double> sorted,
                                          const DegeneracyTolerance& tol) {
  std::vector<LevelCluster> clusters;
  const int n = static_cast<int>(sorted.size());
  int begin = 0;
  for (int k = 1; k <= n; ++k) {
    if (k < n) {
      const double energy = std::max(std::abs(sorted[k - 1]), std::abs(sorted[k]));
      if (sorted[k] - sorted[k - 1] <= tol.threshold(energy)) continue;
    }
    clusters.push_back({begin, k});
    begin = k;
  }
  return clusters;
}

std::vector<LevelCluster> distinct_levels(std::span<const double> sorted,
                                          double relative_tolerance) {
  return distinct_levels(sorted, DegeneracyTolerance{relative_tolerance, 0.0});
}

HamiltonianMatrix annealing_hamiltonian(const HamiltonianMatrix& driver,
                                        const Eigen::VectorXd& problem,
                                        double s) {
  HamiltonianMatrix h = (1.0 - s) * driver;
  h.diagonal() += s * problem;
  return h;
}

SpectralPoint spectral_point(const HamiltonianMatrix& driver,
                             const Eigen::VectorXd& problem, double s,
                             int m_max, const DegeneracyTolerance& tol,
                             int ground_band) {
  const EigenSystem eig = eigendecompose(annealing_hamiltonian(driver, problem, s));
  SpectralPoint point;
  point.s = s;
  point.eigenvalues.assign(eig.values.data(),
                           eig.values.data() + eig.values.size());
  const auto all_clusters = distinct_levels(point.eigenvalues, tol);
  for (const auto& c : all_clusters) point.cluster_sizes.push_back(c.size());

  const int dim = static_cast<int>(eig.values.size());
  const int ground_size =
      std::min(dim, std::max(ground_band, all_clusters.front().size()));
  point.ground_size = ground_size;
  const std::span<const double> upper(point.eigenvalues.data() + ground_size,
                                      point.eigenvalues.size() - ground_size);
  std::vector<LevelCluster> excited = distinct_levels(upper, tol);
  for (auto& c : excited) {
    c.begin += ground_size;
    c.end += ground_size;
  }

  const int available = std::min<int>(m_max, static_cast<int>(excited.size()));
  point.flagged = available < m_max;

  // dH/ds = H_I - H_x applied to the ground level.
  const Eigen::MatrixXd ground_vectors = eig.vectors.leftCols(ground_size);
  const Eigen::MatrixXd derivative_ground =
      problem.asDiagonal() * ground_vectors - driver * ground_vectors;

  for (int m = 0; m < available; ++m) {
    const auto& level = excited[m];
    point.gaps.push_back(eig.values[level.begin] - eig.values[0]);
    const Eigen::MatrixXd elements =
        eig.vectors.middleCols(level.begin, level.size()).transpose() *
        derivative_ground;
    // Operator norm of the block: the largest |<m|dH/ds|0>| over unit states of
    // both levels, independent of the basis the solver picks inside them.
    point.matrix_elements.push_back(
        elements.size() == 1 ? std::abs(elements(0, 0))
                             : Eigen::JacobiSVD<Eigen::MatrixXd>(elements).singularValues()(0));
  }
  return point;
}

int ground_degeneracy(const Eigen::VectorXd& problem,
                      const DegeneracyTolerance& tol) {
  std::vector<double> sorted(problem.data(), problem.data() + problem.size());
  std::sort(sorted.begin(), sorted.end());
  return distinct_levels(sorted, tol).front().size();
}

std::size_t SpectralProfile::flagged_count() const {
  return static_cast<std::size_t>(std::count_if(
      points.begin(), points.end(), [](const auto& p) { return p.flagged; }));
}

SpectralProfile gap_profile(const IsingInstance& instance,
                            const ProfileOptions& options) {
  if (options.m_max < 1) throw ConfigError("m_max must be >= 1");
  if (options.n_grid < 2) throw ConfigError("n_grid must be >= 2");
  const HamiltonianMatrix driver = build_driver_hamiltonian(instance.n_spins);
  const Eigen::VectorXd problem = problem_energies(instance);

  SpectralProfile profile;
  profile.m_max = options.m_max;
  profile.tolerance = options.tolerance;
  profile.ground_band =
      options.ground_manifold_band ? ground_degeneracy(problem, options.tolerance) : 1;
  profile.points.resize(options.n_grid);
  const int last = options.n_grid - 1;
  auto grid_s = [last](int k) {
    return k == last ? 1.0 : static_cast<double>(k) / last;
  };

  if (options.execution == Execution::serial) {
    for (int k = 0; k < options.n_grid; ++k)
      profile.points[k] = spectral_point(driver, problem, grid_s(k),
                                         options.m_max, options.tolerance,
                                         profile.ground_band);
  } else {
    // Each grid point is written to its own slot, so the assembled profile
    // does not depend on the schedule or thread count.
#pragma omp parallel for schedule(dynamic)
    for (int k = 0; k < options.n_grid; ++k)
      profile.points[k] = spectral_point(driver, problem, grid_s(k),
                                         options.m_max, options.tolerance,
                                         profile.ground_band);
  }
  return profile;
}

double numerator_bound(const SpectralProfile& profile) {
  double bound = 0.0;
  bool any = false;
  for (const auto& point : profile.points) {
    for (double element : point.matrix_elements) {
      bound = std::max(bound, element);
      any = true;
    }
  }
  if (!any) throw UsageError("numerator_bound needs a populated profile");
  return bound;
}

}  // namespace qasched

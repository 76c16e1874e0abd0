#pragma once

#include "qasched/ising.hpp"
#include "qasched/parallel.hpp"
#include "qasched/schedule.hpp"
#include "qasched/spectral.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace qasched {

using StateVector = Eigen::VectorXcd;

struct StepControl {
  /// Largest substep (1/J0) of the first trial; substeps always tile each
  /// schedule interval evenly.
  double initial_step = 0.02;
  /// Halving the step may change no reported probability by more than this.
  double probability_tolerance = 1e-6;
  double norm_tolerance = 1e-6;
  int max_refinements = 12;
};

struct SolverReport {
  long long substeps_per_interval = 0;
  long long total_substeps = 0;
  int refinements = 0;
  /// max |p_h - p_{h/2}| over all reported probabilities of the accepted run.
  double self_convergence = 0.0;
  double step = 0.0;
};

struct ResidualEnergy {
  double value = 0.0;  // |(<psi|H_I|psi> - E_0) / E_0|
  double energy = 0.0;
  double ground_energy = 0.0;
  /// |E_0| below the 1e-9 floor; value is meaningless and left at 0.
  bool excluded = false;
};

struct AnnealResult {
  StateVector final_state;
  std::vector<double> times;
  std::vector<double> s_trace;
  std::vector<double> ground_prob_trace;
  std::vector<double> gap_trace;
  std::vector<double> energy_trace;  // <psi|H(s(t_k))|psi>
  double fidelity = 0.0;             // final ground-manifold probability
  ResidualEnergy residual;
  double norm_drift = 0.0;
  SolverReport report;
};

/// Integrates i d psi/dt = H(s(t)) psi from the uniform superposition with a
/// 4th-order exactly unitary splitting, refining the step until the
/// step-halving contract holds. Throws NumericalError when it cannot.
AnnealResult evolve(const IsingInstance& instance, const Schedule& schedule,
                    const StepControl& control = {});

/// Propagates with a fixed number of substeps per schedule interval and
/// returns the state at every schedule time (index 0 is the initial state).
std::vector<StateVector> propagate_fixed(const IsingInstance& instance,
                                         const Schedule& schedule,
                                         long long substeps_per_interval);

/// Squared norm of the projection onto the lowest degenerate cluster of H.
double ground_manifold_probability(const StateVector& state,
                                   const HamiltonianMatrix& hamiltonian,
                                   const DegeneracyTolerance& tol = {});

inline constexpr double kResidualEnergyFloor = 1e-9;

ResidualEnergy residual_energy(const StateVector& state,
                               const IsingInstance& instance);

/// Final ground-manifold probability >= 1 - epsilon^2.
bool fidelity_bound_check(const AnnealResult& result, double epsilon);

struct AnnealJob {
  IsingInstance instance;
  Schedule schedule;
};

/// Runs independent jobs; results are stored in job order.
std::vector<AnnealResult> evolve_batch(const std::vector<AnnealJob>& jobs,
                                       const StepControl& control = {},
                                       Execution execution = Execution::parallel);

}  // namespace qasched

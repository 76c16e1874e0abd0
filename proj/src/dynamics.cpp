#include "qasched/dynamics.hpp"

#include "qasched/errors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <exception>

namespace qasched {

namespace {

using cd = std::complex<double>;

// Yoshida triple-jump weights for a 4th-order symmetric composition.
const double kCubeRoot2 = std::cbrt(2.0);
const double kOuterWeight = 1.0 / (2.0 - kCubeRoot2);
const double kInnerWeight = -kCubeRoot2 / (2.0 - kCubeRoot2);

/// psi <- exp(-i theta diag(E)) psi
void apply_problem_phase(StateVector& psi, const Eigen::VectorXd& energies,
                         double theta) {
  for (Eigen::Index b = 0; b < psi.size(); ++b) {
    const double phase = -theta * energies[b];
    psi[b] *= cd(std::cos(phase), std::sin(phase));
  }
}

/// psi <- exp(-i alpha H_x) psi = prod_i (cos(alpha) + i sin(alpha) sigma^x_i)
void apply_driver_rotation(StateVector& psi, int n_spins, double alpha) {
  const double c = std::cos(alpha);
  const cd is(0.0, std::sin(alpha));
  const Eigen::Index dim = psi.size();
  for (int spin = 0; spin < n_spins; ++spin) {
    const Eigen::Index bit = Eigen::Index{1} << spin;
    for (Eigen::Index b = 0; b < dim; ++b) {
      if (b & bit) continue;
      const cd up = psi[b];
      const cd down = psi[b | bit];
      psi[b] = c * up + is * down;
      psi[b | bit] = c * down + is * up;
    }
  }
}

/// One 4th-order step over [t0, t0 + h]. `pending` carries the trailing
/// problem half-phase so adjacent diagonal factors merge.
void composed_step(StateVector& psi, const IsingInstance& instance,
                   const Eigen::VectorXd& energies, const Schedule& schedule,
                   double t0, double h, double& pending) {
  double t = t0;
  for (double weight : {kOuterWeight, kInnerWeight, kOuterWeight}) {
    const double dt = weight * h;
    const double s = schedule.s_at(t + 0.5 * dt);
    const double half_problem = 0.5 * dt * s;
    apply_problem_phase(psi, energies, pending + half_problem);
    apply_driver_rotation(psi, instance.n_spins, dt * (1.0 - s));
    pending = half_problem;
    t += dt;
  }
}

StateVector uniform_superposition(int n_spins) {
  const Eigen::Index dim = Eigen::Index{1} << n_spins;
  return StateVector::Constant(dim, cd(1.0 / std::sqrt(static_cast<double>(dim)), 0.0));
}

/// Ground-level eigenvectors and first gap at one schedule sample.
struct SampleDiagnostics {
  Eigen::MatrixXd ground_vectors;
  double gap = 0.0;
};

SampleDiagnostics diagnose(const HamiltonianMatrix& driver,
                           const Eigen::VectorXd& energies, double s,
                           int ground_band) {
  const EigenSystem eig = eigendecompose(annealing_hamiltonian(driver, energies, s));
  const std::vector<double> values(eig.values.data(), eig.values.data() + eig.values.size());
  const auto clusters = distinct_levels(values, DegeneracyTolerance{});
  const int dim = static_cast<int>(values.size());
  const int ground_size = std::min(dim, std::max(ground_band, clusters.front().size()));
  SampleDiagnostics d;
  d.ground_vectors = eig.vectors.leftCols(ground_size);
  d.gap = ground_size < dim ? values[ground_size] - values[0] : 0.0;
  return d;
}

double projected_probability(const StateVector& psi, const Eigen::MatrixXd& vectors) {
  double p = 0.0;
  for (Eigen::Index c = 0; c < vectors.cols(); ++c)
    p += std::norm(vectors.col(c).cast<cd>().dot(psi));
  return p;
}

}  // namespace

std::vector<StateVector> propagate_fixed(const IsingInstance& instance,
                                         const Schedule& schedule,
                                         long long substeps_per_interval) {
  if (substeps_per_interval < 1) throw UsageError("need >= 1 substep per interval");
  if (schedule.samples.size() < 2 || !(schedule.t_f > 0.0))
    throw UsageError("schedule needs >= 2 samples and t_f > 0");
  const Eigen::VectorXd energies = problem_energies(instance);
  const std::size_t intervals = schedule.samples.size() - 1;

  std::vector<StateVector> states;
  states.reserve(intervals + 1);
  StateVector psi = uniform_superposition(instance.n_spins);
  states.push_back(psi);
  double pending = 0.0;
  for (std::size_t k = 0; k < intervals; ++k) {
    const double t0 = schedule.time(k);
    const double h = (schedule.time(k + 1) - t0) / static_cast<double>(substeps_per_interval);
    for (long long step = 0; step < substeps_per_interval; ++step)
      composed_step(psi, instance, energies, schedule, t0 + static_cast<double>(step) * h, h, pending);
    // Flush the trailing half-phase so the stored state is at t_{k+1}.
    apply_problem_phase(psi, energies, pending);
    pending = 0.0;
    states.push_back(psi);
  }
  return states;
}

AnnealResult evolve(const IsingInstance& instance, const Schedule& schedule,
                    const StepControl& control) {
  if (schedule.samples.size() < 2) throw UsageError("schedule needs >= 2 samples");
  for (double s : schedule.samples)
    if (!(s >= 0.0 && s <= 1.0)) throw UsageError("schedule sample outside [0, 1]");
  if (!(control.initial_step > 0.0)) throw UsageError("initial_step must be positive");

  const HamiltonianMatrix driver = build_driver_hamiltonian(instance.n_spins);
  const Eigen::VectorXd energies = problem_energies(instance);
  const int band = ground_degeneracy(energies);
  const std::size_t n_samples = schedule.samples.size();

  std::vector<SampleDiagnostics> diagnostics(n_samples);
  for (std::size_t k = 0; k < n_samples; ++k)
    diagnostics[k] = diagnose(driver, energies, schedule.samples[k], band);

  auto probabilities = [&](const std::vector<StateVector>& states) {
    std::vector<double> p(n_samples);
    for (std::size_t k = 0; k < n_samples; ++k)
      p[k] = projected_probability(states[k], diagnostics[k].ground_vectors);
    return p;
  };

  const double interval = schedule.t_f / static_cast<double>(n_samples - 1);
  long long substeps = std::max<long long>(
      1, static_cast<long long>(std::ceil(interval / control.initial_step)));
  std::vector<StateVector> coarse = propagate_fixed(instance, schedule, substeps);
  std::vector<double> coarse_p = probabilities(coarse);

  AnnealResult result;
  for (int refinement = 0;; ++refinement) {
    std::vector<StateVector> fine = propagate_fixed(instance, schedule, 2 * substeps);
    std::vector<double> fine_p = probabilities(fine);
    double diff = 0.0;
    for (std::size_t k = 0; k < n_samples; ++k)
      diff = std::max(diff, std::abs(fine_p[k] - coarse_p[k]));
    if (diff <= control.probability_tolerance) {
      result.report.refinements = refinement;
      result.report.self_convergence = diff;
      result.report.substeps_per_interval = 2 * substeps;
      result.report.total_substeps = 2 * substeps * static_cast<long long>(n_samples - 1);
      result.report.step = interval / static_cast<double>(2 * substeps);
      result.final_state = fine.back();
      result.ground_prob_trace = std::move(fine_p);
      result.energy_trace.resize(n_samples);
      for (std::size_t k = 0; k < n_samples; ++k) {
        const double s = schedule.samples[k];
        const StateVector& psi = fine[k];
        StateVector driven = StateVector::Zero(psi.size());
        for (int spin = 0; spin < instance.n_spins; ++spin) {
          const Eigen::Index bit = Eigen::Index{1} << spin;
          for (Eigen::Index b = 0; b < psi.size(); ++b) driven[b] -= psi[b ^ bit];
        }
        const double driver_energy = psi.dot(driven).real();
        const double problem_energy = psi.cwiseAbs2().dot(energies);
        result.energy_trace[k] = (1.0 - s) * driver_energy + s * problem_energy;
      }
      break;
    }
    if (refinement >= control.max_refinements)
      throw NumericalError("step halving did not converge (last change " +
                           std::to_string(diff) + " at " +
                           std::to_string(2 * substeps) + " substeps/interval)");
    substeps *= 2;
    coarse_p = std::move(fine_p);
  }

  result.times.resize(n_samples);
  result.gap_trace.resize(n_samples);
  for (std::size_t k = 0; k < n_samples; ++k) {
    result.times[k] = schedule.time(k);
    result.gap_trace[k] = diagnostics[k].gap;
  }
  result.s_trace = schedule.samples;
  result.fidelity = result.ground_prob_trace.back();
  result.norm_drift = std::abs(result.final_state.norm() - 1.0);
  if (result.norm_drift > control.norm_tolerance)
    throw NumericalError("norm drift " + std::to_string(result.norm_drift) +
                         " exceeds tolerance");
  result.residual = residual_energy(result.final_state, instance);
  return result;
}

double ground_manifold_probability(const StateVector& state,
                                   const HamiltonianMatrix& hamiltonian,
                                   const DegeneracyTolerance& tol) {
  const EigenSystem eig = eigendecompose(hamiltonian);
  const std::vector<double> values(eig.values.data(), eig.values.data() + eig.values.size());
  const auto ground = distinct_levels(values, tol).front();
  return projected_probability(state, eig.vectors.middleCols(ground.begin, ground.size()));
}

ResidualEnergy residual_energy(const StateVector& state,
                               const IsingInstance& instance) {
  const Eigen::VectorXd energies = problem_energies(instance);
  if (state.size() != energies.size())
    throw UsageError("state dimension does not match the instance");
  ResidualEnergy r;
  r.ground_energy = energies.minCoeff();
  r.energy = state.cwiseAbs2().dot(energies) / state.squaredNorm();
  if (std::abs(r.ground_energy) < kResidualEnergyFloor) {
    r.excluded = true;
    return r;
  }
  r.value = std::abs((r.energy - r.ground_energy) / r.ground_energy);
  return r;
}

bool fidelity_bound_check(const AnnealResult& result, double epsilon) {
  return result.fidelity >= 1.0 - epsilon * epsilon;
}

std::vector<AnnealResult> evolve_batch(const std::vector<AnnealJob>& jobs,
                                       const StepControl& control,
                                       Execution execution) {
  std::vector<AnnealResult> results(jobs.size());
  if (execution == Execution::serial) {
    for (std::size_t i = 0; i < jobs.size(); ++i)
      results[i] = evolve(jobs[i].instance, jobs[i].schedule, control);
    return results;
  }
  std::vector<std::exception_ptr> errors(jobs.size());
  const long long n = static_cast<long long>(jobs.size());
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < n; ++i) {
    try {
      results[i] = evolve(jobs[i].instance, jobs[i].schedule, control);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (auto& error : errors)
    if (error) std::rethrow_exception(error);
  return results;
}

}  // namespace qasched

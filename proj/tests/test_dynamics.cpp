#include "qasched/dynamics.hpp"
#include "qasched/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

using namespace qasched;

namespace {

using cd = std::complex<double>;

IsingInstance single_qubit() { return make_instance(TopologyKind::nearest_neighbor_open, 1, {1.0}, {}); }

// Classical RK4 on the two-level system with the same piecewise-linear s(t).
std::vector<double> rk4_ground_trace(const Schedule& sched, int substeps) {
  auto hamiltonian = [](double s) {
    Eigen::Matrix2cd h;
    h << -s, -(1 - s), -(1 - s), s;
    return h;
  };
  auto rhs = [&](double t, const Eigen::Vector2cd& psi) -> Eigen::Vector2cd {
    return cd(0, -1) * (hamiltonian(sched.s_at(t)) * psi);
  };
  Eigen::Vector2cd psi(cd(1 / std::sqrt(2.0), 0), cd(1 / std::sqrt(2.0), 0));
  std::vector<double> trace;
  auto ground_prob = [&](double s) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(hamiltonian(s));
    return std::norm(es.eigenvectors().col(0).dot(psi));
  };
  trace.push_back(ground_prob(sched.samples[0]));
  for (std::size_t k = 0; k + 1 < sched.samples.size(); ++k) {
    const double t0 = sched.time(k);
    const double h = (sched.time(k + 1) - t0) / substeps;
    for (int j = 0; j < substeps; ++j) {
      const double t = t0 + j * h;
      const auto k1 = rhs(t, psi);
      const auto k2 = rhs(t + h / 2, psi + h / 2 * k1);
      const auto k3 = rhs(t + h / 2, psi + h / 2 * k2);
      const auto k4 = rhs(t + h, psi + h * k3);
      psi += h / 6 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    trace.push_back(ground_prob(sched.samples[k + 1]));
  }
  return trace;
}

void check_contract(const AnnealResult& r) {
  CHECK(r.norm_drift <= 1e-6);
  CHECK(r.report.self_convergence <= 1e-6);
  for (double p : r.ground_prob_trace) CHECK((p >= -1e-12 && p <= 1.0 + 1e-9));
}

}  // namespace

TEST_CASE("frozen schedule keeps the driver ground state") {
  Schedule frozen{ScheduleKind::linear, 5.0, std::vector<double>(500, 0.0), std::nullopt};
  const auto r = evolve(sample_instance({}, 3, 4), frozen);
  check_contract(r);
  for (double p : r.ground_prob_trace) CHECK(std::abs(p - 1.0) < 1e-8);
}

TEST_CASE("single-qubit limits") {
  SUBCASE("slow linear anneal is adiabatic") {
    const auto r = evolve(single_qubit(), linear_schedule(200.0));
    check_contract(r);
    CHECK(r.fidelity >= 0.999);
    CHECK(fidelity_bound_check(r, 0.1));
  }
  SUBCASE("sudden quench leaves half the weight") {
    const auto r = evolve(single_qubit(), linear_schedule(0.1));
    check_contract(r);
    CHECK(std::abs(r.fidelity - 0.5) < 0.05);
    CHECK_FALSE(fidelity_bound_check(r, 0.1));
  }
  SUBCASE("locally adiabatic schedule") {
    // The local condition does not control the abrupt start and stop, so the
    // two-level run falls short of 1 - eps^2 at eps = 0.1 and passes at 0.05.
    const auto la10 = local_adiabatic_schedule(single_qubit(), {0.1, {}});
    const auto r10 = evolve(single_qubit(), la10.schedule);
    check_contract(r10);
    CHECK(r10.fidelity == doctest::Approx(0.98309).epsilon(2e-5));
    CHECK_FALSE(fidelity_bound_check(r10, 0.1));
    const auto lin = evolve(single_qubit(), linear_schedule(la10.schedule.t_f));
    CHECK(lin.fidelity == doctest::Approx(0.99889).epsilon(2e-5));

    const auto la05 = local_adiabatic_schedule(single_qubit(), {0.05, {}});
    const auto r05 = evolve(single_qubit(), la05.schedule);
    CHECK(r05.fidelity >= 1 - 0.05 * 0.05);
    CHECK(fidelity_bound_check(r05, 0.05));
  }
}

TEST_CASE("ground-probability trace matches an independent RK4 integration") {
  const Schedule lin = linear_schedule(10.0);
  const auto r = evolve(single_qubit(), lin);
  const auto ref = rk4_ground_trace(lin, 40);
  double sup = 0.0;
  for (std::size_t k = 0; k < ref.size(); ++k) sup = std::max(sup, std::abs(ref[k] - r.ground_prob_trace[k]));
  CHECK(sup <= 1e-5);

  const auto la = local_adiabatic_schedule(single_qubit()).schedule;
  const auto r2 = evolve(single_qubit(), la);
  const auto ref2 = rk4_ground_trace(la, 40);
  sup = 0.0;
  for (std::size_t k = 0; k < ref2.size(); ++k) sup = std::max(sup, std::abs(ref2[k] - r2.ground_prob_trace[k]));
  CHECK(sup <= 1e-5);
}

TEST_CASE("ground_manifold_probability") {
  const auto inst = sample_instance({}, 3, 8);
  const auto h = annealing_hamiltonian(build_driver_hamiltonian(3), problem_energies(inst), 0.4);
  const auto eig = eigendecompose(h);
  CHECK(ground_manifold_probability(eig.vectors.col(0).cast<cd>(), h) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ground_manifold_probability(eig.vectors.col(5).cast<cd>(), h) < 1e-20);

  const auto pair = make_instance(TopologyKind::nearest_neighbor_open, 2, {0, 0}, {{{0, 1}, 1.0}});
  StateVector psi = StateVector::Zero(4);
  psi[0] = psi[3] = 1 / std::sqrt(2.0);
  CHECK(ground_manifold_probability(psi, build_problem_hamiltonian(pair)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("residual energy") {
  const auto inst = sample_instance({}, 4, 19);
  const Eigen::VectorXd e = problem_energies(inst);
  Eigen::Index g;
  const double e0 = e.minCoeff(&g);
  REQUIRE(std::abs(e0) > 1e-9);
  StateVector ground = StateVector::Zero(16);
  ground[g] = 1;
  CHECK(residual_energy(ground, inst).value == 0.0);

  for (Eigen::Index b = 0; b < 16; ++b) {
    StateVector basis = StateVector::Zero(16);
    basis[b] = 1;
    CHECK(residual_energy(basis, inst).value == doctest::Approx(std::abs((e[b] - e0) / e0)).epsilon(1e-14));
  }

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  StateVector psi(16);
  for (auto& a : psi) a = cd(n(rng), n(rng));
  psi.normalize();
  double expectation = 0.0;
  for (int b = 0; b < 16; ++b) expectation += std::norm(psi[b]) * e[b];
  const auto r = residual_energy(psi, inst);
  CHECK(r.energy == doctest::Approx(expectation).epsilon(1e-13));
  CHECK(r.value == doctest::Approx(std::abs((expectation - e0) / e0)).epsilon(1e-13));

  const auto zero = make_instance(TopologyKind::nearest_neighbor_open, 2, {0, 0}, {{{0, 1}, 0.6}});
  CHECK(residual_energy(StateVector::Constant(4, 0.5), zero).excluded);
}

TEST_CASE("energy changes no faster than the schedule allows") {
  const auto inst = sample_instance({}, 4, 23);
  const auto la = local_adiabatic_schedule(inst).schedule;
  const auto r = evolve(inst, la);
  check_contract(r);
  const Eigen::MatrixXd diff = build_problem_hamiltonian(inst) - build_driver_hamiltonian(4);
  const double norm = eigendecompose(diff).values.cwiseAbs().maxCoeff();
  for (std::size_t k = 1; k < r.energy_trace.size(); ++k) {
    const double ds = std::abs(r.s_trace[k] - r.s_trace[k - 1]);
    CHECK(std::abs(r.energy_trace[k] - r.energy_trace[k - 1]) <= ds * norm + 1e-9);
  }
}

TEST_CASE("batch runs") {
  std::vector<AnnealJob> jobs;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto inst = sample_instance({}, 3, 40 + seed);
    jobs.push_back({inst, local_adiabatic_schedule(inst).schedule});
    jobs.push_back({inst, linear_schedule(jobs.back().schedule.t_f)});
  }
  const auto serial = evolve_batch(jobs, {}, Execution::serial);
  const auto parallel = evolve_batch(jobs, {}, Execution::parallel);
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    CHECK(serial[i].ground_prob_trace == parallel[i].ground_prob_trace);
    CHECK(serial[i].fidelity == parallel[i].fidelity);
  }
  // Identical schedules give identical results.
  const auto a = evolve(jobs[0].instance, jobs[0].schedule);
  CHECK(a.ground_prob_trace == serial[0].ground_prob_trace);
}

TEST_CASE("invalid schedules are rejected") {
  Schedule bad{ScheduleKind::linear, 1.0, {0.0, 1.2}, std::nullopt};
  CHECK_THROWS_AS(evolve(single_qubit(), bad), UsageError);
  StepControl tight;
  tight.max_refinements = 0;
  tight.probability_tolerance = 1e-15;
  CHECK_THROWS_AS(evolve(sample_instance({}, 3, 1), linear_schedule(30.0), tight), NumericalError);
}

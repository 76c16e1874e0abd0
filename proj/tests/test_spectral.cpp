#include "qasched/errors.hpp"
#include "qasched/spectral.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace qasched;

namespace {

IsingInstance single_qubit(double h = 1.0) {
  return make_instance(TopologyKind::nearest_neighbor_open, 1, {h}, {});
}

// Closed-form two-level data for H(s) = -(1-s) sigma^x - s h sigma^z.
double qubit_gap(double s, double h) { return 2.0 * std::sqrt((1 - s) * (1 - s) + s * s * h * h); }
double qubit_matel(double s, double h) { return h / std::sqrt((1 - s) * (1 - s) + s * s * h * h); }

}  // namespace

TEST_CASE("eigendecompose") {
  const auto id = eigendecompose(Eigen::MatrixXd::Identity(6, 6));
  for (int k = 0; k < 6; ++k) CHECK(id.values[k] == doctest::Approx(1.0).epsilon(1e-14));

  const auto hx = eigendecompose(build_driver_hamiltonian(2));
  const double expect[] = {-2, 0, 0, 2};
  for (int k = 0; k < 4; ++k) CHECK(std::abs(hx.values[k] - expect[k]) < 1e-12);

  const auto inst = sample_instance({}, 5, 12);
  const auto h = annealing_hamiltonian(build_driver_hamiltonian(5), problem_energies(inst), 0.5);
  const auto eig = eigendecompose(h);
  const Eigen::MatrixXd rebuilt = eig.vectors * eig.values.asDiagonal() * eig.vectors.transpose();
  CHECK((rebuilt - h).norm() <= 1e-8);
  CHECK((eig.vectors.transpose() * eig.vectors - Eigen::MatrixXd::Identity(32, 32)).norm() < 1e-9);
  for (int k = 0; k < 32; ++k)
    CHECK((h * eig.vectors.col(k) - eig.values[k] * eig.vectors.col(k)).norm() <= 1e-9 * h.norm());

  Eigen::MatrixXd asym = Eigen::MatrixXd::Identity(3, 3);
  asym(0, 2) = 1e-3;
  CHECK_THROWS_AS(eigendecompose(asym), NumericalError);
}

TEST_CASE("distinct_levels") {
  const std::vector<double> a = {0, 0, 1, 1, 2};
  CHECK(distinct_levels(a, 1e-8).size() == 3);
  const std::vector<double> b = {3, 3, 3};
  CHECK(distinct_levels(b, 1e-8).size() == 1);

  const auto pair = make_instance(TopologyKind::nearest_neighbor_open, 2, {0, 0}, {{{0, 1}, 1.0}});
  Eigen::VectorXd d = problem_energies(pair);
  std::vector<double> sorted(d.data(), d.data() + 4);
  std::sort(sorted.begin(), sorted.end());
  const auto clusters = distinct_levels(sorted);
  REQUIRE(clusters.size() == 2);
  CHECK(sorted[clusters[1].begin] - sorted[clusters[0].begin] == 1.0);
}

TEST_CASE("single-qubit profile matches the closed form to 1e-10") {
  ProfileOptions opt;
  const auto profile = gap_profile(single_qubit(), opt);
  REQUIRE(profile.points.size() == 500);
  CHECK(profile.points.front().s == 0.0);
  CHECK(profile.points.back().s == 1.0);
  double best = 0.0;
  for (const auto& p : profile.points) {
    REQUIRE(p.gaps.size() == 1);
    CHECK(p.flagged);  // only one excited level exists
    CHECK(std::abs(p.gaps[0] - qubit_gap(p.s, 1.0)) < 1e-10);
    CHECK(std::abs(p.matrix_elements[0] - qubit_matel(p.s, 1.0)) < 1e-10);
    best = std::max(best, qubit_matel(p.s, 1.0));
  }
  CHECK(std::abs(numerator_bound(profile) - best) < 1e-10);

  opt.n_grid = 3;
  const auto coarse = gap_profile(single_qubit(), opt);
  CHECK(coarse.points[1].gaps[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("gap profile properties") {
  ProfileOptions opt;
  opt.n_grid = 60;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto inst = sample_instance({}, 4, 300 + seed);
    const auto profile = gap_profile(inst, opt);
    CHECK(profile.points.front().gaps.at(0) == doctest::Approx(2.0).epsilon(1e-10));
    for (const auto& p : profile.points) {
      CHECK(p.gaps.size() <= 4u);
      CHECK(p.gaps.size() == p.matrix_elements.size());
      for (std::size_t m = 0; m < p.gaps.size(); ++m) {
        CHECK(p.gaps[m] > 0.0);
        if (m) CHECK(p.gaps[m] >= p.gaps[m - 1]);
      }
    }
  }
}

TEST_CASE("gaps agree with an independent sort of the full spectrum") {
  std::mt19937_64 rng(5);
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 6; ++seed) {
    const auto inst = sample_instance({TopologyKind::all_to_all, {}, {}}, 3 + checked % 4, 900 + seed);
    if (ground_degeneracy(problem_energies(inst)) != 1) continue;
    ++checked;
    ProfileOptions opt;
    opt.n_grid = 25;
    const auto profile = gap_profile(inst, opt);
    const auto driver = build_driver_hamiltonian(inst.n_spins);
    for (const auto& p : profile.points) {
      const auto h = annealing_hamiltonian(driver, problem_energies(inst), p.s);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h, Eigen::EigenvaluesOnly);
      std::vector<double> v(solver.eigenvalues().data(), solver.eigenvalues().data() + h.rows());
      std::sort(v.begin(), v.end());
      // Walk the sorted spectrum and collect distinct levels by hand.
      std::vector<double> reps = {v[0]};
      for (std::size_t k = 1; k < v.size(); ++k)
        if (v[k] - v[k - 1] > std::max(1e-10, 1e-8 * std::max(1.0, std::abs(v[k])))) reps.push_back(v[k]);
      const std::size_t available = std::min<std::size_t>(4, reps.size() - 1);
      if (p.ground_size == 1) {
        REQUIRE(p.gaps.size() == available);
        for (std::size_t m = 0; m < available; ++m)
          CHECK(std::abs(p.gaps[m] - (reps[m + 1] - reps[0])) < 1e-9);
      }
    }
  }
}

TEST_CASE("zero-field instance has a degenerate ground level at s=1") {
  auto inst = sample_instance({}, 5, 17);
  for (double& h : inst.h) h = 0.0;
  ProfileOptions opt;
  opt.n_grid = 11;
  const auto profile = gap_profile(inst, opt);
  CHECK(profile.points.back().ground_size >= 2);
  CHECK(profile.ground_band >= 2);

  const auto pair = make_instance(TopologyKind::nearest_neighbor_open, 2, {0, 0}, {{{0, 1}, 1.0}});
  const auto flagged = gap_profile(pair, opt);
  CHECK(flagged.flagged_count() > 0);
  for (const auto& p : flagged.points) CHECK(!p.gaps.empty());
}

TEST_CASE("numerator bound") {
  SpectralProfile empty;
  CHECK_THROWS_AS(numerator_bound(empty), UsageError);

  SpectralProfile constant;
  for (int k = 0; k < 5; ++k) {
    SpectralPoint p;
    p.gaps = {1.0, 2.0};
    p.matrix_elements = {0.7, 0.7};
    constant.points.push_back(p);
  }
  CHECK(numerator_bound(constant) == 0.7);

  const auto ring = sample_instance({TopologyKind::nearest_neighbor_periodic, {}, {}}, 5, 4);
  ProfileOptions opt;
  opt.n_grid = 40;
  const auto base = gap_profile(ring, opt);
  for (int k = 1; k < 5; ++k) {
    const auto moved = gap_profile(cyclic_translate(ring, k), opt);
    CHECK(std::abs(numerator_bound(moved) - numerator_bound(base)) < 1e-8);
    for (std::size_t i = 0; i < base.points.size(); ++i)
      for (std::size_t m = 0; m < base.points[i].matrix_elements.size(); ++m)
        CHECK(std::abs(moved.points[i].matrix_elements[m] - base.points[i].matrix_elements[m]) < 1e-8);
  }
}

TEST_CASE("serial and parallel profiles are identical") {
  const auto inst = sample_instance({TopologyKind::all_to_all, {}, {}}, 5, 44);
  ProfileOptions opt;
  opt.n_grid = 50;
  opt.execution = Execution::serial;
  const auto a = gap_profile(inst, opt);
  opt.execution = Execution::parallel;
  const auto b = gap_profile(inst, opt);
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].gaps == b.points[i].gaps);
    CHECK(a.points[i].matrix_elements == b.points[i].matrix_elements);
  }
}

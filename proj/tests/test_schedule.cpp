#include "qasched/errors.hpp"
#include "qasched/schedule.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace qasched;

namespace {

constexpr double kPi = 3.14159265358979323846;

IsingInstance single_qubit() { return make_instance(TopologyKind::nearest_neighbor_open, 1, {1.0}, {}); }

// Composite Simpson on n (even) panels of the closed-form integrand bound/g^2.
double fine_quadrature_t(double s_end, double bound, double eps, int panels = 100000) {
  auto f = [](double s) { return 1.0 / (4.0 * ((1 - s) * (1 - s) + s * s)); };
  const double h = s_end / panels;
  double sum = f(0) + f(s_end);
  for (int k = 1; k < panels; ++k) sum += (k % 2 ? 4.0 : 2.0) * f(k * h);
  return bound / eps * sum * h / 3.0;
}

SpectralProfile constant_profile(double gap, double matel, int n) {
  SpectralProfile p;
  for (int k = 0; k < n; ++k) {
    SpectralPoint pt;
    pt.s = double(k) / (n - 1);
    pt.gaps = {gap};
    pt.matrix_elements = {matel};
    p.points.push_back(pt);
  }
  return p;
}

}  // namespace

TEST_CASE("t(s) scales exactly with 1/epsilon") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto profile = gap_profile(sample_instance({}, 4, 50 + seed));
    const auto a = local_adiabatic_t_of_s(profile, 0.1);
    const auto b = local_adiabatic_t_of_s(profile, 0.05);
    for (std::size_t k = 0; k < a.t.size(); ++k) {
      CHECK(std::abs(b.t[k] - 2.0 * a.t[k]) <= 1e-12 * std::max(1.0, a.t[k]));
      if (k) CHECK(a.t[k] > a.t[k - 1]);
    }
    CHECK(a.t.front() == 0.0);
  }
}

TEST_CASE("constant gap gives a linear t(s)") {
  const auto tos = local_adiabatic_t_of_s(constant_profile(2.0, 0.5, 101), 0.1);
  for (std::size_t k = 0; k < tos.s.size(); ++k)
    CHECK(tos.t[k] == doctest::Approx(0.5 / (0.1 * 4.0) * tos.s[k]).epsilon(1e-12));
  const auto sched = invert_to_s_of_t(tos);
  for (std::size_t k = 0; k < sched.samples.size(); ++k)
    CHECK(std::abs(sched.samples[k] - double(k) / 499.0) < 1e-12);
}

TEST_CASE("single-qubit t_f and s(t) against fine quadrature") {
  const double eps = 0.1;
  const auto la = local_adiabatic_schedule(single_qubit(), {eps, {}});
  const double bound = la.numerator_bound;
  const double oracle = fine_quadrature_t(1.0, bound, eps);
  CHECK(std::abs(la.schedule.t_f - oracle) / oracle < 1e-3);
  // Closed form with the exact bound sqrt(2): t_f = sqrt(2) pi / (8 eps).
  CHECK(std::abs(fine_quadrature_t(1.0, std::sqrt(2.0), eps) - std::sqrt(2.0) * kPi / (8 * eps)) < 1e-9);
  CHECK(la.schedule.t_f == doctest::Approx(5.553588).epsilon(1e-6));

  // Oracle s(t) from inverting the fine quadrature by bisection.
  double sup = 0.0;
  for (std::size_t k = 0; k < la.schedule.samples.size(); k += 7) {
    const double t = la.schedule.time(k) * oracle / la.schedule.t_f;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 50; ++it) {
      const double mid = 0.5 * (lo + hi);
      (fine_quadrature_t(mid, bound, eps, 2000) < t ? lo : hi) = mid;
    }
    sup = std::max(sup, std::abs(la.schedule.samples[k] - 0.5 * (lo + hi)));
  }
  CHECK(sup <= 2e-3);
}

TEST_CASE("inversion") {
  SUBCASE("round trip stays within one grid cell") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto profile = gap_profile(sample_instance({}, 4, 600 + seed));
      const auto tos = local_adiabatic_t_of_s(profile, 0.1);
      const auto sched = invert_to_s_of_t(tos);
      double cell = 0.0;
      for (std::size_t k = 1; k < tos.t.size(); ++k) cell = std::max(cell, tos.t[k] - tos.t[k - 1]);
      // t(s) of the inverted schedule at each grid s, by linear interpolation.
      for (std::size_t k = 0; k < tos.s.size(); ++k) {
        const double s = tos.s[k];
        auto it = std::lower_bound(sched.samples.begin(), sched.samples.end(), s);
        const std::size_t j = std::min<std::size_t>(it - sched.samples.begin(), sched.samples.size() - 1);
        double t = sched.time(j);
        if (j > 0 && sched.samples[j] > sched.samples[j - 1])
          t = sched.time(j - 1) + (s - sched.samples[j - 1]) / (sched.samples[j] - sched.samples[j - 1]) *
                                      (sched.time(j) - sched.time(j - 1));
        CHECK(std::abs(t - tos.t[k]) <= cell + 1e-12);
      }
    }
  }
  SUBCASE("non-monotone table") {
    TimeOfS bad{{0, 0.5, 1}, {0, 2, 1}, 0.1};
    CHECK_THROWS_AS(invert_to_s_of_t(bad), UsageError);
  }
  SUBCASE("100 random 4-spin schedules are valid") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto la = local_adiabatic_schedule(sample_instance({}, 4, 7000 + seed));
      CHECK(la.schedule.samples.size() == 500);
      CHECK_NOTHROW(la.schedule.validate());
      CHECK(la.schedule.kind == ScheduleKind::local_adiabatic);
      CHECK(la.schedule.epsilon.value() == 0.1);
    }
  }
}

TEST_CASE("linear schedule") {
  const auto a = linear_schedule(1.0);
  CHECK(a.samples[249] < 0.5);
  CHECK(a.samples[250] > 0.5);
  const auto b = linear_schedule(37.0);
  CHECK(a.samples == b.samples);
  const auto inverted = invert_to_s_of_t(TimeOfS{{0.0, 1.0}, {0.0, 37.0}, std::nullopt});
  for (std::size_t k = 0; k < 500; ++k) CHECK(std::abs(inverted.samples[k] - b.samples[k]) < 1e-15);
  CHECK_THROWS_AS(linear_schedule(0.0), UsageError);
}

TEST_CASE("schedule_from_prediction") {
  std::vector<double> half(500, 0.5);
  const auto s = schedule_from_prediction(half, 3.0);
  CHECK(s.samples.front() == 0.0);
  CHECK(s.samples.back() == 1.0);
  CHECK(s.samples[1] == 0.5);
  CHECK(s.kind == ScheduleKind::predicted);

  const auto lin = linear_schedule(2.0);
  CHECK(schedule_from_prediction(lin.samples, 2.0).samples == lin.samples);

  std::vector<double> wild(500, 1.7);
  wild[3] = -0.2;
  const auto clipped = schedule_from_prediction(wild, 1.0);
  for (double v : clipped.samples) CHECK((v >= 0.0 && v <= 1.0));

  CHECK_THROWS_AS(schedule_from_prediction(std::vector<double>(499, 0.5), 1.0), UsageError);

  std::vector<double> raw = lin.samples;
  std::swap(raw[100], raw[101]);
  const auto mono = schedule_from_prediction(raw, 2.0, true);
  for (std::size_t k = 1; k < 500; ++k) CHECK(mono.samples[k] >= mono.samples[k - 1]);
  CHECK(mono.samples[100] == doctest::Approx(0.5 * (lin.samples[100] + lin.samples[101])));
}

TEST_CASE("isotonic regression is the least-squares nondecreasing fit") {
  // Exhaustive oracle: on a grid of candidate levels, the best nondecreasing
  // sequence for short inputs, refined by the fact that the optimum takes
  // block means. Enumerate every partition into consecutive blocks.
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 7;
    std::vector<double> y(n);
    for (double& v : y) v = u(rng);
    double best = INFINITY;
    for (int mask = 0; mask < (1 << (n - 1)); ++mask) {
      std::vector<double> fit;
      int start = 0;
      for (int k = 0; k < n; ++k) {
        if (k == n - 1 || (mask >> k & 1)) {
          double mean = 0;
          for (int i = start; i <= k; ++i) mean += y[i];
          mean /= (k - start + 1);
          for (int i = start; i <= k; ++i) fit.push_back(mean);
          start = k + 1;
        }
      }
      bool ok = true;
      for (int k = 1; k < n; ++k) ok = ok && fit[k] >= fit[k - 1] - 1e-15;
      if (!ok) continue;
      double err = 0;
      for (int k = 0; k < n; ++k) err += (fit[k] - y[k]) * (fit[k] - y[k]);
      best = std::min(best, err);
    }
    const auto iso = isotonic_regression(y);
    double err = 0;
    for (int k = 0; k < n; ++k) {
      err += (iso[k] - y[k]) * (iso[k] - y[k]);
      if (k) CHECK(iso[k] >= iso[k - 1]);
    }
    CHECK(err == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("masked instances are scheduled on their effective spins") {
  const auto ring = sample_instance({TopologyKind::nearest_neighbor_periodic, {}, {}}, 5, 61);
  const auto masked = mask_subgraph(ring, 2, MaskScheme::ring_to_open_chain);
  const auto la = local_adiabatic_schedule(masked);
  CHECK(la.effective_spins <= 4);
  CHECK(std::isfinite(la.schedule.t_f));
  CHECK(la.schedule.t_f < 1e3);
  CHECK_THROWS_AS(local_adiabatic_schedule(make_instance(TopologyKind::nearest_neighbor_open, 2, {0, 0}, {})),
                  NumericalError);
}

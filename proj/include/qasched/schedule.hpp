#pragma once

#include "qasched/spectral.hpp"

#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace qasched {

inline constexpr int kSchedulePoints = 500;

enum class ScheduleKind { linear, local_adiabatic, predicted };

std::string_view to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view name);

/// s(t) sampled at t_k = k t_f / (n - 1).
struct Schedule {
  ScheduleKind kind = ScheduleKind::linear;
  double t_f = 1.0;
  std::vector<double> samples;
  std::optional<double> epsilon;  // local-adiabatic only

  double time(std::size_t k) const;
  /// Piecewise-linear interpolation of the samples.
  double s_at(double t) const;
  /// Throws UsageError unless s_0 = 0, s_last = 1, samples in [0, 1] and
  /// t_f > 0. Samples must also be nondecreasing except for raw predictions.
  void validate() const;
};

/// t(s) tabulated on the spectral grid.
struct TimeOfS {
  std::vector<double> s;
  std::vector<double> t;
  std::optional<double> epsilon;

  double t_f() const { return t.back(); }
};

/// t(s_k) = (bound / epsilon) * cumulative trapezoid of max_m 1/g_{0,m}^2.
TimeOfS local_adiabatic_t_of_s(const SpectralProfile& profile, double epsilon);

/// Same integral with an explicit numerator bound.
TimeOfS local_adiabatic_t_of_s(const SpectralProfile& profile, double epsilon,
                               double bound);

/// Inverts a strictly increasing t(s) table onto a uniform time grid.
Schedule invert_to_s_of_t(const TimeOfS& t_of_s, int n_points = kSchedulePoints);

Schedule linear_schedule(double t_f, int n_points = kSchedulePoints);

/// Clips to [0, 1], optionally projects onto nondecreasing sequences, then
/// pins the endpoints.
Schedule schedule_from_prediction(std::span<const double> outputs, double t_f,
                                  bool monotonize = false);

/// Least-squares nondecreasing fit (pool adjacent violators).
std::vector<double> isotonic_regression(std::span<const double> values);

struct ScheduleOptions {
  double epsilon = 0.1;
  ProfileOptions profile;
};

/// Everything the locally-adiabatic construction produced for one instance.
struct LocalAdiabaticResult {
  Schedule schedule;
  TimeOfS t_of_s;
  double numerator_bound = 0.0;
  std::size_t flagged_points = 0;
  int effective_spins = 0;
};

/// drop_free_spins -> gap_profile -> numerator_bound -> t(s) -> s(t).
LocalAdiabaticResult local_adiabatic_schedule(const IsingInstance& instance,
                                              const ScheduleOptions& options = {});

}  // namespace qasched

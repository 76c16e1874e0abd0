#include "qasched/schedule.hpp"

#include "qasched/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace qasched {

std::string_view to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::linear:
      return "linear";
    case ScheduleKind::local_adiabatic:
      return "local-adiabatic";
    case ScheduleKind::predicted:
      return "predicted";
  }
  return "unknown";
}

ScheduleKind parse_schedule_kind(std::string_view name) {
  for (auto kind : {ScheduleKind::linear, ScheduleKind::local_adiabatic,
                    ScheduleKind::predicted})
    if (to_string(kind) == name) return kind;
  throw ConfigError("unknown schedule kind '" + std::string(name) + "'");
}

double Schedule::time(std::size_t k) const {
  const std::size_t last = samples.size() - 1;
  return k == last ? t_f : t_f * static_cast<double>(k) / static_cast<double>(last);
}

double Schedule::s_at(double t) const {
  const std::size_t last = samples.size() - 1;
  if (t <= 0.0) return samples.front();
  if (t >= t_f) return samples.back();
  const double position = t / t_f * static_cast<double>(last);
  const std::size_t k = std::min(static_cast<std::size_t>(position), last - 1);
  const double frac = position - static_cast<double>(k);
  return samples[k] + frac * (samples[k + 1] - samples[k]);
}

void Schedule::validate() const {
  if (!(t_f > 0.0) || !std::isfinite(t_f))
    throw UsageError("schedule t_f must be positive and finite");
  if (samples.size() < 2) throw UsageError("schedule needs at least 2 samples");
  if (samples.front() != 0.0 || samples.back() != 1.0)
    throw UsageError("schedule endpoints must be exactly 0 and 1");
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (!(samples[k] >= 0.0 && samples[k] <= 1.0))
      throw UsageError("schedule sample outside [0, 1]");
    if (kind != ScheduleKind::predicted && k > 0 && samples[k] < samples[k - 1])
      throw UsageError("schedule samples must be nondecreasing");
  }
}

TimeOfS local_adiabatic_t_of_s(const SpectralProfile& profile, double epsilon) {
  return local_adiabatic_t_of_s(profile, epsilon, numerator_bound(profile));
}

TimeOfS local_adiabatic_t_of_s(const SpectralProfile& profile, double epsilon,
                               double bound) {
  if (!(epsilon > 0.0)) throw UsageError("epsilon must be positive");
  if (profile.points.size() < 2) throw UsageError("profile needs >= 2 points");
  if (!(bound > 0.0) || !std::isfinite(bound))
    throw NumericalError("numerator bound must be positive and finite");

  const std::size_t n = profile.points.size();
  std::vector<double> integrand(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& gaps = profile.points[k].gaps;
    if (gaps.empty())
      throw NumericalError("grid point without any excited level");
    double worst = 0.0;
    for (double gap : gaps) {
      if (!(gap > 0.0)) throw NumericalError("non-positive gap in profile");
      worst = std::max(worst, 1.0 / (gap * gap));
    }
    integrand[k] = worst;
  }

  TimeOfS table;
  table.epsilon = epsilon;
  table.s.resize(n);
  table.t.resize(n);
  double cumulative = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    table.s[k] = profile.points[k].s;
    if (k > 0)
      cumulative += 0.5 * (integrand[k] + integrand[k - 1]) *
                    (table.s[k] - table.s[k - 1]);
    // Prefactor applied last so t * epsilon is epsilon-independent to rounding.
    table.t[k] = (bound * cumulative) / epsilon;
  }
  return table;
}

Schedule invert_to_s_of_t(const TimeOfS& t_of_s, int n_points) {
  const auto& s = t_of_s.s;
  const auto& t = t_of_s.t;
  if (n_points < 2) throw UsageError("n_points must be >= 2");
  if (s.size() != t.size() || s.size() < 2)
    throw UsageError("t(s) table is malformed");
  for (std::size_t k = 1; k < t.size(); ++k)
    if (!(t[k] > t[k - 1])) throw UsageError("t(s) must be strictly increasing");

  Schedule schedule;
  schedule.kind = ScheduleKind::local_adiabatic;
  schedule.epsilon = t_of_s.epsilon;
  schedule.t_f = t.back() - t.front();
  schedule.samples.resize(n_points);
  const int last = n_points - 1;
  std::size_t k = 0;
  for (int i = 0; i <= last; ++i) {
    const double time = t.front() + schedule.t_f * static_cast<double>(i) / last;
    while (k + 2 < t.size() && t[k + 1] < time) ++k;
    const double frac = std::clamp((time - t[k]) / (t[k + 1] - t[k]), 0.0, 1.0);
    schedule.samples[i] = s[k] + frac * (s[k + 1] - s[k]);
  }
  schedule.samples.front() = 0.0;
  schedule.samples.back() = 1.0;
  return schedule;
}

Schedule linear_schedule(double t_f, int n_points) {
  if (!(t_f > 0.0)) throw UsageError("t_f must be positive");
  if (n_points < 2) throw UsageError("n_points must be >= 2");
  Schedule schedule;
  schedule.kind = ScheduleKind::linear;
  schedule.t_f = t_f;
  schedule.samples.resize(n_points);
  const int last = n_points - 1;
  for (int k = 0; k <= last; ++k)
    schedule.samples[k] = static_cast<double>(k) / last;
  return schedule;
}

std::vector<double> isotonic_regression(std::span<const double> values) {
  // Blocks of pooled values: (sum, count).
  std::vector<double> sums;
  std::vector<std::size_t> counts;
  for (double v : values) {
    sums.push_back(v);
    counts.push_back(1);
    while (sums.size() > 1) {
      const std::size_t b = sums.size() - 1;
      if (sums[b - 1] / counts[b - 1] <= sums[b] / counts[b]) break;
      sums[b - 1] += sums[b];
      counts[b - 1] += counts[b];
      sums.pop_back();
      counts.pop_back();
    }
  }
  std::vector<double> fitted;
  fitted.reserve(values.size());
  for (std::size_t b = 0; b < sums.size(); ++b)
    fitted.insert(fitted.end(), counts[b], sums[b] / counts[b]);
  return fitted;
}

Schedule schedule_from_prediction(std::span<const double> outputs, double t_f,
                                  bool monotonize) {
  if (outputs.size() != static_cast<std::size_t>(kSchedulePoints))
    throw UsageError("prediction must have " + std::to_string(kSchedulePoints) +
                     " samples, got " + std::to_string(outputs.size()));
  if (!(t_f > 0.0)) throw UsageError("t_f must be positive");
  Schedule schedule;
  schedule.kind = ScheduleKind::predicted;
  schedule.t_f = t_f;
  schedule.samples.resize(outputs.size());
  std::transform(outputs.begin(), outputs.end(), schedule.samples.begin(),
                 [](double v) { return std::clamp(v, 0.0, 1.0); });
  if (monotonize) schedule.samples = isotonic_regression(schedule.samples);
  schedule.samples.front() = 0.0;
  schedule.samples.back() = 1.0;
  return schedule;
}

LocalAdiabaticResult local_adiabatic_schedule(const IsingInstance& instance,
                                              const ScheduleOptions& options) {
  const IsingInstance reduced = drop_free_spins(instance);
  if (reduced.n_spins == 0)
    throw NumericalError("instance has no field or coupling; schedule undefined");
  const SpectralProfile profile = gap_profile(reduced, options.profile);
  LocalAdiabaticResult result;
  result.effective_spins = reduced.n_spins;
  result.flagged_points = profile.flagged_count();
  result.numerator_bound = numerator_bound(profile);
  result.t_of_s =
      local_adiabatic_t_of_s(profile, options.epsilon, result.numerator_bound);
  result.schedule = invert_to_s_of_t(result.t_of_s, kSchedulePoints);
  return result;
}

}  // namespace qasched

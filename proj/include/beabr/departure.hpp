#pragma once

#include <random>
#include <string>

namespace beabr {

enum class DepartureKind {
  kNone,         // watch to the end
  kFixed,        // leave at a fixed wall-clock time
  kUniform,      // f1: uniform viewing ratio, point mass p at the end
  kLogarithmic,  // f2: log-skewed viewing ratio, point mass p at the end
};

/// Whether a sampled ratio r is applied to played media (the default) or to
/// wall-clock time since the session started.
enum class DepartureClock { kMediaTime, kNaturalTime };

struct DepartureModel {
  DepartureKind kind = DepartureKind::kNone;
  double p = 0.2;
  double a = 10.0;
  double fixed_s = 0.0;

  void validate() const;
  /// Parses none | f1 | f2 | fixed:<seconds>.
  static DepartureModel parse(const std::string& text, double p = 0.2, double a = 10.0);
  std::string label() const;
};

/// Viewing ratio r in (0, 1] by inverse-CDF sampling. Undefined for kFixed.
double sample_departure_ratio(const DepartureModel& model, std::mt19937_64& rng);

/// t0 = r * video duration.
double sample_departure(const DepartureModel& model, double video_duration_s,
                        std::mt19937_64& rng);

}  // namespace beabr

#pragma once

#include "btsim/mesh.hpp"

#include <optional>
#include <vector>

namespace btsim {

// Units: time in µs, length in µm, gradient amplitude in T/µm. In this system
// b in µs/µm² equals b in s/mm², and D in µm²/µs equals D in mm²/s.
inline constexpr double kGyromagneticRatio = 2.67513e2;  // rad µs⁻¹ T⁻¹

enum class SegmentKind { kConstant, kLinear, kCosine, kSine };

/// One piece of a gradient waveform on (t_start, t_end].
///   constant: f = a
///   linear:   f goes from a at t_start to b at t_end
///   cosine:   f = a cos(omega t + phase)   (absolute time t)
///   sine:     f = a sin(omega t + phase)
struct Segment {
  double t_start = 0.0;
  double t_end = 0.0;
  SegmentKind kind = SegmentKind::kConstant;
  double a = 0.0;
  double b = 0.0;
  double omega = 0.0;
  double phase = 0.0;
};

class TemporalProfile {
 public:
  /// Segments must be contiguous and start at 0; empty segments are dropped.
  TemporalProfile(std::vector<Segment> segments, double echo_time);

  double echo_time() const { return echo_time_; }
  const std::vector<Segment>& segments() const { return segments_; }

  /// f(t), with segments closed on the right (and the first one also on the
  /// left), so a PGSE pulse satisfies f(δ) = 1 and f(Δ+δ) = -1.
  double f(double t) const;
  /// Right limit f(t⁺); equals f(t) except at waveform jumps.
  double f_right(double t) const;
  /// F(t) = ∫₀ᵗ f, exact per segment.
  double integral(double t) const;
  /// ∫₀ᵀ F², exact per segment. Units µs³.
  double b_factor() const { return b_factor_; }

  /// Segment boundaries in (0, T], ascending.
  std::vector<double> breakpoints() const;

 private:
  double segment_value(const Segment& s, double t) const;
  double segment_integral(const Segment& s, double t) const;  // ∫_{t_start}^t f
  double segment_square_integral(const Segment& s, double f0) const;
  void check_time(double t) const;

  std::vector<Segment> segments_;
  std::vector<double> start_integral_;
  double echo_time_ = 0.0;
  double b_factor_ = 0.0;
};

TemporalProfile pgse(double delta, double big_delta);
TemporalProfile double_pgse(double delta, double big_delta);
TemporalProfile cos_ogse(double delta, double big_delta, int periods);
TemporalProfile sin_ogse(double delta, double big_delta, int periods);
TemporalProfile trapezoidal_pgse(double delta, double big_delta, double ramp);
TemporalProfile double_trapezoidal_pgse(double delta, double big_delta, double ramp);

double b_from_g(const TemporalProfile& p, double g);
double g_from_b(const TemporalProfile& p, double b);

/// Encoding direction plus amplitude. b is optional input bookkeeping.
struct GradientSpec {
  Vec3 direction = Vec3::UnitX();
  double g = 0.0;
  std::optional<double> b;

  GradientSpec() = default;
  GradientSpec(const Vec3& dir, double amplitude, std::optional<double> b_value = std::nullopt);
};

}  // namespace btsim

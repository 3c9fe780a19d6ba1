#include "btsim/sequences.hpp"

#include "btsim/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace btsim {

TemporalProfile::TemporalProfile(std::vector<Segment> segments, double echo_time)
    : echo_time_(echo_time) {
  if (!(echo_time > 0.0) || !std::isfinite(echo_time)) {
    fail(ErrorKind::kInvalidArgument, "echo time must be positive");
  }
  double t = 0.0;
  for (const auto& s : segments) {
    if (std::abs(s.t_start - t) > 1e-9 * echo_time) {
      fail(ErrorKind::kInvalidArgument, "waveform segments must be contiguous from t = 0");
    }
    if (s.t_end < s.t_start) fail(ErrorKind::kInvalidArgument, "waveform segment ends before it starts");
    if ((s.kind == SegmentKind::kCosine || s.kind == SegmentKind::kSine) && !(s.omega > 0.0)) {
      fail(ErrorKind::kInvalidArgument, "harmonic waveform segments need a positive frequency");
    }
    t = s.t_end;
    if (s.t_end > s.t_start) {
      segments_.push_back(s);
      segments_.back().t_start = segments_.size() == 1 ? 0.0 : segments_[segments_.size() - 2].t_end;
    }
  }
  if (segments_.empty() || std::abs(t - echo_time) > 1e-9 * echo_time) {
    fail(ErrorKind::kInvalidArgument, "waveform segments must cover [0, T]");
  }
  segments_.back().t_end = echo_time;

  double accumulated = 0.0;
  for (const auto& s : segments_) {
    start_integral_.push_back(accumulated);
    b_factor_ += segment_square_integral(s, accumulated);
    accumulated += segment_integral(s, s.t_end);
  }
}

double TemporalProfile::segment_value(const Segment& s, double t) const {
  switch (s.kind) {
    case SegmentKind::kConstant: return s.a;
    case SegmentKind::kLinear:
      return s.a + (s.b - s.a) * (t - s.t_start) / (s.t_end - s.t_start);
    case SegmentKind::kCosine: return s.a * std::cos(s.omega * t + s.phase);
    case SegmentKind::kSine: return s.a * std::sin(s.omega * t + s.phase);
  }
  return 0.0;
}

double TemporalProfile::segment_integral(const Segment& s, double t) const {
  const double tau = t - s.t_start;
  switch (s.kind) {
    case SegmentKind::kConstant: return s.a * tau;
    case SegmentKind::kLinear: {
      const double slope = (s.b - s.a) / (s.t_end - s.t_start);
      return s.a * tau + 0.5 * slope * tau * tau;
    }
    case SegmentKind::kCosine:
      return s.a / s.omega * (std::sin(s.omega * t + s.phase) - std::sin(s.omega * s.t_start + s.phase));
    case SegmentKind::kSine:
      return -s.a / s.omega * (std::cos(s.omega * t + s.phase) - std::cos(s.omega * s.t_start + s.phase));
  }
  return 0.0;
}

// ∫ over the segment of (f0 + ∫_{t_start}^t f)².
double TemporalProfile::segment_square_integral(const Segment& s, double f0) const {
  const double len = s.t_end - s.t_start;
  switch (s.kind) {
    case SegmentKind::kConstant:
      return f0 * f0 * len + f0 * s.a * len * len + s.a * s.a * len * len * len / 3.0;
    case SegmentKind::kLinear: {
      const double c0 = f0, c1 = s.a, c2 = 0.5 * (s.b - s.a) / len;
      const double p[5] = {c0 * c0, 2 * c0 * c1, c1 * c1 + 2 * c0 * c2, 2 * c1 * c2, c2 * c2};
      double sum = 0.0, pw = len;
      for (int k = 0; k < 5; ++k) {
        sum += p[k] * pw / (k + 1);
        pw *= len;
      }
      return sum;
    }
    case SegmentKind::kCosine: {
      const double th0 = s.omega * s.t_start + s.phase, th1 = s.omega * s.t_end + s.phase;
      const double amp = s.a / s.omega;
      const double c = f0 - amp * std::sin(th0);
      return c * c * len + 2 * c * amp * (std::cos(th0) - std::cos(th1)) / s.omega +
             amp * amp * (0.5 * len - (std::sin(2 * th1) - std::sin(2 * th0)) / (4 * s.omega));
    }
    case SegmentKind::kSine: {
      const double th0 = s.omega * s.t_start + s.phase, th1 = s.omega * s.t_end + s.phase;
      const double amp = s.a / s.omega;
      const double c = f0 + amp * std::cos(th0);
      return c * c * len - 2 * c * amp * (std::sin(th1) - std::sin(th0)) / s.omega +
             amp * amp * (0.5 * len + (std::sin(2 * th1) - std::sin(2 * th0)) / (4 * s.omega));
    }
  }
  return 0.0;
}

void TemporalProfile::check_time(double t) const {
  if (!(t >= -1e-9 * echo_time_ && t <= echo_time_ * (1 + 1e-9))) {
    fail(ErrorKind::kInvalidArgument, "time " + std::to_string(t) + " outside [0, T]");
  }
}

double TemporalProfile::f(double t) const {
  check_time(t);
  auto it = std::lower_bound(segments_.begin(), segments_.end(), t,
                             [](const Segment& s, double x) { return s.t_end < x; });
  if (it == segments_.end()) it = std::prev(segments_.end());
  return segment_value(*it, t);
}

double TemporalProfile::f_right(double t) const {
  check_time(t);
  auto it = std::upper_bound(segments_.begin(), segments_.end(), t,
                             [](double x, const Segment& s) { return x < s.t_end; });
  if (it == segments_.end()) it = std::prev(segments_.end());
  return segment_value(*it, t);
}

double TemporalProfile::integral(double t) const {
  check_time(t);
  t = std::clamp(t, 0.0, echo_time_);
  auto it = std::lower_bound(segments_.begin(), segments_.end(), t,
                             [](const Segment& s, double x) { return s.t_end < x; });
  if (it == segments_.end()) it = std::prev(segments_.end());
  const auto idx = static_cast<std::size_t>(it - segments_.begin());
  return start_integral_[idx] + segment_integral(*it, t);
}

std::vector<double> TemporalProfile::breakpoints() const {
  std::vector<double> out;
  for (const auto& s : segments_) out.push_back(s.t_end);
  return out;
}

namespace {

void check_pulse(double delta, double big_delta) {
  if (!(delta > 0.0) || !(delta <= big_delta) || !std::isfinite(big_delta)) {
    fail(ErrorKind::kInvalidArgument, "pulse timing requires 0 < delta <= Delta");
  }
}

Segment constant(double t0, double t1, double value) {
  return {t0, t1, SegmentKind::kConstant, value, value, 0.0, 0.0};
}

Segment linear(double t0, double t1, double from, double to) {
  return {t0, t1, SegmentKind::kLinear, from, to, 0.0, 0.0};
}

// One PGSE-shaped block starting at `offset`; `pulse` appends one lobe.
template <class Pulse>
void append_block(std::vector<Segment>& segs, double offset, double delta, double big_delta,
                  Pulse&& pulse) {
  pulse(segs, offset, 1.0);
  segs.push_back(constant(offset + delta, offset + big_delta, 0.0));
  pulse(segs, offset + big_delta, -1.0);
}

auto rect_lobe(double delta) {
  return [delta](std::vector<Segment>& segs, double t0, double sign) {
    segs.push_back(constant(t0, t0 + delta, sign));
  };
}

auto trap_lobe(double delta, double ramp) {
  return [delta, ramp](std::vector<Segment>& segs, double t0, double sign) {
    segs.push_back(linear(t0, t0 + ramp, 0.0, sign));
    segs.push_back(constant(t0 + ramp, t0 + delta - ramp, sign));
    segs.push_back(linear(t0 + delta - ramp, t0 + delta, sign, 0.0));
  };
}

TemporalProfile harmonic_ogse(double delta, double big_delta, int periods, SegmentKind kind) {
  check_pulse(delta, big_delta);
  if (periods < 1) fail(ErrorKind::kInvalidArgument, "OGSE needs at least one period");
  const double omega = 2.0 * periods * std::numbers::pi / delta;
  const double tau = 0.5 * (delta + big_delta);
  std::vector<Segment> segs;
  segs.push_back({0.0, delta, kind, 1.0, 0.0, omega, 0.0});
  segs.push_back(constant(delta, tau, 0.0));
  segs.push_back({tau, tau + delta, kind, -1.0, 0.0, omega, -omega * tau});
  segs.push_back(constant(tau + delta, delta + big_delta, 0.0));
  return TemporalProfile(std::move(segs), delta + big_delta);
}

}  // namespace

TemporalProfile pgse(double delta, double big_delta) {
  check_pulse(delta, big_delta);
  std::vector<Segment> segs;
  append_block(segs, 0.0, delta, big_delta, rect_lobe(delta));
  return TemporalProfile(std::move(segs), big_delta + delta);
}

TemporalProfile double_pgse(double delta, double big_delta) {
  check_pulse(delta, big_delta);
  std::vector<Segment> segs;
  append_block(segs, 0.0, delta, big_delta, rect_lobe(delta));
  append_block(segs, big_delta + delta, delta, big_delta, rect_lobe(delta));
  return TemporalProfile(std::move(segs), 2.0 * (big_delta + delta));
}

TemporalProfile cos_ogse(double delta, double big_delta, int periods) {
  return harmonic_ogse(delta, big_delta, periods, SegmentKind::kCosine);
}

TemporalProfile sin_ogse(double delta, double big_delta, int periods) {
  return harmonic_ogse(delta, big_delta, periods, SegmentKind::kSine);
}

TemporalProfile trapezoidal_pgse(double delta, double big_delta, double ramp) {
  check_pulse(delta, big_delta);
  if (!(ramp > 0.0 && ramp < 0.5 * delta)) {
    fail(ErrorKind::kInvalidArgument, "trapezoid ramp must satisfy 0 < ramp < delta/2");
  }
  std::vector<Segment> segs;
  append_block(segs, 0.0, delta, big_delta, trap_lobe(delta, ramp));
  return TemporalProfile(std::move(segs), big_delta + delta);
}

TemporalProfile double_trapezoidal_pgse(double delta, double big_delta, double ramp) {
  check_pulse(delta, big_delta);
  if (!(ramp > 0.0 && ramp < 0.5 * delta)) {
    fail(ErrorKind::kInvalidArgument, "trapezoid ramp must satisfy 0 < ramp < delta/2");
  }
  std::vector<Segment> segs;
  append_block(segs, 0.0, delta, big_delta, trap_lobe(delta, ramp));
  append_block(segs, big_delta + delta, delta, big_delta, trap_lobe(delta, ramp));
  return TemporalProfile(std::move(segs), 2.0 * (big_delta + delta));
}

double b_from_g(const TemporalProfile& p, double g) {
  if (!(g >= 0.0)) fail(ErrorKind::kInvalidArgument, "gradient amplitude must be non-negative");
  return kGyromagneticRatio * kGyromagneticRatio * g * g * p.b_factor();
}

double g_from_b(const TemporalProfile& p, double b) {
  if (!(b >= 0.0)) fail(ErrorKind::kInvalidArgument, "b-value must be non-negative");
  if (b == 0.0) return 0.0;
  if (!(p.b_factor() > 0.0)) {
    fail(ErrorKind::kNoEncoding, "waveform has zero b-factor; cannot reach b > 0");
  }
  return std::sqrt(b / (kGyromagneticRatio * kGyromagneticRatio * p.b_factor()));
}

GradientSpec::GradientSpec(const Vec3& dir, double amplitude, std::optional<double> b_value)
    : direction(dir), g(amplitude), b(b_value) {
  if (std::abs(dir.norm() - 1.0) > 1e-12) {
    fail(ErrorKind::kInvalidArgument, "gradient direction must be a unit vector");
  }
  if (!(amplitude >= 0.0)) fail(ErrorKind::kInvalidArgument, "gradient amplitude must be non-negative");
  if (b_value && !(*b_value >= 0.0)) fail(ErrorKind::kInvalidArgument, "b-value must be non-negative");
}

}  // namespace btsim

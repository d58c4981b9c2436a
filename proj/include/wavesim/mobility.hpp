#pragma once

// Straight-highway kinematics on a single axis.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>

#include "wavesim/engine.hpp"

namespace wavesim {

inline double kmh_to_ms(double kmh) {
  if (!(kmh >= 0)) throw std::invalid_argument("speed must be >= 0 km/h, got " + std::to_string(kmh));
  return kmh * 1000.0 / 3600.0;
}

/// Exact distance with denominator 3.6e9: one unit is the distance covered in
/// one microsecond at one metre per hour.
struct ExactDistance {
  static constexpr std::int64_t kUnitsPerMetre = 3'600'000'000;
  std::int64_t units = 0;

  double metres() const { return static_cast<double>(units) / kUnitsPerMetre; }
  friend constexpr auto operator<=>(ExactDistance, ExactDistance) = default;
};

class MobilityProfile {
 public:
  MobilityProfile() = default;
  /// Speeds are kept to a resolution of 1 m/h.
  MobilityProfile(double initial_position_m, double speed_kmh, int direction = +1,
                  SimTime start_time = SimTime{0})
      : x0_(initial_position_m), start_(start_time) {
    if (!(speed_kmh >= 0)) throw std::invalid_argument("speed_kmh must be >= 0");
    if (direction != 1 && direction != -1) throw std::invalid_argument("direction must be +1 or -1");
    if (!std::isfinite(initial_position_m)) throw std::invalid_argument("position must be finite");
    speed_m_per_h_ = std::llround(speed_kmh * 1000.0);
    direction_ = direction;
  }

  static MobilityProfile fixed(double position_m) { return MobilityProfile(position_m, 0.0); }

  double initial_position() const { return x0_; }
  double speed_kmh() const { return static_cast<double>(speed_m_per_h_) / 1000.0; }
  double speed_ms() const { return static_cast<double>(speed_m_per_h_) / 3600.0; }
  std::int64_t speed_m_per_h() const { return speed_m_per_h_; }
  int direction() const { return direction_; }
  SimTime start_time() const { return start_; }
  bool is_fixed() const { return speed_m_per_h_ == 0; }

  /// Signed travel between two instants, exact.
  ExactDistance displacement(SimTime t1, SimTime t2) const {
    check(t1);
    check(t2);
    return ExactDistance{direction_ * speed_m_per_h_ * (t2 - t1).count()};
  }

  double position_at(SimTime t) const {
    check(t);
    return x0_ + displacement(start_, t).metres();
  }

 private:
  void check(SimTime t) const {
    if (t < start_) {
      throw std::invalid_argument("position requested at t=" + std::to_string(t.count()) +
                                  " us, before the profile start " + std::to_string(start_.count()) + " us");
    }
  }

  double x0_ = 0.0;
  std::int64_t speed_m_per_h_ = 0;
  int direction_ = 1;
  SimTime start_{0};
};

inline double position_at(const MobilityProfile& p, SimTime t) { return p.position_at(t); }

/// Signed velocity in m/s along the road axis.
inline double velocity_ms(const MobilityProfile& p) { return p.direction() * p.speed_ms(); }

/// Time two nodes spend in range during one full pass: 2R/|v1 - v2|;
/// nullopt when the relative speed is zero (contact never ends).
inline std::optional<double> full_pass_contact_s(const MobilityProfile& a, const MobilityProfile& b,
                                                 double comm_range_m) {
  const double dv = std::abs(velocity_ms(a) - velocity_ms(b));
  if (dv == 0.0) return std::nullopt;
  return 2.0 * comm_range_m / dv;
}

/// In-range interval [enter, leave] of two linear trajectories, in seconds
/// measured from t = 0, clipped to t >= 0. Both profiles must start at 0.
/// Returns nullopt when they are never in range at t >= 0; leave is +inf when
/// they never separate.
struct ContactInterval {
  double enter_s = 0.0;
  double leave_s = std::numeric_limits<double>::infinity();
};

inline std::optional<ContactInterval> analytic_contact(const MobilityProfile& a, const MobilityProfile& b,
                                                       double comm_range_m) {
  const double d0 = b.initial_position() - a.initial_position();
  const double dv = velocity_ms(b) - velocity_ms(a);
  if (dv == 0.0) {
    if (std::abs(d0) <= comm_range_m) return ContactInterval{};
    return std::nullopt;
  }
  // |d0 + dv t| <= R  <=>  t in [(-R - d0)/dv, (R - d0)/dv] (ordered by sign of dv)
  double t1 = (-comm_range_m - d0) / dv;
  double t2 = (comm_range_m - d0) / dv;
  if (t1 > t2) std::swap(t1, t2);
  if (t2 < 0) return std::nullopt;
  return ContactInterval{std::max(0.0, t1), t2};
}

}  // namespace wavesim

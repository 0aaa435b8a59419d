#pragma once

// Adhesion and actuator sizing for the magnetic-wheeled robot.
//
// The friction terms follow the original sizing inequalities verbatim:
// rolling/steering friction is written as (F + P) / k, i.e. the adhesion and
// weight are *divided* by the static friction coefficient. Coulomb friction
// would multiply; the division is kept on purpose so the numbers reproduce
// the published design and must not be "corrected" here.

#include "magbike/geometry.hpp"

#include <string>
#include <vector>

namespace magbike::statics {

using geometry::DomainError;
using geometry::Vec3;

inline constexpr double kGravity = 9.81;

/// kg*cm (as printed on servo/motor datasheets) to N*m.
constexpr double kgcm_to_nm(double kgcm) { return kgcm * kGravity / 100.0; }

struct RobotParams {
  double mass{1.0};               // kg, robot without sensors
  double payload{0.6};            // kg
  double wheel_radius{0.03};      // m (assumed)
  double wheelbase{0.11};         // m, X1X2 at the straight pose (assumed)
  double wheel_gap{0.04};         // m
  double com_height{0.035};       // m, h (assumed, half the body height)
  double friction_k{0.6};         // silicone on steel (assumed)
  double magnet_force{100.0};     // N per wheel on flat thick steel (assumed)
  double inter_wheel_force{2.0};  // N, F12 (assumed)
  double motor_torque{kgcm_to_nm(100.0)};
  double servo_torque{kgcm_to_nm(32.0)};
  double sf_adhesion{5.0};
  double sf_torque{2.0};

  /// P = (mass + payload) * g
  double weight() const { return (mass + payload) * kGravity; }

  /// Throws DomainError naming the first violated field.
  void validate() const;
};

/// Front-wheel loads while passing an internal corner between two surfaces.
struct CornerLoadCase {
  std::string name;
  double f_2_1{0.0};  // adhesion of the front wheel at surface 1, N
  double f_2_2{0.0};  // adhesion of the front wheel at surface 2, N
  double weight{0.0};  // P, N
};

struct Contact {
  Vec3 point;
  double adhesion{0.0};
  Vec3 normal;
};

struct ContactSet {
  std::vector<Contact> contacts;
  Vec3 center_of_mass{Vec3::Zero()};
  double weight{0.0};
};

/// Minimum front-wheel adhesion so that F2 * lever >= sf * P * h.
double required_adhesion(double weight, double com_height, double lever, double sf);

/// sf * r * (F21 + (F22 + P) / k)
double required_moving_torque(double wheel_radius, const CornerLoadCase& load, double k, double sf);

/// sf * r * (F12 + (F2 + P) / k)
double required_steering_torque(double wheel_radius, double f12, double f2, double weight, double k,
                                double sf);

/// Ratio of the adhesion restoring moment to the weight overturning moment
/// about the worst tipping axis. Each candidate axis passes through one
/// contact, lies in that contact's tangent plane and is perpendicular to the
/// direction towards another contact. The overturning moment assumes the
/// worst gravity direction tangent to the pivot surface (climbing a wall), so
/// its arm is the height of the centre of mass above the pivot's tangent
/// plane. For two coplanar contacts this is min(F) * |X1X2| / (P * h).
/// Returns 0 for a single contact and +inf when nothing can overturn.
double tip_over_margin(const ContactSet& contacts);

struct Requirement {
  std::string name;
  std::string formula_id;
  std::string load_case;
  double theoretical{0.0};
  double safety_factor{1.0};
  double required{0.0};
  double available{0.0};
  bool pass{false};
};

struct FeasibilityReport {
  std::vector<Requirement> requirements;
  bool pass{false};
};

/// Nominal flat-surface checks (no corner loads: F21 = F22 = F2 = 0) plus a
/// moving- and steering-torque check per worst case.
FeasibilityReport actuator_feasibility(const RobotParams& params,
                                       const std::vector<CornerLoadCase>& worst_cases);

std::string format_report(const FeasibilityReport& report);

}  // namespace magbike::statics

#include "magbike/statics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace magbike::statics {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw DomainError(what);
}

}  // namespace

void RobotParams::validate() const {
  require(mass > 0.0, "mass must be > 0");
  require(payload >= 0.0, "payload must be >= 0");
  require(wheel_radius > 0.0, "wheel_radius must be > 0");
  require(wheelbase > 0.0, "wheelbase must be > 0");
  require(wheel_gap > 0.0, "wheel_gap must be > 0");
  require(com_height > 0.0, "com_height must be > 0");
  require(friction_k > 0.0 && friction_k <= 2.0, "friction_k must lie in (0, 2]");
  require(magnet_force > 0.0, "magnet_force must be > 0");
  require(inter_wheel_force > 0.0, "inter_wheel_force must be > 0");
  require(motor_torque > 0.0, "motor_torque must be > 0");
  require(servo_torque > 0.0, "servo_torque must be > 0");
  require(sf_adhesion >= 1.0, "sf_adhesion must be >= 1");
  require(sf_torque >= 1.0, "sf_torque must be >= 1");
}

double required_adhesion(double weight, double com_height, double lever, double sf) {
  require(lever > 0.0, "lever X1X2 must be > 0");
  require(weight >= 0.0 && com_height >= 0.0, "weight and com height must be >= 0");
  return sf * weight * com_height / lever;
}

double required_moving_torque(double wheel_radius, const CornerLoadCase& load, double k, double sf) {
  require(wheel_radius > 0.0, "wheel radius must be > 0");
  require(k > 0.0, "friction coefficient must be > 0");
  return sf * wheel_radius * (load.f_2_1 + (load.f_2_2 + load.weight) / k);
}

double required_steering_torque(double wheel_radius, double f12, double f2, double weight, double k,
                                double sf) {
  require(wheel_radius > 0.0, "wheel radius must be > 0");
  require(k > 0.0, "friction coefficient must be > 0");
  return sf * wheel_radius * (f12 + (f2 + weight) / k);
}

double tip_over_margin(const ContactSet& set) {
  const auto& cs = set.contacts;
  if (cs.empty()) throw DomainError("contact set is empty");
  if (cs.size() == 1) return 0.0;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    for (std::size_t j = i + 1; j < cs.size(); ++j) {
      if ((cs[i].point - cs[j].point).norm() < 1e-12) {
        throw DomainError("coincident contact points");
      }
    }
  }
  double margin = std::numeric_limits<double>::infinity();
  bool any_axis = false;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const Vec3& pivot = cs[i].point;
    const Vec3 n = cs[i].normal.normalized();
    const double overturn = set.weight * std::abs((set.center_of_mass - pivot).dot(n));
    for (std::size_t j = 0; j < cs.size(); ++j) {
      if (j == i) continue;
      const Vec3 axis_raw = n.cross(cs[j].point - pivot);
      if (axis_raw.norm() < 1e-12) continue;
      const Vec3 axis = axis_raw.normalized();
      any_axis = true;
      double restoring = 0.0;
      for (std::size_t k = 0; k < cs.size(); ++k) {
        if (k == i) continue;
        const Vec3 arm = cs[k].point - pivot;
        restoring += cs[k].adhesion * std::abs(axis.dot(arm.cross(cs[k].normal.normalized())));
      }
      if (overturn > 0.0) margin = std::min(margin, restoring / overturn);
    }
  }
  if (!any_axis) throw DomainError("contacts are stacked along the surface normal");
  return margin;
}

FeasibilityReport actuator_feasibility(const RobotParams& params,
                                       const std::vector<CornerLoadCase>& worst_cases) {
  FeasibilityReport report;
  const double p = params.weight();
  const double r = params.wheel_radius;
  const double k = params.friction_k;

  auto add = [&report](Requirement req) {
    req.pass = req.required <= req.available;
    report.requirements.push_back(std::move(req));
  };

  {
    Requirement req;
    req.name = "front-wheel adhesion";
    req.formula_id = "adhesion_tipover";
    req.load_case = "nominal";
    req.safety_factor = params.sf_adhesion;
    req.theoretical = required_adhesion(p, params.com_height, params.wheelbase, 1.0);
    req.required = required_adhesion(p, params.com_height, params.wheelbase, params.sf_adhesion);
    req.available = params.magnet_force;
    add(req);
  }

  auto moving = [&](const CornerLoadCase& c) {
    Requirement req;
    req.name = "moving motor torque";
    req.formula_id = "moving_torque";
    req.load_case = c.name;
    req.safety_factor = params.sf_torque;
    req.theoretical = required_moving_torque(r, c, k, 1.0);
    req.required = required_moving_torque(r, c, k, params.sf_torque);
    req.available = params.motor_torque;
    add(req);
  };
  auto steering = [&](const std::string& name, double f2, double weight) {
    Requirement req;
    req.name = "steering servo torque";
    req.formula_id = "steering_torque";
    req.load_case = name;
    req.safety_factor = params.sf_torque;
    req.theoretical = required_steering_torque(r, params.inter_wheel_force, f2, weight, k, 1.0);
    req.required =
        required_steering_torque(r, params.inter_wheel_force, f2, weight, k, params.sf_torque);
    req.available = params.servo_torque;
    add(req);
  };

  moving(CornerLoadCase{"nominal", 0.0, 0.0, p});
  steering("nominal", 0.0, p);
  for (const auto& c : worst_cases) {
    moving(c);
    steering(c.name, std::max(c.f_2_1, c.f_2_2), c.weight);
  }

  report.pass = std::all_of(report.requirements.begin(), report.requirements.end(),
                            [](const Requirement& q) { return q.pass; });
  return report;
}

std::string format_report(const FeasibilityReport& report) {
  std::ostringstream out;
  out << std::left << std::setw(24) << "requirement" << std::setw(18) << "case" << std::right
      << std::setw(12) << "theoretical" << std::setw(5) << "sf" << std::setw(12) << "required"
      << std::setw(12) << "available" << "  result\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& r : report.requirements) {
    const char* unit = r.formula_id == "adhesion_tipover" ? " N  " : " N*m";
    out << std::left << std::setw(24) << r.name << std::setw(18) << r.load_case << std::right
        << std::setw(12) << r.theoretical << std::setw(5) << std::setprecision(1)
        << r.safety_factor << std::setprecision(4) << std::setw(12) << r.required << std::setw(12)
        << r.available << unit << (r.pass ? "  PASS" : "  FAIL") << "\n";
  }
  out << "overall: " << (report.pass ? "PASS" : "FAIL") << "\n";
  return out.str();
}

}  // namespace magbike::statics

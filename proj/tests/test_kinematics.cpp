#include "magbike/kinematics.hpp"
#include "magbike/simulator.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace magbike;
using namespace magbike::kinematics;
using magbike::test::Gen;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double L = 0.11;

Vec2 rolling(double delta) { return {std::cos(delta), std::sin(delta)}; }
double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Contacts in body-centre coordinates.
const Vec2 kBack(-L / 2, 0.0);
const Vec2 kFront(L / 2, 0.0);

}  // namespace

TEST(Kinematics, StraightSteeringTranslates) {
  const auto c = icr({0.0, 0.0}, L);
  EXPECT_EQ(c.kind, IcrKind::Translation);
  const auto t = body_twist({0.0, 0.0}, 0.1, L);
  EXPECT_DOUBLE_EQ(t.twist.vx, 0.1);
  EXPECT_DOUBLE_EQ(t.twist.vy, 0.0);
  EXPECT_DOUBLE_EQ(t.twist.omega, 0.0);
  EXPECT_DOUBLE_EQ(t.v_front_required, 0.1);
}

TEST(Kinematics, FrontAcrossPivotsAboutBackContact) {
  const auto c = icr({kPi / 2, 0.0}, L);
  ASSERT_EQ(c.kind, IcrKind::Point);
  EXPECT_LT(c.point.norm(), 1e-12);
  const auto t = body_twist({kPi / 2, 0.0}, 0.0, L, 0.1);
  EXPECT_LT(point_velocity(t.twist, kBack).norm(), 1e-12);
  EXPECT_NEAR(t.twist.omega, 0.1 / L, 1e-12);
}

TEST(Kinematics, BackSpeedWhileBackIsPivotIsSlip) {
  try {
    body_twist({kPi / 2, 0.0}, 0.05, L, 0.1);
    FAIL() << "expected SlipError";
  } catch (const SlipError& e) {
    EXPECT_DOUBLE_EQ(e.residual(), 0.05);
  }
}

TEST(Kinematics, BothAcrossMovesSideways) {
  const auto c = icr({kPi / 2, kPi / 2}, L);
  EXPECT_EQ(c.kind, IcrKind::AxleLinesCoincide);
  const auto t = body_twist({kPi / 2, kPi / 2}, 0.1, L);
  EXPECT_NEAR(t.twist.vx, 0.0, 1e-12);
  EXPECT_NEAR(t.twist.vy, 0.1, 1e-12);
  EXPECT_NEAR(t.twist.omega, 0.0, 1e-12);
  EXPECT_NEAR(t.v_front_required, 0.1, 1e-12);
}

TEST(Kinematics, OppositeSpeedsSpinAboutCentre) {
  const auto t = body_twist({kPi / 2, kPi / 2}, -0.1, L, 0.1);
  // Rigid-body oracle: two points L apart moving +-0.1 perpendicular to the
  // segment joining them rotate at (0.1 - (-0.1)) / L about the midpoint.
  EXPECT_NEAR(t.twist.omega, 2 * 0.1 / L, 1e-12);
  EXPECT_NEAR(t.twist.vx, 0.0, 1e-12);
  EXPECT_NEAR(t.twist.vy, 0.0, 1e-12);
}

TEST(Kinematics, IcrMatchesLineIntersectionOracle) {
  const auto c = icr({kPi / 6, 0.0}, L);
  ASSERT_EQ(c.kind, IcrKind::Point);
  const auto o = test::intersect_lines({0, 0}, {0, 1}, {L, 0}, {-std::sin(kPi / 6), std::cos(kPi / 6)});
  ASSERT_TRUE(o);
  EXPECT_NEAR((c.point - *o).norm(), 0.0, 1e-12);
  EXPECT_NEAR(c.point.y(), L / std::tan(kPi / 6), 1e-12);
  EXPECT_NEAR(c.point.x(), 0.0, 1e-12);

  Gen gen(31);
  for (int i = 0; i < 1000; ++i) {
    const double df = gen.uniform(-1.5, 1.5), db = gen.uniform(-1.5, 1.5);
    if (std::abs(std::sin(df - db)) < 1e-3) continue;
    const auto got = icr({df, db}, L);
    const auto want = test::intersect_lines({0, 0}, {-std::sin(db), std::cos(db)}, {L, 0},
                                            {-std::sin(df), std::cos(df)});
    ASSERT_TRUE(want);
    EXPECT_LT((got.point - *want).norm(), 1e-9 * std::max(1.0, want->norm()));
  }
}

TEST(Kinematics, RollingConstraintHoldsOnRandomCommands) {
  Gen gen(32);
  for (int i = 0; i < 1000; ++i) {
    const SteeringState s{gen.uniform(-kPi / 2 + 1e-3, kPi / 2 - 1e-3), gen.uniform(-kPi / 2, kPi / 2)};
    const double vb = gen.uniform(-0.2, 0.2);
    const auto t = body_twist(s, vb, L);
    const Vec2 back = point_velocity(t.twist, kBack);
    const Vec2 front = point_velocity(t.twist, kFront);
    EXPECT_LT(std::abs(cross2(back, rolling(s.delta_back))), 1e-9);
    EXPECT_LT(std::abs(cross2(front, rolling(s.delta_front))), 1e-9);
    EXPECT_NEAR(back.dot(rolling(s.delta_back)), vb, 1e-9);
    EXPECT_NEAR(front.dot(rolling(s.delta_front)), t.v_front_required, 1e-9);
  }
}

TEST(Kinematics, SpeedRatioEqualsIcrRadiusRatio) {
  Gen gen(33);
  for (int i = 0; i < 500; ++i) {
    const SteeringState s{gen.uniform(-1.4, 1.4), gen.uniform(-1.4, 1.4)};
    const auto c = icr(s, L);
    if (c.kind != IcrKind::Point || std::abs(std::sin(s.delta_front - s.delta_back)) < 1e-3) continue;
    const auto t = body_twist(s, 0.1, L);
    const double rb = c.point.norm();
    const double rf = (c.point - Vec2(L, 0)).norm();
    if (rb < 1e-6) continue;
    EXPECT_LT(test::rel_err(std::abs(t.v_front_required / 0.1), rf / rb), 1e-9);
  }
}

TEST(Kinematics, ParallelSteeringNeverRotates) {
  Gen gen(34);
  for (int i = 0; i < 1000; ++i) {
    const double d = gen.uniform(-1.5, 1.5);
    const auto t = body_twist({d, d}, gen.uniform(-0.2, 0.2), L);
    EXPECT_EQ(t.twist.omega, 0.0);
  }
}

TEST(Kinematics, ZeroTwistLeavesPoseUnchanged) {
  const auto p = test::plane("p", Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), 1, 1);
  const geometry::SurfacePose pose{"p", 0.3, 0.4, 0.7};
  const auto r = integrate_pose(p, pose, {}, 0.01);
  EXPECT_EQ(r.pose.u, pose.u);
  EXPECT_EQ(r.pose.v, pose.v);
  EXPECT_EQ(r.pose.heading, pose.heading);
}

TEST(Kinematics, UnitStepAdvancesAlongU) {
  const auto p = test::plane("p", Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), 1, 1);
  const auto r = integrate_pose(p, {"p", 0.3, 0.4, 0.0}, {0.1, 0, 0}, 1.0, 1.0);
  EXPECT_NEAR(r.pose.u, 0.4, 1e-15);
  EXPECT_EQ(r.pose.v, 0.4);
  EXPECT_EQ(r.pose.heading, 0.0);
}

TEST(Kinematics, DtAboveLimitIsRejected) {
  const auto p = test::plane("p", Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), 1, 1);
  EXPECT_THROW(integrate_pose(p, {"p", 0.3, 0.4, 0.0}, {0.1, 0, 0}, 0.06), geometry::DomainError);
  EXPECT_THROW(integrate_pose(p, {"p", 0.3, 0.4, 0.0}, {0.1, 0, 0}, 0.0), geometry::DomainError);
}

TEST(Kinematics, LeavingThePatchIsReported) {
  const auto p = test::plane("p", Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), 1, 1);
  const auto r = integrate_pose(p, {"p", 0.999, 0.4, 0.0}, {0.2, 0, 0}, 0.05);
  ASSERT_TRUE(r.boundary.has_value());
  EXPECT_EQ(*r.boundary, geometry::Side::UMax);
  EXPECT_GT(r.pose.u, 1.0);
}

TEST(Kinematics, SmallStepsFollowClosedFormArc) {
  const auto p = test::plane("p", Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), 10, 10);
  const BodyTwist tw{0.1, 0.02, 0.4};
  geometry::SurfacePose pose{"p", 5.0, 5.0, 0.3};
  const double dt = 0.005;
  for (int i = 0; i < 1000; ++i) pose = integrate_pose(p, pose, tw, dt).pose;
  // Closed form: velocity (vx, vy) rotating at omega from heading 0.3.
  const double T = 1000 * dt, h0 = 0.3, w = tw.omega;
  const double x = 5.0 + (tw.vx * (std::sin(h0 + w * T) - std::sin(h0)) +
                          tw.vy * (std::cos(h0 + w * T) - std::cos(h0))) / w;
  const double y = 5.0 + (-tw.vx * (std::cos(h0 + w * T) - std::cos(h0)) +
                          tw.vy * (std::sin(h0 + w * T) - std::sin(h0))) / w;
  EXPECT_LT(std::hypot(pose.u - x, pose.v - y), 1e-6);
  EXPECT_NEAR(geometry::wrap_angle(pose.heading - (h0 + w * T)), 0.0, 1e-9);
}

TEST(Kinematics, ConstantTwistOnCylinderTracesHelix) {
  const double R = 0.0755;
  const auto c = test::cylinder("tube", R, 10.0);
  for (double delta : {0.1, 0.5236, 1.0}) {
    // Heading pi/2 is circumferential; steering delta tilts towards +u.
    geometry::SurfacePose pose{"tube", 5.0, 0.0, kPi / 2};
    const auto t = body_twist({delta, delta}, 0.1, L);
    double unwrapped = 0.0;
    double prev_v = pose.v;
    for (int i = 0; i < 2000; ++i) {
      pose = integrate_pose(c, pose, t.twist, 0.01).pose;
      double dv = pose.v - prev_v;
      if (dv > kPi) dv -= 2 * kPi;
      if (dv < -kPi) dv += 2 * kPi;
      unwrapped += dv;
      prev_v = pose.v;
    }
    const double pitch = std::abs((pose.u - 5.0) / (unwrapped / (2 * kPi)));
    EXPECT_LT(test::rel_err(pitch, spiral_pitch(R, delta)), 1e-9) << delta;
  }
}

TEST(Kinematics, SpiralPitchValues) {
  EXPECT_EQ(spiral_pitch(0.1, 0.0), 0.0);
  EXPECT_NEAR(spiral_pitch(0.1, kPi / 4), 2 * kPi * 0.1, 1e-12);
  EXPECT_NEAR(spiral_pitch(0.1, kPi / 4), 0.6283, 1e-4);
  EXPECT_THROW(spiral_pitch(0.1, kPi / 2), AxialPathError);
  EXPECT_THROW(spiral_pitch(0.0, 0.2), geometry::DomainError);
}

TEST(Kinematics, FreeJointRollExamples) {
  EXPECT_NEAR(free_joint_roll(Vec3::UnitZ(), Vec3::UnitZ(), Vec3::UnitX()), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(free_joint_roll(Vec3::UnitY(), Vec3::UnitZ(), Vec3::UnitX())), kPi / 2, 1e-12);
  EXPECT_THROW(free_joint_roll(Vec3::UnitX(), Vec3::UnitZ(), Vec3::UnitX()), geometry::DomainError);
}

TEST(Kinematics, FreeJointRollMatchesProjectedAngleOracle) {
  Gen gen(35);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 axis = gen.unit();
    const Vec3 nf = gen.unit();
    const Vec3 nb = gen.unit();
    const Vec3 pb = nb - nb.dot(axis) * axis;
    const Vec3 pf = nf - nf.dot(axis) * axis;
    if (pb.norm() < 1e-3 || pf.norm() < 1e-3) continue;
    const Vec3 e1 = pb.normalized();
    const Vec3 e2 = axis.cross(e1);
    const double want = std::atan2(pf.dot(e2), pf.dot(e1));
    EXPECT_NEAR(geometry::wrap_angle(free_joint_roll(nf, nb, axis) - want), 0.0, 1e-9);
  }
}

TEST(Kinematics, RotationOnSpotReturnsToStart) {
  auto scenario = test::flat_scenario();
  const sim::Simulator simulator(scenario.structure, scenario.params, scenario.config);
  const SteeringState across{kPi / 2, kPi / 2};
  auto state = simulator.initial_state(scenario.initial_pose, across);
  const Vec3 start = state.position;
  const double omega = 2 * 0.1 / L;
  const double T = 2 * kPi / omega;
  const int n = static_cast<int>(std::ceil(T / 0.01));
  const double dt = T / n;
  sim::Command cmd{across, {-0.1, 0.1}};
  for (int i = 0; i < n; ++i) state = simulator.step(state, cmd, dt).state;
  EXPECT_LT((state.position - start).norm(), 1e-6 * L);
  EXPECT_NEAR(geometry::wrap_angle(state.pose.heading - scenario.initial_pose.heading), 0.0, 1e-9);
}

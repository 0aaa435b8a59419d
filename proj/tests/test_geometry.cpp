#include "magbike/geometry.hpp"
#include "magbike/structure_io.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

using namespace magbike;
using namespace magbike::geometry;
using magbike::test::Gen;

namespace {

// Chord-sum length of the surface curve that is a straight developed line,
// Richardson-extrapolated from two resolutions.
double sampled_length(const SurfacePatch& patch, const Vec2& xy0, const Vec2& xy1) {
  auto chords = [&](int n) {
    double total = 0.0;
    Vec3 prev = point_at_plane(patch, xy0);
    for (int i = 1; i <= n; ++i) {
      const Vec3 p = point_at_plane(patch, xy0 + (xy1 - xy0) * (static_cast<double>(i) / n));
      total += (p - prev).norm();
      prev = p;
    }
    return total;
  };
  const double coarse = chords(2000);
  const double fine = chords(4000);
  return (4.0 * fine - coarse) / 3.0;
}

}  // namespace

TEST(Geometry, DevelopmentIsIsometricOnRandomCylinders) {
  Gen gen(11);
  for (int i = 0; i < 1000; ++i) {
    const double R = gen.uniform(0.05, 2.0);
    const Vec3 axis = gen.unit();
    Vec3 radial = axis.unitOrthogonal();
    const auto kind = gen.coin() ? PatchKind::CylinderOuter : PatchKind::CylinderInner;
    const auto patch = test::cylinder("c", R, 3.0, kind, Vec3(gen.uniform(-1, 1), 0, 0), axis, radial);
    const Development dev(patch);
    const Vec2 a(gen.uniform(0, 3), gen.uniform(0, 2 * std::numbers::pi));
    const Vec2 b(gen.uniform(0, 3), gen.uniform(0, 2 * std::numbers::pi));
    const Vec2 xa = dev.to_plane(a);
    const Vec2 xb = dev.to_plane(b);
    const double developed = (xb - xa).norm();
    const double surface = sampled_length(patch, xa, xb);
    EXPECT_LT(test::rel_err(developed, surface), 1e-9) << "R=" << R;
  }
}

TEST(Geometry, DevelopmentRoundTrip) {
  const auto patch = test::cylinder("c", 0.2, 1.0);
  const Development dev(patch);
  const Vec2 uv(0.3, 1.7);
  EXPECT_NEAR((dev.to_surface(dev.to_plane(uv)) - uv).norm(), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(dev.y_max(), 0.2 * 2 * std::numbers::pi);
}

TEST(Geometry, NormalMatchesDifferencedTangents) {
  Gen gen(12);
  for (int i = 0; i < 200; ++i) {
    const Vec3 axis = gen.unit();
    SurfacePatch patch;
    if (gen.coin()) {
      const Vec3 av = axis.unitOrthogonal();
      patch = test::plane("p", Vec3::Zero(), axis, av, 1.0, 1.0);
    } else {
      patch = test::cylinder("c", gen.uniform(0.05, 1.0), 1.0,
                             gen.coin() ? PatchKind::CylinderOuter : PatchKind::CylinderInner,
                             Vec3::Zero(), axis, axis.unitOrthogonal());
    }
    const Vec2 uv(gen.uniform(0.1, 0.9), gen.uniform(0.1, 0.9));
    const double h = 1e-6;
    const auto p = [&](const Vec2& q) { return point_and_normal(patch, q).point; };
    const Vec3 du = (p(uv + Vec2(h, 0)) - p(uv - Vec2(h, 0))) / (2 * h);
    const Vec3 dv = (p(uv + Vec2(0, h)) - p(uv - Vec2(0, h))) / (2 * h);
    const Vec3 expected = du.cross(dv).normalized();
    EXPECT_LT((point_and_normal(patch, uv).normal - expected).norm(), 1e-6);
  }
}

TEST(Geometry, InnerCylinderNormalFacesAxis) {
  const auto outer = test::cylinder("o", 0.3, 1.0, PatchKind::CylinderOuter);
  const auto inner = test::cylinder("i", 0.3, 1.0, PatchKind::CylinderInner);
  for (double v : {0.0, 1.0, 2.5, 4.0}) {
    const auto po = point_and_normal(outer, {0.5, v});
    const auto pi = point_and_normal(inner, {0.5, v});
    const Vec3 ro(po.point.x(), po.point.y(), 0.0);
    const Vec3 ri(pi.point.x(), pi.point.y(), 0.0);
    EXPECT_GT(po.normal.dot(ro), 0.0);
    EXPECT_LT(pi.normal.dot(ri), 0.0);
  }
}

TEST(Geometry, CrossJointIsAnInvolution) {
  const auto model = test::floor_wall();
  Gen gen(13);
  for (int i = 0; i < 100; ++i) {
    const SurfacePose on_floor{"floor", 1.0, gen.uniform(0, 0.5), gen.uniform(-3, 3)};
    const auto on_wall = cross_joint(model, on_floor, model.joints[0]);
    EXPECT_EQ(on_wall.patch, "wall");
    const Vec3 a = point_and_normal(model.patch("floor"), {on_floor.u, on_floor.v}).point;
    const Vec3 b = point_and_normal(model.patch("wall"), {on_wall.u, on_wall.v}).point;
    EXPECT_LT((a - b).norm(), 1e-9);
    const auto back = cross_joint(model, on_wall, model.joints[0]);
    EXPECT_EQ(back.patch, "floor");
    const Vec3 c = point_and_normal(model.patch("floor"), {back.u, back.v}).point;
    EXPECT_LT((a - c).norm(), 1e-9);
    EXPECT_NEAR(wrap_angle(back.heading - on_floor.heading), 0.0, 1e-12);
  }
}

TEST(Geometry, CrossJointRejectsPoseAwayFromEdge) {
  const auto model = test::floor_wall();
  EXPECT_THROW(cross_joint(model, {"floor", 0.5, 0.2, 0.0}, model.joints[0]), DomainError);
}

TEST(Geometry, ValidPlaneHasNoIssues) {
  const auto model = test::single(test::plane("p", Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), 1, 1));
  EXPECT_TRUE(validate_structure(model).empty());
}

TEST(Geometry, DanglingJointIsAStructuralError) {
  auto model = test::floor_wall();
  model.joints[0].b.patch = "missing";
  EXPECT_THROW(validate_structure(model), StructureError);
}

TEST(Geometry, ThinCylinderIsFlagged) {
  const auto model = test::single(test::cylinder("bar", 0.05, 1.0));
  const auto issues = validate_structure(model);
  ASSERT_FALSE(issues.empty());
  EXPECT_EQ(issues[0].code, Issue::Code::BelowMinDiameter);
}

TEST(Geometry, ShippedTubeMeetsDiameterRule) {
  const auto model = io::load_structure(test::data_dir() / "structures/tube.yaml");
  EXPECT_TRUE(validate_structure(model).empty());
}

TEST(Geometry, OutOfBoundsParametersThrow) {
  const auto p = test::plane("p", Vec3::Zero(), Vec3::UnitX(), Vec3::UnitY(), 1, 1);
  EXPECT_THROW(point_and_normal(p, {1.5, 0.5}), DomainError);
}

TEST(Geometry, AtlasWalksAcrossTheCorner) {
  const auto model = test::floor_wall();
  const Atlas atlas(model);
  const auto r = atlas.walk(0, {0.8, 0.25}, {1.3, 0.25});
  EXPECT_EQ(model.patches[r.patch].id, "wall");
  ASSERT_EQ(r.crossings.size(), 1u);
  const Vec2 uv = atlas.development(r.patch).to_surface(r.xy);
  EXPECT_NEAR(uv.x(), 0.3, 1e-12);
  EXPECT_NEAR(uv.y(), 0.25, 1e-12);
  EXPECT_FALSE(r.blocked_side.has_value());
}

TEST(Geometry, AtlasStopsAtFreeSide) {
  const auto model = test::floor_wall();
  const Atlas atlas(model);
  const auto r = atlas.walk(0, {0.5, 0.25}, {0.5, 0.8});
  ASSERT_TRUE(r.blocked_side.has_value());
  EXPECT_EQ(*r.blocked_side, Side::VMax);
}

TEST(Geometry, RaycastHitsFloor) {
  const auto model = test::floor_wall();
  const auto hit = raycast(model, Vec3(0.5, 0.25, 1.0), Vec3(0, 0, -1));
  ASSERT_TRUE(hit.has_value());
  EXPECT_EQ(model.patches[hit->patch].id, "floor");
  EXPECT_NEAR(hit->distance, 1.0, 1e-12);
}

TEST(GeometryIo, StructureRoundTripsThroughYaml) {
  const auto model = io::load_structure(test::data_dir() / "structures/corner_internal.yaml");
  const auto again = io::parse_structure_string(io::dump_structure(model));
  ASSERT_EQ(again.patches.size(), model.patches.size());
  ASSERT_EQ(again.joints.size(), 1u);
  EXPECT_EQ(again.joints[0].kind, JointKind::Internal);
  EXPECT_NEAR(again.joints[0].dihedral, std::numbers::pi / 2, 1e-12);
}

TEST(GeometryIo, AnnotatesMissingDihedral) {
  const auto model = io::load_structure(test::data_dir() / "structures/inspection_corner.yaml");
  EXPECT_EQ(model.joints[0].kind, JointKind::Internal);
  EXPECT_NEAR(model.joints[0].dihedral, std::numbers::pi / 2, 1e-9);
}

TEST(GeometryIo, RejectsUnknownKind) {
  const char* text = R"(version: 1
patches:
  - {id: a, kind: sphere, origin: [0,0,0], axis_u: [1,0,0], axis_v: [0,1,0], bounds: {u: [0,1], v: [0,1]}}
)";
  EXPECT_ANY_THROW(io::parse_structure_string(text));
}

#include "magbike/synthetic.hpp"

#include <opencv2/core.hpp>

#include <cmath>
#include <random>

namespace magbike::inspection::synthetic {

namespace {

const cv::Vec3b kRust(30, 70, 150);  // BGR, hue ~20 deg

struct RustFootprint {
  std::size_t patch;
  Vec2 center;
  double half;
};

}  // namespace

Vec3 rust_center(const geometry::StructureModel& structure, const PlantedRust& rust) {
  return geometry::point_and_normal(structure.patch(rust.patch), {rust.u, rust.v}).point;
}

Rigid3 camera_pose(const geometry::StructureModel& structure, const sim::RobotState& state,
                   const CameraMount& mount) {
  const auto& patch = structure.patch(state.pose.patch);
  const Vec2 uv(state.pose.u, state.pose.v);
  const Vec3 n = geometry::point_and_normal(patch, uv).normal;
  const Vec3 f = geometry::heading_direction(patch, uv, state.pose.heading);
  const double c = std::cos(mount.tilt);
  const double s = std::sin(mount.tilt);
  const Vec3 z = c * f - s * n;
  const Vec3 x = f.cross(n);
  const Vec3 y = z.cross(x);
  Rigid3 T = Rigid3::Identity();
  T.linear().col(0) = x;
  T.linear().col(1) = y;
  T.linear().col(2) = z;
  T.translation() = state.position + mount.height * n + mount.forward * f;
  return T;
}

CameraIntrinsics default_intrinsics() {
  CameraIntrinsics K;
  K.fx = 250.0;
  K.fy = 250.0;
  K.cx = 159.5;
  K.cy = 119.5;
  K.width = 320;
  K.height = 240;
  return K;
}

RenderedFrame render(const geometry::StructureModel& structure,
                     const std::vector<PlantedRust>& rusts, const CameraIntrinsics& K,
                     const Rigid3& world_T_camera) {
  std::vector<geometry::Development> devs;
  devs.reserve(structure.patches.size());
  for (const auto& p : structure.patches) devs.emplace_back(p);
  std::vector<RustFootprint> prints;
  for (const auto& r : rusts) {
    const auto idx = structure.patch_index(r.patch);
    if (!idx) throw geometry::StructureError("rust on unknown patch '" + r.patch + "'");
    prints.push_back({*idx, devs[*idx].to_plane({r.u, r.v}), 0.5 * r.size});
  }

  RenderedFrame out{cv::Mat(K.height, K.width, CV_8UC3, cv::Scalar(0, 0, 0)),
                    DepthImage(K.width, K.height)};
  const Eigen::Matrix3d R = world_T_camera.linear();
  const Vec3 origin = world_T_camera.translation();
  for (int y = 0; y < K.height; ++y) {
    auto* row = out.bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < K.width; ++x) {
      const Vec3 ray = Vec3((x - K.cx) / K.fx, (y - K.cy) / K.fy, 1.0).normalized();
      const auto hit = geometry::raycast(structure, origin, R * ray);
      if (!hit) continue;
      out.depth.at(x, y) = static_cast<float>(hit->distance * ray.z());
      const Vec2 xy = devs[hit->patch].to_plane(hit->uv);
      bool rusty = false;
      for (const auto& fp : prints) {
        if (fp.patch == hit->patch && std::abs(xy.x() - fp.center.x()) <= fp.half &&
            std::abs(xy.y() - fp.center.y()) <= fp.half) {
          rusty = true;
          break;
        }
      }
      const auto shade = static_cast<std::uint8_t>(110 + 20 * (hit->patch % 3));
      row[x] = rusty ? kRust : cv::Vec3b(shade, shade, shade);
    }
  }
  return out;
}

Walkthrough make_walkthrough(const sim::Scenario& scenario, const std::vector<PlantedRust>& rusts,
                             const WalkthroughConfig& config) {
  Walkthrough walk;
  walk.run = sim::run_scenario(scenario);
  const auto& structure = scenario.structure;
  for (const auto& r : rusts) walk.planted_centers.push_back(rust_center(structure, r));

  const auto& traj = walk.run.trajectory;
  const auto every =
      std::max<long>(1, std::lround(config.frame_period / scenario.dt));
  walk.world_T_tracker = camera_pose(structure, traj.front(), config.mount);
  const Rigid3 tracker_T_world = walk.world_T_tracker.inverse();

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const auto& s = traj[i];
    const Rigid3 world_T_cam = camera_pose(structure, s, config.mount);
    PoseSample sample = PoseSample::from_transform(s.time, tracker_T_world * world_T_cam);
    if (config.pose_noise_sigma > 0.0) {
      for (int k = 0; k < 3; ++k) sample.position[k] += config.pose_noise_sigma * noise(rng);
    }
    walk.poses.push_back(sample);

    const bool settled = s.back.patch == s.pose.patch && s.front.patch == s.pose.patch;
    if (i % static_cast<std::size_t>(every) != 0 || !settled) continue;
    auto frame = render(structure, rusts, config.intrinsics, world_T_cam);
    auto dets = detect_rust_stub(frame.bgr, s.time, config.detector);
    walk.detections.insert(walk.detections.end(), dets.begin(), dets.end());
    walk.depth_frames.emplace_back(s.time, std::move(frame.depth));
  }
  return walk;
}

MemoryDepthSource depth_source(const Walkthrough& walk) {
  MemoryDepthSource src;
  for (const auto& [t, img] : walk.depth_frames) src.add(t, img);
  return src;
}

}  // namespace magbike::inspection::synthetic

#pragma once

// Synthetic inspection data: planted rust squares on a structure, a camera
// riding on the simulated robot, ray-cast colour and depth frames, stub
// detections and (optionally noisy) tracker poses.

#include "magbike/inspection.hpp"
#include "magbike/simulator.hpp"

#include <opencv2/core/mat.hpp>

#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

namespace magbike::inspection::synthetic {

struct PlantedRust {
  std::string patch;
  double u{0.0};
  double v{0.0};
  /// Edge length of the square in developed coordinates, m.
  double size{0.05};
};

Vec3 rust_center(const geometry::StructureModel& structure, const PlantedRust& rust);

/// Camera fixed to the body: `height` above the body centre along the
/// surface normal, `forward` along the heading, pitched down by `tilt`.
struct CameraMount {
  double height{0.07};
  double forward{0.0};
  double tilt{std::numbers::pi / 6.0};
};

/// World pose of the camera for a robot state.
Rigid3 camera_pose(const geometry::StructureModel& structure, const sim::RobotState& state,
                   const CameraMount& mount);

CameraIntrinsics default_intrinsics();

struct RenderedFrame {
  cv::Mat bgr;
  DepthImage depth;
};

RenderedFrame render(const geometry::StructureModel& structure,
                     const std::vector<PlantedRust>& rusts, const CameraIntrinsics& K,
                     const Rigid3& world_T_camera);

struct WalkthroughConfig {
  CameraMount mount;
  CameraIntrinsics intrinsics{default_intrinsics()};
  double frame_period{0.1};
  double pose_noise_sigma{0.0};
  std::uint64_t seed{0};
  RustDetectorConfig detector;
};

struct Walkthrough {
  /// Camera poses in the tracker-origin frame (noise applied).
  std::vector<PoseSample> poses;
  std::vector<DetectionRecord> detections;
  std::vector<std::pair<double, DepthImage>> depth_frames;
  /// True world <- tracker-origin transform.
  Rigid3 world_T_tracker{Rigid3::Identity()};
  std::vector<Vec3> planted_centers;
  sim::ScenarioResult run;
};

/// Runs the scenario, renders a frame every frame_period while both wheels
/// share the body's patch, and detects rust with the colour stub.
Walkthrough make_walkthrough(const sim::Scenario& scenario, const std::vector<PlantedRust>& rusts,
                             const WalkthroughConfig& config = {});

MemoryDepthSource depth_source(const Walkthrough& walk);

}  // namespace magbike::inspection::synthetic

#pragma once

// Detection-to-map pipeline: poses and detection boxes in, world-frame rust
// markers out.
//
// Camera frame: z along the optical axis, x to the right of the image, y
// down. A PoseSample is the camera pose in the tracker-origin frame; the
// alignment maps tracker-origin coordinates into the world frame.

#include "magbike/geometry.hpp"

#include <Eigen/Geometry>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cv {
class Mat;
}

namespace magbike::inspection {

using geometry::Vec2;
using geometry::Vec3;
using Rigid3 = Eigen::Isometry3d;

class InvalidDepthError : public geometry::DomainError {
 public:
  using geometry::DomainError::DomainError;
};

/// No pose sample close enough in time to a detection.
class UnsynchronizedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CameraIntrinsics {
  double fx{0.0};
  double fy{0.0};
  double cx{0.0};
  double cy{0.0};
  int width{0};
  int height{0};

  void validate() const;
  bool contains(const Vec2& px) const;
};

struct PoseSample {
  double t{0.0};
  Vec3 position{Vec3::Zero()};
  Eigen::Quaterniond orientation{Eigen::Quaterniond::Identity()};

  Rigid3 transform() const;
  static PoseSample from_transform(double t, const Rigid3& pose);
};

struct DetectionRecord {
  double t{0.0};
  double u_min{0.0};
  double v_min{0.0};
  double u_max{0.0};
  double v_max{0.0};
  double confidence{0.0};
  std::string label{"rust"};

  Vec2 center() const { return {0.5 * (u_min + u_max), 0.5 * (v_min + v_max)}; }
  double width() const { return u_max - u_min; }
  double height() const { return v_max - v_min; }
};

/// Throws geometry::DomainError for inverted boxes, boxes outside the image
/// or confidence outside [0, 1].
void validate_detection(const DetectionRecord& det, const CameraIntrinsics& K);

struct RustMarker {
  Vec3 center{Vec3::Zero()};
  double radius{0.0};
  std::size_t support{0};
  double mean_confidence{0.0};
};

struct InspectionMap {
  std::vector<RustMarker> markers;
  std::vector<Vec3> path;
  Rigid3 alignment{Rigid3::Identity()};
  std::size_t detections{0};
  /// Detections with no pose within the skew window.
  std::size_t dropped{0};
  /// Detections rejected for missing or out-of-range depth.
  std::size_t rejected{0};
};

struct PipelineConfig {
  double max_skew{0.05};
  double min_depth{0.1};
  double max_depth{5.0};
  double merge_radius{0.05};
  double min_marker_radius{0.01};
};

Vec3 deproject(const Vec2& px, double z, const CameraIntrinsics& K);
Vec2 project(const Vec3& p, const CameraIntrinsics& K);

/// Aligned depth image in meters; 0 marks a hole.
class DepthImage {
 public:
  DepthImage() = default;
  DepthImage(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  float& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  float at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  /// Nearest-pixel lookup; nullopt outside the image or on a hole.
  std::optional<double> sample(const Vec2& px) const;

 private:
  int width_{0};
  int height_{0};
  std::vector<float> data_;
};

/// Depth frames addressed by capture time.
class DepthSource {
 public:
  virtual ~DepthSource() = default;
  /// Frame closest to t within max_skew, or null.
  virtual std::shared_ptr<const DepthImage> frame(double t, double max_skew) const = 0;
};

class MemoryDepthSource : public DepthSource {
 public:
  void add(double t, DepthImage image);
  std::shared_ptr<const DepthImage> frame(double t, double max_skew) const override;

 private:
  std::vector<std::pair<double, std::shared_ptr<const DepthImage>>> frames_;
};

/// Median of the depths at the box centre and the four quarter points.
/// Rejects (nullopt) with fewer than three valid samples or a median outside
/// [min_depth, max_depth].
std::optional<double> box_depth(const DetectionRecord& det, const DepthImage& depth,
                                const PipelineConfig& config = {});

/// Throws UnsynchronizedError when |pose.t - det.t| exceeds max_skew.
std::optional<Vec3> detection_to_world(const DetectionRecord& det, const DepthImage& depth,
                                       const PoseSample& pose, const Rigid3& alignment,
                                       const CameraIntrinsics& K,
                                       const PipelineConfig& config = {});

/// Index of the pose nearest in time (ties go to the earlier sample), or
/// nullopt if none lies within max_skew. Poses must be time-ordered.
std::optional<std::size_t> nearest_pose(const std::vector<PoseSample>& poses, double t,
                                        double max_skew);

struct WorldPoint {
  Vec3 point;
  double confidence{1.0};
};

/// Single-linkage partition: points closer than merge_radius (inclusive)
/// end up in the same cluster. Clusters and their members come back in a
/// canonical order independent of the input order.
std::vector<std::vector<std::size_t>> cluster(const std::vector<WorldPoint>& points,
                                              double merge_radius);

std::vector<RustMarker> aggregate(const std::vector<WorldPoint>& points, double merge_radius,
                                  double min_radius = 0.01);

struct RustDetectorConfig {
  int min_area{100};
  double min_saturation{0.35};
  double min_value{0.15};
  double max_value{0.85};
  /// Hue window in degrees, wrapping through 0: [hue_low, 360) U [0, hue_high].
  double hue_high{40.0};
  double hue_low{340.0};
  /// Components touching the image border are clipped and skipped.
  bool skip_border{true};
};

/// Colour-threshold stand-in for a learned detector. Expects an 8-bit BGR
/// image; boxes use inclusive pixel-centre coordinates.
std::vector<DetectionRecord> detect_rust_stub(const cv::Mat& bgr, double t,
                                              const RustDetectorConfig& config = {});

/// Associates each detection with its nearest pose, deprojects, aggregates
/// and traces the path. Without an explicit alignment the first pose defines
/// the world frame.
InspectionMap build_map(const std::vector<PoseSample>& poses,
                        const std::vector<DetectionRecord>& detections, const DepthSource& depth,
                        const CameraIntrinsics& K, std::optional<Rigid3> alignment = std::nullopt,
                        const PipelineConfig& config = {});

}  // namespace magbike::inspection

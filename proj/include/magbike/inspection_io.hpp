#pragma once

// Log formats for the inspection pipeline.
//
//   poses.csv        t,x,y,z,qx,qy,qz,qw           (or .jsonl with the same keys)
//   detections.jsonl {"t":..,"bbox":[u_min,v_min,u_max,v_max],"confidence":..,"label":".."}
//   depth_index.csv  t,file                         16-bit PNG, millimeters, 0 = hole
//   intrinsics.json  {"fx":..,"fy":..,"cx":..,"cy":..,"width":..,"height":..}

#include "magbike/geometry.hpp"
#include "magbike/inspection.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace magbike::inspection {

class LogFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<PoseSample> read_poses_csv(std::istream& in);
std::vector<PoseSample> read_poses_jsonl(std::istream& in);
/// Picks the format from the extension (.csv or .jsonl).
std::vector<PoseSample> load_poses(const std::filesystem::path& path);
void write_poses_csv(std::ostream& out, const std::vector<PoseSample>& poses);

std::vector<DetectionRecord> read_detections_jsonl(std::istream& in);
std::vector<DetectionRecord> load_detections(const std::filesystem::path& path);
void write_detections_jsonl(std::ostream& out, const std::vector<DetectionRecord>& detections);

CameraIntrinsics load_intrinsics(const std::filesystem::path& path);
nlohmann::json to_json(const CameraIntrinsics& K);

/// 16-bit millimeter PNG; values round to the nearest millimeter.
DepthImage read_depth_png(const std::filesystem::path& path);
void write_depth_png(const std::filesystem::path& path, const DepthImage& depth);

/// Depth frames listed in a depth_index.csv, loaded lazily and cached.
class FileDepthSource : public DepthSource {
 public:
  explicit FileDepthSource(const std::filesystem::path& index);
  std::shared_ptr<const DepthImage> frame(double t, double max_skew) const override;
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<std::pair<double, std::filesystem::path>> entries_;
  mutable std::mutex mutex_;
  mutable std::map<std::size_t, std::shared_ptr<const DepthImage>> cache_;
};

nlohmann::json to_json(const InspectionMap& map);
/// Structure samples gray, markers green, path white.
void write_ply(std::ostream& out, const InspectionMap& map,
               const geometry::StructureModel* structure = nullptr, double sample_step = 0.02);

}  // namespace magbike::inspection

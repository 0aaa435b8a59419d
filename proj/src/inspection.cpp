#include "magbike/inspection.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace magbike::inspection {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw geometry::DomainError("fx and fy must be > 0");
  if (width <= 0 || height <= 0) throw geometry::DomainError("image size must be > 0");
  if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height)) {
    throw geometry::DomainError("principal point outside the image");
  }
}

bool CameraIntrinsics::contains(const Vec2& px) const {
  return px.x() >= -0.5 && px.y() >= -0.5 && px.x() <= width - 0.5 && px.y() <= height - 0.5;
}

Rigid3 PoseSample::transform() const {
  Rigid3 T = Rigid3::Identity();
  T.linear() = orientation.normalized().toRotationMatrix();
  T.translation() = position;
  return T;
}

PoseSample PoseSample::from_transform(double t, const Rigid3& pose) {
  PoseSample s;
  s.t = t;
  s.position = pose.translation();
  s.orientation = Eigen::Quaterniond(pose.rotation()).normalized();
  return s;
}

void validate_detection(const DetectionRecord& det, const CameraIntrinsics& K) {
  if (!(det.u_min < det.u_max) || !(det.v_min < det.v_max)) {
    throw geometry::DomainError("detection box is empty or inverted");
  }
  if (!K.contains({det.u_min, det.v_min}) || !K.contains({det.u_max, det.v_max})) {
    throw geometry::DomainError("detection box outside the image");
  }
  if (!(det.confidence >= 0.0 && det.confidence <= 1.0)) {
    throw geometry::DomainError("detection confidence outside [0, 1]");
  }
}

Vec3 deproject(const Vec2& px, double z, const CameraIntrinsics& K) {
  if (!(z > 0.0)) throw InvalidDepthError("depth must be > 0");
  return {(px.x() - K.cx) * z / K.fx, (px.y() - K.cy) * z / K.fy, z};
}

Vec2 project(const Vec3& p, const CameraIntrinsics& K) {
  if (!(p.z() > 0.0)) throw InvalidDepthError("point behind the camera");
  return {K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy};
}

DepthImage::DepthImage(int width, int height)
    : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, 0.0f) {}

std::optional<double> DepthImage::sample(const Vec2& px) const {
  const long x = std::lround(px.x());
  const long y = std::lround(px.y());
  if (x < 0 || y < 0 || x >= width_ || y >= height_) return std::nullopt;
  const float d = at(static_cast<int>(x), static_cast<int>(y));
  if (!(d > 0.0f) || !std::isfinite(d)) return std::nullopt;
  return static_cast<double>(d);
}

void MemoryDepthSource::add(double t, DepthImage image) {
  auto frame = std::make_shared<const DepthImage>(std::move(image));
  auto it = std::upper_bound(frames_.begin(), frames_.end(), t,
                             [](double x, const auto& f) { return x < f.first; });
  frames_.insert(it, {t, std::move(frame)});
}

std::shared_ptr<const DepthImage> MemoryDepthSource::frame(double t, double max_skew) const {
  std::shared_ptr<const DepthImage> best;
  double best_gap = std::numeric_limits<double>::infinity();
  for (const auto& [ft, img] : frames_) {
    const double gap = std::abs(ft - t);
    if (gap < best_gap) {
      best = img;
      best_gap = gap;
    }
  }
  return best_gap <= max_skew ? best : nullptr;
}

std::optional<double> box_depth(const DetectionRecord& det, const DepthImage& depth,
                                const PipelineConfig& config) {
  const Vec2 c = det.center();
  const double qw = det.width() / 4.0;
  const double qh = det.height() / 4.0;
  std::vector<double> valid;
  for (const Vec2& p : {c, Vec2(c.x() - qw, c.y() - qh), Vec2(c.x() + qw, c.y() - qh),
                        Vec2(c.x() - qw, c.y() + qh), Vec2(c.x() + qw, c.y() + qh)}) {
    if (auto d = depth.sample(p)) valid.push_back(*d);
  }
  if (valid.size() < 3) return std::nullopt;
  std::sort(valid.begin(), valid.end());
  const std::size_t n = valid.size();
  const double median = n % 2 ? valid[n / 2] : 0.5 * (valid[n / 2 - 1] + valid[n / 2]);
  if (median < config.min_depth || median > config.max_depth) return std::nullopt;
  return median;
}

std::optional<Vec3> detection_to_world(const DetectionRecord& det, const DepthImage& depth,
                                       const PoseSample& pose, const Rigid3& alignment,
                                       const CameraIntrinsics& K, const PipelineConfig& config) {
  if (std::abs(pose.t - det.t) > config.max_skew) {
    std::ostringstream msg;
    msg << "pose at t=" << pose.t << " is more than " << config.max_skew
        << " s away from detection at t=" << det.t;
    throw UnsynchronizedError(msg.str());
  }
  const auto z = box_depth(det, depth, config);
  if (!z) return std::nullopt;
  const Vec3 cam = deproject(det.center(), *z, K);
  return alignment * (pose.transform() * cam);
}

std::optional<std::size_t> nearest_pose(const std::vector<PoseSample>& poses, double t,
                                        double max_skew) {
  if (poses.empty()) return std::nullopt;
  auto it = std::lower_bound(poses.begin(), poses.end(), t,
                             [](const PoseSample& p, double x) { return p.t < x; });
  std::optional<std::size_t> best;
  double gap = std::numeric_limits<double>::infinity();
  if (it != poses.begin()) {
    const auto prev = std::prev(it);
    gap = t - prev->t;
    best = static_cast<std::size_t>(prev - poses.begin());
  }
  if (it != poses.end() && it->t - t < gap) {
    gap = it->t - t;
    best = static_cast<std::size_t>(it - poses.begin());
  }
  if (!best || gap > max_skew) return std::nullopt;
  return best;
}

namespace {

bool lex_less(const Vec3& a, const Vec3& b) {
  if (a.x() != b.x()) return a.x() < b.x();
  if (a.y() != b.y()) return a.y() < b.y();
  return a.z() < b.z();
}

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

struct CellHash {
  std::size_t operator()(const Eigen::Vector3i& c) const {
    std::size_t h = static_cast<std::size_t>(c.x()) * 73856093u;
    h ^= static_cast<std::size_t>(c.y()) * 19349663u;
    h ^= static_cast<std::size_t>(c.z()) * 83492791u;
    return h;
  }
};

struct CellEq {
  bool operator()(const Eigen::Vector3i& a, const Eigen::Vector3i& b) const { return a == b; }
};

}  // namespace

std::vector<std::vector<std::size_t>> cluster(const std::vector<WorldPoint>& points,
                                              double merge_radius) {
  if (!(merge_radius > 0.0)) throw geometry::DomainError("merge_radius must be > 0");
  const std::size_t n = points.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].point != points[b].point) return lex_less(points[a].point, points[b].point);
    return points[a].confidence < points[b].confidence;
  });

  std::unordered_map<Eigen::Vector3i, std::vector<std::size_t>, CellHash, CellEq> grid;
  auto cell_of = [merge_radius](const Vec3& p) {
    return Eigen::Vector3i(static_cast<int>(std::floor(p.x() / merge_radius)),
                           static_cast<int>(std::floor(p.y() / merge_radius)),
                           static_cast<int>(std::floor(p.z() / merge_radius)));
  };
  // Work on ranks in the sorted order so the result is order independent.
  DisjointSets sets(n);
  for (std::size_t rank = 0; rank < n; ++rank) {
    const Vec3& p = points[order[rank]].point;
    const Eigen::Vector3i c = cell_of(p);
    for (int dx = -1; dx <= 1; ++dx) {
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dz = -1; dz <= 1; ++dz) {
          auto it = grid.find(Eigen::Vector3i(c.x() + dx, c.y() + dy, c.z() + dz));
          if (it == grid.end()) continue;
          for (std::size_t other : it->second) {
            if ((points[order[other]].point - p).norm() <= merge_radius) sets.unite(rank, other);
          }
        }
      }
    }
    grid[c].push_back(rank);
  }

  std::vector<std::vector<std::size_t>> clusters;
  std::vector<std::size_t> slot(n, n);
  for (std::size_t rank = 0; rank < n; ++rank) {
    const std::size_t root = sets.find(rank);
    if (slot[root] == n) {
      slot[root] = clusters.size();
      clusters.emplace_back();
    }
    clusters[slot[root]].push_back(order[rank]);
  }
  return clusters;
}

std::vector<RustMarker> aggregate(const std::vector<WorldPoint>& points, double merge_radius,
                                  double min_radius) {
  std::vector<RustMarker> markers;
  for (const auto& members : cluster(points, merge_radius)) {
    RustMarker m;
    double conf = 0.0;
    for (std::size_t i : members) {
      m.center += points[i].point;
      conf += points[i].confidence;
    }
    const double n = static_cast<double>(members.size());
    m.center /= n;
    m.support = members.size();
    m.mean_confidence = conf / n;
    for (std::size_t i : members) m.radius = std::max(m.radius, (points[i].point - m.center).norm());
    m.radius = std::max(m.radius, min_radius);
    markers.push_back(m);
  }
  return markers;
}

std::vector<DetectionRecord> detect_rust_stub(const cv::Mat& bgr, double t,
                                              const RustDetectorConfig& config) {
  if (bgr.empty()) return {};
  if (bgr.type() != CV_8UC3) throw geometry::DomainError("rust detector expects 8-bit BGR");
  cv::Mat hsv;
  cv::cvtColor(bgr, hsv, cv::COLOR_BGR2HSV);
  // OpenCV 8-bit hue runs 0..179 (degrees / 2).
  const double s_min = config.min_saturation * 255.0;
  const double v_min = config.min_value * 255.0;
  const double v_max = config.max_value * 255.0;
  cv::Mat mask(bgr.rows, bgr.cols, CV_8U, cv::Scalar(0));
  for (int y = 0; y < hsv.rows; ++y) {
    const auto* row = hsv.ptr<cv::Vec3b>(y);
    auto* out = mask.ptr<std::uint8_t>(y);
    for (int x = 0; x < hsv.cols; ++x) {
      const double hue = 2.0 * row[x][0];
      const bool reddish = hue <= config.hue_high || hue >= config.hue_low;
      if (reddish && row[x][1] >= s_min && row[x][2] >= v_min && row[x][2] <= v_max) out[x] = 255;
    }
  }
  cv::Mat labels;
  cv::Mat stats;
  cv::Mat centroids;
  const int count = cv::connectedComponentsWithStats(mask, labels, stats, centroids, 8, CV_32S);
  std::vector<DetectionRecord> out;
  for (int i = 1; i < count; ++i) {
    const int x = stats.at<int>(i, cv::CC_STAT_LEFT);
    const int y = stats.at<int>(i, cv::CC_STAT_TOP);
    const int w = stats.at<int>(i, cv::CC_STAT_WIDTH);
    const int h = stats.at<int>(i, cv::CC_STAT_HEIGHT);
    const int area = stats.at<int>(i, cv::CC_STAT_AREA);
    if (area < config.min_area || w < 2 || h < 2) continue;
    if (config.skip_border && (x == 0 || y == 0 || x + w == bgr.cols || y + h == bgr.rows)) continue;
    DetectionRecord d;
    d.t = t;
    d.u_min = x;
    d.v_min = y;
    d.u_max = x + w - 1;
    d.v_max = y + h - 1;
    d.confidence = static_cast<double>(area) / (static_cast<double>(w) * h);
    out.push_back(d);
  }
  return out;
}

InspectionMap build_map(const std::vector<PoseSample>& poses,
                        const std::vector<DetectionRecord>& detections, const DepthSource& depth,
                        const CameraIntrinsics& K, std::optional<Rigid3> alignment,
                        const PipelineConfig& config) {
  if (poses.empty()) throw geometry::DomainError("pose stream is empty");
  for (std::size_t i = 1; i < poses.size(); ++i) {
    if (poses[i].t < poses[i - 1].t) throw geometry::DomainError("pose stream is not time-ordered");
  }
  InspectionMap map;
  map.alignment = alignment ? *alignment : poses.front().transform().inverse();
  map.detections = detections.size();
  std::vector<WorldPoint> points;
  for (const auto& det : detections) {
    const auto pi = nearest_pose(poses, det.t, config.max_skew);
    if (!pi) {
      ++map.dropped;
      continue;
    }
    const auto frame = depth.frame(det.t, config.max_skew);
    if (!frame) {
      ++map.rejected;
      continue;
    }
    const auto p = detection_to_world(det, *frame, poses[*pi], map.alignment, K, config);
    if (!p) {
      ++map.rejected;
      continue;
    }
    points.push_back({*p, det.confidence});
  }
  map.markers = aggregate(points, config.merge_radius, config.min_marker_radius);
  map.path.reserve(poses.size());
  for (const auto& pose : poses) map.path.push_back(map.alignment * pose.position);
  return map;
}

}  // namespace magbike::inspection

#include "magbike/inspection_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace magbike::inspection {

namespace {

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LogFormatError("cannot open " + path.string());
  return in;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

double to_number(const std::string& cell, const std::string& where) {
  try {
    std::size_t used = 0;
    const double x = std::stod(cell, &used);
    if (used != cell.size() && cell.find_first_not_of(" \t", used) != std::string::npos) {
      throw std::invalid_argument(cell);
    }
    return x;
  } catch (const std::exception&) {
    throw LogFormatError(where + ": bad number '" + cell + "'");
  }
}

PoseSample make_pose(double t, const Vec3& p, double qx, double qy, double qz, double qw,
                     const std::string& where) {
  Eigen::Quaterniond q(qw, qx, qy, qz);
  if (std::abs(q.norm() - 1.0) > 1e-3) throw LogFormatError(where + ": quaternion is not unit");
  PoseSample s;
  s.t = t;
  s.position = p;
  s.orientation = q.normalized();
  return s;
}

void check_order(const std::vector<PoseSample>& poses) {
  for (std::size_t i = 1; i < poses.size(); ++i) {
    if (poses[i].t < poses[i - 1].t) {
      throw LogFormatError("pose log is not time-ordered at row " + std::to_string(i));
    }
  }
}

bool skip_line(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line.empty() || line[0] == '#';
}

}  // namespace

std::vector<PoseSample> read_poses_csv(std::istream& in) {
  std::vector<PoseSample> poses;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_line(line) || line.rfind("t,", 0) == 0) continue;
    const auto c = split_csv(line);
    const std::string where = "pose csv line " + std::to_string(lineno);
    if (c.size() != 8) throw LogFormatError(where + ": expected 8 columns");
    double f[8];
    for (int i = 0; i < 8; ++i) f[i] = to_number(c[i], where);
    poses.push_back(make_pose(f[0], {f[1], f[2], f[3]}, f[4], f[5], f[6], f[7], where));
  }
  check_order(poses);
  return poses;
}

std::vector<PoseSample> read_poses_jsonl(std::istream& in) {
  std::vector<PoseSample> poses;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    const std::string where = "pose jsonl line " + std::to_string(lineno);
    try {
      const auto j = nlohmann::json::parse(line);
      const Vec3 p(j.at("x").get<double>(), j.at("y").get<double>(), j.at("z").get<double>());
      poses.push_back(make_pose(j.at("t"), p, j.at("qx"), j.at("qy"), j.at("qz"), j.at("qw"),
                                where));
    } catch (const nlohmann::json::exception& e) {
      throw LogFormatError(where + ": " + e.what());
    }
  }
  check_order(poses);
  return poses;
}

std::vector<PoseSample> load_poses(const std::filesystem::path& path) {
  auto in = open_in(path);
  if (path.extension() == ".jsonl") return read_poses_jsonl(in);
  return read_poses_csv(in);
}

void write_poses_csv(std::ostream& out, const std::vector<PoseSample>& poses) {
  out << "t,x,y,z,qx,qy,qz,qw\n" << std::setprecision(17);
  for (const auto& p : poses) {
    const auto& q = p.orientation;
    out << p.t << ',' << p.position.x() << ',' << p.position.y() << ',' << p.position.z() << ','
        << q.x() << ',' << q.y() << ',' << q.z() << ',' << q.w() << '\n';
  }
}

std::vector<DetectionRecord> read_detections_jsonl(std::istream& in) {
  std::vector<DetectionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    const std::string where = "detection line " + std::to_string(lineno);
    try {
      const auto j = nlohmann::json::parse(line);
      DetectionRecord d;
      d.t = j.at("t");
      const auto& b = j.at("bbox");
      if (!b.is_array() || b.size() != 4) throw LogFormatError(where + ": bbox needs 4 numbers");
      d.u_min = b[0];
      d.v_min = b[1];
      d.u_max = b[2];
      d.v_max = b[3];
      d.confidence = j.value("confidence", 1.0);
      d.label = j.value("label", std::string("rust"));
      if (!(d.u_min < d.u_max) || !(d.v_min < d.v_max)) {
        throw LogFormatError(where + ": bbox min must be below max");
      }
      out.push_back(std::move(d));
    } catch (const nlohmann::json::exception& e) {
      throw LogFormatError(where + ": " + e.what());
    }
  }
  return out;
}

std::vector<DetectionRecord> load_detections(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_detections_jsonl(in);
}

void write_detections_jsonl(std::ostream& out, const std::vector<DetectionRecord>& detections) {
  for (const auto& d : detections) {
    out << nlohmann::json{{"t", d.t},
                          {"bbox", {d.u_min, d.v_min, d.u_max, d.v_max}},
                          {"confidence", d.confidence},
                          {"label", d.label}}
               .dump()
        << '\n';
  }
}

CameraIntrinsics load_intrinsics(const std::filesystem::path& path) {
  auto in = open_in(path);
  CameraIntrinsics K;
  try {
    const auto j = nlohmann::json::parse(in);
    K.fx = j.at("fx");
    K.fy = j.at("fy");
    K.cx = j.at("cx");
    K.cy = j.at("cy");
    K.width = j.at("width");
    K.height = j.at("height");
  } catch (const nlohmann::json::exception& e) {
    throw LogFormatError(path.string() + ": " + e.what());
  }
  K.validate();
  return K;
}

nlohmann::json to_json(const CameraIntrinsics& K) {
  return {{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx}, {"cy", K.cy}, {"width", K.width},
          {"height", K.height}};
}

DepthImage read_depth_png(const std::filesystem::path& path) {
  const cv::Mat raw = cv::imread(path.string(), cv::IMREAD_ANYDEPTH);
  if (raw.empty()) throw LogFormatError("cannot read depth image " + path.string());
  if (raw.type() != CV_16UC1) throw LogFormatError(path.string() + " is not 16-bit single channel");
  DepthImage img(raw.cols, raw.rows);
  for (int y = 0; y < raw.rows; ++y) {
    const auto* row = raw.ptr<std::uint16_t>(y);
    for (int x = 0; x < raw.cols; ++x) img.at(x, y) = static_cast<float>(row[x] * 0.001);
  }
  return img;
}

void write_depth_png(const std::filesystem::path& path, const DepthImage& depth) {
  cv::Mat raw(depth.height(), depth.width(), CV_16UC1);
  for (int y = 0; y < depth.height(); ++y) {
    auto* row = raw.ptr<std::uint16_t>(y);
    for (int x = 0; x < depth.width(); ++x) {
      const double mm = std::round(static_cast<double>(depth.at(x, y)) * 1000.0);
      row[x] = mm > 0.0 && mm <= 65535.0 ? static_cast<std::uint16_t>(mm) : 0;
    }
  }
  if (!cv::imwrite(path.string(), raw)) throw LogFormatError("cannot write " + path.string());
}

FileDepthSource::FileDepthSource(const std::filesystem::path& index) {
  auto in = open_in(index);
  const auto dir = index.parent_path();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_line(line) || line.rfind("t,", 0) == 0) continue;
    const auto c = split_csv(line);
    const std::string where = index.string() + " line " + std::to_string(lineno);
    if (c.size() != 2) throw LogFormatError(where + ": expected t,file");
    entries_.emplace_back(to_number(c[0], where), dir / c[1]);
  }
}

std::shared_ptr<const DepthImage> FileDepthSource::frame(double t, double max_skew) const {
  std::size_t best = entries_.size();
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const double g = std::abs(entries_[i].first - t);
    if (g < gap) {
      gap = g;
      best = i;
    }
  }
  if (best == entries_.size() || gap > max_skew) return nullptr;
  std::lock_guard lock(mutex_);
  auto& slot = cache_[best];
  if (!slot) slot = std::make_shared<const DepthImage>(read_depth_png(entries_[best].second));
  return slot;
}

nlohmann::json to_json(const InspectionMap& map) {
  nlohmann::json markers = nlohmann::json::array();
  for (const auto& m : map.markers) {
    markers.push_back({{"center", {m.center.x(), m.center.y(), m.center.z()}},
                       {"radius", m.radius},
                       {"support", m.support},
                       {"mean_confidence", m.mean_confidence}});
  }
  nlohmann::json alignment = nlohmann::json::array();
  const Eigen::Matrix4d A = map.alignment.matrix();
  for (int r = 0; r < 4; ++r) alignment.push_back({A(r, 0), A(r, 1), A(r, 2), A(r, 3)});
  nlohmann::json path = nlohmann::json::array();
  for (const auto& p : map.path) path.push_back({p.x(), p.y(), p.z()});
  return {{"markers", markers},
          {"alignment", alignment},
          {"detections", map.detections},
          {"dropped", map.dropped},
          {"rejected", map.rejected},
          {"path", path}};
}

void write_ply(std::ostream& out, const InspectionMap& map,
               const geometry::StructureModel* structure, double sample_step) {
  struct Vertex {
    Vec3 p;
    int r, g, b;
  };
  std::vector<Vertex> vertices;
  if (structure) {
    for (const auto& patch : structure->patches) {
      const geometry::Development dev(patch);
      for (double x = dev.x_min(); x <= dev.x_max() + 1e-12; x += sample_step) {
        for (double y = dev.y_min(); y <= dev.y_max() + 1e-12; y += sample_step) {
          const Vec2 uv = dev.to_surface({x, y});
          if (!geometry::in_bounds(patch, uv)) continue;
          vertices.push_back({geometry::point_and_normal(patch, uv).point, 128, 128, 128});
        }
      }
    }
  }
  for (const auto& p : map.path) vertices.push_back({p, 255, 255, 255});
  for (const auto& m : map.markers) {
    vertices.push_back({m.center, 0, 255, 0});
    for (int i = 0; i < 3; ++i) {
      for (double s : {-1.0, 1.0}) {
        Vec3 d = Vec3::Zero();
        d[i] = s * m.radius;
        vertices.push_back({m.center + d, 0, 255, 0});
      }
    }
  }
  out << "ply\nformat ascii 1.0\nelement vertex " << vertices.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  out << std::setprecision(9);
  for (const auto& v : vertices) {
    out << v.p.x() << ' ' << v.p.y() << ' ' << v.p.z() << ' ' << v.r << ' ' << v.g << ' ' << v.b
        << '\n';
  }
}

}  // namespace magbike::inspection

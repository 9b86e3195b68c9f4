#include "doc/dataio.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace doc::io {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const fs::path& path, const std::string& msg) {
  throw InputError(path.string() + ": " + msg);
}

[[noreturn]] void fail(const fs::path& path, int line, const std::string& msg) {
  throw InputError(path.string() + ":" + std::to_string(line) + ": " + msg);
}

cv::Mat read_mat(const fs::path& path) {
  if (!fs::exists(path)) fail(path, "file does not exist");
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) fail(path, "cannot decode image");
  return m;
}

void write_mat(const fs::path& path, const cv::Mat& m) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), m)) fail(path, "cannot write image");
}

// Whitespace-separated doubles of one line; false on trailing garbage.
bool parse_numbers(const std::string& line, std::vector<double>& out) {
  out.clear();
  std::istringstream ss(line);
  double x;
  while (ss >> x) out.push_back(x);
  return ss.eof();
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open file");
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(path, "cannot open for writing");
  return out;
}

void put_u32(std::ostream& out, std::uint32_t x) {
  const std::array<char, 4> b{char(x & 0xff), char((x >> 8) & 0xff), char((x >> 16) & 0xff),
                              char((x >> 24) & 0xff)};
  out.write(b.data(), 4);
}

std::uint32_t get_u32(const unsigned char* b) {
  return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
         std::uint32_t(b[3]) << 24;
}

Mat4d rigid_from_rows(const std::vector<double>& v, const fs::path& path, int line) {
  Mat4d T = Mat4d::Identity();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) T(r, c) = v[std::size_t(4 * r + c)];
  if (!T.allFinite()) fail(path, line, "non-finite pose entry");
  if (!is_rigid(T, 1e-4)) fail(path, line, "pose is not rigid within 1e-4");
  T.topLeftCorner<3, 3>() = nearest_rotation<double>(T.topLeftCorner<3, 3>());
  return T;
}

}  // namespace

Image load_image(const fs::path& path, std::optional<Size> resize) {
  cv::Mat m = read_mat(path);
  double scale;
  switch (m.depth()) {
    case CV_8U: scale = 1.0 / 255.0; break;
    case CV_16U: scale = 1.0 / 65535.0; break;
    default: fail(path, "unsupported image bit depth");
  }
  if (m.channels() == 4) cv::cvtColor(m, m, cv::COLOR_BGRA2BGR);
  if (m.channels() != 1 && m.channels() != 3) fail(path, "unsupported channel count");
  if (m.channels() == 3) cv::cvtColor(m, m, cv::COLOR_BGR2RGB);
  if (resize && (resize->width != m.cols || resize->height != m.rows))
    cv::resize(m, m, cv::Size(resize->width, resize->height), 0, 0, cv::INTER_LINEAR);
  cv::Mat f;
  m.convertTo(f, CV_64F, scale);
  std::vector<cv::Mat> planes;
  cv::split(f, planes);
  Image img(f.cols, f.rows, int(planes.size()));
  for (std::size_t c = 0; c < planes.size(); ++c)
    for (int v = 0; v < f.rows; ++v)
      for (int u = 0; u < f.cols; ++u) img.channel(int(c))(v, u) = planes[c].at<double>(v, u);
  return img;
}

void save_image(const fs::path& path, const Image& img, int bits) {
  if (img.channels() != 1 && img.channels() != 3) fail(path, "image must have 1 or 3 channels");
  if (bits != 8 && bits != 16) fail(path, "bit depth must be 8 or 16");
  const double full = bits == 8 ? 255.0 : 65535.0;
  std::vector<cv::Mat> planes;
  for (int c = img.channels() - 1; c >= 0; --c) {  // RGB -> BGR
    cv::Mat p(img.height(), img.width(), bits == 8 ? CV_8UC1 : CV_16UC1);
    for (int v = 0; v < img.height(); ++v)
      for (int u = 0; u < img.width(); ++u) {
        const long q = std::lround(std::clamp(img.channel(c)(v, u), 0.0, 1.0) * full);
        if (bits == 8)
          p.at<std::uint8_t>(v, u) = cv::saturate_cast<std::uint8_t>(q);
        else
          p.at<std::uint16_t>(v, u) = cv::saturate_cast<std::uint16_t>(q);
      }
    planes.push_back(p);
  }
  cv::Mat m;
  cv::merge(planes, m);
  write_mat(path, m);
}

DepthMap load_depth(const fs::path& path, double scale_divisor, std::optional<Size> resize) {
  if (!(scale_divisor > 0)) fail(path, "depth scale divisor must be positive");
  cv::Mat m;
  if (path.extension() == ".png") {
    m = read_mat(path);
    if (m.type() != CV_16UC1) fail(path, "depth PNG must be 16-bit single channel");
    m.convertTo(m, CV_64F, 1.0 / scale_divisor);
  } else {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(path, "cannot open depth file");
    std::array<unsigned char, 8> header{};
    if (!in.read(reinterpret_cast<char*>(header.data()), 8)) fail(path, "truncated header");
    const std::uint32_t w = get_u32(header.data()), h = get_u32(header.data() + 4);
    if (w == 0 || h == 0 || w > 100000 || h > 100000) fail(path, "implausible grid size");
    std::vector<unsigned char> bytes(std::size_t(w) * h * 4);
    if (!in.read(reinterpret_cast<char*>(bytes.data()), std::streamsize(bytes.size())))
      fail(path, "truncated depth grid");
    m = cv::Mat(int(h), int(w), CV_64F);
    for (std::size_t i = 0; i < std::size_t(w) * h; ++i) {
      const std::uint32_t bits = get_u32(bytes.data() + 4 * i);
      float f;
      std::memcpy(&f, &bits, 4);
      m.at<double>(int(i / w), int(i % w)) = f;
    }
  }
  if (resize && (resize->width != m.cols || resize->height != m.rows))
    cv::resize(m, m, cv::Size(resize->width, resize->height), 0, 0, cv::INTER_NEAREST);
  DepthMap d(GridD(m.rows, m.cols));
  for (int v = 0; v < m.rows; ++v)
    for (int u = 0; u < m.cols; ++u) {
      const double x = m.at<double>(v, u);
      d.meters(v, u) = std::isfinite(x) && x > 0 ? x : 0.0;
    }
  return d;
}

void save_depth_png(const fs::path& path, const DepthMap& depth, double scale_divisor) {
  cv::Mat m(depth.height(), depth.width(), CV_16UC1);
  for (int v = 0; v < depth.height(); ++v)
    for (int u = 0; u < depth.width(); ++u) {
      const double x = depth.valid(v, u) ? std::round(depth.meters(v, u) * scale_divisor) : 0.0;
      m.at<std::uint16_t>(v, u) = std::uint16_t(std::clamp(x, 0.0, 65535.0));
    }
  write_mat(path, m);
}

void save_depth_raw(const fs::path& path, const DepthMap& depth) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(path, "cannot open for writing");
  put_u32(out, std::uint32_t(depth.width()));
  put_u32(out, std::uint32_t(depth.height()));
  for (int v = 0; v < depth.height(); ++v)
    for (int u = 0; u < depth.width(); ++u) {
      const float f = depth.valid(v, u) ? float(depth.meters(v, u)) : 0.0f;
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(out, bits);
    }
}

MaskMap load_mask(const fs::path& path, std::optional<Size> resize) {
  cv::Mat m = read_mat(path);
  if (m.type() != CV_8UC1) fail(path, "mask must be an 8-bit single-channel image");
  m.convertTo(m, CV_64F, 1.0 / 255.0);
  if (resize && (resize->width != m.cols || resize->height != m.rows))
    cv::resize(m, m, cv::Size(resize->width, resize->height), 0, 0, cv::INTER_LINEAR);
  MaskMap mask(GridD(m.rows, m.cols));
  for (int v = 0; v < m.rows; ++v)
    for (int u = 0; u < m.cols; ++u)
      mask.weights(v, u) = std::clamp(m.at<double>(v, u), 0.0, 1.0);
  return mask;
}

void save_mask(const fs::path& path, const MaskMap& mask) {
  save_image(path, Image(mask.weights));
}

Grid<std::uint8_t> load_labels(const fs::path& path) {
  const cv::Mat m = read_mat(path);
  if (m.type() != CV_8UC1) fail(path, "label map must be an 8-bit single-channel image");
  Grid<std::uint8_t> g(m.rows, m.cols);
  for (int v = 0; v < m.rows; ++v)
    for (int u = 0; u < m.cols; ++u) g(v, u) = m.at<std::uint8_t>(v, u);
  return g;
}

void save_labels(const fs::path& path, const Grid<std::uint8_t>& labels) {
  cv::Mat m(int(labels.rows()), int(labels.cols()), CV_8UC1);
  for (int v = 0; v < m.rows; ++v)
    for (int u = 0; u < m.cols; ++u) m.at<std::uint8_t>(v, u) = labels(v, u);
  write_mat(path, m);
}

Camera load_intrinsics(const fs::path& path, std::optional<Size> image_size,
                       const std::string& camera) {
  const auto lines = read_lines(path);
  std::vector<double> nums;
  Camera K;
  bool found = false;
  for (std::size_t i = 0; i < lines.size() && !found; ++i) {
    const std::string& line = lines[i];
    const int lineno = int(i + 1);
    if (blank(line) || line[0] == '#') continue;
    const auto colon = line.find(':');
    if (colon != std::string::npos) {
      if (line.substr(0, colon) != camera) continue;
      if (!parse_numbers(line.substr(colon + 1), nums) || nums.size() != 12)
        fail(path, lineno, camera + " line must hold 12 numbers");
      if (!image_size) fail(path, lineno, "KITTI calibration needs the image size");
      K = {nums[0], nums[5], nums[2], nums[6], image_size->width, image_size->height};
      found = true;
    } else {
      if (!parse_numbers(line, nums) || nums.size() != 6)
        fail(path, lineno, "expected 'fx fy cx cy width height'");
      if (nums[4] != std::floor(nums[4]) || nums[5] != std::floor(nums[5]))
        fail(path, lineno, "width and height must be integers");
      K = {nums[0], nums[1], nums[2], nums[3], int(nums[4]), int(nums[5])};
      found = true;
    }
    if (!K.valid())
      fail(path, lineno, "intrinsics violate fx,fy > 0 / principal point inside image");
  }
  if (!found) fail(path, "no intrinsics found (looked for " + camera + " or a 6-number line)");
  return K;
}

void save_intrinsics(const fs::path& path, const Camera& K) {
  auto out = open_out(path);
  out << fmt_double(K.fx) << ' ' << fmt_double(K.fy) << ' ' << fmt_double(K.cx) << ' '
      << fmt_double(K.cy) << ' ' << K.width << ' ' << K.height << '\n';
}

std::vector<Mat4d> load_poses_kitti(const fs::path& path) {
  const auto lines = read_lines(path);
  std::vector<Mat4d> poses;
  std::vector<double> nums;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (blank(lines[i])) continue;
    if (!parse_numbers(lines[i], nums)) fail(path, int(i + 1), "malformed number");
    if (nums.size() != 12)
      fail(path, int(i + 1), "expected 12 values, found " + std::to_string(nums.size()));
    poses.push_back(rigid_from_rows(nums, path, int(i + 1)));
  }
  return poses;
}

void save_poses_kitti(const fs::path& path, const std::vector<Mat4d>& poses) {
  auto out = open_out(path);
  for (const Mat4d& T : poses) {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) out << (r || c ? " " : "") << fmt_double(T(r, c));
    out << '\n';
  }
}

std::vector<Pose> load_relative_poses(const fs::path& path) {
  const auto lines = read_lines(path);
  std::vector<Pose> poses;
  std::vector<double> nums;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (blank(lines[i])) continue;
    if (!parse_numbers(lines[i], nums) || nums.size() != 6)
      fail(path, int(i + 1), "expected 'rx ry rz tx ty tz'");
    const Vec6d p = Eigen::Map<const Vec6d>(nums.data());
    if (!p.allFinite()) fail(path, int(i + 1), "non-finite value");
    poses.emplace_back(p);
  }
  return poses;
}

void save_relative_poses(const fs::path& path, const std::vector<Pose>& poses) {
  auto out = open_out(path);
  for (const Pose& p : poses) {
    const Vec6d v = p.params();
    for (int k = 0; k < 6; ++k) out << (k ? " " : "") << fmt_double(v[k]);
    out << '\n';
  }
}

TrajectoryFormat parse_trajectory_format(const std::string& name) {
  if (name == "kitti") return TrajectoryFormat::Kitti;
  if (name == "tum") return TrajectoryFormat::Tum;
  throw InputError("unknown trajectory format '" + name + "' (expected kitti or tum)");
}

void save_trajectory(const Trajectory& traj, TrajectoryFormat format, const fs::path& path) {
  if (format == TrajectoryFormat::Kitti) {
    std::vector<Mat4d> poses;
    for (const auto& p : traj.poses) poses.push_back(p.pose);
    save_poses_kitti(path, poses);
    return;
  }
  auto out = open_out(path);
  for (const auto& p : traj.poses) {
    const Eigen::Matrix3d R = p.pose.topLeftCorner<3, 3>();
    const Eigen::Quaterniond q = Eigen::Quaterniond(R).normalized();
    const double stamp = p.timestamp.value_or(double(p.index));
    out << fmt_double(stamp) << ' ' << fmt_double(p.pose(0, 3)) << ' '
        << fmt_double(p.pose(1, 3)) << ' ' << fmt_double(p.pose(2, 3)) << ' '
        << fmt_double(q.x()) << ' ' << fmt_double(q.y()) << ' ' << fmt_double(q.z()) << ' '
        << fmt_double(q.w()) << '\n';
  }
}

Trajectory load_trajectory(const fs::path& path, TrajectoryFormat format) {
  Trajectory traj;
  if (format == TrajectoryFormat::Kitti) {
    const auto poses = load_poses_kitti(path);
    for (std::size_t i = 0; i < poses.size(); ++i)
      traj.poses.push_back({int(i), std::nullopt, poses[i]});
    return traj;
  }
  const auto lines = read_lines(path);
  std::vector<double> nums;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (blank(lines[i]) || lines[i][0] == '#') continue;
    if (!parse_numbers(lines[i], nums) || nums.size() != 8)
      fail(path, int(i + 1), "expected 't tx ty tz qx qy qz qw'");
    const Eigen::Quaterniond q(nums[7], nums[4], nums[5], nums[6]);
    if (std::abs(q.norm() - 1.0) > 1e-4) fail(path, int(i + 1), "quaternion is not unit-norm");
    const Mat3d R = q.normalized().toRotationMatrix();
    traj.poses.push_back({int(traj.poses.size()), nums[0],
                          make_transform<double>(R, Vec3d(nums[1], nums[2], nums[3]))});
  }
  return traj;
}

fs::path SequenceManifest::resolve(const fs::path& p) const {
  return p.is_absolute() ? p : base_dir / p;
}

SequenceManifest load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail(path, "cannot open manifest");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(path, std::string("invalid JSON: ") + e.what());
  }
  SequenceManifest m;
  m.base_dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  try {
    const json& intr = j.at("intrinsics");
    if (intr.is_string()) {
      m.intrinsics = fs::path(intr.get<std::string>());
    } else {
      m.intrinsics = Camera{intr.at("fx").get<double>(), intr.at("fy").get<double>(),
                            intr.at("cx").get<double>(), intr.at("cy").get<double>(),
                            intr.at("width").get<int>(), intr.at("height").get<int>()};
    }
    m.camera = j.value("camera", std::string("P2"));
    m.depth_scale = j.value("depth_scale", 256.0);
    if (j.contains("resize")) {
      const auto& r = j.at("resize");
      m.resize = Size{r.at(0).get<int>(), r.at(1).get<int>()};
    }
    const json& init = j.at("initial_poses");
    const std::string fmt = init.at("format").get<std::string>();
    if (fmt == "kitti")
      m.initial_format = InitialPoseFormat::KittiAbsolute;
    else if (fmt == "relative")
      m.initial_format = InitialPoseFormat::Relative;
    else
      fail(path, "initial_poses.format must be 'kitti' or 'relative'");
    m.initial_poses = init.at("path").get<std::string>();
    if (j.contains("ground_truth")) m.ground_truth = fs::path(j.at("ground_truth").get<std::string>());
    for (const json& f : j.at("frames")) {
      FrameRecord r;
      r.image = f.at("image").get<std::string>();
      r.depth = f.at("depth").get<std::string>();
      if (f.contains("mask")) r.mask = fs::path(f.at("mask").get<std::string>());
      if (f.contains("timestamp")) r.timestamp = f.at("timestamp").get<double>();
      m.frames.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    fail(path, std::string("manifest field error: ") + e.what());
  }
  if (m.frames.size() < 2) fail(path, "manifest must list at least 2 frames");
  if (!(m.depth_scale > 0)) fail(path, "depth_scale must be positive");
  return m;
}

void save_manifest(const fs::path& path, const SequenceManifest& m) {
  json j;
  if (const auto* p = std::get_if<fs::path>(&m.intrinsics)) {
    j["intrinsics"] = p->generic_string();
  } else {
    const Camera& K = std::get<Camera>(m.intrinsics);
    j["intrinsics"] = {{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx},
                       {"cy", K.cy}, {"width", K.width}, {"height", K.height}};
  }
  j["camera"] = m.camera;
  j["depth_scale"] = m.depth_scale;
  if (m.resize) j["resize"] = {m.resize->width, m.resize->height};
  j["initial_poses"] = {
      {"format", m.initial_format == InitialPoseFormat::KittiAbsolute ? "kitti" : "relative"},
      {"path", m.initial_poses.generic_string()}};
  if (m.ground_truth) j["ground_truth"] = m.ground_truth->generic_string();
  j["frames"] = json::array();
  for (const auto& f : m.frames) {
    json jf = {{"image", f.image.generic_string()}, {"depth", f.depth.generic_string()}};
    if (f.mask) jf["mask"] = f.mask->generic_string();
    if (f.timestamp) jf["timestamp"] = *f.timestamp;
    j["frames"].push_back(std::move(jf));
  }
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

LoadedSequence load_sequence(const SequenceManifest& m) {
  LoadedSequence seq;
  for (const auto& rec : m.frames) {
    for (const fs::path* p : {&rec.image, &rec.depth})
      if (!fs::exists(m.resolve(*p))) fail(m.resolve(*p), "file does not exist");
    if (rec.mask && !fs::exists(m.resolve(*rec.mask)))
      fail(m.resolve(*rec.mask), "file does not exist");
  }
  for (const auto& rec : m.frames) {
    Frame f;
    f.image = load_image(m.resolve(rec.image), m.resize);
    f.depth = load_depth(m.resolve(rec.depth), m.depth_scale, m.resize);
    if (rec.mask) f.explainability = load_mask(m.resolve(*rec.mask), m.resize);
    if (!seq.frames.empty()) {
      require_same_size(f.image, seq.frames.front().image, rec.image.string().c_str());
      if (f.image.channels() != seq.frames.front().image.channels())
        fail(m.resolve(rec.image), "channel count differs from first frame");
    }
    require_same_size(f.image, f.depth, rec.depth.string().c_str());
    if (f.explainability)
      require_same_size(f.image, *f.explainability, rec.mask->string().c_str());
    seq.frames.push_back(std::move(f));
    seq.timestamps.push_back(rec.timestamp);
  }
  const Size loaded{seq.frames.front().image.width(), seq.frames.front().image.height()};

  if (const auto* p = std::get_if<fs::path>(&m.intrinsics)) {
    // Intrinsics describe the stored images; scale them when resizing.
    std::optional<Size> native;
    if (m.resize) {
      cv::Mat first = read_mat(m.resolve(m.frames.front().image));
      native = Size{first.cols, first.rows};
    } else {
      native = loaded;
    }
    seq.K = load_intrinsics(m.resolve(*p), native, m.camera);
  } else {
    seq.K = std::get<Camera>(m.intrinsics);
    seq.K.validate();
  }
  if (seq.K.width != loaded.width || seq.K.height != loaded.height)
    seq.K = seq.K.scaled(loaded.width, loaded.height);

  const fs::path init = m.resolve(m.initial_poses);
  if (m.initial_format == InitialPoseFormat::KittiAbsolute) {
    Trajectory abs;
    const auto poses = load_poses_kitti(init);
    for (std::size_t i = 0; i < poses.size(); ++i) abs.poses.push_back({int(i), std::nullopt, poses[i]});
    if (abs.size() != seq.frames.size())
      fail(init, "expected " + std::to_string(seq.frames.size()) + " poses, found " +
                     std::to_string(abs.size()));
    seq.initial_relatives = relative_from_absolute(abs);
  } else {
    seq.initial_relatives = load_relative_poses(init);
    if (seq.initial_relatives.size() != seq.frames.size() - 1)
      fail(init, "expected " + std::to_string(seq.frames.size() - 1) +
                     " relative poses, found " + std::to_string(seq.initial_relatives.size()));
  }
  if (m.ground_truth) {
    seq.ground_truth = load_trajectory(m.resolve(*m.ground_truth), TrajectoryFormat::Kitti);
    if (seq.ground_truth->size() != seq.frames.size())
      fail(m.resolve(*m.ground_truth), "ground truth length differs from frame count");
  }
  return seq;
}

}  // namespace doc::io

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "doc/geometry.hpp"
#include "doc/image.hpp"
#include "doc/photometric.hpp"
#include "doc/trajectory.hpp"

namespace doc::io {

namespace fs = std::filesystem;

struct Size {
  int width{0};
  int height{0};
};

/// 8-bit (or 16-bit) PNG/JPEG to [0, 1]; colour images keep 3 channels in RGB
/// order. With `resize`, bilinear resampling to that resolution.
[[nodiscard]] Image load_image(const fs::path& path, std::optional<Size> resize = {});
/// `bits` is 8 or 16 (PNG only for 16).
void save_image(const fs::path& path, const Image& img, int bits = 8);

/// 16-bit PNG (value / scale_divisor meters, 0 = missing) or, for any other
/// extension, a raw grid: u32 width, u32 height (little-endian) then
/// width*height little-endian float32 meters. Resizing uses nearest neighbour.
[[nodiscard]] DepthMap load_depth(const fs::path& path, double scale_divisor = 256.0,
                                  std::optional<Size> resize = {});
void save_depth_png(const fs::path& path, const DepthMap& depth, double scale_divisor = 256.0);
void save_depth_raw(const fs::path& path, const DepthMap& depth);

/// 8-bit grayscale PNG mapped to [0, 1] by /255.
[[nodiscard]] MaskMap load_mask(const fs::path& path, std::optional<Size> resize = {});
void save_mask(const fs::path& path, const MaskMap& mask);

/// Raw 8-bit label maps (PNG), stored without scaling.
[[nodiscard]] Grid<std::uint8_t> load_labels(const fs::path& path);
void save_labels(const fs::path& path, const Grid<std::uint8_t>& labels);

/// Either "fx fy cx cy width height" or KITTI calibration lines
/// ("P0: ..." .. "P3: ..."; `camera` selects which). KITTI files carry no
/// image size, so `image_size` is required for them.
[[nodiscard]] Camera load_intrinsics(const fs::path& path,
                                     std::optional<Size> image_size = {},
                                     const std::string& camera = "P2");
void save_intrinsics(const fs::path& path, const Camera& K);

/// One row-major 3x4 matrix per line. Rotations are re-orthonormalised.
[[nodiscard]] std::vector<Mat4d> load_poses_kitti(const fs::path& path);
void save_poses_kitti(const fs::path& path, const std::vector<Mat4d>& poses);

/// "rx ry rz tx ty tz" per line, one per frame pair.
[[nodiscard]] std::vector<Pose> load_relative_poses(const fs::path& path);
void save_relative_poses(const fs::path& path, const std::vector<Pose>& poses);

enum class TrajectoryFormat { Kitti, Tum };

[[nodiscard]] TrajectoryFormat parse_trajectory_format(const std::string& name);

/// KITTI: 12 floats per line. TUM: "t tx ty tz qx qy qz qw" per line; frames
/// without a timestamp are written with their index.
void save_trajectory(const Trajectory& traj, TrajectoryFormat format, const fs::path& path);
[[nodiscard]] Trajectory load_trajectory(const fs::path& path, TrajectoryFormat format);

struct FrameRecord {
  fs::path image;
  fs::path depth;
  std::optional<fs::path> mask;
  std::optional<double> timestamp;
};

enum class InitialPoseFormat { KittiAbsolute, Relative };

struct SequenceManifest {
  fs::path base_dir;  // relative paths resolve against this
  std::vector<FrameRecord> frames;
  std::variant<fs::path, Camera> intrinsics;
  std::string camera{"P2"};
  double depth_scale{256.0};
  std::optional<Size> resize;
  InitialPoseFormat initial_format{InitialPoseFormat::Relative};
  fs::path initial_poses;
  std::optional<fs::path> ground_truth;

  [[nodiscard]] fs::path resolve(const fs::path& p) const;
};

/// JSON manifest; see README for the schema.
[[nodiscard]] SequenceManifest load_manifest(const fs::path& path);
void save_manifest(const fs::path& path, const SequenceManifest& manifest);

struct LoadedSequence {
  Camera K;
  std::vector<Frame> frames;
  std::vector<Pose> initial_relatives;
  std::optional<Trajectory> ground_truth;
  std::vector<std::optional<double>> timestamps;
};

/// Loads every referenced file and checks counts and resolutions.
[[nodiscard]] LoadedSequence load_sequence(const SequenceManifest& manifest);

}  // namespace doc::io

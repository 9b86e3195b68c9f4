#pragma once

// Closed-form synthetic scenes: textured planes (plus an optional nearer
// rectangle) rendered by exact ray casting, so depth, poses and occlusion
// sets are all known analytically.

#include <cstdint>
#include <optional>
#include <vector>

#include "doc/geometry.hpp"
#include "doc/image.hpp"
#include "doc/photometric.hpp"
#include "doc/trajectory.hpp"

namespace doc::synth {

struct Wave {
  Vec2d direction;  // unit
  double wavelength{1};  // meters on the surface
  double phase{0};
  double amplitude{0};
};

/// 0.5 + sum of sinusoids in surface coordinates; values stay in [0.05, 0.95].
struct Texture {
  std::vector<Wave> waves;

  [[nodiscard]] double value(const Vec2d& q) const;
};

struct TextureOptions {
  int waves{8};
  double min_wavelength{0.5};  // meters
  double max_wavelength{3.0};
};

[[nodiscard]] Texture make_texture(std::uint64_t seed, const TextureOptions& opt = {});

/// Textured rectangle centred at `center`, spanned by orthonormal axes.
struct Occluder {
  Vec3d center;
  Vec3d axis_u;
  Vec3d axis_v;
  double half_u{0.5};
  double half_v{0.5};
  Texture texture;

  [[nodiscard]] Vec3d normal() const { return axis_u.cross(axis_v); }
};

struct PlaneScene {
  Vec3d normal{0, 0, -1};  // unit, world frame
  double offset{-10};      // normal . X = offset
  Texture texture;
  Camera K;
  std::optional<Occluder> occluder;
};

/// Plane n . X = offset with a seeded texture.
[[nodiscard]] PlaneScene make_plane_scene(const Camera& K, const Vec3d& normal,
                                          double offset, std::uint64_t seed,
                                          const TextureOptions& opt = {});

[[nodiscard]] PlaneScene make_occluder_scene(const PlaneScene& base,
                                             const Occluder& occluder);

struct View {
  Image image;
  DepthMap depth;
  Grid<std::uint8_t> surface;  // 0 = plane, 1 = occluder
};

/// Renders the scene from a camera with the given world-to-camera transform.
/// Throws InputError when the plane is not in front of every pixel.
[[nodiscard]] View render_view(const PlaneScene& scene, const Mat4d& world_to_camera);

inline constexpr std::uint8_t kVisible = 0;
inline constexpr std::uint8_t kOccluded = 1;
inline constexpr std::uint8_t kOutOfView = 255;

/// Per target pixel: whether its surface point is hidden from the source
/// camera by the occluder (closed-form segment/rectangle test), visible, or
/// outside the source image. Poses are world-to-camera.
[[nodiscard]] Grid<std::uint8_t> occlusion_set(const PlaneScene& scene,
                                               const Mat4d& target_world_to_camera,
                                               const Mat4d& source_world_to_camera);

struct SequenceOptions {
  int frames{10};
  Pose motion;             // constant T_i^{i-1}
  double sigma_rotation{0};     // rad, per rotation-vector entry
  double sigma_translation{0};  // m, per translation entry
  std::uint64_t seed{1};
};

struct Sequence {
  Camera K;
  std::vector<Frame> frames;
  Trajectory ground_truth;         // camera-to-world, first pose identity
  std::vector<Pose> gt_relatives;
  std::vector<Pose> init_relatives;  // ground truth perturbed in (r, t)
};

[[nodiscard]] Sequence make_sequence(const PlaneScene& scene, const SequenceOptions& opt);

/// A ready-made scene and motion for quick experiments: plane `depth` meters
/// ahead, tilted by `tilt` rad about x and y, 8 waves with wavelengths chosen
/// to span 12..80 px at that depth.
[[nodiscard]] PlaneScene standard_scene(const Camera& K, double depth, double tilt,
                                        std::uint64_t seed);

}  // namespace doc::synth

#include "doc/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace doc::synth {

namespace {

// Orthonormal in-plane basis for a unit normal.
std::pair<Vec3d, Vec3d> plane_basis(const Vec3d& n) {
  const Vec3d helper = std::abs(n.x()) < 0.9 ? Vec3d::UnitX() : Vec3d::UnitY();
  const Vec3d e1 = n.cross(helper).normalized();
  return {e1, n.cross(e1)};
}

struct Hit {
  double depth{0};
  Vec3d point;
  bool occluder{false};
};

// Distance along the ray (origin o, direction d) to the rectangle, or NaN.
double intersect_occluder(const Occluder& occ, const Vec3d& o, const Vec3d& d) {
  const Vec3d m = occ.normal();
  const double denom = m.dot(d);
  if (std::abs(denom) < 1e-12) return std::numeric_limits<double>::quiet_NaN();
  const double s = m.dot(occ.center - o) / denom;
  const Vec3d local = o + s * d - occ.center;
  if (std::abs(local.dot(occ.axis_u)) > occ.half_u ||
      std::abs(local.dot(occ.axis_v)) > occ.half_v)
    return std::numeric_limits<double>::quiet_NaN();
  return s;
}

// Nearest surface along a camera ray with unit z component in camera frame.
Hit cast(const PlaneScene& scene, const Vec3d& origin, const Vec3d& dir) {
  const double denom = scene.normal.dot(dir);
  const double s = std::abs(denom) < 1e-12 ? -1.0
                                           : (scene.offset - scene.normal.dot(origin)) / denom;
  if (!(s > kMinDepth)) throw InputError("synthetic plane is behind the camera");
  Hit hit{s, origin + s * dir, false};
  if (scene.occluder) {
    const double so = intersect_occluder(*scene.occluder, origin, dir);
    if (so > kMinDepth && so < s) hit = {so, origin + so * dir, true};
  }
  return hit;
}

double shade(const PlaneScene& scene, const Hit& hit) {
  if (hit.occluder) {
    const Occluder& occ = *scene.occluder;
    const Vec3d local = hit.point - occ.center;
    return occ.texture.value({local.dot(occ.axis_u), local.dot(occ.axis_v)});
  }
  const auto [e1, e2] = plane_basis(scene.normal);
  return scene.texture.value({hit.point.dot(e1), hit.point.dot(e2)});
}

}  // namespace

double Texture::value(const Vec2d& q) const {
  double s = 0.5;
  for (const Wave& w : waves)
    s += w.amplitude *
         std::sin(2.0 * std::numbers::pi * w.direction.dot(q) / w.wavelength + w.phase);
  return s;
}

Texture make_texture(std::uint64_t seed, const TextureOptions& opt) {
  if (opt.waves < 1 || !(opt.min_wavelength > 0) || opt.max_wavelength < opt.min_wavelength)
    throw InputError("invalid texture options");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Texture tex;
  double total = 0;
  const double log_min = std::log(opt.min_wavelength);
  const double log_max = std::log(opt.max_wavelength);
  for (int k = 0; k < opt.waves; ++k) {
    Wave w;
    const double angle = std::numbers::pi * (double(k) + unit(rng)) / opt.waves;
    w.direction = {std::cos(angle), std::sin(angle)};
    // Spread wavelengths evenly in log space with jitter.
    const double f = (double(k) + unit(rng)) / opt.waves;
    w.wavelength = std::exp(log_min + f * (log_max - log_min));
    w.phase = 2.0 * std::numbers::pi * unit(rng);
    w.amplitude = w.wavelength;
    total += w.amplitude;
    tex.waves.push_back(w);
  }
  for (Wave& w : tex.waves) w.amplitude *= 0.45 / total;
  return tex;
}

PlaneScene make_plane_scene(const Camera& K, const Vec3d& normal, double offset,
                            std::uint64_t seed, const TextureOptions& opt) {
  K.validate();
  if (!(normal.norm() > 0)) throw InputError("plane normal must be non-zero");
  PlaneScene scene;
  scene.normal = normal.normalized();
  scene.offset = offset / normal.norm();
  scene.texture = make_texture(seed, opt);
  scene.K = K;
  return scene;
}

PlaneScene make_occluder_scene(const PlaneScene& base, const Occluder& occluder) {
  PlaneScene scene = base;
  Occluder occ = occluder;
  occ.axis_u.normalize();
  occ.axis_v = (occ.axis_v - occ.axis_v.dot(occ.axis_u) * occ.axis_u).normalized();
  scene.occluder = occ;
  return scene;
}

View render_view(const PlaneScene& scene, const Mat4d& world_to_camera) {
  const Camera& K = scene.K;
  const Mat4d cam_to_world = invert(world_to_camera);
  const Mat3d R = cam_to_world.topLeftCorner<3, 3>();
  const Vec3d origin = cam_to_world.topRightCorner<3, 1>();
  View view{Image(K.width, K.height, 1), DepthMap(GridD::Zero(K.height, K.width)),
            Grid<std::uint8_t>::Zero(K.height, K.width)};
  for (int v = 0; v < K.height; ++v) {
    for (int u = 0; u < K.width; ++u) {
      const Vec3d dir = R * Vec3d((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0);
      const Hit hit = cast(scene, origin, dir);
      view.depth.meters(v, u) = hit.depth;
      view.image.channel(0)(v, u) = shade(scene, hit);
      view.surface(v, u) = hit.occluder ? 1 : 0;
    }
  }
  return view;
}

Grid<std::uint8_t> occlusion_set(const PlaneScene& scene, const Mat4d& target_w2c,
                                 const Mat4d& source_w2c) {
  const Camera& K = scene.K;
  const Mat4d target_c2w = invert(target_w2c);
  const Mat3d R = target_c2w.topLeftCorner<3, 3>();
  const Vec3d origin = target_c2w.topRightCorner<3, 1>();
  const Vec3d source_center = invert(source_w2c).topRightCorner<3, 1>();
  Grid<std::uint8_t> out = Grid<std::uint8_t>::Constant(K.height, K.width, kOutOfView);
  for (int v = 0; v < K.height; ++v) {
    for (int u = 0; u < K.width; ++u) {
      const Vec3d dir = R * Vec3d((u - K.cx) / K.fx, (v - K.cy) / K.fy, 1.0);
      const Hit hit = cast(scene, origin, dir);
      const Vec3d Xs = source_w2c.topLeftCorner<3, 3>() * hit.point +
                       source_w2c.topRightCorner<3, 1>();
      const auto p = project(K, Xs);
      if (!p.valid || p.u < 0 || p.v < 0 || p.u > K.width - 1 || p.v > K.height - 1)
        continue;
      out(v, u) = kVisible;
      if (!scene.occluder || hit.occluder) continue;
      // Segment from the source centre to the surface point.
      const Vec3d seg = hit.point - source_center;
      const double s = intersect_occluder(*scene.occluder, source_center, seg);
      if (s > 1e-9 && s < 1.0 - 1e-9) out(v, u) = kOccluded;
    }
  }
  return out;
}

Sequence make_sequence(const PlaneScene& scene, const SequenceOptions& opt) {
  if (opt.frames < 2) throw InputError("make_sequence: need at least 2 frames");
  if (opt.sigma_rotation < 0 || opt.sigma_translation < 0)
    throw InputError("make_sequence: noise must be non-negative");
  Sequence seq;
  seq.K = scene.K;
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Mat4d pose = Mat4d::Identity();
  for (int i = 0; i < opt.frames; ++i) {
    if (i > 0) {
      pose = compose(pose, opt.motion.matrix());
      seq.gt_relatives.push_back(opt.motion);
      Vec6d p = opt.motion.params();
      for (int k = 0; k < 3; ++k) p[k] += opt.sigma_rotation * gauss(rng);
      for (int k = 3; k < 6; ++k) p[k] += opt.sigma_translation * gauss(rng);
      seq.init_relatives.emplace_back(p);
    }
    seq.ground_truth.poses.push_back({i, double(i) * 0.1, pose});
    View view = render_view(scene, invert(pose));
    seq.frames.push_back({std::move(view.image), std::move(view.depth), std::nullopt});
  }
  return seq;
}

PlaneScene standard_scene(const Camera& K, double depth, double tilt, std::uint64_t seed) {
  const Vec3d n = (Vec3d(std::sin(tilt), std::sin(0.6 * tilt), -1.0)).normalized();
  // Plane through (0, 0, depth): n . X = n.z * depth.
  TextureOptions tex;
  tex.min_wavelength = 12.0 * depth / K.fx;
  tex.max_wavelength = 80.0 * depth / K.fx;
  return make_plane_scene(K, n, n.z() * depth, seed, tex);
}

}  // namespace doc::synth

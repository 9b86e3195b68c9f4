#include "doc/warp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace doc {

RayGrid precompute_rays(const Camera& K) {
  K.validate();
  RayGrid rays{GridD(K.height, K.width), GridD(K.height, K.width)};
  for (int v = 0; v < K.height; ++v) {
    for (int u = 0; u < K.width; ++u) {
      rays.x(v, u) = (u - K.cx) / K.fx;
      rays.y(v, u) = (v - K.cy) / K.fy;
    }
  }
  return rays;
}

namespace {

// Coordinates within this distance of an integer are treated as exact, so an
// identity warp reproduces pixel values bit-for-bit.
constexpr double kSnap = 1e-9;

// Caller guarantees x > -0.5, so truncation rounds to nearest.
double snap(double x) {
  const double r = double(int(x + 0.5));
  return std::abs(x - r) < kSnap ? r : x;
}

}  // namespace

bool locate_cell(double u, double v, int width, int height, BilinearCell& cell) {
  if (!(u > -0.5 && v > -0.5 && u < width - 0.5 && v < height - 0.5)) return false;
  u = snap(u);
  v = snap(v);
  if (!(u >= 0.0 && v >= 0.0 && u <= width - 1 && v <= height - 1)) return false;
  cell.u0 = std::min(int(u), width - 2);
  cell.v0 = std::min(int(v), height - 2);
  cell.a = u - cell.u0;
  cell.b = v - cell.v0;
  return true;
}

Sample bilinear_sample(const Image& img, double u, double v) {
  Sample s;
  BilinearCell cell;
  if (!locate_cell(u, v, img.width(), img.height(), cell)) return s;
  s.in_bounds = true;
  s.values.reserve(std::size_t(img.channels()));
  for (const auto& plane : img.planes) s.values.push_back(interpolate(plane, cell));
  return s;
}

WarpResult inverse_warp(const DepthMap& target_depth, const Mat4d& T,
                        const Image& src_img, const Camera& K,
                        const RayGrid& rays, const DepthMap* src_depth) {
  require_same_size(target_depth, src_img, "inverse_warp");
  require_same_size(target_depth, rays, "inverse_warp");
  if (src_depth) require_same_size(target_depth, *src_depth, "inverse_warp");
  if (!is_rigid(T)) throw InputError("inverse_warp: transform is not rigid");

  const int W = target_depth.width();
  const int H = target_depth.height();
  const int C = src_img.channels();
  const Mat3d R = T.topLeftCorner<3, 3>();
  const Vec3d t = T.topRightCorner<3, 1>();
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();

  WarpResult out;
  out.warped = Image(W, H, C);
  out.valid = MaskMap(GridD::Zero(H, W));
  out.coord_u = GridD::Constant(H, W, nan);
  out.coord_v = GridD::Constant(H, W, nan);
  out.z_transformed = GridD::Constant(H, W, nan);
  if (src_depth) out.sampled_depth = GridD::Constant(H, W, nan);

  for (int v = 0; v < H; ++v) {
    for (int u = 0; u < W; ++u) {
      if (!target_depth.valid(v, u)) continue;
      const Vec3d X = R * (rays.ray(v, u) * target_depth.meters(v, u)) + t;
      out.z_transformed(v, u) = X.z();
      const auto p = project(K, X);
      if (!p.valid) continue;
      out.coord_u(v, u) = p.u;
      out.coord_v(v, u) = p.v;
      BilinearCell cell;
      if (!locate_cell(p.u, p.v, W, H, cell)) continue;
      out.valid.weights(v, u) = 1.0;
      for (int c = 0; c < C; ++c)
        out.warped.channel(c)(v, u) = interpolate(src_img.channel(c), cell);
      if (src_depth) {
        const bool taps = src_depth->valid(cell.v0, cell.u0) &&
                          src_depth->valid(cell.v0, cell.u0 + 1) &&
                          src_depth->valid(cell.v0 + 1, cell.u0) &&
                          src_depth->valid(cell.v0 + 1, cell.u0 + 1);
        if (taps) (*out.sampled_depth)(v, u) = interpolate(src_depth->meters, cell);
      }
    }
  }
  return out;
}

}  // namespace doc

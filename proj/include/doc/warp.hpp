#pragma once

#include <optional>

#include "doc/geometry.hpp"
#include "doc/image.hpp"

namespace doc {

/// Unit-depth viewing rays: unproject(K, u, v, d) == ray(u, v) * d.
struct RayGrid {
  GridD x;  // (u - cx) / fx
  GridD y;  // (v - cy) / fy

  [[nodiscard]] int width() const { return int(x.cols()); }
  [[nodiscard]] int height() const { return int(x.rows()); }
  [[nodiscard]] Vec3d ray(int v, int u) const { return {x(v, u), y(v, u), 1.0}; }
};

[[nodiscard]] RayGrid precompute_rays(const Camera& K);

/// Intrinsics together with their ray grid; computed once per sequence.
struct Calibration {
  Camera K;
  RayGrid rays;

  explicit Calibration(const Camera& intrinsics)
      : K(intrinsics), rays(precompute_rays(intrinsics)) {}
};

/// Top-left corner of the bilinear cell holding (u, v) and the fractional
/// offsets inside it. Coordinates on the last row/column use the cell to their
/// left/top with offset 1, so the four taps always exist.
struct BilinearCell {
  int u0{0}, v0{0};
  double a{0}, b{0};
};

/// Locates (u, v) in a width x height grid; false when outside
/// [0, width-1] x [0, height-1]. Grids must be at least 2x2.
[[nodiscard]] bool locate_cell(double u, double v, int width, int height,
                               BilinearCell& cell);

/// Interpolates with the cell's taps; offsets outside [0,1] extrapolate the
/// same bilinear patch.
template <typename Scalar>
[[nodiscard]] double interpolate(const Grid<Scalar>& g, const BilinearCell& c) {
  const double w00 = (1.0 - c.a) * (1.0 - c.b);
  const double w10 = c.a * (1.0 - c.b);
  const double w01 = (1.0 - c.a) * c.b;
  const double w11 = c.a * c.b;
  return w00 * g(c.v0, c.u0) + w10 * g(c.v0, c.u0 + 1) +
         w01 * g(c.v0 + 1, c.u0) + w11 * g(c.v0 + 1, c.u0 + 1);
}

/// Derivatives of interpolate() with respect to (u, v).
template <typename Scalar>
[[nodiscard]] Vec2d interpolate_gradient(const Grid<Scalar>& g,
                                         const BilinearCell& c) {
  const double i00 = g(c.v0, c.u0), i10 = g(c.v0, c.u0 + 1);
  const double i01 = g(c.v0 + 1, c.u0), i11 = g(c.v0 + 1, c.u0 + 1);
  return {(1.0 - c.b) * (i10 - i00) + c.b * (i11 - i01),
          (1.0 - c.a) * (i01 - i00) + c.a * (i11 - i10)};
}

struct Sample {
  std::vector<double> values;  // one per channel
  bool in_bounds{false};
};

[[nodiscard]] Sample bilinear_sample(const Image& img, double u, double v);

struct WarpResult {
  Image warped;
  MaskMap valid;  // {0, 1}
  GridD coord_u;
  GridD coord_v;
  GridD z_transformed;
  // Source depth at (coord_u, coord_v); NaN where any bilinear tap is invalid.
  std::optional<GridD> sampled_depth;
};

/// Samples src_img at the reprojection of every target pixel:
/// X = ray * depth, X' = T X, (u, v) = project(K, X').
/// T maps target-camera coordinates to source-camera coordinates.
[[nodiscard]] WarpResult inverse_warp(const DepthMap& target_depth,
                                      const Mat4d& T, const Image& src_img,
                                      const Camera& K, const RayGrid& rays,
                                      const DepthMap* src_depth = nullptr);

}  // namespace doc

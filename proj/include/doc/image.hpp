#pragma once

// Dense per-pixel grids. Storage is row-major, indexed (row, col) = (v, u).

#include <Eigen/Core>

#include <cmath>
#include <string>
#include <vector>

#include "doc/error.hpp"

namespace doc {

template <typename Scalar>
using Grid = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using GridD = Grid<double>;

/// Intensity image with 1 or 3 channel planes, values in [0, 1].
template <typename Scalar>
struct ImageT {
  std::vector<Grid<Scalar>> planes;

  ImageT() = default;
  ImageT(int width, int height, int channels)
      : planes(static_cast<std::size_t>(channels),
               Grid<Scalar>::Zero(height, width)) {}
  explicit ImageT(Grid<Scalar> gray) { planes.push_back(std::move(gray)); }

  [[nodiscard]] int width() const { return planes.empty() ? 0 : int(planes[0].cols()); }
  [[nodiscard]] int height() const { return planes.empty() ? 0 : int(planes[0].rows()); }
  [[nodiscard]] int channels() const { return int(planes.size()); }
  [[nodiscard]] Grid<Scalar>& channel(int c) { return planes[std::size_t(c)]; }
  [[nodiscard]] const Grid<Scalar>& channel(int c) const { return planes[std::size_t(c)]; }
  [[nodiscard]] bool all_finite() const {
    for (const auto& p : planes)
      if (!p.allFinite()) return false;
    return true;
  }
};

using Image = ImageT<double>;

/// Depth in meters; a pixel is valid when its value is finite and positive.
template <typename Scalar>
struct DepthMapT {
  Grid<Scalar> meters;

  DepthMapT() = default;
  explicit DepthMapT(Grid<Scalar> m) : meters(std::move(m)) {}

  [[nodiscard]] int width() const { return int(meters.cols()); }
  [[nodiscard]] int height() const { return int(meters.rows()); }
  [[nodiscard]] bool valid(int v, int u) const {
    const Scalar d = meters(v, u);
    return std::isfinite(d) && d > Scalar(0);
  }
};

using DepthMap = DepthMapT<double>;

/// Per-pixel weights in [0, 1].
template <typename Scalar>
struct MaskMapT {
  Grid<Scalar> weights;

  MaskMapT() = default;
  explicit MaskMapT(Grid<Scalar> w) : weights(std::move(w)) {}
  static MaskMapT ones(int width, int height) {
    return MaskMapT(Grid<Scalar>::Ones(height, width));
  }

  [[nodiscard]] int width() const { return int(weights.cols()); }
  [[nodiscard]] int height() const { return int(weights.rows()); }
};

using MaskMap = MaskMapT<double>;

template <typename A, typename B>
void require_same_size(const A& a, const B& b, const char* what) {
  if (a.width() != b.width() || a.height() != b.height())
    throw InputError(std::string(what) + ": dimension mismatch (" +
                     std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                     " vs " + std::to_string(b.width()) + "x" +
                     std::to_string(b.height()) + ")");
}

}  // namespace doc

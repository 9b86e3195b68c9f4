#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "doc/geometry.hpp"
#include "doc/image.hpp"
#include "doc/warp.hpp"

namespace doc {

enum class Loss { TruncatedL1, L1, Ssim };

// Which depth the sampled source depth is compared against in the occlusion
// test: the transformed point's depth in the source camera (default), or the
// target-frame depth as literally written in the formulation.
enum class OcclusionTest { TransformedDepth, TargetDepth };

struct EnergyConfig {
  Loss loss{Loss::TruncatedL1};
  bool use_occlusion_mask{true};
  bool use_explainability_mask{true};
  double far_depth{5.0};          // d_m: pixels farther than this are never occluded
  double occlusion_slack{0.1};    // meters of tolerance in the depth test
  OcclusionTest occlusion_test{OcclusionTest::TransformedDepth};
  double alpha{0.8};              // weight of the adjacent pair in 3-frame windows
  int frames{2};

  void validate() const;
};

/// One frame of input: intensity, depth and an optional explainability mask.
struct Frame {
  Image image;
  DepthMap depth;
  std::optional<MaskMap> explainability;
};

struct ErrorMap {
  GridD data;                  // >= 0, zero wherever inactive
  Grid<std::uint8_t> active;   // {0, 1}

  [[nodiscard]] int width() const { return int(data.cols()); }
  [[nodiscard]] int height() const { return int(data.rows()); }
  [[nodiscard]] int active_count() const;
  /// Mean over active pixels; throws DegenerateWindowError when none are.
  [[nodiscard]] double mean_active() const;
};

/// Mean-over-channels |A - B| on pixels where valid == 1.
[[nodiscard]] ErrorMap photometric_l1(const Image& A, const Image& B,
                                      const MaskMap& valid);

/// Deactivates pixels with E >= mean + stddev (population statistics over
/// active pixels). A uniform map (stddev == 0) is left unchanged.
[[nodiscard]] ErrorMap truncate_errors(const ErrorMap& E);

/// Truncation threshold mean + population stddev over active pixels.
[[nodiscard]] double truncation_threshold(const ErrorMap& E);

/// Binary occlusion mask; 1 where the target pixel is visible in the source.
/// Requires warp.sampled_depth.
[[nodiscard]] MaskMap occlusion_mask(const DepthMap& target_depth,
                                     const WarpResult& warp, double far_depth,
                                     double slack = 0.1,
                                     OcclusionTest test = OcclusionTest::TransformedDepth);

/// (1 - SSIM) / 2 over 3x3 box windows, averaged over channels. A pixel is
/// active when its whole window is valid.
[[nodiscard]] ErrorMap ssim_error(const Image& A, const Image& B,
                                  const MaskMap& valid);

/// Multiplies errors by mask weights; pixels with zero weight become inactive.
[[nodiscard]] ErrorMap apply_mask(const ErrorMap& E, const MaskMap& M);

// ---------------------------------------------------------------------------
// Differentiable directed terms
// ---------------------------------------------------------------------------

/// Discrete state of one directed term: which pixels count, their mask
/// weights, bilinear cells and residual signs. Within one gradient evaluation
/// these are constants; freezing them makes the term a smooth function of T.
struct TermState {
  Grid<std::uint8_t> active;
  Grid<std::uint8_t> sampled;  // warp valid (SSIM needs whole windows)
  GridD weight;
  Grid<int> cell_u;
  Grid<int> cell_v;
  std::vector<Grid<std::int8_t>> sign;  // per channel, L1 losses only
  int count{0};
};

/// dE/dR and dE/dt of a term with respect to its transform T = [R | t].
struct TransformGradient {
  Mat3d rotation{Mat3d::Zero()};
  Vec3d translation{Vec3d::Zero()};

  TransformGradient& operator+=(const TransformGradient& o) {
    rotation += o.rotation;
    translation += o.translation;
    return *this;
  }
  friend TransformGradient operator*(double s, const TransformGradient& g) {
    return {s * g.rotation, s * g.translation};
  }
};

struct TermEvaluation {
  double energy{0};
  TransformGradient gradient;
  TermState state;
  ErrorMap errors;
};

/// Evaluates E = mean over active pixels of M o E_pho(warp(src), tgt) with
/// T mapping target-camera points into the source camera. When `frozen` is
/// given its state is reused instead of recomputing masks and truncation.
[[nodiscard]] TermEvaluation evaluate_directed(
    const Frame& target, const Frame& source, const Calibration& calib,
    const Mat4d& T, const EnergyConfig& cfg, bool with_gradient,
    const TermState* frozen = nullptr);

/// Scalar energy and error map of one directed term.
[[nodiscard]] std::pair<double, ErrorMap> directed_error(
    const Frame& target, const Frame& source, const Calibration& calib,
    const Mat4d& T, const EnergyConfig& cfg);

/// Forward plus backward error between frames (i-1, i); T maps frame-i
/// coordinates into frame i-1.
[[nodiscard]] double energy_two_frame(const Frame& previous, const Frame& current,
                                      const Calibration& calib, const Mat4d& T,
                                      const EnergyConfig& cfg);

/// alpha * (adjacent pair) + (1 - alpha) * (pair i-2, i), where the i-2 <- i
/// transform is T_prev * T_cur.
[[nodiscard]] double energy_three_frame(const Frame& f0, const Frame& f1,
                                        const Frame& f2, const Calibration& calib,
                                        const Mat4d& T_prev, const Mat4d& T_cur,
                                        const EnergyConfig& cfg);

}  // namespace doc

#include "doc/photometric.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "doc/detail/summation.hpp"

namespace doc {

namespace {

constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

// SSIM of one 3x3 window and its partials w.r.t. the window statistics.
struct SsimWindow {
  double value{0};
  double mu_x{0}, mu_y{0};
  double d_mu_x{0}, d_var_x{0}, d_cov{0};

  // dSSIM / dx_k for tap k with intensities x_k, y_k.
  [[nodiscard]] double tap_derivative(double x, double y) const {
    return (d_mu_x + 2.0 * d_var_x * (x - mu_x) + d_cov * (y - mu_y)) / 9.0;
  }
};

SsimWindow ssim_window(const std::array<double, 9>& x, const std::array<double, 9>& y) {
  SsimWindow w;
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (int k = 0; k < 9; ++k) {
    sx += x[k];
    sy += y[k];
    sxx += x[k] * x[k];
    syy += y[k] * y[k];
    sxy += x[k] * y[k];
  }
  w.mu_x = sx / 9.0;
  w.mu_y = sy / 9.0;
  const double var_x = sxx / 9.0 - w.mu_x * w.mu_x;
  const double var_y = syy / 9.0 - w.mu_y * w.mu_y;
  const double cov = sxy / 9.0 - w.mu_x * w.mu_y;
  const double n1 = 2.0 * w.mu_x * w.mu_y + kSsimC1;
  const double n2 = 2.0 * cov + kSsimC2;
  const double d1 = w.mu_x * w.mu_x + w.mu_y * w.mu_y + kSsimC1;
  const double d2 = var_x + var_y + kSsimC2;
  w.value = (n1 * n2) / (d1 * d2);
  w.d_mu_x = 2.0 * w.mu_y * n2 / (d1 * d2) - w.value * 2.0 * w.mu_x / d1;
  w.d_var_x = -w.value / d2;
  w.d_cov = 2.0 * n1 / (d1 * d2);
  return w;
}

template <typename Fn>
void gather_window(int v, int u, Fn&& fn, std::array<double, 9>& out) {
  int k = 0;
  for (int dv = -1; dv <= 1; ++dv)
    for (int du = -1; du <= 1; ++du) out[std::size_t(k++)] = fn(v + dv, u + du);
}

bool window_valid(const MaskMap& valid, int v, int u) {
  const int W = valid.width(), H = valid.height();
  if (u < 1 || v < 1 || u > W - 2 || v > H - 2) return false;
  for (int dv = -1; dv <= 1; ++dv)
    for (int du = -1; du <= 1; ++du)
      if (valid.weights(v + dv, u + du) != 1.0) return false;
  return true;
}

void check_sizes(const Image& A, const Image& B, const MaskMap& valid, const char* what) {
  require_same_size(A, B, what);
  require_same_size(A, valid, what);
  if (A.channels() != B.channels())
    throw InputError(std::string(what) + ": channel count mismatch");
}

}  // namespace

void EnergyConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw InputError("alpha must lie in [0, 1]");
  if (!(far_depth > 0.0)) throw InputError("far depth threshold must be positive");
  if (!(occlusion_slack >= 0.0)) throw InputError("occlusion slack must be >= 0");
  if (frames != 2 && frames != 3) throw InputError("frames must be 2 or 3");
}

int ErrorMap::active_count() const { return int(active.cast<int>().sum()); }

double ErrorMap::mean_active() const {
  detail::CompensatedSum sum;
  int n = 0;
  for (int v = 0; v < height(); ++v)
    for (int u = 0; u < width(); ++u)
      if (active(v, u)) {
        sum += data(v, u);
        ++n;
      }
  if (n == 0) throw DegenerateWindowError("no active pixels");
  return sum.value() / n;
}

ErrorMap photometric_l1(const Image& A, const Image& B, const MaskMap& valid) {
  check_sizes(A, B, valid, "photometric_l1");
  const int W = A.width(), H = A.height(), C = A.channels();
  ErrorMap E{GridD::Zero(H, W), Grid<std::uint8_t>::Zero(H, W)};
  for (int v = 0; v < H; ++v) {
    for (int u = 0; u < W; ++u) {
      if (valid.weights(v, u) != 1.0) continue;
      double s = 0;
      for (int c = 0; c < C; ++c) s += std::abs(A.channel(c)(v, u) - B.channel(c)(v, u));
      E.data(v, u) = s / C;
      E.active(v, u) = 1;
    }
  }
  return E;
}

double truncation_threshold(const ErrorMap& E) {
  const double mean = E.mean_active();
  detail::CompensatedSum sq;
  int n = 0;
  for (int v = 0; v < E.height(); ++v)
    for (int u = 0; u < E.width(); ++u)
      if (E.active(v, u)) {
        const double d = E.data(v, u) - mean;
        sq += d * d;
        ++n;
      }
  return mean + std::sqrt(sq.value() / n);
}

ErrorMap truncate_errors(const ErrorMap& E) {
  const double mean = E.mean_active();
  const double threshold = truncation_threshold(E);
  ErrorMap out = E;
  // Uniform maps (zero spread up to rounding) keep every pixel.
  if (threshold - mean <= 1e-12 * (1.0 + std::abs(mean))) return out;
  for (int v = 0; v < E.height(); ++v)
    for (int u = 0; u < E.width(); ++u)
      if (out.active(v, u) && out.data(v, u) >= threshold) {
        out.active(v, u) = 0;
        out.data(v, u) = 0.0;
      }
  return out;
}

MaskMap occlusion_mask(const DepthMap& target_depth, const WarpResult& warp,
                       double far_depth, double slack, OcclusionTest test) {
  if (!warp.sampled_depth) throw InputError("occlusion_mask: warp has no sampled depth");
  require_same_size(target_depth, warp.valid, "occlusion_mask");
  const int W = target_depth.width(), H = target_depth.height();
  MaskMap M(GridD::Zero(H, W));
  for (int v = 0; v < H; ++v) {
    for (int u = 0; u < W; ++u) {
      if (warp.valid.weights(v, u) != 1.0) continue;
      const double d = target_depth.meters(v, u);
      if (d > far_depth) {
        M.weights(v, u) = 1.0;
        continue;
      }
      const double sampled = (*warp.sampled_depth)(v, u);
      if (std::isnan(sampled)) continue;
      const bool visible = test == OcclusionTest::TransformedDepth
                               ? sampled > warp.z_transformed(v, u) - slack
                               : sampled > d;
      M.weights(v, u) = visible ? 1.0 : 0.0;
    }
  }
  return M;
}

ErrorMap ssim_error(const Image& A, const Image& B, const MaskMap& valid) {
  check_sizes(A, B, valid, "ssim_error");
  const int W = A.width(), H = A.height(), C = A.channels();
  ErrorMap E{GridD::Zero(H, W), Grid<std::uint8_t>::Zero(H, W)};
  std::array<double, 9> x{}, y{};
  for (int v = 0; v < H; ++v) {
    for (int u = 0; u < W; ++u) {
      if (!window_valid(valid, v, u)) continue;
      double s = 0;
      for (int c = 0; c < C; ++c) {
        gather_window(v, u, [&](int vv, int uu) { return A.channel(c)(vv, uu); }, x);
        gather_window(v, u, [&](int vv, int uu) { return B.channel(c)(vv, uu); }, y);
        s += (1.0 - ssim_window(x, y).value) / 2.0;
      }
      E.data(v, u) = std::max(0.0, s / C);
      E.active(v, u) = 1;
    }
  }
  return E;
}

ErrorMap apply_mask(const ErrorMap& E, const MaskMap& M) {
  require_same_size(E, M, "apply_mask");
  ErrorMap out = E;
  for (int v = 0; v < E.height(); ++v)
    for (int u = 0; u < E.width(); ++u) {
      const double w = M.weights(v, u);
      if (!(w > 0.0)) {
        out.active(v, u) = 0;
        out.data(v, u) = 0.0;
      } else {
        out.data(v, u) *= w;
      }
    }
  return out;
}

namespace {

TermState build_state(const Frame& target, const Frame& source,
                      const Calibration& calib, const Mat4d& T,
                      const EnergyConfig& cfg, ErrorMap& errors) {
  const bool occlusion = cfg.use_occlusion_mask;
  const WarpResult warp = inverse_warp(target.depth, T, source.image, calib.K,
                                       calib.rays, occlusion ? &source.depth : nullptr);
  const int W = calib.K.width, H = calib.K.height;
  require_same_size(target.image, calib.rays, "directed term");
  if (target.image.channels() != source.image.channels())
    throw InputError("directed term: channel count mismatch");

  errors = cfg.loss == Loss::Ssim ? ssim_error(warp.warped, target.image, warp.valid)
                                  : photometric_l1(warp.warped, target.image, warp.valid);
  MaskMap mask = MaskMap::ones(W, H);
  if (occlusion)
    mask = occlusion_mask(target.depth, warp, cfg.far_depth, cfg.occlusion_slack,
                          cfg.occlusion_test);
  if (cfg.use_explainability_mask && target.explainability) {
    require_same_size(*target.explainability, mask, "explainability mask");
    mask.weights *= target.explainability->weights;
  }
  errors = apply_mask(errors, mask);
  if (errors.active_count() == 0)
    throw DegenerateWindowError("directed term has no active pixels");
  if (cfg.loss == Loss::TruncatedL1) errors = truncate_errors(errors);

  TermState s;
  s.active = errors.active;
  s.count = errors.active_count();
  s.sampled = warp.valid.weights.cast<std::uint8_t>();
  s.weight = mask.weights;
  s.cell_u = Grid<int>::Zero(H, W);
  s.cell_v = Grid<int>::Zero(H, W);
  const int C = target.image.channels();
  const bool l1 = cfg.loss != Loss::Ssim;
  if (l1) s.sign.assign(std::size_t(C), Grid<std::int8_t>::Zero(H, W));
  for (int v = 0; v < H; ++v) {
    for (int u = 0; u < W; ++u) {
      if (!s.sampled(v, u)) continue;
      BilinearCell cell;
      (void)locate_cell(warp.coord_u(v, u), warp.coord_v(v, u), W, H, cell);
      s.cell_u(v, u) = cell.u0;
      s.cell_v(v, u) = cell.v0;
      if (!l1) continue;
      for (int c = 0; c < C; ++c) {
        const double d = warp.warped.channel(c)(v, u) - target.image.channel(c)(v, u);
        s.sign[std::size_t(c)](v, u) = std::int8_t((d > 0) - (d < 0));
      }
    }
  }
  return s;
}

}  // namespace

TermEvaluation evaluate_directed(const Frame& target, const Frame& source,
                                 const Calibration& calib, const Mat4d& T,
                                 const EnergyConfig& cfg, bool with_gradient,
                                 const TermState* frozen) {
  TermEvaluation out;
  if (frozen) {
    out.state = *frozen;
  } else {
    out.state = build_state(target, source, calib, T, cfg, out.errors);
  }
  const TermState& s = out.state;
  const Camera& K = calib.K;
  const int W = K.width, H = K.height, C = target.image.channels();
  const bool l1 = cfg.loss != Loss::Ssim;
  const Mat3d R = T.topLeftCorner<3, 3>();
  const Vec3d t = T.topRightCorner<3, 1>();
  const double norm = 1.0 / (double(C) * double(s.count));

  // Continuous pass: warped intensities as smooth functions of T given the
  // frozen cells. For L1 only active pixels are needed; SSIM reads windows.
  std::vector<Grid<double>> warped(std::size_t(C), GridD::Zero(H, W));
  for (int v = 0; v < H; ++v) {
    for (int u = 0; u < W; ++u) {
      if (!s.sampled(v, u) || (l1 && !s.active(v, u))) continue;
      const Vec3d X = R * (calib.rays.ray(v, u) * target.depth.meters(v, u)) + t;
      BilinearCell cell{s.cell_u(v, u), s.cell_v(v, u), 0, 0};
      cell.a = K.fx * X.x() / X.z() + K.cx - cell.u0;
      cell.b = K.fy * X.y() / X.z() + K.cy - cell.v0;
      for (int c = 0; c < C; ++c)
        warped[std::size_t(c)](v, u) = interpolate(source.image.channel(c), cell);
    }
  }

  // Energy and its adjoint with respect to each warped intensity.
  std::vector<Grid<double>> adjoint;
  if (with_gradient) adjoint.assign(std::size_t(C), GridD::Zero(H, W));
  GridD values = GridD::Zero(H, W);
  detail::CompensatedSum energy;
  std::array<double, 9> x{}, y{};
  for (int v = 0; v < H; ++v) {
    for (int u = 0; u < W; ++u) {
      if (!s.active(v, u)) continue;
      const double w = s.weight(v, u);
      double e = 0;
      if (l1) {
        for (int c = 0; c < C; ++c) {
          const double sign = s.sign[std::size_t(c)](v, u);
          e += sign * (warped[std::size_t(c)](v, u) - target.image.channel(c)(v, u));
          if (with_gradient) adjoint[std::size_t(c)](v, u) += w * sign * norm;
        }
      } else {
        for (int c = 0; c < C; ++c) {
          const auto& wc = warped[std::size_t(c)];
          const auto& tc = target.image.channel(c);
          gather_window(v, u, [&](int vv, int uu) { return wc(vv, uu); }, x);
          gather_window(v, u, [&](int vv, int uu) { return tc(vv, uu); }, y);
          const SsimWindow sw = ssim_window(x, y);
          e += (1.0 - sw.value) / 2.0;
          if (!with_gradient) continue;
          const double scale = -0.5 * w * norm;
          int k = 0;
          for (int dv = -1; dv <= 1; ++dv)
            for (int du = -1; du <= 1; ++du, ++k)
              adjoint[std::size_t(c)](v + dv, u + du) +=
                  scale * sw.tap_derivative(x[std::size_t(k)], y[std::size_t(k)]);
        }
      }
      values(v, u) = w * (e / C);
      energy += values(v, u);
    }
  }
  out.energy = energy.value() / s.count;
  if (frozen) out.errors = ErrorMap{values, s.active};

  if (!with_gradient) return out;
  for (int v = 0; v < H; ++v) {
    for (int u = 0; u < W; ++u) {
      if (!s.sampled(v, u)) continue;
      Vec2d g_uv = Vec2d::Zero();
      bool any = false;
      BilinearCell cell{s.cell_u(v, u), s.cell_v(v, u), 0, 0};
      const Vec3d Xt = calib.rays.ray(v, u) * target.depth.meters(v, u);
      const Vec3d X = R * Xt + t;
      cell.a = K.fx * X.x() / X.z() + K.cx - cell.u0;
      cell.b = K.fy * X.y() / X.z() + K.cy - cell.v0;
      for (int c = 0; c < C; ++c) {
        const double a = adjoint[std::size_t(c)](v, u);
        if (a == 0.0) continue;
        any = true;
        g_uv += a * interpolate_gradient(source.image.channel(c), cell);
      }
      if (!any) continue;
      const double iz = 1.0 / X.z();
      const Vec3d g(g_uv.x() * K.fx * iz, g_uv.y() * K.fy * iz,
                    -(g_uv.x() * K.fx * X.x() + g_uv.y() * K.fy * X.y()) * iz * iz);
      out.gradient.rotation += g * Xt.transpose();
      out.gradient.translation += g;
    }
  }
  return out;
}

std::pair<double, ErrorMap> directed_error(const Frame& target, const Frame& source,
                                           const Calibration& calib, const Mat4d& T,
                                           const EnergyConfig& cfg) {
  TermEvaluation e = evaluate_directed(target, source, calib, T, cfg, false);
  return {e.energy, std::move(e.errors)};
}

double energy_two_frame(const Frame& previous, const Frame& current,
                        const Calibration& calib, const Mat4d& T,
                        const EnergyConfig& cfg) {
  const double forward = evaluate_directed(current, previous, calib, T, cfg, false).energy;
  const double backward =
      evaluate_directed(previous, current, calib, invert(T), cfg, false).energy;
  return forward + backward;
}

double energy_three_frame(const Frame& f0, const Frame& f1, const Frame& f2,
                          const Calibration& calib, const Mat4d& T_prev,
                          const Mat4d& T_cur, const EnergyConfig& cfg) {
  const double near = energy_two_frame(f1, f2, calib, T_cur, cfg);
  if (cfg.alpha == 1.0) return cfg.alpha * near;
  const double far = energy_two_frame(f0, f2, calib, compose(T_prev, T_cur), cfg);
  return cfg.alpha * near + (1.0 - cfg.alpha) * far;
}

}  // namespace doc

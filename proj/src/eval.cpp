#include "doc/eval.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "doc/detail/summation.hpp"

namespace doc {

namespace {

void require_aligned(const Trajectory& est, const Trajectory& gt) {
  if (est.size() != gt.size())
    throw InputError("trajectory length mismatch: " + std::to_string(est.size()) + " vs " +
                     std::to_string(gt.size()));
  if (est.empty()) throw InputError("empty trajectory");
}

double rotation_angle(const Mat4d& T) {
  const double c = 0.5 * (T(0, 0) + T(1, 1) + T(2, 2) - 1.0);
  return std::acos(std::clamp(c, -1.0, 1.0));
}

Mat4d relative(const Trajectory& traj, std::size_t a, std::size_t b) {
  const Mat3d Rt = traj[a].topLeftCorner<3, 3>().transpose();
  const Mat4d inv = make_transform<double>(Rt, -Rt * traj[a].topRightCorner<3, 1>());
  return inv * traj[b];
}

}  // namespace

DriftResult compute_rte_rre(const Trajectory& est, const Trajectory& gt,
                            const DriftOptions& opt) {
  require_aligned(est, gt);
  if (opt.step < 1) throw InputError("segment step must be >= 1");
  const std::size_t n = gt.size();
  std::vector<double> dist(n, 0.0);
  for (std::size_t i = 1; i < n; ++i)
    dist[i] = dist[i - 1] + (gt[i].topRightCorner<3, 1>() - gt[i - 1].topRightCorner<3, 1>()).norm();

  DriftResult out;
  const double min_length =
      opt.lengths.empty() ? 0.0 : *std::min_element(opt.lengths.begin(), opt.lengths.end());
  if (opt.lengths.empty() || dist.back() < min_length) {
    out.too_short = true;
    return out;
  }
  detail::CompensatedSum t_all, r_all;
  for (double len : opt.lengths) {
    LengthBreakdown row;
    row.length = len;
    detail::CompensatedSum t_sum, r_sum;
    for (std::size_t first = 0; first < n; first += std::size_t(opt.step)) {
      const auto it = std::find_if(dist.begin() + std::ptrdiff_t(first), dist.end(),
                                   [&](double d) { return d >= dist[first] + len; });
      if (it == dist.end()) continue;
      const std::size_t last = std::size_t(it - dist.begin());
      const Mat4d rel_gt = relative(gt, first, last);
      const Mat4d rel_est = relative(est, first, last);
      const Mat3d Rt = rel_gt.topLeftCorner<3, 3>().transpose();
      const Mat4d err =
          make_transform<double>(Rt, -Rt * rel_gt.topRightCorner<3, 1>()) * rel_est;
      const double t_err = err.topRightCorner<3, 1>().norm() / len;
      const double r_err = rotation_angle(err) / len;
      t_sum += t_err;
      r_sum += r_err;
      t_all += t_err;
      r_all += r_err;
      row.segments += 1;
    }
    if (row.segments > 0) {
      row.rte_percent = 100.0 * t_sum.value() / row.segments;
      row.rre_deg_per_100m = 100.0 * 180.0 / std::numbers::pi * r_sum.value() / row.segments;
    }
    out.segments += row.segments;
    out.per_length.push_back(row);
  }
  if (out.segments > 0) {
    out.rte_percent = 100.0 * t_all.value() / out.segments;
    out.rre_deg_per_100m = 100.0 * 180.0 / std::numbers::pi * r_all.value() / out.segments;
  }
  return out;
}

double compute_ate(const Trajectory& est, const Trajectory& gt, Alignment align) {
  require_aligned(est, gt);
  const Eigen::Index n = Eigen::Index(est.size());
  Eigen::Matrix3Xd src(3, n), dst(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    src.col(i) = est[std::size_t(i)].topRightCorner<3, 1>();
    dst.col(i) = gt[std::size_t(i)].topRightCorner<3, 1>();
  }
  if (align == Alignment::SE3 && n >= 2) {
    const Eigen::Matrix4d T = Eigen::umeyama(src, dst, false);
    src = (T.topLeftCorner<3, 3>() * src).colwise() + T.topRightCorner<3, 1>();
  }
  detail::CompensatedSum sq;
  for (Eigen::Index i = 0; i < n; ++i) sq += (src.col(i) - dst.col(i)).squaredNorm();
  // A single pose (or SE(3) alignment of one point) leaves no residual.
  if (align == Alignment::SE3 && n < 2) return 0.0;
  return std::sqrt(sq.value() / double(n));
}

MetricReport evaluate(const Trajectory& est, const Trajectory& gt, const DriftOptions& opt) {
  MetricReport r;
  r.drift = compute_rte_rre(est, gt, opt);
  r.ate_rmse_m = compute_ate(est, gt, Alignment::SE3);
  r.ate_unaligned_m = compute_ate(est, gt, Alignment::None);
  return r;
}

std::string format_report(const MetricReport& r) {
  std::ostringstream os;
  char buf[160];
  if (r.drift.too_short) {
    os << "RTE/RRE: ground truth shorter than the smallest segment length\n";
  } else {
    std::snprintf(buf, sizeof buf, "RTE (%%):          %.6f\nRRE (deg/100m):   %.6f\n",
                  r.drift.rte_percent, r.drift.rre_deg_per_100m);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "ATE (m, se3):     %.6f\nATE (m, none):    %.6f\n",
                r.ate_rmse_m, r.ate_unaligned_m);
  os << buf;
  os << "segments:         " << r.drift.segments << '\n';
  for (const auto& row : r.drift.per_length) {
    std::snprintf(buf, sizeof buf, "  %5.0f m  %6d segs  RTE %.6f %%  RRE %.6f deg/100m\n",
                  row.length, row.segments, row.rte_percent, row.rre_deg_per_100m);
    os << buf;
  }
  return os.str();
}

void write_breakdown_csv(const std::filesystem::path& path, const MetricReport& r) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError(path.string() + ": cannot open for writing");
  out << "length_m,segments,rte_percent,rre_deg_per_100m,ate_se3_m,ate_none_m\n";
  char buf[200];
  for (const auto& row : r.drift.per_length) {
    std::snprintf(buf, sizeof buf, "%.0f,%d,%.9f,%.9f,,\n", row.length, row.segments,
                  row.rte_percent, row.rre_deg_per_100m);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "all,%d,%.9f,%.9f,%.9f,%.9f\n", r.drift.segments,
                r.drift.rte_percent, r.drift.rre_deg_per_100m, r.ate_rmse_m,
                r.ate_unaligned_m);
  out << buf;
}

}  // namespace doc

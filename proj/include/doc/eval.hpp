#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "doc/trajectory.hpp"

namespace doc {

struct LengthBreakdown {
  double length{0};  // meters
  int segments{0};
  double rte_percent{0};
  double rre_deg_per_100m{0};
};

struct DriftOptions {
  std::vector<double> lengths{100, 200, 300, 400, 500, 600, 700, 800};
  int step{10};  // frames between segment start points
};

struct DriftResult {
  double rte_percent{0};
  double rre_deg_per_100m{0};
  int segments{0};
  std::vector<LengthBreakdown> per_length;
  bool too_short{false};  // ground truth shorter than the smallest length
};

/// KITTI odometry drift: for every start frame (every `step` frames) and
/// every length L, the end frame is the first whose ground-truth arc length
/// from the start reaches L; errors of inv(rel_gt) * rel_est are divided by L
/// and averaged over all segments.
[[nodiscard]] DriftResult compute_rte_rre(const Trajectory& est, const Trajectory& gt,
                                          const DriftOptions& opt = {});

enum class Alignment { None, SE3 };

/// RMSE of position residuals, optionally after least-squares rigid
/// alignment of est onto gt (no scale).
[[nodiscard]] double compute_ate(const Trajectory& est, const Trajectory& gt,
                                 Alignment align = Alignment::SE3);

struct MetricReport {
  DriftResult drift;
  double ate_rmse_m{0};       // SE(3)-aligned
  double ate_unaligned_m{0};  // no alignment
};

[[nodiscard]] MetricReport evaluate(const Trajectory& est, const Trajectory& gt,
                                    const DriftOptions& opt = {});

[[nodiscard]] std::string format_report(const MetricReport& report);
void write_breakdown_csv(const std::filesystem::path& path, const MetricReport& report);

}  // namespace doc

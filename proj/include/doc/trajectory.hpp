#pragma once

#include <optional>
#include <vector>

#include "doc/geometry.hpp"

namespace doc {

struct StampedPose {
  int index{0};
  std::optional<double> timestamp;
  Mat4d pose{Mat4d::Identity()};  // camera-to-world
};

struct Trajectory {
  std::vector<StampedPose> poses;

  [[nodiscard]] std::size_t size() const { return poses.size(); }
  [[nodiscard]] bool empty() const { return poses.empty(); }
  [[nodiscard]] const Mat4d& operator[](std::size_t i) const { return poses[i].pose; }

  /// Throws InputError unless poses are rigid and indices strictly increase.
  void validate() const;
};

/// Chains relative motions (frame i-1 to frame i) into camera-to-world poses
/// starting from the identity.
[[nodiscard]] Trajectory accumulate(const std::vector<Pose>& relatives);

/// invert(T_{i-1}) * T_i for consecutive poses, as rotation-vector poses.
[[nodiscard]] std::vector<Pose> relative_from_absolute(const Trajectory& traj);

}  // namespace doc

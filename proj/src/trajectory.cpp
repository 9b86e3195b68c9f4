#include "doc/trajectory.hpp"

#include <string>

namespace doc {

void Trajectory::validate() const {
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (!is_rigid(poses[i].pose, 1e-4))
      throw InputError("trajectory pose " + std::to_string(i) + " is not rigid");
    if (i > 0 && poses[i].index <= poses[i - 1].index)
      throw InputError("trajectory indices must strictly increase (entry " +
                       std::to_string(i) + ")");
  }
}

Trajectory accumulate(const std::vector<Pose>& relatives) {
  Trajectory traj;
  traj.poses.push_back({0, std::nullopt, Mat4d::Identity()});
  for (std::size_t i = 0; i < relatives.size(); ++i) {
    traj.poses.push_back(
        {int(i + 1), std::nullopt, compose(traj.poses.back().pose, relatives[i].matrix())});
  }
  return traj;
}

std::vector<Pose> relative_from_absolute(const Trajectory& traj) {
  if (traj.size() < 2) throw InputError("relative_from_absolute: need at least 2 poses");
  std::vector<Pose> out;
  out.reserve(traj.size() - 1);
  for (std::size_t i = 1; i < traj.size(); ++i)
    out.push_back(Pose::from_matrix(compose(invert(traj[i - 1]), traj[i])));
  return out;
}

}  // namespace doc

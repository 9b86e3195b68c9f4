#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "doc/geometry.hpp"
#include "doc/photometric.hpp"
#include "doc/trajectory.hpp"

namespace doc {

/// Separate step sizes for rotation-vector (rad) and translation (m) entries.
struct LearningRate {
  double rotation{1e-3};
  double translation{1e-2};

  [[nodiscard]] LearningRate scaled(double s) const { return {rotation * s, translation * s}; }
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  Eigen::VectorXd lr;  // per coordinate
  int step_count{0};
  double beta1{0.9};
  double beta2{0.999};
  double eps{1e-8};

  AdamState() = default;
  explicit AdamState(Eigen::VectorXd rates)
      : m(Eigen::VectorXd::Zero(rates.size())),
        v(Eigen::VectorXd::Zero(rates.size())),
        lr(std::move(rates)) {}
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(AdamState& state, Eigen::Ref<Eigen::VectorXd> params,
               const Eigen::VectorXd& gradient);

struct RefineConfig {
  int iterations{20};
  LearningRate lr_current;
  std::optional<LearningRate> lr_previous;  // defaults to lr_current / 10
  EnergyConfig energy;

  [[nodiscard]] LearningRate previous_rate() const {
    return lr_previous.value_or(lr_current.scaled(0.1));
  }
  void validate() const;
};

struct RefineReport {
  double initial_energy{0};
  double final_energy{0};
  std::vector<double> energy_trace;  // energy before each update
  int iterations_run{0};
  int best_iteration{0};  // index into trace, or iterations_run for the last iterate
  bool fallback{false};
  std::string diagnostic;
};

/// Frames of a correction window (oldest first, 2 or 3) with shared
/// calibration.
struct Window {
  const Calibration& calib;
  std::vector<std::reference_wrapper<const Frame>> frames;
};

/// Frozen discrete state of every directed term in a window.
struct WindowState {
  std::vector<TermState> terms;
};

struct WindowGradient {
  double energy{0};
  Eigen::VectorXd gradient;
  WindowState state;
};

/// Energy of a window and its analytic gradient with respect to the pose
/// parameters: 6 entries (r, t) of T_i^{i-1} for two frames, or 12 entries
/// (r, t of T_{i-1}^{i-2}, then r, t of T_i^{i-1}) for three frames.
/// With `frozen`, masks, truncation sets, bilinear cells and residual signs
/// are taken from a previous evaluation.
[[nodiscard]] WindowGradient energy_gradient(const Window& window,
                                             const Eigen::VectorXd& params,
                                             const EnergyConfig& cfg,
                                             bool with_gradient = true,
                                             const WindowState* frozen = nullptr);

struct DocResult {
  Pose pose;
  RefineReport report;
};

struct DocPlusResult {
  Pose previous;
  Pose current;
  RefineReport report;
};

/// Two-frame online correction of T_i^{i-1}.
[[nodiscard]] DocResult doc_refine(const Frame& previous, const Frame& current,
                                   const Calibration& calib, const Pose& init,
                                   const RefineConfig& cfg);

/// Three-frame correction: jointly refines T_{i-1}^{i-2} (at lr_previous) and
/// T_i^{i-1} (at lr_current).
[[nodiscard]] DocPlusResult docplus_refine(const Frame& f0, const Frame& f1,
                                           const Frame& f2, const Calibration& calib,
                                           const Pose& previous, const Pose& init,
                                           const RefineConfig& cfg);

struct SequenceResult {
  Trajectory trajectory;
  std::vector<Pose> relatives;        // refined T_i^{i-1}, one per frame pair
  std::vector<RefineReport> reports;  // one per frame pair
  std::vector<double> seconds;        // optimisation wall time per frame pair
};

/// Refines every relative motion (DOC or DOC+ per cfg.energy.frames) and
/// chains the results into camera-to-world poses with T_1 = I.
[[nodiscard]] SequenceResult run_sequence(const std::vector<Frame>& frames,
                                          const Calibration& calib,
                                          const std::vector<Pose>& initial_relatives,
                                          const RefineConfig& cfg);

}  // namespace doc

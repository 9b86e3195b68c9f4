#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "doc/dataio.hpp"
#include "doc/eval.hpp"
#include "doc/optimize.hpp"

namespace doc {

enum class RunMode { None, Doc, DocPlus };

[[nodiscard]] RunMode parse_run_mode(const std::string& name);
[[nodiscard]] std::string to_string(RunMode mode);
[[nodiscard]] Loss parse_loss(const std::string& name);
[[nodiscard]] std::string to_string(Loss loss);
[[nodiscard]] OcclusionTest parse_occlusion_test(const std::string& name);
[[nodiscard]] std::string to_string(OcclusionTest test);

struct StageTimes {
  double load{0};
  double precompute{0};
  double optimize{0};
};

struct RunOutput {
  RunMode mode{RunMode::Doc};
  RefineConfig config;
  SequenceResult result;
  StageTimes times;
};

/// Refines (or, for RunMode::None, just chains) the initial relative poses.
/// The window length follows the mode; cfg.energy.frames is overwritten.
[[nodiscard]] RunOutput run_pipeline(const io::LoadedSequence& seq, RunMode mode,
                                     RefineConfig cfg);

/// trajectory.kitti.txt, trajectory.tum.txt, relative.txt, report.csv (one
/// row per frame pair) and run.json (resolved configuration and timings).
void write_run_outputs(const std::filesystem::path& dir, const RunOutput& out,
                       const io::LoadedSequence& seq, const std::string& manifest,
                       std::uint64_t seed);

/// Mask, loss and window settings of one ablation row 'a'..'h'.
struct AblationRow {
  char letter{'f'};
  bool occlusion{true};
  bool explainability{true};
  Loss loss{Loss::TruncatedL1};
  int frames{2};
};

[[nodiscard]] AblationRow ablation_row(char letter);
/// Applies a row on top of `base`; returns the mode it implies.
[[nodiscard]] RunMode apply_ablation_row(const AblationRow& row, RefineConfig& base);

struct SynthExportOptions {
  int frames{10};
  std::uint64_t seed{1};
  int width{160};
  int height{120};
  double focal{160};
  double depth{8};        // plane distance along the first optical axis (m)
  double tilt{0.4};       // rad
  double forward{0.3};    // m per frame
  double lateral{0};      // m per frame
  double yaw_deg{0};      // per frame
  double sigma_rotation_deg{0};
  double sigma_translation{0};
  bool occluder{false};
  int image_bits{16};
  bool depth_png{false};  // raw float32 by default
};

/// Writes frames, depths, intrinsics.txt, init_relative.txt, gt.kitti.txt
/// and manifest.json into `dir`; with an occluder, also
/// occlusion/NNNNNN.png label maps (0 visible, 1 occluded, 255 out of view)
/// for each target frame i >= 1 against source frame i-1.
void export_synthetic(const std::filesystem::path& dir, const SynthExportOptions& opt);

}  // namespace doc

// doc_vo: online pose correction, evaluation and synthetic data from the
// command line. Exit codes: 0 success, 1 input error, 2 numerical failure.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "doc/dataio.hpp"
#include "doc/error.hpp"
#include "doc/eval.hpp"
#include "doc/gradcheck.hpp"
#include "doc/pipeline.hpp"

namespace fs = std::filesystem;
using namespace doc;

namespace {

constexpr int kInputError = 1;
constexpr int kNumericalError = 2;

struct RefineFlags {
  int iterations{20};
  double lr_rotation{1e-3};
  double lr_translation{1e-2};
  double lr_prev_rotation{-1};  // negative: lr_current / 10
  double lr_prev_translation{-1};
  std::string loss{"tl1"};
  bool no_occlusion{false};
  bool no_explainability{false};
  double far_depth{5.0};
  double occlusion_slack{0.1};
  std::string occlusion_test{"transformed"};
  double alpha{0.8};
  CLI::Option* alpha_opt{nullptr};

  void add(CLI::App* app) {
    app->add_option("--iterations", iterations, "Adam iterations per window")
        ->capture_default_str();
    app->add_option("--lr-rot", lr_rotation, "rotation learning rate (rad)")
        ->capture_default_str();
    app->add_option("--lr-trans", lr_translation, "translation learning rate (m)")
        ->capture_default_str();
    app->add_option("--lr-prev-rot", lr_prev_rotation,
                    "rotation rate for the previous pose (default: lr-rot / 10)");
    app->add_option("--lr-prev-trans", lr_prev_translation,
                    "translation rate for the previous pose (default: lr-trans / 10)");
    app->add_option("--loss", loss, "tl1 | l1 | ssim")->capture_default_str();
    app->add_flag("--no-occlusion-mask", no_occlusion, "disable the occlusion mask");
    app->add_flag("--no-explainability-mask", no_explainability,
                  "ignore explainability masks");
    app->add_option("--far-depth", far_depth, "depth beyond which pixels are never occluded")
        ->capture_default_str();
    app->add_option("--occlusion-slack", occlusion_slack)->capture_default_str();
    app->add_option("--occlusion-test", occlusion_test, "transformed | target")
        ->capture_default_str();
    alpha_opt = app->add_option("--alpha", alpha, "near-pair weight (docplus only)")
                    ->capture_default_str();
  }

  [[nodiscard]] RefineConfig build() const {
    RefineConfig cfg;
    cfg.iterations = iterations;
    cfg.lr_current = {lr_rotation, lr_translation};
    if (lr_prev_rotation >= 0 || lr_prev_translation >= 0) {
      const LearningRate d = cfg.lr_current.scaled(0.1);
      cfg.lr_previous = LearningRate{lr_prev_rotation >= 0 ? lr_prev_rotation : d.rotation,
                                     lr_prev_translation >= 0 ? lr_prev_translation
                                                              : d.translation};
    }
    cfg.energy.loss = parse_loss(loss);
    cfg.energy.use_occlusion_mask = !no_occlusion;
    cfg.energy.use_explainability_mask = !no_explainability;
    cfg.energy.far_depth = far_depth;
    cfg.energy.occlusion_slack = occlusion_slack;
    cfg.energy.occlusion_test = parse_occlusion_test(occlusion_test);
    cfg.energy.alpha = alpha;
    return cfg;
  }
};

io::LoadedSequence load(const fs::path& manifest, double& seconds) {
  const auto t0 = std::chrono::steady_clock::now();
  io::LoadedSequence seq = io::load_sequence(io::load_manifest(manifest));
  seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return seq;
}

void print_run_summary(const RunOutput& out) {
  int fallbacks = 0;
  for (const auto& r : out.result.reports) fallbacks += r.fallback;
  std::printf("mode %s: %zu poses, %d fallback(s), load %.3fs, precompute %.3fs, optimize %.3fs",
              to_string(out.mode).c_str(), out.result.trajectory.size(), fallbacks,
              out.times.load, out.times.precompute, out.times.optimize);
  if (!out.result.seconds.empty() && out.times.optimize > 0)
    std::printf(" (%.2f windows/s)", double(out.result.seconds.size()) / out.times.optimize);
  std::printf("\n");
}

Trajectory ground_truth_for(const io::LoadedSequence& seq, const std::string& gt_path,
                            const std::string& gt_format) {
  if (!gt_path.empty())
    return io::load_trajectory(gt_path, io::parse_trajectory_format(gt_format));
  if (!seq.ground_truth) throw InputError("no ground truth: pass --gt or set it in the manifest");
  return *seq.ground_truth;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online pose correction for monocular visual odometry"};
  app.set_config("--config", "", "TOML/INI file with option defaults (flags override it)");
  app.require_subcommand(1);

  // run
  std::string manifest, out_dir = "out", mode = "doc";
  std::uint64_t seed = 0;
  RefineFlags run_flags;
  auto* run = app.add_subcommand("run", "refine a sequence and write trajectories");
  run->add_option("--manifest", manifest, "sequence manifest (JSON)")->required();
  run->add_option("--mode", mode, "doc | docplus | none")->capture_default_str();
  run->add_option("--out", out_dir, "output directory")->capture_default_str();
  run->add_option("--seed", seed, "recorded in run.json")->capture_default_str();
  run_flags.add(run);

  // eval
  std::string est_path, gt_path, est_format = "kitti", gt_format = "kitti", csv_path;
  DriftOptions drift;
  auto* ev = app.add_subcommand("eval", "RTE / RRE / ATE of a trajectory against ground truth");
  ev->add_option("--est", est_path, "estimated trajectory")->required();
  ev->add_option("--gt", gt_path, "ground-truth trajectory")->required();
  ev->add_option("--est-format", est_format, "kitti | tum")->capture_default_str();
  ev->add_option("--gt-format", gt_format, "kitti | tum")->capture_default_str();
  ev->add_option("--csv", csv_path, "write the per-length breakdown here");
  ev->add_option("--lengths", drift.lengths, "segment lengths (m)");
  ev->add_option("--step", drift.step, "frames between segment starts")->capture_default_str();

  // synth
  SynthExportOptions so;
  std::string synth_dir;
  auto* sy = app.add_subcommand("synth", "write a synthetic sequence bundle");
  sy->add_option("--out", synth_dir, "output directory")->required();
  sy->add_option("--frames", so.frames)->capture_default_str();
  sy->add_option("--seed", so.seed)->capture_default_str();
  sy->add_option("--width", so.width)->capture_default_str();
  sy->add_option("--height", so.height)->capture_default_str();
  sy->add_option("--focal", so.focal)->capture_default_str();
  sy->add_option("--depth", so.depth, "plane distance (m)")->capture_default_str();
  sy->add_option("--tilt", so.tilt, "plane tilt (rad)")->capture_default_str();
  sy->add_option("--forward", so.forward, "m per frame")->capture_default_str();
  sy->add_option("--lateral", so.lateral, "m per frame")->capture_default_str();
  sy->add_option("--yaw", so.yaw_deg, "deg per frame")->capture_default_str();
  sy->add_option("--sigma-rot", so.sigma_rotation_deg, "init noise (deg)")
      ->capture_default_str();
  sy->add_option("--sigma-trans", so.sigma_translation, "init noise (m)")
      ->capture_default_str();
  sy->add_flag("--occluder", so.occluder, "add a nearer rectangle and occlusion sidecars");
  sy->add_option("--image-bits", so.image_bits, "8 | 16")->capture_default_str();
  sy->add_flag("--depth-png", so.depth_png, "16-bit PNG depth instead of raw float32");

  // gradcheck
  GradcheckOptions go;
  std::string gc_loss = "tl1";
  auto* gc = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
  gc->add_option("--seed", go.seed)->capture_default_str();
  gc->add_option("--trials", go.trials)->capture_default_str();
  gc->add_option("--step", go.step)->capture_default_str();
  gc->add_option("--tolerance", go.tolerance)->capture_default_str();
  gc->add_option("--loss", gc_loss, "tl1 | l1 | ssim")->capture_default_str();
  gc->add_flag("--corrupt", go.corrupt_gradient, "perturb the analytic gradient (harness check)");

  // ablate
  std::string ab_manifest, rows = "abcdefgh", ab_out = "ablation", ab_gt, ab_gt_format = "kitti";
  RefineFlags ab_flags;
  auto* ab = app.add_subcommand("ablate", "run and evaluate ablation rows a..h");
  ab->add_option("--manifest", ab_manifest)->required();
  ab->add_option("--rows", rows, "subset of abcdefgh")->capture_default_str();
  ab->add_option("--out", ab_out, "output directory")->capture_default_str();
  ab->add_option("--gt", ab_gt, "ground truth (default: from the manifest)");
  ab->add_option("--gt-format", ab_gt_format)->capture_default_str();
  ab_flags.add(ab);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kInputError;
  }

  try {
    if (*run) {
      const RunMode m = parse_run_mode(mode);
      if (run_flags.alpha_opt->count() > 0 && m != RunMode::DocPlus)
        throw InputError("--alpha only applies to --mode docplus");
      RefineConfig cfg = run_flags.build();
      cfg.energy.frames = m == RunMode::DocPlus ? 3 : 2;
      cfg.validate();
      double load_s = 0;
      const io::LoadedSequence seq = load(manifest, load_s);
      RunOutput out = run_pipeline(seq, m, cfg);
      out.times.load = load_s;
      write_run_outputs(out_dir, out, seq, manifest, seed);
      print_run_summary(out);
      return 0;
    }
    if (*ev) {
      const Trajectory est = io::load_trajectory(est_path, io::parse_trajectory_format(est_format));
      const Trajectory gt = io::load_trajectory(gt_path, io::parse_trajectory_format(gt_format));
      const MetricReport r = evaluate(est, gt, drift);
      std::cout << format_report(r);
      if (!csv_path.empty()) write_breakdown_csv(csv_path, r);
      return 0;
    }
    if (*sy) {
      export_synthetic(synth_dir, so);
      std::printf("wrote %d frames to %s\n", so.frames, synth_dir.c_str());
      return 0;
    }
    if (*gc) {
      go.loss = parse_loss(gc_loss);
      const auto trials = run_gradcheck(go);
      bool ok = true;
      std::printf("trial  dim  checked  max_rel_err  result\n");
      for (std::size_t i = 0; i < trials.size(); ++i) {
        const auto& t = trials[i];
        std::printf("%5zu  %3d  %7d  %11.3e  %s\n", i, t.dimension, t.coordinates_checked,
                    t.max_relative_error, t.passed ? "pass" : "FAIL");
        ok = ok && t.passed;
      }
      return ok ? 0 : kNumericalError;
    }
    if (*ab) {
      std::vector<AblationRow> selected;
      for (char c : rows) selected.push_back(ablation_row(c));
      const RefineConfig base = ab_flags.build();
      double load_s = 0;
      const io::LoadedSequence seq = load(ab_manifest, load_s);
      const Trajectory gt = ground_truth_for(seq, ab_gt, ab_gt_format);
      fs::create_directories(ab_out);
      std::ofstream csv(fs::path(ab_out) / "ablation.csv");
      csv << "row,occlusion_mask,explainability_mask,loss,frames,rte_percent,"
             "rre_deg_per_100m,ate_se3_m,ate_none_m,fallbacks\n";
      std::printf("row  M_e  M_o  loss  frames  RTE%%      RRE       ATE(se3)  ATE(none)\n");
      for (const AblationRow& row : selected) {
        RefineConfig cfg = base;
        const RunMode m = apply_ablation_row(row, cfg);
        RunOutput out = run_pipeline(seq, m, cfg);
        out.times.load = load_s;
        write_run_outputs(fs::path(ab_out) / std::string(1, row.letter), out, seq, ab_manifest,
                          seed);
        const MetricReport r = evaluate(out.result.trajectory, gt);
        int fallbacks = 0;
        for (const auto& rep : out.result.reports) fallbacks += rep.fallback;
        char buf[256];
        std::snprintf(buf, sizeof buf, "%c,%d,%d,%s,%d,%.9f,%.9f,%.9f,%.9f,%d\n", row.letter,
                      int(row.occlusion), int(row.explainability), to_string(row.loss).c_str(),
                      row.frames, r.drift.rte_percent, r.drift.rre_deg_per_100m, r.ate_rmse_m,
                      r.ate_unaligned_m, fallbacks);
        csv << buf;
        std::printf("(%c)  %-3s  %-3s  %-4s  %6d  %8.4f  %8.4f  %8.5f  %8.5f\n", row.letter,
                    row.explainability ? "yes" : "no", row.occlusion ? "yes" : "no",
                    to_string(row.loss).c_str(), row.frames, r.drift.rte_percent,
                    r.drift.rre_deg_per_100m, r.ate_rmse_m, r.ate_unaligned_m);
      }
      return 0;
    }
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumericalError;
  } catch (const DegenerateWindowError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumericalError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInputError;
  }
  return kInputError;
}

#include "doc/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "doc/synth.hpp"

namespace doc {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string frame_name(int i, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d%s", i, ext);
  return buf;
}

json rate_json(const LearningRate& lr) {
  return {{"rotation", lr.rotation}, {"translation", lr.translation}};
}

}  // namespace

RunMode parse_run_mode(const std::string& name) {
  if (name == "none") return RunMode::None;
  if (name == "doc") return RunMode::Doc;
  if (name == "docplus") return RunMode::DocPlus;
  throw InputError("unknown mode '" + name + "' (expected none, doc or docplus)");
}

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::None: return "none";
    case RunMode::Doc: return "doc";
    case RunMode::DocPlus: return "docplus";
  }
  return "?";
}

Loss parse_loss(const std::string& name) {
  if (name == "tl1" || name == "truncated-l1") return Loss::TruncatedL1;
  if (name == "l1") return Loss::L1;
  if (name == "ssim") return Loss::Ssim;
  throw InputError("unknown loss '" + name + "' (expected tl1, l1 or ssim)");
}

std::string to_string(Loss loss) {
  switch (loss) {
    case Loss::TruncatedL1: return "tl1";
    case Loss::L1: return "l1";
    case Loss::Ssim: return "ssim";
  }
  return "?";
}

OcclusionTest parse_occlusion_test(const std::string& name) {
  if (name == "transformed") return OcclusionTest::TransformedDepth;
  if (name == "target") return OcclusionTest::TargetDepth;
  throw InputError("unknown occlusion test '" + name + "' (expected transformed or target)");
}

std::string to_string(OcclusionTest test) {
  return test == OcclusionTest::TransformedDepth ? "transformed" : "target";
}

RunOutput run_pipeline(const io::LoadedSequence& seq, RunMode mode, RefineConfig cfg) {
  RunOutput out;
  out.mode = mode;
  cfg.energy.frames = mode == RunMode::DocPlus ? 3 : 2;
  cfg.validate();
  out.config = cfg;
  if (seq.frames.size() < 2) throw InputError("sequence needs at least 2 frames");
  if (seq.initial_relatives.size() + 1 != seq.frames.size())
    throw InputError("expected " + std::to_string(seq.frames.size() - 1) +
                     " initial relative poses, got " +
                     std::to_string(seq.initial_relatives.size()));

  if (mode == RunMode::None) {
    out.result.trajectory = accumulate(seq.initial_relatives);
    out.result.relatives = seq.initial_relatives;
    out.result.reports.assign(seq.initial_relatives.size(), RefineReport{});
    out.result.seconds.assign(seq.initial_relatives.size(), 0.0);
  } else {
    auto t0 = std::chrono::steady_clock::now();
    const Calibration calib(seq.K);
    out.times.precompute = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    out.result = run_sequence(seq.frames, calib, seq.initial_relatives, cfg);
    out.times.optimize = seconds_since(t0);
  }
  for (std::size_t i = 0; i < out.result.trajectory.size() && i < seq.timestamps.size(); ++i)
    out.result.trajectory.poses[i].timestamp = seq.timestamps[i];
  return out;
}

void write_run_outputs(const fs::path& dir, const RunOutput& out,
                       const io::LoadedSequence& seq, const std::string& manifest,
                       std::uint64_t seed) {
  fs::create_directories(dir);
  io::save_trajectory(out.result.trajectory, io::TrajectoryFormat::Kitti,
                      dir / "trajectory.kitti.txt");
  io::save_trajectory(out.result.trajectory, io::TrajectoryFormat::Tum,
                      dir / "trajectory.tum.txt");
  io::save_relative_poses(dir / "relative.txt", out.result.relatives);

  std::ofstream csv(dir / "report.csv");
  if (!csv) throw InputError((dir / "report.csv").string() + ": cannot open for writing");
  csv << "frame,initial_energy,final_energy,iterations,best_iteration,fallback,seconds\n";
  char buf[256];
  int fallbacks = 0;
  for (std::size_t i = 0; i < out.result.reports.size(); ++i) {
    const RefineReport& r = out.result.reports[i];
    fallbacks += r.fallback;
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%d,%d,%d,%.6f\n", i + 1, r.initial_energy,
                  r.final_energy, r.iterations_run, r.best_iteration, int(r.fallback),
                  out.result.seconds[i]);
    csv << buf;
  }

  const RefineConfig& c = out.config;
  const EnergyConfig& e = c.energy;
  json j;
  j["manifest"] = manifest;
  j["mode"] = to_string(out.mode);
  j["seed"] = seed;
  j["iterations"] = c.iterations;
  j["lr_current"] = rate_json(c.lr_current);
  j["lr_previous"] = rate_json(c.previous_rate());
  j["energy"] = {{"loss", to_string(e.loss)},
                 {"occlusion_mask", e.use_occlusion_mask},
                 {"explainability_mask", e.use_explainability_mask},
                 {"far_depth", e.far_depth},
                 {"occlusion_slack", e.occlusion_slack},
                 {"occlusion_test", to_string(e.occlusion_test)},
                 {"alpha", e.alpha},
                 {"frames", e.frames}};
  j["frames"] = seq.frames.size();
  j["image_size"] = {seq.K.width, seq.K.height};
  j["fallbacks"] = fallbacks;
  j["timing_seconds"] = {{"load", out.times.load},
                         {"precompute", out.times.precompute},
                         {"optimize", out.times.optimize}};
  std::ofstream js(dir / "run.json");
  js << j.dump(2) << '\n';
}

AblationRow ablation_row(char letter) {
  switch (letter) {
    case 'a': return {'a', false, false, Loss::TruncatedL1, 2};
    case 'b': return {'b', false, true, Loss::TruncatedL1, 2};
    case 'c': return {'c', true, false, Loss::TruncatedL1, 2};
    case 'd': return {'d', true, true, Loss::L1, 2};
    case 'e': return {'e', true, true, Loss::Ssim, 2};
    case 'f': return {'f', true, true, Loss::TruncatedL1, 2};
    case 'g': return {'g', true, true, Loss::Ssim, 3};
    case 'h': return {'h', true, true, Loss::TruncatedL1, 3};
    default: break;
  }
  throw InputError(std::string("unknown ablation row '") + letter + "' (expected a..h)");
}

RunMode apply_ablation_row(const AblationRow& row, RefineConfig& base) {
  base.energy.use_occlusion_mask = row.occlusion;
  base.energy.use_explainability_mask = row.explainability;
  base.energy.loss = row.loss;
  base.energy.frames = row.frames;
  return row.frames == 3 ? RunMode::DocPlus : RunMode::Doc;
}

void export_synthetic(const fs::path& dir, const SynthExportOptions& opt) {
  if (opt.frames < 2) throw InputError("synth: need at least 2 frames");
  if (opt.width < 8 || opt.height < 8) throw InputError("synth: image must be at least 8x8");
  if (!(opt.focal > 0)) throw InputError("synth: focal length must be positive");
  if (!(opt.depth > 0)) throw InputError("synth: plane depth must be positive");
  if (std::abs(opt.tilt) >= 1.2) throw InputError("synth: tilt must be below 1.2 rad");
  if (opt.image_bits != 8 && opt.image_bits != 16)
    throw InputError("synth: image bits must be 8 or 16");
  const double travel = opt.forward * (opt.frames - 1);
  if (travel >= 0.8 * opt.depth)
    throw InputError("synth: motion brings the camera too close to the plane");

  const Camera K{opt.focal, opt.focal, (opt.width - 1) / 2.0, (opt.height - 1) / 2.0,
                 opt.width, opt.height};
  synth::PlaneScene scene = synth::standard_scene(K, opt.depth, opt.tilt, opt.seed);
  if (opt.occluder) {
    // Rectangle between the cameras and the plane, in front of the last camera.
    const double z = travel + 0.5 * (opt.depth - travel);
    const double half = 0.12 * z * opt.width / opt.focal;
    synth::TextureOptions tex;
    tex.min_wavelength = 12.0 * z / opt.focal;
    tex.max_wavelength = 80.0 * z / opt.focal;
    synth::Occluder occ{Vec3d(0.1 * half, 0.0, z), Vec3d::UnitX(), Vec3d::UnitY(), half,
                        0.8 * half, synth::make_texture(opt.seed ^ 0x9e3779b97f4a7c15ULL, tex)};
    scene = synth::make_occluder_scene(scene, occ);
  }

  synth::SequenceOptions so;
  so.frames = opt.frames;
  so.seed = opt.seed;
  so.motion = Pose(Vec3d(0, opt.yaw_deg * std::numbers::pi / 180.0, 0),
                   Vec3d(opt.lateral, 0, opt.forward));
  so.sigma_rotation = opt.sigma_rotation_deg * std::numbers::pi / 180.0;
  so.sigma_translation = opt.sigma_translation;
  const synth::Sequence seq = synth::make_sequence(scene, so);

  fs::create_directories(dir / "image");
  fs::create_directories(dir / "depth");
  io::SequenceManifest m;
  m.base_dir = dir;
  m.intrinsics = fs::path("intrinsics.txt");
  m.initial_format = io::InitialPoseFormat::Relative;
  m.initial_poses = "init_relative.txt";
  m.ground_truth = fs::path("gt.kitti.txt");
  for (int i = 0; i < opt.frames; ++i) {
    const Frame& f = seq.frames[std::size_t(i)];
    io::FrameRecord rec;
    rec.image = fs::path("image") / frame_name(i, ".png");
    rec.depth = fs::path("depth") / frame_name(i, opt.depth_png ? ".png" : ".bin");
    rec.timestamp = seq.ground_truth.poses[std::size_t(i)].timestamp;
    io::save_image(dir / rec.image, f.image, opt.image_bits);
    if (opt.depth_png)
      io::save_depth_png(dir / rec.depth, f.depth);
    else
      io::save_depth_raw(dir / rec.depth, f.depth);
    m.frames.push_back(rec);
  }
  io::save_intrinsics(dir / "intrinsics.txt", K);
  io::save_relative_poses(dir / "init_relative.txt", seq.init_relatives);
  io::save_trajectory(seq.ground_truth, io::TrajectoryFormat::Kitti, dir / "gt.kitti.txt");
  io::save_manifest(dir / "manifest.json", m);

  if (opt.occluder) {
    fs::create_directories(dir / "occlusion");
    for (int i = 1; i < opt.frames; ++i) {
      const Mat4d target = invert(seq.ground_truth[std::size_t(i)]);
      const Mat4d source = invert(seq.ground_truth[std::size_t(i - 1)]);
      io::save_labels(dir / "occlusion" / frame_name(i, ".png"),
                      synth::occlusion_set(scene, target, source));
    }
  }
}

}  // namespace doc

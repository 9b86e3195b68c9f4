#include "doc/gradcheck.hpp"

#include <cmath>
#include <random>

#include "doc/synth.hpp"

namespace doc {

std::vector<GradcheckTrial> run_gradcheck(const GradcheckOptions& opt) {
  if (opt.trials < 1) throw InputError("gradcheck: trials must be >= 1");
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  const Camera K{60.0, 60.0, 31.5, 23.5, 64, 48};
  const Calibration calib(K);

  std::vector<GradcheckTrial> trials;
  for (int trial = 0; trial < opt.trials; ++trial) {
    const int frames = trial % 2 == 0 ? 2 : 3;
    const double depth = 4.0 + 2.0 * (uni(rng) + 1.0);
    const synth::PlaneScene scene =
        synth::standard_scene(K, depth, 0.3 * uni(rng), std::uint64_t(rng()));
    synth::SequenceOptions so;
    so.frames = frames;
    Vec6d motion;
    for (int j = 0; j < 6; ++j) motion[j] = uni(rng);
    motion.array() *=
        (Eigen::Array<double, 6, 1>() << 0.01, 0.01, 0.01, 0.1, 0.05, 0.2).finished();
    so.motion = Pose(motion);
    const synth::Sequence seq = synth::make_sequence(scene, so);

    EnergyConfig cfg;
    cfg.loss = opt.loss;
    cfg.frames = frames;
    Window w{calib, {}};
    for (const Frame& f : seq.frames) w.frames.push_back(std::cref(f));

    // Evaluate away from ground truth so residuals are non-trivial.
    Eigen::VectorXd params(frames == 2 ? 6 : 12);
    for (int k = 0; k < frames - 1; ++k) {
      Vec6d p = so.motion.params();
      for (int j = 0; j < 3; ++j) p[j] += 0.004 * uni(rng);
      for (int j = 3; j < 6; ++j) p[j] += 0.04 * uni(rng);
      params.segment<6>(6 * k) = p;
    }

    WindowGradient wg = energy_gradient(w, params, cfg);
    if (opt.corrupt_gradient) wg.gradient *= 1.01;

    GradcheckTrial result;
    result.dimension = int(params.size());
    for (Eigen::Index i = 0; i < params.size(); ++i) {
      Eigen::VectorXd plus = params, minus = params;
      plus[i] += opt.step;
      minus[i] -= opt.step;
      const double ep = energy_gradient(w, plus, cfg, false, &wg.state).energy;
      const double em = energy_gradient(w, minus, cfg, false, &wg.state).energy;
      const double fd = (ep - em) / (2.0 * opt.step);
      if (std::abs(fd) <= opt.min_magnitude) continue;
      result.coordinates_checked += 1;
      result.max_relative_error =
          std::max(result.max_relative_error, std::abs(wg.gradient[i] - fd) / std::abs(fd));
    }
    result.passed = result.max_relative_error < opt.tolerance;
    trials.push_back(result);
  }
  return trials;
}

}  // namespace doc

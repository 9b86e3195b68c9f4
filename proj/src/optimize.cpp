#include "doc/optimize.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace doc {

namespace {

// Gradient w.r.t. S of a function of T = invert(S), given its gradient w.r.t. T.
TransformGradient through_inverse(const Mat4d& S, const TransformGradient& g) {
  const Mat3d R = S.topLeftCorner<3, 3>();
  const Vec3d t = S.topRightCorner<3, 1>();
  TransformGradient out;
  out.rotation = g.rotation.transpose() - t * g.translation.transpose();
  out.translation = -R * g.translation;
  return out;
}

// Gradients w.r.t. A and B of a function of A * B.
std::pair<TransformGradient, TransformGradient> through_product(
    const Mat4d& A, const Mat4d& B, const TransformGradient& g) {
  const Mat3d Ra = A.topLeftCorner<3, 3>();
  const Mat3d Rb = B.topLeftCorner<3, 3>();
  const Vec3d tb = B.topRightCorner<3, 1>();
  TransformGradient ga, gb;
  ga.rotation = g.rotation * Rb.transpose() + g.translation * tb.transpose();
  ga.translation = g.translation;
  gb.rotation = Ra.transpose() * g.rotation;
  gb.translation = Ra.transpose() * g.translation;
  return {ga, gb};
}

Vec6d to_params(const Pose& pose, const TransformGradient& g) {
  const auto dR = rodrigues_exp_derivatives<double>(pose.r());
  Vec6d out;
  for (int k = 0; k < 3; ++k) out[k] = g.rotation.cwiseProduct(dR[std::size_t(k)]).sum();
  out.tail<3>() = g.translation;
  return out;
}

Eigen::VectorXd rates_for(const LearningRate& lr) {
  Eigen::VectorXd r(6);
  r << lr.rotation, lr.rotation, lr.rotation, lr.translation, lr.translation,
      lr.translation;
  return r;
}

// Shared Adam loop; keeps the lowest-energy iterate.
RefineReport refine(const Window& window, Eigen::VectorXd& params,
                    const Eigen::VectorXd& rates, const RefineConfig& cfg) {
  RefineReport report;
  const Eigen::VectorXd init = params;
  AdamState adam(rates);
  Eigen::VectorXd best = params;
  double best_energy = std::numeric_limits<double>::infinity();
  try {
    for (int k = 0; k < cfg.iterations; ++k) {
      const WindowGradient wg = energy_gradient(window, params, cfg.energy);
      report.energy_trace.push_back(wg.energy);
      if (wg.energy < best_energy) {
        best_energy = wg.energy;
        best = params;
        report.best_iteration = k;
      }
      adam_step(adam, params, wg.gradient);
    }
    report.iterations_run = cfg.iterations;
  } catch (const std::exception& e) {
    report.iterations_run = int(report.energy_trace.size());
    report.fallback = true;
    report.diagnostic = e.what();
    params = init;
    report.final_energy = report.initial_energy =
        report.energy_trace.empty() ? std::numeric_limits<double>::quiet_NaN()
                                    : report.energy_trace.front();
    return report;
  }
  try {
    const double last = energy_gradient(window, params, cfg.energy, false).energy;
    if (last < best_energy) {
      best_energy = last;
      best = params;
      report.best_iteration = cfg.iterations;
    }
  } catch (const DegenerateWindowError&) {
    // The final iterate lost all active pixels; keep the best traced one.
  } catch (const NumericalError&) {
  }
  params = best;
  report.initial_energy = report.energy_trace.front();
  report.final_energy = best_energy;
  return report;
}

}  // namespace

void adam_step(AdamState& s, Eigen::Ref<Eigen::VectorXd> params,
               const Eigen::VectorXd& gradient) {
  if (gradient.size() != params.size() || s.m.size() != params.size())
    throw InputError("adam_step: dimension mismatch");
  s.step_count += 1;
  s.m = s.beta1 * s.m + (1.0 - s.beta1) * gradient;
  s.v = s.beta2 * s.v + (1.0 - s.beta2) * gradient.cwiseAbs2();
  const double c1 = 1.0 - std::pow(s.beta1, s.step_count);
  const double c2 = 1.0 - std::pow(s.beta2, s.step_count);
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double m_hat = s.m[i] / c1;
    const double v_hat = s.v[i] / c2;
    params[i] -= s.lr[i] * m_hat / (std::sqrt(v_hat) + s.eps);
  }
}

void RefineConfig::validate() const {
  if (iterations < 1) throw InputError("iterations must be >= 1");
  if (!(lr_current.rotation > 0 && lr_current.translation > 0))
    throw InputError("current learning rates must be positive");
  const LearningRate prev = previous_rate();
  if (!(prev.rotation >= 0 && prev.translation >= 0))
    throw InputError("previous-frame learning rates must be non-negative");
  energy.validate();
}

WindowGradient energy_gradient(const Window& window, const Eigen::VectorXd& params,
                               const EnergyConfig& cfg, bool with_gradient,
                               const WindowState* frozen) {
  const std::size_t n = window.frames.size();
  if (n != 2 && n != 3) throw InputError("energy_gradient: window must hold 2 or 3 frames");
  const Eigen::Index dim = n == 2 ? 6 : 12;
  if (params.size() != dim) throw InputError("energy_gradient: parameter size mismatch");
  if (!params.allFinite()) throw NumericalError("energy_gradient: non-finite parameters");

  const Calibration& calib = window.calib;
  const Frame& prev = window.frames[n - 2];
  const Frame& cur = window.frames[n - 1];
  const Pose b(Vec6d(params.tail<6>()));
  const double near_weight = n == 2 ? 1.0 : cfg.alpha;
  const bool use_far = n == 3 && (1.0 - cfg.alpha) != 0.0;
  auto frozen_term = [&](std::size_t i) -> const TermState* {
    return frozen ? &frozen->terms.at(i) : nullptr;
  };

  WindowGradient out;
  const Mat4d Tb = b.matrix();
  const Mat4d Tb_inv = invert(Tb);
  TermEvaluation fwd = evaluate_directed(cur, prev, calib, Tb, cfg, with_gradient, frozen_term(0));
  TermEvaluation bwd = evaluate_directed(prev, cur, calib, Tb_inv, cfg, with_gradient, frozen_term(1));
  out.energy = near_weight * (fwd.energy + bwd.energy);
  TransformGradient gb = fwd.gradient;
  gb += through_inverse(Tb, bwd.gradient);
  gb = near_weight * gb;
  out.state.terms.push_back(std::move(fwd.state));
  out.state.terms.push_back(std::move(bwd.state));

  TransformGradient ga;
  Pose a;
  if (use_far) {
    const Frame& first = window.frames[0];
    a = Pose(Vec6d(params.head<6>()));
    const Mat4d Ta = a.matrix();
    const Mat4d Tab = compose(Ta, Tb);
    const Mat4d Tab_inv = invert(Tab);
    TermEvaluation f2 = evaluate_directed(cur, first, calib, Tab, cfg, with_gradient, frozen_term(2));
    TermEvaluation b2 = evaluate_directed(first, cur, calib, Tab_inv, cfg, with_gradient, frozen_term(3));
    const double far_weight = 1.0 - cfg.alpha;
    out.energy += far_weight * (f2.energy + b2.energy);
    TransformGradient gab = f2.gradient;
    gab += through_inverse(Tab, b2.gradient);
    auto [da, db] = through_product(Ta, Tb, far_weight * gab);
    ga = da;
    gb += db;
    out.state.terms.push_back(std::move(f2.state));
    out.state.terms.push_back(std::move(b2.state));
  }
  if (!std::isfinite(out.energy)) throw NumericalError("energy_gradient: non-finite energy");
  if (!with_gradient) return out;

  out.gradient = Eigen::VectorXd::Zero(dim);
  out.gradient.tail<6>() = to_params(b, gb);
  if (use_far) out.gradient.head<6>() = to_params(a, ga);
  if (!out.gradient.allFinite()) throw NumericalError("energy_gradient: non-finite gradient");
  return out;
}

DocResult doc_refine(const Frame& previous, const Frame& current,
                     const Calibration& calib, const Pose& init,
                     const RefineConfig& cfg) {
  cfg.validate();
  const Window window{calib, {std::cref(previous), std::cref(current)}};
  Eigen::VectorXd params = init.params();
  RefineReport report = refine(window, params, rates_for(cfg.lr_current), cfg);
  return {Pose(Vec6d(params)), std::move(report)};
}

DocPlusResult docplus_refine(const Frame& f0, const Frame& f1, const Frame& f2,
                             const Calibration& calib, const Pose& previous,
                             const Pose& init, const RefineConfig& cfg) {
  cfg.validate();
  const Window window{calib, {std::cref(f0), std::cref(f1), std::cref(f2)}};
  Eigen::VectorXd params(12);
  params << previous.params(), init.params();
  Eigen::VectorXd rates(12);
  rates << rates_for(cfg.previous_rate()), rates_for(cfg.lr_current);
  RefineReport report = refine(window, params, rates, cfg);
  return {Pose(Vec6d(params.head<6>())), Pose(Vec6d(params.tail<6>())), std::move(report)};
}

SequenceResult run_sequence(const std::vector<Frame>& frames, const Calibration& calib,
                            const std::vector<Pose>& initial_relatives,
                            const RefineConfig& cfg) {
  cfg.validate();
  if (frames.size() < 2) throw InputError("run_sequence: need at least 2 frames");
  if (initial_relatives.size() != frames.size() - 1)
    throw InputError("run_sequence: expected one initial relative pose per frame pair");

  SequenceResult out;
  for (std::size_t i = 1; i < frames.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    const Pose& init = initial_relatives[i - 1];
    Pose refined;
    RefineReport report;
    if (cfg.energy.frames == 3 && i >= 2) {
      DocPlusResult r = docplus_refine(frames[i - 2], frames[i - 1], frames[i], calib,
                                       out.relatives[i - 2], init, cfg);
      refined = r.current;
      report = std::move(r.report);
    } else {
      DocResult r = doc_refine(frames[i - 1], frames[i], calib, init, cfg);
      refined = r.pose;
      report = std::move(r.report);
    }
    if (report.fallback) refined = init;
    out.relatives.push_back(refined);
    out.reports.push_back(std::move(report));
    out.seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  out.trajectory = accumulate(out.relatives);
  return out;
}

}  // namespace doc

#include "slstep/plant.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace slstep {

void PlantConfig::validate() const {
  hlip().validate();
  if (!(dt > 0) || dt > T / 10.0 + 1e-15)
    throw std::invalid_argument("PlantConfig: dt must be in (0, T/10]");
  if (!(impact_loss > 0) || impact_loss > 1.0)
    throw std::invalid_argument("PlantConfig: impact_loss must be in (0, 1]");
  if (bezier_degree < 3)
    throw std::invalid_argument("PlantConfig: bezier_degree >= 3 required");
  if (!(kp_z >= 0) || !(kd_z >= 0))
    throw std::invalid_argument("PlantConfig: negative height gains");
}

PlantState PlantState::rest(const PlantConfig& cfg) {
  PlantState s;
  s.z = cfg.z0;
  return s;
}

double bezier_transition(double t, double T, int degree) {
  if (degree < 3) throw std::invalid_argument("bezier_transition: degree >= 3");
  double s = t / T;
  if (s < 0.0) s = 0.0;  // out-of-range phases are clamped
  if (s > 1.0) s = 1.0;
  // Symmetric Bernstein coefficients 0,...,0,(1/2),1,...,1: starts at 0,
  // ends at 1 with zero end slopes, and c(T/2) = 1/2.
  double c = 0.0;
  for (int i = 0; i <= degree; ++i) {
    double b;
    if (2 * i < degree)
      b = 0.0;
    else if (2 * i > degree)
      b = 1.0;
    else
      b = 0.5;
    if (b == 0.0) continue;
    double binom = 1.0;
    for (int j = 0; j < i; ++j) binom = binom * (degree - j) / (j + 1);
    c += b * binom * std::pow(s, i) * std::pow(1.0 - s, degree - i);
  }
  return c;
}

double desired_swing_x(double x_sw_plus, double u, double t, const PlantConfig& cfg) {
  const double c = bezier_transition(t, cfg.T, cfg.bezier_degree);
  return (1.0 - c) * x_sw_plus + c * u;
}

namespace {

// State layout for the SSP integrator: (x, vx, z, vz).
using Flow = std::array<double, 4>;

Flow deriv(const Flow& s, double t_phase, double F, const PlantConfig& cfg) {
  const double x = s[0], vx = s[1], z = s[2], vz = s[3];
  const double zdd = cfg.kp_z * (cfg.z0 - z) - cfg.kd_z * vz +
                     cfg.nl_eps * std::sin(2.0 * M_PI * t_phase / cfg.T) * cfg.g;
  const double xdd = (x / z) * (zdd + cfg.g) + F / cfg.m;
  return {vx, xdd, vz, zdd};
}

Flow rk4_step(const Flow& s, double t, double h, double F, const PlantConfig& cfg) {
  const Flow k1 = deriv(s, t, F, cfg);
  Flow s2;
  for (int i = 0; i < 4; ++i) s2[i] = s[i] + 0.5 * h * k1[i];
  const Flow k2 = deriv(s2, t + 0.5 * h, F, cfg);
  Flow s3;
  for (int i = 0; i < 4; ++i) s3[i] = s[i] + 0.5 * h * k2[i];
  const Flow k3 = deriv(s3, t + 0.5 * h, F, cfg);
  Flow s4;
  for (int i = 0; i < 4; ++i) s4[i] = s[i] + h * k3[i];
  const Flow k4 = deriv(s4, t + h, F, cfg);
  Flow out;
  for (int i = 0; i < 4; ++i)
    out[i] = s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return out;
}

}  // namespace

StepResult integrate_step(const PlantState& s0, const StepSizeCallback& command,
                          double F_push, const PlantConfig& cfg,
                          std::vector<PlantSample>* samples, double t0) {
  cfg.validate();
  if (std::abs(s0.t_phase) > 1e-12)
    throw std::invalid_argument("integrate_step: t_phase must start at 0");

  const int n_sub = std::max(10, static_cast<int>(std::llround(cfg.T / cfg.dt)));
  const double h = cfg.T / n_sub;

  Flow s = {s0.x, s0.vx, s0.z, s0.vz};
  const double x_sw_plus = s0.swing_x;
  double u_cmd = 0.0;

  StepResult result;
  for (int i = 0; i < n_sub; ++i) {
    const double t = i * h;
    u_cmd = command(DiscreteState{s[0], s[1]}, t);
    if (samples) samples->push_back({t0 + t, s[0], s[1]});
    s = rk4_step(s, t, h, F_push, cfg);
    if (s[2] <= 0.1 * cfg.z0) {
      result.outcome = StepOutcome::kFell;
      return result;
    }
  }

  // Final command query exactly at the pre-impact state; with c(T) = 1 the
  // swing foot lands at the commanded step size.
  const DiscreteState x_pre{s[0], s[1]};
  u_cmd = command(x_pre, cfg.T);
  const double u_real = desired_swing_x(x_sw_plus, u_cmd, cfg.T, cfg);
  if (samples) samples->push_back({t0 + cfg.T, s[0], s[1]});

  result.record.x_pre = x_pre;
  result.record.u_cmd = u_cmd;
  result.record.u_real = u_real;
  result.record.F_push = F_push;
  result.record.duration = cfg.T;

  PlantState next;
  next.x = s[0] - u_real;
  next.vx = cfg.impact_loss * s[1];
  next.z = s[2];
  next.vz = s[3];
  next.swing_x = -u_real;  // old stance foot, relative to the new one
  next.t_phase = 0.0;
  next.stance_world_x = s0.stance_world_x + u_real;
  result.state = next;
  result.outcome = StepOutcome::kCompleted;
  return result;
}

EpisodeResult run_episode(const PlantConfig& cfg, const StepSizeCallback& command,
                          int n_steps, const PushSchedule& pushes,
                          int min_push_spacing, const PlantState& start,
                          bool keep_samples) {
  if (n_steps < 0) throw std::invalid_argument("run_episode: negative step count");
  int prev_push = std::numeric_limits<int>::min() / 2;
  for (const auto& [k, F] : pushes) {
    (void)F;
    if (k < 1) throw std::invalid_argument("run_episode: push index must be >= 1");
    if (k - prev_push < min_push_spacing)
      throw std::invalid_argument("run_episode: pushes closer than the minimum spacing");
    prev_push = k;
  }

  EpisodeResult out;
  PlantState s = start;
  for (int k = 1; k <= n_steps; ++k) {
    double F = 0.0;
    for (const auto& [idx, force] : pushes)
      if (idx == k) F = force;
    StepResult r = integrate_step(s, command, F, cfg,
                                  keep_samples ? &out.samples : nullptr,
                                  (k - 1) * cfg.T);
    if (r.outcome == StepOutcome::kFell) {
      out.fell = true;
      return out;
    }
    r.record.k = k;
    out.records.push_back(r.record);
    s = r.state;
  }
  return out;
}

}  // namespace slstep

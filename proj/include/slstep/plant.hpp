// Synthetic ground-truth walker: a variable-height inverted pendulum with PD
// height regulation, a periodic height excitation, Bezier swing-foot motion
// and an instantaneous velocity-scaling impact. Its step-to-step map is close
// to, but not exactly, the H-LIP one.
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "slstep/hlip.hpp"

namespace slstep {

struct PlantConfig {
  double z0 = 0.7;        // target COM height [m]
  double T = 0.4;         // step duration [s]
  double g = 9.81;        // [m/s^2]
  double m = 20.0;        // [kg]
  double kp_z = 80.0;     // height PD gains
  double kd_z = 10.0;
  int bezier_degree = 5;  // swing transition polynomial degree (>= 3)
  double impact_loss = 1.0;  // velocity retention in (0, 1]
  double dt = 1e-3;          // integrator step, in (0, T/10]
  double nl_eps = 0.0;       // height-excitation knob (dimensionless)

  void validate() const;
  HlipParams hlip() const { return HlipParams{z0, T, g, m}; }
};

struct PlantState {
  double x = 0.0;        // horizontal COM position rel. stance foot [m]
  double z = 0.0;        // COM height [m]
  double vx = 0.0;
  double vz = 0.0;
  double swing_x = 0.0;  // swing foot position rel. stance foot [m]
  double t_phase = 0.0;  // time since last impact [s]
  double stance_world_x = 0.0;

  // At the target height, at rest, feet together.
  static PlantState rest(const PlantConfig& cfg);
};

struct StepRecord {
  int k = 0;                 // step index (1-based within an episode)
  DiscreteState x_pre;       // pre-impact (p, v) at this step's footstrike
  double u_cmd = 0.0;        // commanded step size at impact [m]
  double u_real = 0.0;       // realized step size [m]
  double F_push = 0.0;       // constant push over this step's SSP [N]
  double duration = 0.0;     // [s]
};

// Continuous-time trace sample, kept for plotting.
struct PlantSample {
  double t = 0.0;  // episode time [s]
  double p = 0.0;
  double v = 0.0;
};

enum class StepOutcome { kCompleted, kFell };

// Queried every integrator substep and once more exactly at the pre-impact
// state; arguments are the current horizontal COM state and phase time.
using StepSizeCallback = std::function<double(const DiscreteState&, double)>;

// Bezier transition c(t): c(0)=0, c(T)=1, cdot(0)=cdot(T)=0, monotone.
// t outside [0, T] is clamped.
double bezier_transition(double t, double T, int degree);

// x_sw^d = (1 - c(t)) x_sw^+ + c(t) u.
double desired_swing_x(double x_sw_plus, double u, double t, const PlantConfig& cfg);

struct StepResult {
  PlantState state;  // post-impact state (valid when completed)
  StepRecord record;
  StepOutcome outcome = StepOutcome::kCompleted;
};

// Integrates one single-support phase from s0 (t_phase must be 0) under a
// constant push force, applies the impact at t_phase = T, and returns the
// post-impact state plus the step record. If `samples` is non-null the
// per-substep horizontal COM trace is appended to it (t offset by t0).
StepResult integrate_step(const PlantState& s0, const StepSizeCallback& command,
                          double F_push, const PlantConfig& cfg,
                          std::vector<PlantSample>* samples = nullptr,
                          double t0 = 0.0);

struct EpisodeResult {
  std::vector<StepRecord> records;
  std::vector<PlantSample> samples;
  bool fell = false;
};

// (step index, force): the push is constant over that whole step's SSP.
using PushSchedule = std::vector<std::pair<int, double>>;

// Runs n_steps from `start`, applying pushes per schedule. Push indices are
// 1-based, must be >= 1 and spaced at least min_push_spacing apart.
// Terminates early on a fall.
EpisodeResult run_episode(const PlantConfig& cfg, const StepSizeCallback& command,
                          int n_steps, const PushSchedule& pushes,
                          int min_push_spacing, const PlantState& start,
                          bool keep_samples = false);

}  // namespace slstep

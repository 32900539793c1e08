// End-to-end experiment pipeline: configuration, data generation, learning,
// synthesis, certified push-rejection episodes, controller comparison, CSV
// logs and SVG plots.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "slstep/plant.hpp"
#include "slstep/s2s.hpp"
#include "slstep/sls.hpp"

namespace slstep {

struct ExperimentConfig {
  PlantConfig plant;
  double v_d = 1.0;

  BoxSet U = BoxSet::interval(-0.7, 0.7);    // step-size limits [m]
  BoxSet X = BoxSet({-0.6, -2.0}, {1.0, 4.0});  // pre-impact (p, v) limits

  double f_ext_max = 50.0;  // push magnitude bound [N]
  int n_push = 8;           // minimum steps between pushes
  int n_fir = 4;

  std::optional<BoxSet> s0;  // empty = "auto" (mRPI proposal)
  int mrpi_terms = 20;
  double mrpi_inflation = 0.05;

  SynthesisWeights weights;
  // Design-set backoffs applied at synthesis time only: Ue and Xe are
  // shrunk by these amounts and D is inflated, so the certified bounds keep
  // holding on the plant where residuals can exceed d* slightly.
  double u_margin = 0.0;
  double x_margin = 0.0;
  double d_inflate = 1.0;

  // Training-data excitation.
  double v_grid_min = -1.0;
  double v_grid_max = 1.0;
  int v_grid_count = 9;
  int steps_per_episode = 40;
  double dither = 0.03;
  double holdout_frac = 0.2;

  // Push-rejection episodes.
  int sim_steps = 30;
  int settle_steps = 8;
  int push_count = 1;

  std::uint64_t seed = 1;

  HlipParams hlip() const { return plant.hlip(); }
  void validate() const;

  // Flat dotted-key text form; unknown keys are errors.
  static ExperimentConfig from_text(const std::string& text);
  static ExperimentConfig load(const std::string& path);
  std::string to_text() const;
  std::uint64_t hash() const;

  static ExperimentConfig amber_default();
  static ExperimentConfig cassie_default();
};

// One per-step row of an episode log, in error coordinates of the target
// orbit plus constraint margins.
struct LogRow {
  StepRecord rec;
  double u_e = 0.0;       // u_real - u*
  Vec2 e = Vec2::Zero();  // x_pre - x*
  Vec2 w_hat = Vec2::Zero();  // reconstructed disturbance entering this step
  double margin_u = 0.0;
  double margin_xp = 0.0;
  double margin_xv = 0.0;
};

struct EpisodeLog {
  std::vector<LogRow> rows;
  std::vector<PlantSample> samples;  // continuous trace for plotting
  std::string controller;
  bool fell = false;
};

// Builds the log rows (error coordinates, reconstructed disturbances and
// margins) from raw step records.
EpisodeLog annotate_episode(const EpisodeResult& episode, const S2SModel& model,
                            const OrbitSpec& orbit, const BoxSet& U, const BoxSet& X,
                            const std::string& controller_name);

// CSV with the fixed 15-column schema; 17 significant digits, LF endings.
std::string episode_csv(const EpisodeLog& log);
void emit_csv(const EpisodeLog& log, const std::string& path);
EpisodeLog parse_episode_csv(const std::string& text);
EpisodeLog load_csv(const std::string& path);

// ---- data generation ----------------------------------------------------

// Baseline H-LIP deadbeat stepping over the velocity grid with per-step
// dither; one episode per grid point, OpenMP-parallel with derived seeds.
std::vector<EpisodeResult> generate_training_episodes(const ExperimentConfig& cfg);
std::vector<EpisodeResult> generate_training_episodes_serial(
    const ExperimentConfig& cfg);

// ---- pipeline -----------------------------------------------------------

struct FitReport {
  int train_size = 0;
  int holdout_size = 0;
  Vec2 holdout_max_abs = Vec2::Zero();
  double holdout_within_15x = 1.0;  // fraction of residuals within 1.5 d*
};

struct PipelineResult {
  bool ok = false;
  int exit_code = 1;  // 0 ok, 2 synthesis infeasible, 1 other failure
  std::string error;

  S2SModel model;
  OrbitSpec orbit;
  BoxSet xe = BoxSet::zero(2);
  BoxSet ue = BoxSet::zero(1);
  BoxSet s0 = BoxSet::zero(2);
  BoxSet d = BoxSet::zero(2);
  BoxSet wext = BoxSet::zero(2);
  DisturbanceProfile profile;
  SynthesisResult synthesis;
  Theorem1Certificate certificate;
  FitReport fit;
};

// Derived sets for a given model: error sets with design backoffs, the push
// set, D, and S0 ("auto" proposes the deadbeat mRPI outer box).
struct DerivedSets {
  BoxSet xe, ue, xe_design, ue_design, d, d_design, wext, s0;
};
DerivedSets derive_sets(const ExperimentConfig& cfg, const S2SModel& model,
                        const OrbitSpec& orbit);

// Runs: generate data -> fit -> orbit -> sets -> synthesize -> certificate.
// Stops at the first failing stage. When out_dir is non-empty, writes
// episodes/ep_*.csv, model.txt, controller.txt, certificate.txt and
// manifest.txt under it.
PipelineResult run_pipeline(const ExperimentConfig& cfg,
                            const std::string& out_dir = "");

// ---- push-rejection simulation and comparison ----------------------------

struct SimulatedRun {
  EpisodeLog log;
  PushSchedule pushes;
};

// Settles from standstill, then applies `push_count` pushes of magnitude F
// spaced by max(n_push, n_fir) steps.
SimulatedRun simulate_push_rejection(const ExperimentConfig& cfg,
                                     const PipelineResult& pipe,
                                     const std::string& controller_name,
                                     double F, int push_count);

struct ControllerStats {
  std::string name;
  double max_abs_u = 0.0;
  int recovery_steps = -1;  // first k after the push with e_k back in S0
  int u_violations = 0;     // steps with u outside U
  int x_violations = 0;
  bool fell = false;
};

struct ComparisonReport {
  std::vector<ControllerStats> stats;
  std::vector<EpisodeLog> logs;
  double push_force = 0.0;
};

// Identical push episodes (same seed and schedule) for each named
// controller ("sls", "deadbeat", "lqr").
ComparisonReport compare_controllers(const ExperimentConfig& cfg,
                                     const PipelineResult& pipe,
                                     const std::vector<std::string>& names,
                                     double F, int push_count = 1);

// Smallest push in (0, f_max] at which the deadbeat controller commands a
// step outside U, located by bisection on identical episodes. Returns
// nullopt if even f_max stays within bounds.
std::optional<double> find_deadbeat_violation_force(const ExperimentConfig& cfg,
                                                    const PipelineResult& pipe,
                                                    double f_max);

// ---- plots ----------------------------------------------------------------

enum class PlotKind { kVelocity, kInput, kResidual };
PlotKind plot_kind_from_string(const std::string& s);

// Self-contained SVG; one series per log, with constraint-bound lines where
// applicable. For kResidual the logs' steps are scored against both the
// learned model and the H-LIP approximation.
std::string render_plot(const std::vector<EpisodeLog>& logs, PlotKind kind,
                        const ExperimentConfig& cfg, const S2SModel& model);
void emit_plot(const std::vector<EpisodeLog>& logs, PlotKind kind,
               const ExperimentConfig& cfg, const S2SModel& model,
               const std::string& path);

}  // namespace slstep

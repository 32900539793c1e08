// Learned step-to-step dynamics: dataset extraction from episode logs, the
// minimum-residual-bound L-infinity fit, periodic orbit characterization and
// the error-coordinate constraint sets.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "slstep/hlip.hpp"
#include "slstep/plant.hpp"
#include "slstep/sets.hpp"

namespace slstep {

// x_{k+1} = Abar x_k + Bbar u_k + Cbar + eps, |eps_i| <= dstar_i.
struct S2SModel {
  Mat2 Abar = Mat2::Zero();
  Vec2 Bbar = Vec2::Zero();
  Vec2 Cbar = Vec2::Zero();
  Vec2 dstar = Vec2::Zero();

  Vec2 predict(const Vec2& x, double u) const { return Abar * x + Bbar * u + Cbar; }

  BoxSet residual_set() const { return BoxSet::symmetric(dstar); }

  // Hash of the dynamics parameters, used to tie controllers to the model
  // they were synthesized on.
  std::uint64_t param_hash() const;
};

struct StepTriple {
  DiscreteState x;   // pre-impact state at step k
  double u = 0.0;    // step size realized at step k's impact
  DiscreteState x_next;
};

struct StepDataset {
  std::vector<StepTriple> triples;
  std::string provenance;  // config hash + seed

  int size() const { return static_cast<int>(triples.size()); }
};

// Consecutive-step triples from completed, fall-free episodes. A triple is
// dropped when either of its two steps carried a push. Episodes never pair
// across their boundary. Requires >= 10 usable steps in total.
StepDataset extract_dataset(const std::vector<EpisodeResult>& episodes,
                            const std::string& provenance = "");

// Deterministic shuffle-split; `holdout_frac` of the triples go to .second.
std::pair<StepDataset, StepDataset> split_dataset(const StepDataset& data,
                                                  double holdout_frac,
                                                  std::uint64_t seed);

// L-infinity regression (linear program): minimize 1'd subject to
// -d <= o_k q - x_{k+1} <= d over all triples. Requires >= 9 triples with
// full-rank regressors. The returned dstar bounds every training residual.
S2SModel fit_linf(const StepDataset& data);

// Max-abs residual of a model on a dataset, per coordinate.
Vec2 max_abs_residual(const S2SModel& model, const StepDataset& data);

struct OrbitSpec {
  int period = 1;     // 1 or 2
  double v_d = 0.0;   // desired average velocity [m/s]
  // P1 uses index 0 only; P2 holds the left/right pair.
  double u_star[2] = {0.0, 0.0};
  DiscreteState x_star[2];
};

// Period-1 orbit: u* = v_d T, x* = (I - Abar)^{-1} (Bbar u* + Cbar).
OrbitSpec p1_orbit(const S2SModel& model, double v_d, double T);

// Period-2 orbit with the left step size chosen; u_L + u_R = 2 v_d T.
OrbitSpec p2_orbit(const S2SModel& model, double v_d, double T, double u_left);

// Input change u -> u^sw = u - p: Abar becomes Abar + Bbar [1 0].
S2SModel reparameterize_to_swing_input(const S2SModel& model);
S2SModel reparameterize_to_step_input(const S2SModel& model);  // inverse

struct ErrorSets {
  BoxSet xe;  // X - x*
  BoxSet ue;  // U - u*
  bool on_boundary = false;  // x* or u* sits on its set's boundary
};

// Shifts the state/input sets into error coordinates around a P1 orbit.
// Throws std::invalid_argument when the orbit lies outside X or U.
ErrorSets error_constraint_sets(const BoxSet& X, const BoxSet& U,
                                const OrbitSpec& orbit);

// Structured-text serialization; round-trips bit exactly.
std::string model_serialize(const S2SModel& model, std::uint64_t config_hash,
                            int dataset_size);
S2SModel model_deserialize(const std::string& text,
                           std::uint64_t* config_hash = nullptr,
                           int* dataset_size = nullptr);
void model_save(const S2SModel& model, const std::string& path,
                std::uint64_t config_hash, int dataset_size);
S2SModel model_load(const std::string& path, std::uint64_t* config_hash = nullptr,
                    int* dataset_size = nullptr);

}  // namespace slstep

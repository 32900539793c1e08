// Constrained system-level synthesis of the finite-impulse-response stepping
// controller, the disturbance-bound profile, the runtime convolution control
// law, and the robust-containment certificate.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "slstep/s2s.hpp"
#include "slstep/sets.hpp"

namespace slstep {

// Per-index disturbance bounds: W[0] = S0 (the window anchor e_1),
// W[1] = Wext (+) D (push step), W[i] = D for i = 2..N_F-1.
struct DisturbanceProfile {
  std::vector<BoxSet> w;

  int horizon() const { return static_cast<int>(w.size()); }
};

DisturbanceProfile build_profile(const BoxSet& S0, const BoxSet& Wext,
                                 const BoxSet& D, int n_fir);

// Closed-loop response maps e_k = sum_i Phi_x[i] w_{k-i},
// u^e_k = sum_i Phi_u[i] w_{k-i}, truncated at the FIR horizon.
struct FirController {
  int n_fir = 0;
  std::vector<Mat2> phi_x;     // phi_x[i-1] is Phi_x[i], i = 1..N_F
  std::vector<RowVec2> phi_u;  // phi_u[i-1] is Phi_u[i]
  Mat2 abar = Mat2::Zero();    // model used at synthesis
  Vec2 bbar = Vec2::Zero();
  std::uint64_t model_hash = 0;
  Vec2 weight_q = Vec2::Ones();
  double weight_r = 1.0;
};

struct SynthesisWeights {
  Vec2 q = Vec2::Ones();
  double r = 1.0;
};

enum class SynthesisStatus { kOptimal, kInfeasible };

struct SynthesisResult {
  SynthesisStatus status = SynthesisStatus::kInfeasible;
  std::optional<FirController> controller;
  double objective = 0.0;
  // When infeasible: the first structurally violated constraint family.
  std::string binding_family;
};

// Solves the robust synthesis LP: achievability recursion + FIR closure as
// equalities, box constraints e_i in Xe (i < N_F), e_{N_F} in S0,
// u^e_i in Ue enforced for every disturbance sequence in the profile via
// nonnegative multipliers H Phi = Lambda G, sum Lambda g <= h.
// Requires S0 inside Xe and profile length >= 1.
SynthesisResult synthesize(const S2SModel& model, const DisturbanceProfile& profile,
                           const BoxSet& Xe, const BoxSet& Ue, const BoxSet& S0,
                           const SynthesisWeights& weights = {});

// Dimension-generic core (n states, m inputs); state/input constraint boxes
// are optional. Used directly by tests for low-dimensional instances.
struct GeneralFir {
  std::vector<Eigen::MatrixXd> phi_x;
  std::vector<Eigen::MatrixXd> phi_u;
};
struct GeneralSynthesisResult {
  SynthesisStatus status = SynthesisStatus::kInfeasible;
  GeneralFir fir;
  double objective = 0.0;
  std::string binding_family;
};
GeneralSynthesisResult synthesize_general(
    const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
    const std::vector<BoxSet>& profile, const std::optional<BoxSet>& Xe,
    const std::optional<BoxSet>& Ue, const std::optional<BoxSet>& S_terminal,
    const Eigen::VectorXd& weight_q, double weight_r);

// Runtime state: ring buffer of the last N_F reconstructed disturbances plus
// the previous error/input needed to reconstruct the next one.
struct ControllerState {
  std::vector<Vec2> w_hist;  // w_hist[0] is the most recent
  Vec2 prev_e = Vec2::Zero();
  double prev_ue = 0.0;
  bool initialized = false;
};

ControllerState controller_reset(const FirController& c);

// One discrete update at a footstrike with error e_k = x_k - x*.
// First call treats e_k itself as the anchor disturbance w_0; later calls
// reconstruct w_{k-1} = e_k - Abar e_{k-1} - Bbar u^e_{k-1}, which folds the
// model residual and any push into the disturbance estimate.
std::pair<double, ControllerState> controller_step(const FirController& c,
                                                   const ControllerState& s,
                                                   const Vec2& e_k);

// The input controller_step would produce for error e_now, without
// committing; used for the continuous within-step step-size updates.
double controller_preview(const FirController& c, const ControllerState& s,
                          const Vec2& e_now);

struct RobustReport {
  bool pass = false;
  long sequences = 0;
  // Worst-case slacks; negative means a violation.
  double margin_state = 0.0;     // e_i vs Xe, i = 1..N_F-1
  double margin_terminal = 0.0;  // e_{N_F} vs S0
  double margin_input = 0.0;     // u^e_i vs Ue, i = 1..N_F
  long worst_state_seq = -1;
  long worst_terminal_seq = -1;
  long worst_input_seq = -1;
};

// Exhaustive vertex enumeration of the profile sets (4^{N_F} sequences for
// 2-D boxes), rolling out the linear closed loop. OpenMP-parallel; the
// *_serial variant is the reference implementation and returns identical
// results.
RobustReport verify_robust(const FirController& c, const DisturbanceProfile& profile,
                           const BoxSet& Xe, const BoxSet& Ue, const BoxSet& S0);
RobustReport verify_robust_serial(const FirController& c,
                                  const DisturbanceProfile& profile,
                                  const BoxSet& Xe, const BoxSet& Ue,
                                  const BoxSet& S0);

struct Theorem1Certificate {
  bool pass = false;
  bool synthesis_feasible = false;
  bool horizon_ok = false;      // N_F <= N_push
  bool s0_in_xe = false;
  bool robust_ok = false;
  std::string failing;          // first failing hypothesis, empty if none
  RobustReport robust;
  int n_fir = 0;
  int n_push = 0;
};

// Checks the induction hypotheses: feasible synthesis, N_F <= N_push,
// S0 inside Xe, and robust vertex verification.
Theorem1Certificate theorem1_certificate(const SynthesisResult& synth,
                                         const DisturbanceProfile& profile,
                                         const BoxSet& S0, const BoxSet& Xe,
                                         const BoxSet& Ue, int n_push);

std::string certificate_serialize(const Theorem1Certificate& cert,
                                  std::uint64_t config_hash);

// Monte Carlo rollout of the linear closed loop with per-step residuals
// drawn from D and pushes drawn from Wext at the scheduled spacing; counts
// violations of Xe / Ue. Chains run OpenMP-parallel with derived seeds;
// *_serial is the reference.
struct McResult {
  long steps = 0;
  long violations = 0;
};
McResult mc_multipush(const FirController& c, const BoxSet& S0, const BoxSet& Xe,
                      const BoxSet& Ue, const BoxSet& D, const BoxSet& Wext,
                      int push_spacing, int chains, int steps_per_chain,
                      std::uint64_t seed);
McResult mc_multipush_serial(const FirController& c, const BoxSet& S0,
                             const BoxSet& Xe, const BoxSet& Ue, const BoxSet& D,
                             const BoxSet& Wext, int push_spacing, int chains,
                             int steps_per_chain, std::uint64_t seed);

// Structured-text serialization; round-trips bit exactly. The file carries
// the response maps plus the hash of the model it was synthesized on; loading
// rebinds the model and refuses a hash mismatch.
std::string controller_serialize(const FirController& c);
FirController controller_deserialize(const std::string& text, const S2SModel& model);
void controller_save(const FirController& c, const std::string& path);
FirController controller_load(const std::string& path, const S2SModel& model);

}  // namespace slstep

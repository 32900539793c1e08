// Timings for the OpenMP kernels against their serial reference: exhaustive
// vertex verification and the Monte Carlo rollout batch. The controller used
// here is the closed-form deadbeat FIR realization, which satisfies the
// achievability and closure identities at any horizon, so verification work
// can be scaled without re-running the synthesis LP.
#include <chrono>
#include <cstdio>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "slstep/harness.hpp"

using namespace slstep;

namespace {

FirController deadbeat_fir(const S2SModel& model, int n_fir) {
  const GainMatrix K = deadbeat_gain(model.Abar, model.Bbar);
  const Mat2 A_cl = model.Abar + model.Bbar * K.K;
  FirController c;
  c.n_fir = n_fir;
  c.phi_x.resize(n_fir);
  c.phi_u.resize(n_fir);
  Mat2 phi = Mat2::Identity();
  for (int i = 0; i < n_fir; ++i) {
    c.phi_x[i] = phi;
    c.phi_u[i] = K.K * phi;
    phi = A_cl * phi;  // zero from the third tap on
  }
  c.abar = model.Abar;
  c.bbar = model.Bbar;
  return c;
}

template <typename F>
double time_ms(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs OpenMP timings for the data-parallel kernels"};
  int nf = 11;
  int chains = 2000, steps = 400;
  app.add_option("--nf", nf, "FIR horizon for vertex verification (4^nf sequences)");
  app.add_option("--chains", chains, "Monte Carlo chains");
  app.add_option("--steps", steps, "steps per chain");
  CLI11_PARSE(app, argc, argv);

  const ExperimentConfig cfg = ExperimentConfig::amber_default();
  const auto [A, B] = s2s_matrices(cfg.hlip());
  S2SModel model;
  model.Abar = A;
  model.Bbar = B;
  model.dstar << 0.01, 0.03;

  const FirController ctrl = deadbeat_fir(model, nf);
  const BoxSet D = model.residual_set();
  const BoxSet Wext = BoxSet::symmetric(
      push_to_disturbance(cfg.f_ext_max, cfg.hlip()).cwiseAbs());
  const BoxSet S0({-0.06, -0.2}, {0.06, 0.2});
  const BoxSet Xe({-2.0, -6.0}, {2.0, 6.0});
  const BoxSet Ue = BoxSet::interval(-3.0, 3.0);
  const DisturbanceProfile profile = build_profile(S0, Wext, D, nf);

#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (built without OpenMP)\n");
#endif

  RobustReport r_serial, r_par;
  const double t_vs = time_ms(
      [&] { r_serial = verify_robust_serial(ctrl, profile, Xe, Ue, S0); });
  const double t_vp =
      time_ms([&] { r_par = verify_robust(ctrl, profile, Xe, Ue, S0); });
  const bool verify_match = r_serial.margin_state == r_par.margin_state &&
                            r_serial.margin_terminal == r_par.margin_terminal &&
                            r_serial.margin_input == r_par.margin_input &&
                            r_serial.worst_input_seq == r_par.worst_input_seq;
  std::printf("verify_robust  nf=%-2d  %10ld sequences  serial %9.1f ms  "
              "omp %9.1f ms  speedup %.2fx  results %s\n",
              nf, r_serial.sequences, t_vs, t_vp, t_vs / t_vp,
              verify_match ? "identical" : "DIFFER");

  McResult m_serial, m_par;
  const double t_ms_ = time_ms([&] {
    m_serial = mc_multipush_serial(ctrl, S0, Xe, Ue, D, Wext, cfg.n_push, chains,
                                   steps, cfg.seed);
  });
  const double t_mp = time_ms([&] {
    m_par = mc_multipush(ctrl, S0, Xe, Ue, D, Wext, cfg.n_push, chains, steps,
                         cfg.seed);
  });
  const bool mc_match = m_serial.violations == m_par.violations;
  std::printf("mc_multipush   %7d x %-5d steps        serial %9.1f ms  "
              "omp %9.1f ms  speedup %.2fx  results %s\n",
              chains, steps, t_ms_, t_mp, t_ms_ / t_mp,
              mc_match ? "identical" : "DIFFER");

  return (verify_match && mc_match) ? 0 : 1;
}

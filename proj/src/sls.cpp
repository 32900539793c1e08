#include "slstep/sls.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "slstep/lp.hpp"
#include "slstep/rng.hpp"
#include "slstep/textio.hpp"

namespace slstep {

DisturbanceProfile build_profile(const BoxSet& S0, const BoxSet& Wext,
                                 const BoxSet& D, int n_fir) {
  if (n_fir < 2) throw std::invalid_argument("build_profile: N_F >= 2 required");
  if (S0.dim() != Wext.dim() || S0.dim() != D.dim())
    throw std::invalid_argument("build_profile: set dimensions differ");
  DisturbanceProfile p;
  p.w.reserve(n_fir);
  p.w.push_back(S0);
  p.w.push_back(minkowski_sum(Wext, D));
  for (int i = 2; i < n_fir; ++i) p.w.push_back(D);
  return p;
}

GeneralSynthesisResult synthesize_general(
    const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
    const std::vector<BoxSet>& profile, const std::optional<BoxSet>& Xe,
    const std::optional<BoxSet>& Ue, const std::optional<BoxSet>& S_terminal,
    const Eigen::VectorXd& weight_q, double weight_r) {
  const int n = static_cast<int>(A.rows());
  const int m = static_cast<int>(B.cols());
  const int NF = static_cast<int>(profile.size());
  if (A.cols() != n || B.rows() != n)
    throw std::invalid_argument("synthesize: inconsistent A/B dimensions");
  if (NF < 1) throw std::invalid_argument("synthesize: empty profile");
  for (const auto& w : profile)
    if (w.dim() != n) throw std::invalid_argument("synthesize: profile dimension");
  if (weight_q.size() != n)
    throw std::invalid_argument("synthesize: weight_q dimension");

  // Halfspace forms of the window constraint sets.
  struct HRows {
    Eigen::MatrixXd G;
    Eigen::VectorXd g;
  };
  auto rows_of = [](const std::optional<BoxSet>& s) -> std::optional<HRows> {
    if (!s) return std::nullopt;
    Polytope p = to_halfspaces(*s);
    return HRows{p.G, p.g};
  };
  const auto hx = rows_of(Xe);
  const auto hu = rows_of(Ue);
  const auto ht = rows_of(S_terminal ? S_terminal : Xe);

  std::vector<HRows> wrows;  // profile sets in H-form
  wrows.reserve(NF);
  for (const auto& w : profile) {
    Polytope p = to_halfspaces(w);
    wrows.push_back({p.G, p.g});
  }

  // Stacked constraint H[i] [e_i; u_i] <= h[i] for window step i (1-based).
  // For i < NF the state block uses Xe, at i = NF the terminal set.
  auto h_block = [&](int i) -> HRows {
    const auto& state = (i < NF) ? hx : ht;
    int q = 0;
    if (state) q += static_cast<int>(state->g.size());
    if (hu) q += static_cast<int>(hu->g.size());
    HRows H;
    H.G = Eigen::MatrixXd::Zero(q, n + m);
    H.g = Eigen::VectorXd::Zero(q);
    int r = 0;
    if (state) {
      H.G.block(0, 0, state->G.rows(), n) = state->G;
      H.g.head(state->g.size()) = state->g;
      r += static_cast<int>(state->G.rows());
    }
    if (hu) {
      H.G.block(r, n, hu->G.rows(), m) = hu->G;
      H.g.tail(hu->g.size()) = hu->g;
    }
    return H;
  };

  // Variable layout.
  const int n_px = NF * n * n;
  const int n_pu = NF * m * n;
  const int base_px = 0;
  const int base_pu = base_px + n_px;
  const int base_aux = base_pu + n_pu;  // one |.| bound per response entry
  int next = base_aux + n_px + n_pu;

  std::vector<HRows> hblocks(NF);
  std::vector<std::vector<int>> lam_base(NF);  // [i-1][j]
  for (int i = 1; i <= NF; ++i) {
    hblocks[i - 1] = h_block(i);
    lam_base[i - 1].resize(i);
    for (int j = 0; j < i; ++j) {
      lam_base[i - 1][j] = next;
      next += static_cast<int>(hblocks[i - 1].g.size() * wrows[j].g.size());
    }
  }
  const int n_vars = next;

  auto px = [&](int tap, int r, int c) { return base_px + (tap * n + r) * n + c; };
  auto pu = [&](int tap, int r, int c) { return base_pu + (tap * m + r) * n + c; };
  auto aux_px = [&](int tap, int r, int c) { return base_aux + (tap * n + r) * n + c; };
  auto aux_pu = [&](int tap, int r, int c) {
    return base_aux + n_px + (tap * m + r) * n + c;
  };
  auto lam = [&](int i, int j, int r, int t) {
    return lam_base[i - 1][j] + r * static_cast<int>(wrows[j].g.size()) + t;
  };

  // Count rows.
  int n_eq = n * n;                      // Phi_x[1] = I
  n_eq += (NF - 1) * n * n;              // achievability recursion
  n_eq += n * n;                         // FIR closure
  for (int i = 1; i <= NF; ++i)
    n_eq += i * static_cast<int>(hblocks[i - 1].g.size()) * n;  // H Phi = Lambda G
  int n_ub = 2 * (n_px + n_pu);          // |.| linearization
  for (int i = 1; i <= NF; ++i)
    n_ub += static_cast<int>(hblocks[i - 1].g.size());  // sum Lambda g <= h

  LpProblem lp;
  lp.c = Eigen::VectorXd::Zero(n_vars);
  for (int tap = 0; tap < NF; ++tap) {
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) lp.c[aux_px(tap, r, c)] = weight_q[r];
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < n; ++c) lp.c[aux_pu(tap, r, c)] = weight_r;
  }
  lp.A_eq = Eigen::MatrixXd::Zero(n_eq, n_vars);
  lp.b_eq = Eigen::VectorXd::Zero(n_eq);
  lp.A_ub = Eigen::MatrixXd::Zero(n_ub, n_vars);
  lp.b_ub = Eigen::VectorXd::Zero(n_ub);
  lp.eq_names.assign(n_eq, "");
  lp.ub_names.assign(n_ub, "");
  lp.bounds.assign(n_vars, {-kLpInf, kLpInf});
  for (int v = base_aux; v < n_vars; ++v) lp.bounds[v] = {0.0, kLpInf};

  int eq = 0;
  // Phi_x[1] = I.
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      lp.A_eq(eq, px(0, r, c)) = 1.0;
      lp.b_eq(eq) = (r == c) ? 1.0 : 0.0;
      lp.eq_names[eq] = "achievability:phi_x[1]";
      ++eq;
    }
  // Phi_x[i+1] = A Phi_x[i] + B Phi_u[i].
  for (int tap = 0; tap + 1 < NF; ++tap)
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        lp.A_eq(eq, px(tap + 1, r, c)) = 1.0;
        for (int s = 0; s < n; ++s) lp.A_eq(eq, px(tap, s, c)) -= A(r, s);
        for (int t = 0; t < m; ++t) lp.A_eq(eq, pu(tap, t, c)) -= B(r, t);
        lp.eq_names[eq] = "achievability:recursion[" + std::to_string(tap + 2) + "]";
        ++eq;
      }
  // A Phi_x[NF] + B Phi_u[NF] = 0.
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      for (int s = 0; s < n; ++s) lp.A_eq(eq, px(NF - 1, s, c)) += A(r, s);
      for (int t = 0; t < m; ++t) lp.A_eq(eq, pu(NF - 1, t, c)) += B(r, t);
      lp.eq_names[eq] = "fir-closure";
      ++eq;
    }
  // H[i] Phi[i-j] = Lambda[i,j] G[j].
  for (int i = 1; i <= NF; ++i) {
    const HRows& H = hblocks[i - 1];
    const int q = static_cast<int>(H.g.size());
    for (int j = 0; j < i; ++j) {
      const int tap = i - j - 1;  // Phi[i-j], 0-based tap index
      const int rg = static_cast<int>(wrows[j].g.size());
      for (int r = 0; r < q; ++r)
        for (int c = 0; c < n; ++c) {
          for (int s = 0; s < n; ++s)
            if (H.G(r, s) != 0.0) lp.A_eq(eq, px(tap, s, c)) += H.G(r, s);
          for (int t = 0; t < m; ++t)
            if (H.G(r, n + t) != 0.0) lp.A_eq(eq, pu(tap, t, c)) += H.G(r, n + t);
          for (int t = 0; t < rg; ++t)
            lp.A_eq(eq, lam(i, j, r, t)) -= wrows[j].G(t, c);
          lp.eq_names[eq] = "robust-eq:window[" + std::to_string(i) + "]";
          ++eq;
        }
    }
  }

  int ub = 0;
  // sum_j Lambda[i,j] g[j] <= h[i].
  for (int i = 1; i <= NF; ++i) {
    const HRows& H = hblocks[i - 1];
    const int q = static_cast<int>(H.g.size());
    const auto& state = (i < NF) ? Xe : (S_terminal ? S_terminal : Xe);
    const int q_state = state ? 2 * n : 0;
    for (int r = 0; r < q; ++r) {
      for (int j = 0; j < i; ++j) {
        const int rg = static_cast<int>(wrows[j].g.size());
        for (int t = 0; t < rg; ++t)
          lp.A_ub(ub, lam(i, j, r, t)) = wrows[j].g(t);
      }
      lp.b_ub(ub) = H.g(r);
      std::string fam;
      if (r < q_state)
        fam = (i < NF) ? ("state(e in Xe), window step " + std::to_string(i))
                       : "terminal(e in S0)";
      else
        fam = "input(u^e in Ue), window step " + std::to_string(i);
      lp.ub_names[ub] = fam;
      ++ub;
    }
  }
  // |phi| <= aux.
  auto abs_rows = [&](int v, int a) {
    lp.A_ub(ub, v) = 1.0;
    lp.A_ub(ub, a) = -1.0;
    lp.ub_names[ub] = "aux";
    ++ub;
    lp.A_ub(ub, v) = -1.0;
    lp.A_ub(ub, a) = -1.0;
    lp.ub_names[ub] = "aux";
    ++ub;
  };
  for (int tap = 0; tap < NF; ++tap) {
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) abs_rows(px(tap, r, c), aux_px(tap, r, c));
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < n; ++c) abs_rows(pu(tap, r, c), aux_pu(tap, r, c));
  }

  const LpSolution sol = lp_solve(lp);
  GeneralSynthesisResult out;
  if (sol.status == LpStatus::kInfeasible) {
    out.status = SynthesisStatus::kInfeasible;
    out.binding_family = sol.infeasible_row;
    return out;
  }
  if (sol.status != LpStatus::kOptimal)
    throw std::runtime_error("synthesize: unexpected unbounded synthesis LP");

  out.status = SynthesisStatus::kOptimal;
  out.objective = sol.objective;
  out.fir.phi_x.resize(NF);
  out.fir.phi_u.resize(NF);
  for (int tap = 0; tap < NF; ++tap) {
    out.fir.phi_x[tap] = Eigen::MatrixXd::Zero(n, n);
    out.fir.phi_u[tap] = Eigen::MatrixXd::Zero(m, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) out.fir.phi_x[tap](r, c) = sol.x[px(tap, r, c)];
    for (int r = 0; r < m; ++r)
      for (int c = 0; c < n; ++c) out.fir.phi_u[tap](r, c) = sol.x[pu(tap, r, c)];
  }
  return out;
}

SynthesisResult synthesize(const S2SModel& model, const DisturbanceProfile& profile,
                           const BoxSet& Xe, const BoxSet& Ue, const BoxSet& S0,
                           const SynthesisWeights& weights) {
  if (profile.horizon() < 1)
    throw std::invalid_argument("synthesize: empty profile");
  if (!Xe.contains_box(S0, 1e-12))
    throw std::invalid_argument("synthesize: S0 must be contained in Xe");

  GeneralSynthesisResult gen = synthesize_general(
      model.Abar, model.Bbar, profile.w, Xe, Ue, S0, weights.q, weights.r);

  SynthesisResult out;
  out.objective = gen.objective;
  out.binding_family = gen.binding_family;
  if (gen.status == SynthesisStatus::kInfeasible) {
    out.status = SynthesisStatus::kInfeasible;
    return out;
  }
  out.status = SynthesisStatus::kOptimal;
  FirController c;
  c.n_fir = profile.horizon();
  c.phi_x.resize(c.n_fir);
  c.phi_u.resize(c.n_fir);
  for (int i = 0; i < c.n_fir; ++i) {
    c.phi_x[i] = gen.fir.phi_x[i];
    c.phi_u[i] = gen.fir.phi_u[i];
  }
  c.abar = model.Abar;
  c.bbar = model.Bbar;
  c.model_hash = model.param_hash();
  c.weight_q = weights.q;
  c.weight_r = weights.r;
  out.controller = std::move(c);
  return out;
}

ControllerState controller_reset(const FirController& c) {
  ControllerState s;
  s.w_hist.assign(c.n_fir, Vec2::Zero());
  return s;
}

namespace {

double convolve_input(const FirController& c, const Vec2& w_new,
                      const std::vector<Vec2>& older) {
  double ue = c.phi_u[0] * w_new;
  for (int i = 1; i < c.n_fir; ++i) ue += c.phi_u[i] * older[i - 1];
  return ue;
}

Vec2 reconstruct_w(const FirController& c, const ControllerState& s, const Vec2& e) {
  if (!s.initialized) return e;  // the anchor: w_0 is the state itself
  return e - c.abar * s.prev_e - c.bbar * s.prev_ue;
}

}  // namespace

std::pair<double, ControllerState> controller_step(const FirController& c,
                                                   const ControllerState& s,
                                                   const Vec2& e_k) {
  if (static_cast<int>(s.w_hist.size()) != c.n_fir)
    throw std::invalid_argument("controller_step: state/controller horizon mismatch");
  ControllerState ns = s;
  const Vec2 w_new = reconstruct_w(c, s, e_k);
  ns.w_hist.insert(ns.w_hist.begin(), w_new);
  ns.w_hist.pop_back();
  const double ue = convolve_input(c, w_new, s.w_hist);
  ns.prev_e = e_k;
  ns.prev_ue = ue;
  ns.initialized = true;
  return {ue, ns};
}

double controller_preview(const FirController& c, const ControllerState& s,
                          const Vec2& e_now) {
  return convolve_input(c, reconstruct_w(c, s, e_now), s.w_hist);
}

namespace {

struct FamilyMargin {
  double margin = std::numeric_limits<double>::infinity();
  long seq = -1;

  void update(double m, long s) {
    if (m < margin) {
      margin = m;
      seq = s;
    }
  }
  // Deterministic merge: smaller margin wins, ties go to the earlier sequence.
  void merge(const FamilyMargin& o) {
    if (o.margin < margin || (o.margin == margin && o.seq >= 0 &&
                              (seq < 0 || o.seq < seq))) {
      margin = o.margin;
      seq = o.seq;
    }
  }
};

double box_margin(const BoxSet& s, const Eigen::Vector2d& x) {
  return std::min((s.hi() - x).minCoeff(), (x - s.lo()).minCoeff());
}

double interval_margin(const BoxSet& s, double u) {
  return std::min(s.hi()[0] - u, u - s.lo()[0]);
}

struct VertexTable {
  // verts[j][v] is vertex v of profile set j.
  std::vector<std::vector<Vec2>> verts;
  long sequences = 0;
};

VertexTable vertex_table(const DisturbanceProfile& profile) {
  VertexTable t;
  t.sequences = 1;
  for (const auto& w : profile.w) {
    std::vector<Vec2> vs;
    for (const auto& v : vertices(w)) vs.push_back(Vec2(v[0], v[1]));
    t.verts.push_back(std::move(vs));
    t.sequences *= 4;
  }
  return t;
}

void scan_sequence(const FirController& c, const VertexTable& vt, const BoxSet& Xe,
                   const BoxSet& Ue, const BoxSet& S0, long seq, FamilyMargin* state,
                   FamilyMargin* terminal, FamilyMargin* input) {
  const int NF = c.n_fir;
  Vec2 w[16];
  long code = seq;
  for (int j = 0; j < NF; ++j) {
    w[j] = vt.verts[j][code & 3];
    code >>= 2;
  }
  for (int i = 1; i <= NF; ++i) {
    Vec2 e = Vec2::Zero();
    double u = 0.0;
    for (int j = 0; j < i; ++j) {
      const int tap = i - j - 1;
      e += c.phi_x[tap] * w[j];
      u += c.phi_u[tap] * w[j];
    }
    if (i < NF)
      state->update(box_margin(Xe, e), seq);
    else
      terminal->update(box_margin(S0, e), seq);
    input->update(interval_margin(Ue, u), seq);
  }
}

RobustReport verify_impl(const FirController& c, const DisturbanceProfile& profile,
                         const BoxSet& Xe, const BoxSet& Ue, const BoxSet& S0,
                         bool parallel) {
  if (profile.horizon() != c.n_fir)
    throw std::invalid_argument("verify_robust: profile/controller horizon mismatch");
  if (c.n_fir < 1 || c.n_fir > 16)
    throw std::invalid_argument("verify_robust: horizon out of range");

  const VertexTable vt = vertex_table(profile);
  FamilyMargin state, terminal, input;

  if (parallel) {
#pragma omp parallel
    {
      FamilyMargin ls, lt, li;
#pragma omp for schedule(static)
      for (long seq = 0; seq < vt.sequences; ++seq)
        scan_sequence(c, vt, Xe, Ue, S0, seq, &ls, &lt, &li);
#pragma omp critical(slstep_verify_merge)
      {
        state.merge(ls);
        terminal.merge(lt);
        input.merge(li);
      }
    }
  } else {
    for (long seq = 0; seq < vt.sequences; ++seq)
      scan_sequence(c, vt, Xe, Ue, S0, seq, &state, &terminal, &input);
  }

  RobustReport r;
  r.sequences = vt.sequences;
  r.margin_state = state.margin;
  r.margin_terminal = terminal.margin;
  r.margin_input = input.margin;
  r.worst_state_seq = state.seq;
  r.worst_terminal_seq = terminal.seq;
  r.worst_input_seq = input.seq;
  r.pass = r.margin_state >= 0.0 && r.margin_terminal >= 0.0 && r.margin_input >= 0.0;
  return r;
}

}  // namespace

RobustReport verify_robust(const FirController& c, const DisturbanceProfile& profile,
                           const BoxSet& Xe, const BoxSet& Ue, const BoxSet& S0) {
  return verify_impl(c, profile, Xe, Ue, S0, true);
}

RobustReport verify_robust_serial(const FirController& c,
                                  const DisturbanceProfile& profile, const BoxSet& Xe,
                                  const BoxSet& Ue, const BoxSet& S0) {
  return verify_impl(c, profile, Xe, Ue, S0, false);
}

namespace {

long mc_chain(const FirController& c, const BoxSet& S0, const BoxSet& Xe,
              const BoxSet& Ue, const BoxSet& D, const BoxSet& Wext,
              int push_spacing, int steps, std::uint64_t chain_seed) {
  Rng rng(chain_seed);
  long violations = 0;
  ControllerState state = controller_reset(c);
  Vec2 e = rng.uniform_vec(S0.lo(), S0.hi());
  for (int k = 1; k <= steps; ++k) {
    if (!Xe.contains(e, 1e-9)) ++violations;
    auto [ue, ns] = controller_step(c, state, e);
    state = ns;
    if (!Ue.contains(Eigen::VectorXd::Constant(1, ue), 1e-9)) ++violations;
    Vec2 w = rng.uniform_vec(D.lo(), D.hi());
    if ((k - 1) % push_spacing == 0) w += rng.uniform_vec(Wext.lo(), Wext.hi());
    e = c.abar * e + c.bbar * ue + w;
  }
  return violations;
}

McResult mc_impl(const FirController& c, const BoxSet& S0, const BoxSet& Xe,
                 const BoxSet& Ue, const BoxSet& D, const BoxSet& Wext,
                 int push_spacing, int chains, int steps_per_chain,
                 std::uint64_t seed, bool parallel) {
  if (push_spacing < c.n_fir)
    throw std::invalid_argument("mc_multipush: pushes must be spaced >= N_F");
  McResult out;
  out.steps = static_cast<long>(chains) * steps_per_chain;
  long violations = 0;
  if (parallel) {
#pragma omp parallel for reduction(+ : violations) schedule(static)
    for (int ch = 0; ch < chains; ++ch)
      violations += mc_chain(c, S0, Xe, Ue, D, Wext, push_spacing, steps_per_chain,
                             seed_mix(seed, ch));
  } else {
    for (int ch = 0; ch < chains; ++ch)
      violations += mc_chain(c, S0, Xe, Ue, D, Wext, push_spacing, steps_per_chain,
                             seed_mix(seed, ch));
  }
  out.violations = violations;
  return out;
}

}  // namespace

McResult mc_multipush(const FirController& c, const BoxSet& S0, const BoxSet& Xe,
                      const BoxSet& Ue, const BoxSet& D, const BoxSet& Wext,
                      int push_spacing, int chains, int steps_per_chain,
                      std::uint64_t seed) {
  return mc_impl(c, S0, Xe, Ue, D, Wext, push_spacing, chains, steps_per_chain, seed,
                 true);
}

McResult mc_multipush_serial(const FirController& c, const BoxSet& S0,
                             const BoxSet& Xe, const BoxSet& Ue, const BoxSet& D,
                             const BoxSet& Wext, int push_spacing, int chains,
                             int steps_per_chain, std::uint64_t seed) {
  return mc_impl(c, S0, Xe, Ue, D, Wext, push_spacing, chains, steps_per_chain, seed,
                 false);
}

Theorem1Certificate theorem1_certificate(const SynthesisResult& synth,
                                         const DisturbanceProfile& profile,
                                         const BoxSet& S0, const BoxSet& Xe,
                                         const BoxSet& Ue, int n_push) {
  Theorem1Certificate cert;
  cert.n_push = n_push;
  cert.n_fir = profile.horizon();
  cert.synthesis_feasible = synth.status == SynthesisStatus::kOptimal;
  cert.horizon_ok = cert.n_fir <= n_push;
  cert.s0_in_xe = Xe.contains_box(S0, 1e-12);
  if (cert.synthesis_feasible) {
    cert.robust = verify_robust(*synth.controller, profile, Xe, Ue, S0);
    cert.robust_ok = cert.robust.pass;
  }
  if (!cert.synthesis_feasible)
    cert.failing = "synthesis feasible";
  else if (!cert.horizon_ok)
    cert.failing = "N_F <= N_push";
  else if (!cert.s0_in_xe)
    cert.failing = "S0 subset of Xe";
  else if (!cert.robust_ok)
    cert.failing = "robust vertex verification";
  cert.pass = cert.failing.empty();
  return cert;
}

std::string certificate_serialize(const Theorem1Certificate& cert,
                                  std::uint64_t config_hash) {
  KvFile kv;
  kv.set_int("pass", cert.pass ? 1 : 0);
  kv.set("failing", cert.failing.empty() ? "-" : cert.failing);
  kv.set_int("hyp.synthesis_feasible", cert.synthesis_feasible ? 1 : 0);
  kv.set_int("hyp.nf_le_npush", cert.horizon_ok ? 1 : 0);
  kv.set_int("hyp.s0_in_xe", cert.s0_in_xe ? 1 : 0);
  kv.set_int("hyp.robust_verified", cert.robust_ok ? 1 : 0);
  kv.set_int("nf", cert.n_fir);
  kv.set_int("npush", cert.n_push);
  kv.set_int("sequences", cert.robust.sequences);
  kv.set_doubles("margin.state", {cert.robust.margin_state});
  kv.set_doubles("margin.terminal", {cert.robust.margin_terminal});
  kv.set_doubles("margin.input", {cert.robust.margin_input});
  kv.set("meta.config_hash", hash_hex(config_hash));
  return kv.serialize();
}

std::string controller_serialize(const FirController& c) {
  KvFile kv;
  kv.set_int("nf", c.n_fir);
  std::vector<double> phix, phiu;
  for (int i = 0; i < c.n_fir; ++i) {
    for (int r = 0; r < 2; ++r)
      for (int col = 0; col < 2; ++col) phix.push_back(c.phi_x[i](r, col));
    for (int col = 0; col < 2; ++col) phiu.push_back(c.phi_u[i][col]);
  }
  kv.set_doubles("phi_x", phix);
  kv.set_doubles("phi_u", phiu);
  kv.set("model_hash", hash_hex(c.model_hash));
  kv.set_doubles("weights", {c.weight_q[0], c.weight_q[1], c.weight_r});
  return kv.serialize();
}

FirController controller_deserialize(const std::string& text, const S2SModel& model) {
  const KvFile kv = KvFile::parse(text);
  FirController c;
  c.n_fir = static_cast<int>(kv.get_int("nf"));
  if (c.n_fir < 1 || c.n_fir > 64)
    throw std::invalid_argument("controller_deserialize: bad horizon");
  const auto phix = kv.get_doubles("phi_x");
  const auto phiu = kv.get_doubles("phi_u");
  const auto w = kv.get_doubles("weights");
  if (static_cast<int>(phix.size()) != 4 * c.n_fir ||
      static_cast<int>(phiu.size()) != 2 * c.n_fir || w.size() != 3)
    throw std::invalid_argument("controller_deserialize: wrong element counts");
  c.phi_x.resize(c.n_fir);
  c.phi_u.resize(c.n_fir);
  for (int i = 0; i < c.n_fir; ++i) {
    c.phi_x[i] << phix[4 * i], phix[4 * i + 1], phix[4 * i + 2], phix[4 * i + 3];
    c.phi_u[i] << phiu[2 * i], phiu[2 * i + 1];
  }
  c.model_hash = std::stoull(kv.get("model_hash"), nullptr, 16);
  c.weight_q << w[0], w[1];
  c.weight_r = w[2];
  if (c.model_hash != model.param_hash())
    throw std::invalid_argument(
        "controller_deserialize: controller was synthesized on a different model");
  c.abar = model.Abar;
  c.bbar = model.Bbar;
  return c;
}

void controller_save(const FirController& c, const std::string& path) {
  atomic_write(path, controller_serialize(c));
}

FirController controller_load(const std::string& path, const S2SModel& model) {
  return controller_deserialize(read_file(path), model);
}

}  // namespace slstep

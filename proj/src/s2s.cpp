#include "slstep/s2s.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "slstep/lp.hpp"
#include "slstep/rng.hpp"
#include "slstep/textio.hpp"

namespace slstep {

std::uint64_t S2SModel::param_hash() const {
  std::string s;
  auto add = [&](double v) { s += format_double(v) + " "; };
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) add(Abar(r, c));
  add(Bbar[0]);
  add(Bbar[1]);
  add(Cbar[0]);
  add(Cbar[1]);
  add(dstar[0]);
  add(dstar[1]);
  return fnv1a64(s);
}

StepDataset extract_dataset(const std::vector<EpisodeResult>& episodes,
                            const std::string& provenance) {
  StepDataset data;
  data.provenance = provenance;
  for (const auto& ep : episodes) {
    if (ep.fell)
      throw std::invalid_argument("extract_dataset: episode ended in a fall");
    const auto& rec = ep.records;
    for (std::size_t k = 0; k + 1 < rec.size(); ++k) {
      // Drop transitions touched by a push on either side.
      if (rec[k].F_push != 0.0 || rec[k + 1].F_push != 0.0) continue;
      data.triples.push_back({rec[k].x_pre, rec[k].u_real, rec[k + 1].x_pre});
    }
  }
  if (data.size() < 10)
    throw std::invalid_argument("extract_dataset: fewer than 10 usable steps");
  return data;
}

std::pair<StepDataset, StepDataset> split_dataset(const StepDataset& data,
                                                  double holdout_frac,
                                                  std::uint64_t seed) {
  if (holdout_frac < 0.0 || holdout_frac >= 1.0)
    throw std::invalid_argument("split_dataset: holdout_frac in [0, 1) required");
  const int n = data.size();
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed_mix(seed, 0x5eed0117ULL));
  for (int i = n - 1; i > 0; --i)
    std::swap(order[i], order[rng.uniform_int(0, i)]);

  const int n_holdout = static_cast<int>(std::floor(holdout_frac * n));
  StepDataset train, holdout;
  train.provenance = data.provenance;
  holdout.provenance = data.provenance;
  for (int i = 0; i < n; ++i) {
    const auto& t = data.triples[order[i]];
    if (i < n_holdout)
      holdout.triples.push_back(t);
    else
      train.triples.push_back(t);
  }
  return {train, holdout};
}

namespace {

// Regressor row pair o_k for q = [A11 A12 A21 A22 B1 B2 C1 C2].
void regressor_rows(const StepTriple& t, Eigen::RowVectorXd* row_p,
                    Eigen::RowVectorXd* row_v) {
  row_p->setZero(8);
  row_v->setZero(8);
  (*row_p)[0] = t.x.p;
  (*row_p)[1] = t.x.v;
  (*row_p)[4] = t.u;
  (*row_p)[6] = 1.0;
  (*row_v)[2] = t.x.p;
  (*row_v)[3] = t.x.v;
  (*row_v)[5] = t.u;
  (*row_v)[7] = 1.0;
}

}  // namespace

S2SModel fit_linf(const StepDataset& data) {
  const int n = data.size();
  if (n < 9) throw std::invalid_argument("fit_linf: at least 9 triples required");

  // Rank check on the stacked regressors.
  Eigen::MatrixXd O(2 * n, 8);
  for (int k = 0; k < n; ++k) {
    Eigen::RowVectorXd rp, rv;
    regressor_rows(data.triples[k], &rp, &rv);
    O.row(2 * k) = rp;
    O.row(2 * k + 1) = rv;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(O);
  const auto& sv = svd.singularValues();
  if (sv[sv.size() - 1] <= 1e-10 * std::max(1.0, sv[0]))
    throw std::invalid_argument("fit_linf: rank-deficient regressors");

  // Variables [q(8), d(2)]; minimize d1 + d2 with -d <= o q - x_next <= d.
  LpProblem lp;
  lp.c = Eigen::VectorXd::Zero(10);
  lp.c[8] = 1.0;
  lp.c[9] = 1.0;
  lp.A_ub = Eigen::MatrixXd::Zero(4 * n, 10);
  lp.b_ub = Eigen::VectorXd::Zero(4 * n);
  for (int k = 0; k < n; ++k) {
    Eigen::RowVectorXd rp, rv;
    regressor_rows(data.triples[k], &rp, &rv);
    const Vec2 xn = data.triples[k].x_next.vec();
    //  o q - d <= x_next
    lp.A_ub.row(4 * k).head(8) = rp;
    lp.A_ub(4 * k, 8) = -1.0;
    lp.b_ub(4 * k) = xn[0];
    lp.A_ub.row(4 * k + 1).head(8) = rv;
    lp.A_ub(4 * k + 1, 9) = -1.0;
    lp.b_ub(4 * k + 1) = xn[1];
    // -o q - d <= -x_next
    lp.A_ub.row(4 * k + 2).head(8) = -rp;
    lp.A_ub(4 * k + 2, 8) = -1.0;
    lp.b_ub(4 * k + 2) = -xn[0];
    lp.A_ub.row(4 * k + 3).head(8) = -rv;
    lp.A_ub(4 * k + 3, 9) = -1.0;
    lp.b_ub(4 * k + 3) = -xn[1];
  }
  lp.bounds.assign(10, {-kLpInf, kLpInf});
  lp.bounds[8] = {0.0, kLpInf};
  lp.bounds[9] = {0.0, kLpInf};

  const LpSolution sol = lp_solve(lp);
  if (sol.status != LpStatus::kOptimal)
    throw std::runtime_error("fit_linf: LP did not reach an optimum");

  S2SModel model;
  model.Abar << sol.x[0], sol.x[1], sol.x[2], sol.x[3];
  model.Bbar << sol.x[4], sol.x[5];
  model.Cbar << sol.x[6], sol.x[7];
  model.dstar << sol.x[8], sol.x[9];

  const Vec2 worst = max_abs_residual(model, data);
  if ((worst - model.dstar).maxCoeff() > 1e-9)
    throw std::runtime_error("fit_linf: training residual exceeds fitted bound");
  return model;
}

Vec2 max_abs_residual(const S2SModel& model, const StepDataset& data) {
  Vec2 worst = Vec2::Zero();
  for (const auto& t : data.triples) {
    const Vec2 r = t.x_next.vec() - model.predict(t.x.vec(), t.u);
    worst = worst.cwiseMax(r.cwiseAbs());
  }
  return worst;
}

OrbitSpec p1_orbit(const S2SModel& model, double v_d, double T) {
  OrbitSpec orbit;
  orbit.period = 1;
  orbit.v_d = v_d;
  orbit.u_star[0] = v_d * T;

  const Mat2 M = Mat2::Identity() - model.Abar;
  Eigen::FullPivLU<Mat2> lu(M);
  if (!lu.isInvertible())
    throw std::runtime_error("p1_orbit: I - Abar is singular (degenerate model)");
  const Vec2 x = lu.solve(model.Bbar * orbit.u_star[0] + model.Cbar);
  orbit.x_star[0] = DiscreteState::from_vec(x);

  if ((model.predict(x, orbit.u_star[0]) - x).cwiseAbs().maxCoeff() > 1e-10)
    throw std::runtime_error("p1_orbit: fixed-point residual above tolerance");
  return orbit;
}

OrbitSpec p2_orbit(const S2SModel& model, double v_d, double T, double u_left) {
  OrbitSpec orbit;
  orbit.period = 2;
  orbit.v_d = v_d;
  const double u_sum = 2.0 * v_d * T;
  orbit.u_star[0] = u_left;
  orbit.u_star[1] = u_sum - u_left;

  const Mat2 A2 = model.Abar * model.Abar;
  const Mat2 M = Mat2::Identity() - A2;
  Eigen::FullPivLU<Mat2> lu(M);
  if (!lu.isInvertible())
    throw std::runtime_error("p2_orbit: I - Abar^2 is singular (degenerate model)");

  const Vec2 AB_minus_B = model.Abar * model.Bbar - model.Bbar;
  const Vec2 affine = (model.Abar + Mat2::Identity()) * model.Cbar;
  for (int leg = 0; leg < 2; ++leg) {
    const Vec2 x = lu.solve(AB_minus_B * orbit.u_star[leg] + model.Bbar * u_sum + affine);
    orbit.x_star[leg] = DiscreteState::from_vec(x);
  }

  // x_L --u_L--> x_R --u_R--> x_L
  const Vec2 xl = orbit.x_star[0].vec();
  const Vec2 xr = orbit.x_star[1].vec();
  if ((model.predict(xl, orbit.u_star[0]) - xr).cwiseAbs().maxCoeff() > 1e-10 ||
      (model.predict(xr, orbit.u_star[1]) - xl).cwiseAbs().maxCoeff() > 1e-10)
    throw std::runtime_error("p2_orbit: two-step fixed-point residual above tolerance");
  return orbit;
}

S2SModel reparameterize_to_swing_input(const S2SModel& model) {
  S2SModel out = model;
  out.Abar = model.Abar + model.Bbar * RowVec2(1.0, 0.0);
  return out;
}

S2SModel reparameterize_to_step_input(const S2SModel& model) {
  S2SModel out = model;
  out.Abar = model.Abar - model.Bbar * RowVec2(1.0, 0.0);
  return out;
}

ErrorSets error_constraint_sets(const BoxSet& X, const BoxSet& U,
                                const OrbitSpec& orbit) {
  if (orbit.period != 1)
    throw std::invalid_argument(
        "error_constraint_sets: period-1 orbit required (P2 produces per-leg sets)");
  if (X.dim() != 2 || U.dim() != 1)
    throw std::invalid_argument("error_constraint_sets: X must be 2-D, U 1-D");

  ErrorSets out{shift(X, orbit.x_star[0].vec()),
                shift(U, Eigen::VectorXd::Constant(1, orbit.u_star[0])), false};
  const Eigen::Vector2d zero2 = Eigen::Vector2d::Zero();
  const Eigen::VectorXd zero1 = Eigen::VectorXd::Zero(1);
  if (!out.xe.contains(zero2) || !out.ue.contains(zero1))
    throw std::invalid_argument(
        "error_constraint_sets: target orbit violates X or U (infeasible)");
  const double edge = std::min(
      {out.xe.hi().minCoeff(), (-out.xe.lo()).minCoeff(), out.ue.hi().minCoeff(),
       (-out.ue.lo()).minCoeff()});
  out.on_boundary = edge <= 1e-12;
  return out;
}

std::string model_serialize(const S2SModel& model, std::uint64_t config_hash,
                            int dataset_size) {
  KvFile kv;
  kv.set_doubles("abar", {model.Abar(0, 0), model.Abar(0, 1), model.Abar(1, 0),
                          model.Abar(1, 1)});
  kv.set_doubles("bbar", {model.Bbar[0], model.Bbar[1]});
  kv.set_doubles("cbar", {model.Cbar[0], model.Cbar[1]});
  kv.set_doubles("dstar", {model.dstar[0], model.dstar[1]});
  kv.set("meta.config_hash", hash_hex(config_hash));
  kv.set_int("meta.dataset_size", dataset_size);
  return kv.serialize();
}

S2SModel model_deserialize(const std::string& text, std::uint64_t* config_hash,
                           int* dataset_size) {
  const KvFile kv = KvFile::parse(text);
  S2SModel m;
  const auto a = kv.get_doubles("abar");
  const auto b = kv.get_doubles("bbar");
  const auto c = kv.get_doubles("cbar");
  const auto d = kv.get_doubles("dstar");
  if (a.size() != 4 || b.size() != 2 || c.size() != 2 || d.size() != 2)
    throw std::invalid_argument("model_deserialize: wrong element counts");
  m.Abar << a[0], a[1], a[2], a[3];
  m.Bbar << b[0], b[1];
  m.Cbar << c[0], c[1];
  m.dstar << d[0], d[1];
  if (config_hash)
    *config_hash = std::stoull(kv.get("meta.config_hash"), nullptr, 16);
  if (dataset_size) *dataset_size = static_cast<int>(kv.get_int("meta.dataset_size"));
  return m;
}

void model_save(const S2SModel& model, const std::string& path,
                std::uint64_t config_hash, int dataset_size) {
  atomic_write(path, model_serialize(model, config_hash, dataset_size));
}

S2SModel model_load(const std::string& path, std::uint64_t* config_hash,
                    int* dataset_size) {
  return model_deserialize(read_file(path), config_hash, dataset_size);
}

}  // namespace slstep

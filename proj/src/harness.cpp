#include "slstep/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "slstep/rng.hpp"
#include "slstep/textio.hpp"

namespace slstep {

namespace fs = std::filesystem;

// ---- configuration ---------------------------------------------------------

void ExperimentConfig::validate() const {
  plant.validate();
  if (U.dim() != 1 || X.dim() != 2)
    throw std::invalid_argument("config: U must be 1-D, X 2-D");
  if (f_ext_max < 0) throw std::invalid_argument("config: f_ext_max >= 0 required");
  if (n_fir < 2) throw std::invalid_argument("config: sls.nf >= 2 required");
  if (n_fir > n_push)
    throw std::invalid_argument("config: N_F <= N_push required");
  if (settle_steps < n_fir)
    throw std::invalid_argument("config: settle_steps >= N_F required");
  if (v_grid_count < 1 || steps_per_episode < 2)
    throw std::invalid_argument("config: bad data-generation sizes");
  if (holdout_frac < 0 || holdout_frac >= 1)
    throw std::invalid_argument("config: holdout_frac in [0,1) required");
  if (dither < 0) throw std::invalid_argument("config: negative dither");
  if (u_margin < 0 || x_margin < 0)
    throw std::invalid_argument("config: negative design margin");
  if (d_inflate < 1.0 || d_inflate > 10.0)
    throw std::invalid_argument("config: d_inflate in [1, 10] required");
  if (mrpi_terms < 1 || mrpi_inflation < 0)
    throw std::invalid_argument("config: bad mrpi settings");
  if (sim_steps < 1 || push_count < 0)
    throw std::invalid_argument("config: bad simulation sizes");
  if (s0 && s0->dim() != 2) throw std::invalid_argument("config: sls.s0 must be 2-D");
}

namespace {

std::string box1_str(const BoxSet& b) {
  return format_double(b.lo()[0]) + " " + format_double(b.hi()[0]);
}

}  // namespace

std::string ExperimentConfig::to_text() const {
  KvFile kv;
  kv.set_int("seed", static_cast<long long>(seed));
  kv.set_doubles("vd", {v_d});
  kv.set_doubles("plant.z0", {plant.z0});
  kv.set_doubles("plant.T", {plant.T});
  kv.set_doubles("plant.g", {plant.g});
  kv.set_doubles("plant.m", {plant.m});
  kv.set_doubles("plant.kp_z", {plant.kp_z});
  kv.set_doubles("plant.kd_z", {plant.kd_z});
  kv.set_int("plant.bezier_degree", plant.bezier_degree);
  kv.set_doubles("plant.impact_loss", {plant.impact_loss});
  kv.set_doubles("plant.dt", {plant.dt});
  kv.set_doubles("plant.nl_eps", {plant.nl_eps});
  kv.set_doubles("x.p", {X.lo()[0], X.hi()[0]});
  kv.set_doubles("x.v", {X.lo()[1], X.hi()[1]});
  kv.set("u.range", box1_str(U));
  kv.set_doubles("push.f_ext_max", {f_ext_max});
  kv.set_int("push.n_push", n_push);
  kv.set_int("sls.nf", n_fir);
  kv.set_doubles("sls.q", {weights.q[0], weights.q[1]});
  kv.set_doubles("sls.r", {weights.r});
  if (s0)
    kv.set_doubles("sls.s0", {s0->lo()[0], s0->hi()[0], s0->lo()[1], s0->hi()[1]});
  else
    kv.set("sls.s0", "auto");
  kv.set_int("sls.mrpi_terms", mrpi_terms);
  kv.set_doubles("sls.mrpi_inflation", {mrpi_inflation});
  kv.set_doubles("sls.u_margin", {u_margin});
  kv.set_doubles("sls.x_margin", {x_margin});
  kv.set_doubles("sls.d_inflate", {d_inflate});
  kv.set_doubles("data.v_min", {v_grid_min});
  kv.set_doubles("data.v_max", {v_grid_max});
  kv.set_int("data.v_count", v_grid_count);
  kv.set_int("data.steps_per_episode", steps_per_episode);
  kv.set_doubles("data.dither", {dither});
  kv.set_doubles("data.holdout_frac", {holdout_frac});
  kv.set_int("sim.steps", sim_steps);
  kv.set_int("sim.settle_steps", settle_steps);
  kv.set_int("sim.push_count", push_count);
  return kv.serialize();
}

ExperimentConfig ExperimentConfig::from_text(const std::string& text) {
  const KvFile kv = KvFile::parse(text);
  ExperimentConfig cfg;

  auto d1 = [&](const std::string& key, double* out) {
    if (!kv.has(key)) return;
    const auto v = kv.get_doubles(key);
    if (v.size() != 1) throw std::invalid_argument("config key " + key + ": 1 value");
    *out = v[0];
  };
  auto i1 = [&](const std::string& key, int* out) {
    if (kv.has(key)) *out = static_cast<int>(kv.get_int(key));
  };

  static const char* known[] = {
      "seed",           "vd",
      "plant.z0",       "plant.T",
      "plant.g",        "plant.m",
      "plant.kp_z",     "plant.kd_z",
      "plant.bezier_degree", "plant.impact_loss",
      "plant.dt",       "plant.nl_eps",
      "x.p",            "x.v",
      "u.range",        "push.f_ext_max",
      "push.n_push",    "sls.nf",
      "sls.q",          "sls.r",
      "sls.s0",         "sls.mrpi_terms",
      "sls.mrpi_inflation", "sls.u_margin",
      "sls.x_margin",   "sls.d_inflate",
      "data.v_min",     "data.v_max",
      "data.v_count",   "data.steps_per_episode",
      "data.dither",    "data.holdout_frac",
      "sim.steps",      "sim.settle_steps",
      "sim.push_count"};
  for (const auto& [key, value] : kv.entries()) {
    (void)value;
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw std::invalid_argument("config: unknown key '" + key + "'");
  }

  if (kv.has("seed")) cfg.seed = static_cast<std::uint64_t>(kv.get_int("seed"));
  d1("vd", &cfg.v_d);
  d1("plant.z0", &cfg.plant.z0);
  d1("plant.T", &cfg.plant.T);
  d1("plant.g", &cfg.plant.g);
  d1("plant.m", &cfg.plant.m);
  d1("plant.kp_z", &cfg.plant.kp_z);
  d1("plant.kd_z", &cfg.plant.kd_z);
  i1("plant.bezier_degree", &cfg.plant.bezier_degree);
  d1("plant.impact_loss", &cfg.plant.impact_loss);
  d1("plant.dt", &cfg.plant.dt);
  d1("plant.nl_eps", &cfg.plant.nl_eps);

  auto box2 = [&](const std::string& pk, const std::string& vk) {
    auto p = kv.has(pk) ? kv.get_doubles(pk)
                        : std::vector<double>{cfg.X.lo()[0], cfg.X.hi()[0]};
    auto v = kv.has(vk) ? kv.get_doubles(vk)
                        : std::vector<double>{cfg.X.lo()[1], cfg.X.hi()[1]};
    if (p.size() != 2 || v.size() != 2)
      throw std::invalid_argument("config: x.p / x.v need 'lo hi'");
    cfg.X = BoxSet({p[0], v[0]}, {p[1], v[1]});
  };
  box2("x.p", "x.v");
  if (kv.has("u.range")) {
    const auto u = kv.get_doubles("u.range");
    if (u.size() != 2) throw std::invalid_argument("config: u.range needs 'lo hi'");
    cfg.U = BoxSet::interval(u[0], u[1]);
  }
  d1("push.f_ext_max", &cfg.f_ext_max);
  i1("push.n_push", &cfg.n_push);
  i1("sls.nf", &cfg.n_fir);
  if (kv.has("sls.q")) {
    const auto q = kv.get_doubles("sls.q");
    if (q.size() != 2) throw std::invalid_argument("config: sls.q needs 2 values");
    cfg.weights.q << q[0], q[1];
  }
  d1("sls.r", &cfg.weights.r);
  if (kv.has("sls.s0")) {
    const std::string& raw = kv.get("sls.s0");
    if (raw == "auto") {
      cfg.s0.reset();
    } else {
      const auto v = kv.get_doubles("sls.s0");
      if (v.size() != 4)
        throw std::invalid_argument("config: sls.s0 = auto | 'p_lo p_hi v_lo v_hi'");
      cfg.s0 = BoxSet({v[0], v[2]}, {v[1], v[3]});
    }
  }
  i1("sls.mrpi_terms", &cfg.mrpi_terms);
  d1("sls.mrpi_inflation", &cfg.mrpi_inflation);
  d1("sls.u_margin", &cfg.u_margin);
  d1("sls.x_margin", &cfg.x_margin);
  d1("sls.d_inflate", &cfg.d_inflate);
  d1("data.v_min", &cfg.v_grid_min);
  d1("data.v_max", &cfg.v_grid_max);
  i1("data.v_count", &cfg.v_grid_count);
  i1("data.steps_per_episode", &cfg.steps_per_episode);
  d1("data.dither", &cfg.dither);
  d1("data.holdout_frac", &cfg.holdout_frac);
  i1("sim.steps", &cfg.sim_steps);
  i1("sim.settle_steps", &cfg.settle_steps);
  i1("sim.push_count", &cfg.push_count);

  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  return from_text(read_file(path));
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(to_text()); }

ExperimentConfig ExperimentConfig::amber_default() {
  ExperimentConfig cfg;
  cfg.plant.z0 = 0.7;
  cfg.plant.T = 0.4;
  cfg.plant.m = 39.0;
  cfg.plant.kp_z = 80.0;
  cfg.plant.kd_z = 10.0;
  cfg.plant.impact_loss = 0.96;
  cfg.plant.dt = 1e-3;
  cfg.plant.nl_eps = 0.04;
  cfg.v_d = 1.0;
  cfg.U = BoxSet::interval(-0.7, 0.7);
  cfg.X = BoxSet({-0.35, -0.8}, {0.75, 3.2});
  cfg.f_ext_max = 50.0;
  cfg.n_push = 8;
  cfg.n_fir = 4;
  cfg.s0 = BoxSet({-0.05, -0.15}, {0.05, 0.15});
  cfg.u_margin = 0.015;
  cfg.x_margin = 0.01;
  cfg.d_inflate = 1.5;
  cfg.v_grid_min = -1.0;
  cfg.v_grid_max = 1.0;
  cfg.v_grid_count = 9;
  cfg.steps_per_episode = 40;
  cfg.sim_steps = 30;
  cfg.settle_steps = 8;
  cfg.seed = 1;
  return cfg;
}

ExperimentConfig ExperimentConfig::cassie_default() {
  ExperimentConfig cfg = amber_default();
  cfg.plant.z0 = 0.9;
  cfg.plant.T = 0.35;
  cfg.plant.m = 33.0;
  cfg.plant.dt = 8.75e-4;
  cfg.v_d = 0.0;
  cfg.X = BoxSet({-0.6, -2.6}, {0.6, 2.6});
  cfg.f_ext_max = 120.0;
  cfg.v_grid_min = -0.8;
  cfg.v_grid_max = 0.8;
  return cfg;
}

// ---- stepping policies -----------------------------------------------------

namespace {

class SteppingPolicy {
 public:
  virtual ~SteppingPolicy() = default;
  // Invoked every integrator substep and once exactly at the pre-impact
  // state (t_phase == T), whose return value becomes the realized step.
  virtual double command(const DiscreteState& x, double t_phase) = 0;
  virtual std::string name() const = 0;
};

class GainPolicy : public SteppingPolicy {
 public:
  GainPolicy(std::string name, const GainMatrix& K, const DiscreteState& x_ref,
             double u_ref, double T, double dither_amp = 0.0,
             std::uint64_t dither_seed = 0)
      : name_(std::move(name)),
        K_(K),
        x_ref_(x_ref),
        u_ref_(u_ref),
        T_(T),
        dither_amp_(dither_amp),
        rng_(dither_seed) {
    if (dither_amp_ > 0) dither_now_ = rng_.uniform(-dither_amp_, dither_amp_);
  }

  double command(const DiscreteState& x, double t_phase) override {
    const double u = hlip_stepping(x, x_ref_, u_ref_, K_) + dither_now_;
    if (t_phase >= T_ && dither_amp_ > 0)
      dither_now_ = rng_.uniform(-dither_amp_, dither_amp_);
    return u;
  }

  std::string name() const override { return name_; }

 private:
  std::string name_;
  GainMatrix K_;
  DiscreteState x_ref_;
  double u_ref_;
  double T_;
  double dither_amp_;
  Rng rng_;
  double dither_now_ = 0.0;
};

class SlsPolicy : public SteppingPolicy {
 public:
  SlsPolicy(const FirController& c, const OrbitSpec& orbit, double T)
      : c_(c), state_(controller_reset(c)), T_(T) {
    x_star_ = orbit.x_star[0].vec();
    u_star_ = orbit.u_star[0];
  }

  double command(const DiscreteState& x, double t_phase) override {
    const Vec2 e = x.vec() - x_star_;
    if (t_phase >= T_) {
      // Footstrike: commit the disturbance reconstruction.
      auto [ue, ns] = controller_step(c_, state_, e);
      state_ = ns;
      return u_star_ + ue;
    }
    return u_star_ + controller_preview(c_, state_, e);
  }

  std::string name() const override { return "sls"; }

 private:
  FirController c_;
  ControllerState state_;
  Vec2 x_star_;
  double u_star_ = 0.0;
  double T_;
};

StepSizeCallback wrap(const std::shared_ptr<SteppingPolicy>& p) {
  return [p](const DiscreteState& x, double t) { return p->command(x, t); };
}

}  // namespace

// ---- episode annotation and CSV -------------------------------------------

EpisodeLog annotate_episode(const EpisodeResult& episode, const S2SModel& model,
                            const OrbitSpec& orbit, const BoxSet& U, const BoxSet& X,
                            const std::string& controller_name) {
  EpisodeLog log;
  log.controller = controller_name;
  log.fell = episode.fell;
  log.samples = episode.samples;
  const Vec2 x_star = orbit.x_star[0].vec();
  const double u_star = orbit.u_star[0];
  for (std::size_t i = 0; i < episode.records.size(); ++i) {
    const StepRecord& rec = episode.records[i];
    LogRow row;
    row.rec = rec;
    row.e = rec.x_pre.vec() - x_star;
    row.u_e = rec.u_real - u_star;
    if (i == 0) {
      row.w_hat = row.e;  // window anchor convention
    } else {
      const LogRow& prev = log.rows.back();
      row.w_hat = row.e - model.Abar * prev.e - model.Bbar * prev.u_e;
    }
    row.margin_u = std::min(U.hi()[0] - rec.u_real, rec.u_real - U.lo()[0]);
    row.margin_xp = std::min(X.hi()[0] - rec.x_pre.p, rec.x_pre.p - X.lo()[0]);
    row.margin_xv = std::min(X.hi()[1] - rec.x_pre.v, rec.x_pre.v - X.lo()[1]);
    log.rows.push_back(row);
  }
  return log;
}

static const char* kCsvHeader =
    "k,p,v,u_cmd,u_real,u_e,e_p,e_v,w_hat_p,w_hat_v,F_push,margin_u,margin_xp,"
    "margin_xv,controller";

std::string episode_csv(const EpisodeLog& log) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const auto& r : log.rows) {
    out += std::to_string(r.rec.k);
    for (double v : {r.rec.x_pre.p, r.rec.x_pre.v, r.rec.u_cmd, r.rec.u_real, r.u_e,
                     r.e[0], r.e[1], r.w_hat[0], r.w_hat[1], r.rec.F_push,
                     r.margin_u, r.margin_xp, r.margin_xv}) {
      out += ',';
      out += format_double(v);
    }
    out += ',';
    out += log.controller;
    out += '\n';
  }
  return out;
}

void emit_csv(const EpisodeLog& log, const std::string& path) {
  atomic_write(path, episode_csv(log));
}

EpisodeLog parse_episode_csv(const std::string& text) {
  EpisodeLog log;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("episode csv: missing header");
  if (line != kCsvHeader)
    throw std::invalid_argument("episode csv: unexpected header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 15)
      throw std::invalid_argument("episode csv: expected 15 columns");
    LogRow r;
    r.rec.k = std::stoi(cells[0]);
    r.rec.x_pre.p = parse_double(cells[1]);
    r.rec.x_pre.v = parse_double(cells[2]);
    r.rec.u_cmd = parse_double(cells[3]);
    r.rec.u_real = parse_double(cells[4]);
    r.u_e = parse_double(cells[5]);
    r.e << parse_double(cells[6]), parse_double(cells[7]);
    r.w_hat << parse_double(cells[8]), parse_double(cells[9]);
    r.rec.F_push = parse_double(cells[10]);
    r.margin_u = parse_double(cells[11]);
    r.margin_xp = parse_double(cells[12]);
    r.margin_xv = parse_double(cells[13]);
    log.controller = cells[14];
    log.rows.push_back(r);
  }
  return log;
}

EpisodeLog load_csv(const std::string& path) {
  return parse_episode_csv(read_file(path));
}

// ---- data generation --------------------------------------------------------

namespace {

std::vector<double> velocity_grid(const ExperimentConfig& cfg) {
  std::vector<double> vs;
  const int n = cfg.v_grid_count;
  for (int i = 0; i < n; ++i) {
    const double a = (n == 1) ? 0.5 : static_cast<double>(i) / (n - 1);
    vs.push_back(cfg.v_grid_min + a * (cfg.v_grid_max - cfg.v_grid_min));
  }
  return vs;
}

EpisodeResult training_episode(const ExperimentConfig& cfg, double v_target,
                               std::uint64_t seed) {
  const HlipParams hp = cfg.hlip();
  const auto [A, B] = s2s_matrices(hp);
  const GainMatrix K = deadbeat_gain(A, B);
  const double u_ref = v_target * hp.T;
  const DiscreteState x_ref = hlip_p1_state(hp, u_ref);
  auto policy = std::make_shared<GainPolicy>("hlip-deadbeat", K, x_ref, u_ref, hp.T,
                                             cfg.dither, seed);
  return run_episode(cfg.plant, wrap(policy), cfg.steps_per_episode, {}, cfg.n_push,
                     PlantState::rest(cfg.plant));
}

std::vector<EpisodeResult> gen_impl(const ExperimentConfig& cfg, bool parallel) {
  cfg.validate();
  const auto grid = velocity_grid(cfg);
  std::vector<EpisodeResult> out(grid.size());
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < static_cast<int>(grid.size()); ++i)
      out[i] = training_episode(cfg, grid[i], seed_mix(cfg.seed, 1000 + i));
  } else {
    for (int i = 0; i < static_cast<int>(grid.size()); ++i)
      out[i] = training_episode(cfg, grid[i], seed_mix(cfg.seed, 1000 + i));
  }
  return out;
}

}  // namespace

std::vector<EpisodeResult> generate_training_episodes(const ExperimentConfig& cfg) {
  return gen_impl(cfg, true);
}
std::vector<EpisodeResult> generate_training_episodes_serial(
    const ExperimentConfig& cfg) {
  return gen_impl(cfg, false);
}

// ---- pipeline ----------------------------------------------------------------

DerivedSets derive_sets(const ExperimentConfig& cfg, const S2SModel& model,
                        const OrbitSpec& orbit) {
  const ErrorSets es = error_constraint_sets(cfg.X, cfg.U, orbit);

  const Eigen::Vector2d xm(cfg.x_margin, cfg.x_margin);
  const BoxSet xe_design(es.xe.lo() + xm, es.xe.hi() - xm);
  const BoxSet ue_design(es.ue.lo().array() + cfg.u_margin,
                         es.ue.hi().array() - cfg.u_margin);

  const BoxSet d = model.residual_set();
  const BoxSet d_design = d.scaled(cfg.d_inflate);

  const Vec2 w = push_to_disturbance(cfg.f_ext_max, cfg.hlip());
  const BoxSet wext = BoxSet::symmetric(w.cwiseAbs());

  BoxSet s0 = [&]() {
    if (cfg.s0) return *cfg.s0;
    const GainMatrix K = deadbeat_gain(model.Abar, model.Bbar);
    const Mat2 A_cl = model.Abar + model.Bbar * K.K;
    return intersect(mrpi_outer(A_cl, d_design, cfg.mrpi_terms, cfg.mrpi_inflation),
                     xe_design);
  }();
  if (!xe_design.contains_box(s0, 1e-12))
    throw std::invalid_argument("derive_sets: S0 is not contained in the design Xe");

  return DerivedSets{es.xe, es.ue, xe_design, ue_design, d, d_design, wext, s0};
}

namespace {

FitReport fit_report(const S2SModel& model, const StepDataset& train,
                     const StepDataset& holdout) {
  FitReport rep;
  rep.train_size = train.size();
  rep.holdout_size = holdout.size();
  if (holdout.size() == 0) return rep;
  rep.holdout_max_abs = max_abs_residual(model, holdout);
  int within = 0;
  for (const auto& t : holdout.triples) {
    const Vec2 r = (t.x_next.vec() - model.predict(t.x.vec(), t.u)).cwiseAbs();
    if ((r.array() <= 1.5 * model.dstar.array()).all()) ++within;
  }
  rep.holdout_within_15x = static_cast<double>(within) / holdout.size();
  return rep;
}

void write_manifest(const std::string& dir, const ExperimentConfig& cfg,
                    const PipelineResult& res,
                    const std::vector<std::string>& files) {
  KvFile kv;
  kv.set("config_hash", hash_hex(cfg.hash()));
  kv.set_int("exit_code", res.exit_code);
  kv.set("error", res.error.empty() ? "-" : res.error);
  kv.set_int("fit.train_size", res.fit.train_size);
  kv.set_int("fit.holdout_size", res.fit.holdout_size);
  kv.set_doubles("fit.holdout_within_15x", {res.fit.holdout_within_15x});
  kv.set_doubles("fit.holdout_max_abs",
                 {res.fit.holdout_max_abs[0], res.fit.holdout_max_abs[1]});
  std::string list;
  for (const auto& f : files) {
    if (!list.empty()) list += ' ';
    list += f;
  }
  kv.set("files", list);
  kv.save(dir + "/manifest.txt");
}

}  // namespace

PipelineResult run_pipeline(const ExperimentConfig& cfg, const std::string& out_dir) {
  PipelineResult res;
  std::vector<std::string> files;
  const bool write = !out_dir.empty();
  if (write) fs::create_directories(fs::path(out_dir) / "episodes");

  std::string stage = "config";
  try {
    cfg.validate();

    stage = "gen-data";
    const auto episodes = generate_training_episodes(cfg);
    if (write) {
      // Training logs are annotated against the H-LIP reference that drove
      // them, one file per grid velocity.
      const auto grid = velocity_grid(cfg);
      const auto [A, B] = s2s_matrices(cfg.hlip());
      S2SModel ref;
      ref.Abar = A;
      ref.Bbar = B;
      for (std::size_t i = 0; i < episodes.size(); ++i) {
        OrbitSpec orbit;
        orbit.period = 1;
        orbit.v_d = grid[i];
        orbit.u_star[0] = grid[i] * cfg.plant.T;
        orbit.x_star[0] = hlip_p1_state(cfg.hlip(), orbit.u_star[0]);
        char name[40];
        std::snprintf(name, sizeof(name), "episodes/ep_%02zu.csv", i);
        emit_csv(annotate_episode(episodes[i], ref, orbit, cfg.U, cfg.X,
                                  "hlip-deadbeat"),
                 out_dir + "/" + name);
        files.push_back(name);
      }
    }

    stage = "learn";
    const StepDataset dataset =
        extract_dataset(episodes, hash_hex(cfg.hash()) + ":" +
                                      std::to_string(cfg.seed));
    const auto [train, holdout] =
        split_dataset(dataset, cfg.holdout_frac, cfg.seed);
    res.model = fit_linf(train);
    res.fit = fit_report(res.model, train, holdout);
    if (write) {
      model_save(res.model, out_dir + "/model.txt", cfg.hash(), train.size());
      files.push_back("model.txt");
    }

    stage = "orbit";
    res.orbit = p1_orbit(res.model, cfg.v_d, cfg.plant.T);

    stage = "sets";
    const DerivedSets sets = derive_sets(cfg, res.model, res.orbit);
    res.xe = sets.xe;
    res.ue = sets.ue;
    res.d = sets.d;
    res.wext = sets.wext;
    res.s0 = sets.s0;

    stage = "synthesize";
    res.profile = build_profile(sets.s0, sets.wext, sets.d_design, cfg.n_fir);
    res.synthesis = synthesize(res.model, res.profile, sets.xe_design,
                               sets.ue_design, sets.s0, cfg.weights);
    if (res.synthesis.status == SynthesisStatus::kInfeasible) {
      res.exit_code = 2;
      res.error = "synthesize: infeasible, binding family: " +
                  res.synthesis.binding_family;
      if (write) write_manifest(out_dir, cfg, res, files);
      return res;
    }
    if (write) {
      controller_save(*res.synthesis.controller, out_dir + "/controller.txt");
      files.push_back("controller.txt");
    }

    stage = "certificate";
    res.certificate =
        theorem1_certificate(res.synthesis, res.profile, sets.s0, sets.xe_design,
                             sets.ue_design, cfg.n_push);
    if (write) {
      atomic_write(out_dir + "/certificate.txt",
                   certificate_serialize(res.certificate, cfg.hash()));
      files.push_back("certificate.txt");
    }

    res.ok = true;
    res.exit_code = 0;
    if (write) write_manifest(out_dir, cfg, res, files);
    return res;
  } catch (const std::exception& e) {
    res.ok = false;
    res.exit_code = 1;
    res.error = stage + ": " + e.what();
    if (write) write_manifest(out_dir, cfg, res, files);
    return res;
  }
}

// ---- push-rejection simulation ----------------------------------------------

namespace {

std::shared_ptr<SteppingPolicy> make_policy(const std::string& name,
                                            const ExperimentConfig& cfg,
                                            const PipelineResult& pipe) {
  const DiscreteState x_star = pipe.orbit.x_star[0];
  const double u_star = pipe.orbit.u_star[0];
  if (name == "sls") {
    if (!pipe.synthesis.controller)
      throw std::invalid_argument("simulate: no synthesized controller available");
    return std::make_shared<SlsPolicy>(*pipe.synthesis.controller, pipe.orbit,
                                       cfg.plant.T);
  }
  if (name == "deadbeat") {
    const GainMatrix K = deadbeat_gain(pipe.model.Abar, pipe.model.Bbar);
    return std::make_shared<GainPolicy>("deadbeat", K, x_star, u_star, cfg.plant.T);
  }
  if (name == "lqr") {
    const GainMatrix K =
        dlqr_gain(pipe.model.Abar, pipe.model.Bbar, Mat2::Identity(), 1.0);
    return std::make_shared<GainPolicy>("lqr", K, x_star, u_star, cfg.plant.T);
  }
  throw std::invalid_argument("simulate: unknown controller '" + name + "'");
}

}  // namespace

SimulatedRun simulate_push_rejection(const ExperimentConfig& cfg,
                                     const PipelineResult& pipe,
                                     const std::string& controller_name, double F,
                                     int push_count) {
  const int spacing = std::max(cfg.n_push, cfg.n_fir);
  PushSchedule pushes;
  for (int i = 0; i < push_count; ++i)
    pushes.push_back({cfg.settle_steps + 1 + i * spacing, F});
  const int needed = push_count > 0
                         ? pushes.back().first + cfg.n_fir + 2
                         : cfg.sim_steps;
  const int n_steps = std::max(cfg.sim_steps, needed);

  auto policy = make_policy(controller_name, cfg, pipe);
  EpisodeResult ep = run_episode(cfg.plant, wrap(policy), n_steps, pushes,
                                 std::min(spacing, cfg.n_push),
                                 PlantState::rest(cfg.plant), true);
  SimulatedRun run;
  run.pushes = pushes;
  run.log = annotate_episode(ep, pipe.model, pipe.orbit, cfg.U, cfg.X,
                             policy->name());
  return run;
}

ComparisonReport compare_controllers(const ExperimentConfig& cfg,
                                     const PipelineResult& pipe,
                                     const std::vector<std::string>& names, double F,
                                     int push_count) {
  ComparisonReport rep;
  rep.push_force = F;
  rep.stats.resize(names.size());
  rep.logs.resize(names.size());
  const BoxSet recovery_set = minkowski_sum(pipe.s0, pipe.d);

#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < static_cast<int>(names.size()); ++i) {
    const SimulatedRun run = simulate_push_rejection(cfg, pipe, names[i], F,
                                                     push_count);
    ControllerStats st;
    st.name = names[i];
    st.fell = run.log.fell;
    const int push_step = run.pushes.empty() ? 0 : run.pushes.front().first;
    for (const auto& row : run.log.rows) {
      st.max_abs_u = std::max(st.max_abs_u, std::abs(row.rec.u_real));
      if (row.margin_u < -1e-9) ++st.u_violations;
      if (std::min(row.margin_xp, row.margin_xv) < -1e-9) ++st.x_violations;
      if (push_step > 0 && row.rec.k > push_step && st.recovery_steps < 0 &&
          recovery_set.contains(row.e))
        st.recovery_steps = row.rec.k - push_step;
    }
    rep.stats[i] = st;
    rep.logs[i] = run.log;
  }
  return rep;
}

std::optional<double> find_deadbeat_violation_force(const ExperimentConfig& cfg,
                                                    const PipelineResult& pipe,
                                                    double f_max) {
  auto violates = [&](double F) {
    const SimulatedRun run = simulate_push_rejection(cfg, pipe, "deadbeat", F, 1);
    if (run.log.fell) return true;
    for (const auto& row : run.log.rows)
      if (row.margin_u < -1e-9) return true;
    return false;
  };
  if (!violates(f_max)) return std::nullopt;
  double lo = 0.0, hi = f_max;  // violation holds at hi throughout
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (violates(mid))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

PlotKind plot_kind_from_string(const std::string& s) {
  if (s == "velocity") return PlotKind::kVelocity;
  if (s == "input") return PlotKind::kInput;
  if (s == "residual") return PlotKind::kResidual;
  throw std::invalid_argument("unknown plot kind '" + s + "'");
}

void emit_plot(const std::vector<EpisodeLog>& logs, PlotKind kind,
               const ExperimentConfig& cfg, const S2SModel& model,
               const std::string& path) {
  atomic_write(path, render_plot(logs, kind, cfg, model));
}

}  // namespace slstep

// Command-line front end: data generation, learning, synthesis, simulation,
// comparison and plotting, plus the end-to-end pipeline.
//
// Exit codes: 0 success, 2 synthesis infeasible, 1 any other failure.
#include <cstdio>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "slstep/harness.hpp"
#include "slstep/textio.hpp"

namespace fs = std::filesystem;
using namespace slstep;

namespace {

ExperimentConfig load_config(const std::string& path) {
  return ExperimentConfig::load(path);
}

std::vector<EpisodeResult> episodes_from_dir(const std::string& dir) {
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".csv") paths.push_back(entry.path().string());
  std::sort(paths.begin(), paths.end());
  std::vector<EpisodeResult> out;
  for (const auto& p : paths) {
    const EpisodeLog log = load_csv(p);
    EpisodeResult ep;
    ep.fell = false;
    for (const auto& row : log.rows) ep.records.push_back(row.rec);
    out.push_back(std::move(ep));
  }
  return out;
}

// Rebuilds model-dependent pipeline state from an output directory that
// already holds model.txt (and controller.txt for simulation commands).
PipelineResult reload_pipeline(const ExperimentConfig& cfg, const std::string& dir,
                               bool need_controller) {
  PipelineResult pipe;
  pipe.model = model_load(dir + "/model.txt");
  pipe.orbit = p1_orbit(pipe.model, cfg.v_d, cfg.plant.T);
  const DerivedSets sets = derive_sets(cfg, pipe.model, pipe.orbit);
  pipe.xe = sets.xe;
  pipe.ue = sets.ue;
  pipe.d = sets.d;
  pipe.wext = sets.wext;
  pipe.s0 = sets.s0;
  pipe.profile = build_profile(sets.s0, sets.wext, sets.d_design, cfg.n_fir);
  if (need_controller) {
    pipe.synthesis.status = SynthesisStatus::kOptimal;
    pipe.synthesis.controller =
        controller_load(dir + "/controller.txt", pipe.model);
  }
  pipe.ok = true;
  pipe.exit_code = 0;
  return pipe;
}

int cmd_gen_data(const std::string& config, const std::string& out) {
  const ExperimentConfig cfg = load_config(config);
  fs::create_directories(fs::path(out) / "episodes");
  const auto episodes = generate_training_episodes(cfg);
  const auto [A, B] = s2s_matrices(cfg.hlip());
  S2SModel ref;
  ref.Abar = A;
  ref.Bbar = B;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const double v = cfg.v_grid_count == 1
                         ? 0.5 * (cfg.v_grid_min + cfg.v_grid_max)
                         : cfg.v_grid_min + i * (cfg.v_grid_max - cfg.v_grid_min) /
                                                (cfg.v_grid_count - 1);
    OrbitSpec orbit;
    orbit.period = 1;
    orbit.v_d = v;
    orbit.u_star[0] = v * cfg.plant.T;
    orbit.x_star[0] = hlip_p1_state(cfg.hlip(), orbit.u_star[0]);
    char name[48];
    std::snprintf(name, sizeof(name), "%s/episodes/ep_%02zu.csv", out.c_str(), i);
    emit_csv(annotate_episode(episodes[i], ref, orbit, cfg.U, cfg.X, "hlip-deadbeat"),
             name);
  }
  std::printf("wrote %zu training episodes under %s/episodes\n", episodes.size(),
              out.c_str());
  return 0;
}

int cmd_learn(const std::string& config, const std::string& out) {
  const ExperimentConfig cfg = load_config(config);
  const auto episodes = episodes_from_dir(out + "/episodes");
  const StepDataset dataset = extract_dataset(episodes, hash_hex(cfg.hash()));
  const auto [train, holdout] = split_dataset(dataset, cfg.holdout_frac, cfg.seed);
  const S2SModel model = fit_linf(train);
  model_save(model, out + "/model.txt", cfg.hash(), train.size());
  const Vec2 hold = max_abs_residual(model, holdout);
  std::printf("model.txt written: d* = [%g m, %g m/s], train %d, holdout %d "
              "(max |res| = [%g, %g])\n",
              model.dstar[0], model.dstar[1], train.size(), holdout.size(), hold[0],
              hold[1]);
  return 0;
}

int cmd_synthesize(const std::string& config, const std::string& out) {
  const ExperimentConfig cfg = load_config(config);
  PipelineResult pipe = reload_pipeline(cfg, out, false);
  const DerivedSets sets = derive_sets(cfg, pipe.model, pipe.orbit);
  const SynthesisResult synth = synthesize(pipe.model, pipe.profile, sets.xe_design,
                                           sets.ue_design, sets.s0, cfg.weights);
  if (synth.status == SynthesisStatus::kInfeasible) {
    std::fprintf(stderr, "synthesis infeasible; binding family: %s\n",
                 synth.binding_family.c_str());
    return 2;
  }
  controller_save(*synth.controller, out + "/controller.txt");
  const Theorem1Certificate cert = theorem1_certificate(
      synth, pipe.profile, sets.s0, sets.xe_design, sets.ue_design, cfg.n_push);
  atomic_write(out + "/certificate.txt", certificate_serialize(cert, cfg.hash()));
  std::printf("controller.txt written (objective %.6g); certificate %s\n",
              synth.objective, cert.pass ? "PASS" : "FAIL");
  return cert.pass ? 0 : 1;
}

int cmd_simulate(const std::string& config, const std::string& out,
                 const std::string& controller, double force) {
  const ExperimentConfig cfg = load_config(config);
  const PipelineResult pipe = reload_pipeline(cfg, out, controller == "sls");
  const double F = force < 0 ? cfg.f_ext_max : force;
  const SimulatedRun run =
      simulate_push_rejection(cfg, pipe, controller, F, cfg.push_count);
  emit_csv(run.log, out + "/sim_" + controller + ".csv");
  double max_u = 0.0;
  for (const auto& r : run.log.rows) max_u = std::max(max_u, std::abs(r.rec.u_real));
  std::printf("sim_%s.csv written: %zu steps, push %.3g N, max |u| = %.4g m%s\n",
              controller.c_str(), run.log.rows.size(), F, max_u,
              run.log.fell ? " (FELL)" : "");
  return run.log.fell ? 1 : 0;
}

int cmd_compare(const std::string& config, const std::string& out,
                std::vector<std::string> names, double force) {
  const ExperimentConfig cfg = load_config(config);
  if (names.empty()) names = {"sls", "deadbeat", "lqr"};
  const PipelineResult pipe = reload_pipeline(
      cfg, out, std::count(names.begin(), names.end(), "sls") > 0);
  const double F = force < 0 ? cfg.f_ext_max : force;
  const ComparisonReport rep =
      compare_controllers(cfg, pipe, names, F, cfg.push_count);

  KvFile kv;
  kv.set("config_hash", hash_hex(cfg.hash()));
  kv.set_doubles("push_force", {F});
  for (std::size_t i = 0; i < rep.stats.size(); ++i) {
    const auto& st = rep.stats[i];
    emit_csv(rep.logs[i], out + "/sim_" + st.name + ".csv");
    kv.set_doubles(st.name + ".max_abs_u", {st.max_abs_u});
    kv.set_int(st.name + ".recovery_steps", st.recovery_steps);
    kv.set_int(st.name + ".u_violations", st.u_violations);
    kv.set_int(st.name + ".x_violations", st.x_violations);
    kv.set_int(st.name + ".fell", st.fell ? 1 : 0);
    std::printf("%-9s max|u| %.4g m, recovery %d steps, violations u:%d x:%d%s\n",
                st.name.c_str(), st.max_abs_u, st.recovery_steps, st.u_violations,
                st.x_violations, st.fell ? " FELL" : "");
  }
  kv.save(out + "/compare.txt");
  return 0;
}

int cmd_plot(const std::string& config, const std::string& out,
             const std::string& kind_str) {
  const ExperimentConfig cfg = load_config(config);
  const PipelineResult pipe = reload_pipeline(cfg, out, true);
  const PlotKind kind = plot_kind_from_string(kind_str);
  const ComparisonReport rep =
      compare_controllers(cfg, pipe, {"sls", "deadbeat"}, cfg.f_ext_max,
                          cfg.push_count);
  emit_plot(rep.logs, kind, cfg, pipe.model, out + "/plot_" + kind_str + ".svg");
  std::printf("plot_%s.svg written\n", kind_str.c_str());
  return 0;
}

int cmd_pipeline(const std::string& config, const std::string& out) {
  const ExperimentConfig cfg = load_config(config);
  const PipelineResult res = run_pipeline(cfg, out);
  if (!res.ok) {
    std::fprintf(stderr, "pipeline failed: %s\n", res.error.c_str());
    return res.exit_code;
  }
  // Push-rejection demo episode with the synthesized controller.
  const SimulatedRun run =
      simulate_push_rejection(cfg, res, "sls", cfg.f_ext_max, cfg.push_count);
  emit_csv(run.log, out + "/sim_sls.csv");
  std::printf("pipeline complete: d* = [%g, %g], certificate %s, artifacts in %s\n",
              res.model.dstar[0], res.model.dstar[1],
              res.certificate.pass ? "PASS" : "FAIL", out.c_str());
  return res.certificate.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"learned step-to-step dynamics + robust FIR stepping synthesis"};
  app.require_subcommand(1);

  std::string config, out = "out";
  std::string controller = "sls", kind = "input";
  std::vector<std::string> names;
  double force = -1.0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "experiment config file")->required();
    sub->add_option("--out", out, "output/working directory");
  };

  auto* gen = app.add_subcommand("gen-data", "generate training walking episodes");
  add_common(gen);
  auto* learn = app.add_subcommand("learn", "fit the step-to-step model");
  add_common(learn);
  auto* synth = app.add_subcommand("synthesize", "synthesize the FIR controller");
  add_common(synth);
  auto* sim = app.add_subcommand("simulate", "run a push-rejection episode");
  add_common(sim);
  sim->add_option("--controller", controller, "sls | deadbeat | lqr");
  sim->add_option("--force", force, "push force [N] (default: config f_ext_max)");
  auto* cmp = app.add_subcommand("compare", "run identical episodes per controller");
  add_common(cmp);
  cmp->add_option("--controllers", names, "subset of sls,deadbeat,lqr");
  cmp->add_option("--force", force, "push force [N]");
  auto* plot = app.add_subcommand("plot", "render an SVG plot");
  add_common(plot);
  plot->add_option("--kind", kind, "velocity | input | residual");
  auto* pipe = app.add_subcommand("pipeline", "run the full pipeline end to end");
  add_common(pipe);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(config, out);
    if (learn->parsed()) return cmd_learn(config, out);
    if (synth->parsed()) return cmd_synthesize(config, out);
    if (sim->parsed()) return cmd_simulate(config, out, controller, force);
    if (cmp->parsed()) return cmd_compare(config, out, names, force);
    if (plot->parsed()) return cmd_plot(config, out, kind);
    if (pipe->parsed()) return cmd_pipeline(config, out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}

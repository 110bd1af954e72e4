#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "crowdes/config.hpp"
#include "crowdes/error.hpp"
#include "crowdes/metrics.hpp"
#include "crowdes/nav_mesh.hpp"
#include "crowdes/render.hpp"
#include "crowdes/runner.hpp"

namespace fs = std::filesystem;
using namespace crowdes;

namespace {

struct RunFlags {
  std::string config;
  std::vector<std::string> sets;
  std::string fps, diffusion_steps, window, seed, emitter, duration_frames, ablate, engine, reps;

  void add(CLI::App* app) {
    app->add_option("--config", config, "key=value run configuration file");
    app->add_option("--set", sets, "override any configuration key (key=value)");
    app->add_option("--fps", fps, "frame rate");
    app->add_option("--diffusion-steps", diffusion_steps, "diffusion steps M");
    app->add_option("--window", window, "emitter window T_w in frames");
    app->add_option("--seed", seed, "master seed");
    app->add_option("--emitter", emitter, "diffusion | histogram");
    app->add_option("--duration-frames", duration_frames, "output length in frames");
    app->add_option("--ablate", ablate, "comma list: no-layout,no-navmesh,no-social,no-switching,no-diffusion");
    app->add_option("--engine", engine, "crowdes | se-orca");
    app->add_option("--reps", reps, "evaluation repetitions");
  }

  RunConfig build() const {
    RunConfig rc;
    if (!config.empty()) rc.apply(KeyValueConfig::load(config));
    const std::pair<const char*, const std::string*> flags[] = {
        {"fps", &fps},         {"diffusion_steps", &diffusion_steps}, {"window", &window},
        {"seed", &seed},       {"emitter", &emitter},                 {"duration_frames", &duration_frames},
        {"ablate", &ablate},   {"engine", &engine},                   {"reps", &reps}};
    for (const auto& [key, value] : flags) {
      if (!value->empty()) rc.set(key, *value);
    }
    for (const std::string& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw InputError("--set expects key=value, got '" + kv + "'");
      rc.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return rc;
  }
};

bool needs_emitter(const RunConfig& rc) {
  return rc.engine == Engine::kCrowdes && rc.emitter == EmitterKind::kDiffusion && !rc.ablation.no_diffusion;
}

Scenario read_scenario(const std::string& path) {
  if (!fs::exists(path)) throw MissingArtifactError("scenario not found: " + path);
  return parse_trajectory_file(path, TrajectoryFormat::kGeneric);
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

int run(int argc, char** argv) {
  CLI::App app{"crowd behavior generation and evaluation"};
  app.require_subcommand(1);

  std::string scene_config, scene_dir, ckpt_dir, out_path, gt_path, scenario_path, prepare_fps;
  std::vector<std::string> gen_paths;
  bool oracle = false;

  CLI::App* prepare = app.add_subcommand("prepare", "parse, resample and derive the scene layout");
  prepare->add_option("--config", scene_config, "scene configuration file")->required();
  prepare->add_option("--out", out_path, "scene directory")->required();
  prepare->add_option("--fps", prepare_fps, "target frame rate");

  RunFlags train_flags;
  CLI::App* train = app.add_subcommand("train", "fit behavior vocabulary, simulator and emitter");
  train->add_option("--scene", scene_dir, "scene directory")->required();
  train->add_option("--out", ckpt_dir, "checkpoint directory")->required();
  train_flags.add(train);

  RunFlags gen_flags;
  CLI::App* generate = app.add_subcommand("generate", "generate a scenario");
  generate->add_option("--scene", scene_dir, "scene directory")->required();
  generate->add_option("--ckpt", ckpt_dir, "checkpoint directory");
  generate->add_option("--out", out_path, "output trajectory file")->required();
  gen_flags.add(generate);

  RunFlags eval_flags;
  CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "score generated scenarios against ground truth");
  evaluate_cmd->add_option("--scene", scene_dir, "scene directory");
  evaluate_cmd->add_option("--ckpt", ckpt_dir, "checkpoint directory");
  evaluate_cmd->add_option("--gt", gt_path, "ground-truth trajectory file (default: the scene's)");
  evaluate_cmd->add_option("--gen", gen_paths, "pre-generated scenario files; skips generation");
  evaluate_cmd->add_option("--csv", out_path, "append the CSV row to this file");
  evaluate_cmd->add_flag("--oracle", oracle, "cross-check metrics against direct implementations");
  eval_flags.add(evaluate_cmd);

  std::string layout_dir;
  CLI::App* render = app.add_subcommand("render", "draw a scenario as SVG");
  render->add_option("--scenario", scenario_path, "trajectory file");
  render->add_option("--scene", layout_dir, "scene directory")->required();
  render->add_option("--out", out_path, "SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (prepare->parsed()) {
    KeyValueConfig kv = KeyValueConfig::load(scene_config);
    if (!prepare_fps.empty()) kv.set("fps", prepare_fps);
    const SceneData scene = prepare_scene(SceneConfig::from(kv));
    save_scene(scene, out_path);
    std::cout << "scene " << scene.scene_id << ": " << scene.train.agents.size() << " agents, "
              << scene.train.total_frames << " frames at " << scene.fps << " fps -> " << out_path << '\n';
  } else if (train->parsed()) {
    const RunConfig rc = train_flags.build();
    print_warnings(rc.validate());
    const SceneData scene = load_scene(scene_dir);
    TrainSummary summary;
    const Models models = train_models(scene, rc, &summary, &std::cout);
    save_models(models, summary, ckpt_dir);
    std::cout << "checkpoints -> " << ckpt_dir << '\n';
  } else if (generate->parsed()) {
    const RunConfig rc = gen_flags.build();
    const SceneData scene = load_scene(scene_dir);
    std::optional<Models> models;
    if (rc.engine == Engine::kCrowdes) {
      if (ckpt_dir.empty()) throw MissingArtifactError("--ckpt is required for the crowdes engine");
      models.emplace(load_models(ckpt_dir, needs_emitter(rc), true));
    }
    GenerateReport report;
    const Scenario out = generate_scenario(scene, models ? &*models : nullptr, rc, rc.seed, &report);
    print_warnings(report.warnings);
    write_scenario(out_path, out);
    std::cout << out.agents.size() << " agents, " << out.total_frames << " frames -> " << out_path << '\n';
  } else if (evaluate_cmd->parsed()) {
    const RunConfig rc = eval_flags.build();
    std::vector<Scenario> gens;
    std::vector<std::uint64_t> seeds;
    Scenario gt;
    if (!gen_paths.empty()) {
      for (const auto& p : gen_paths) gens.push_back(read_scenario(p));
      if (gt_path.empty()) {
        if (scene_dir.empty()) throw InputError("evaluate needs --gt or --scene");
        gt = load_scene(scene_dir).train;
      }
    } else {
      if (scene_dir.empty()) throw InputError("evaluate needs --scene when generating");
      const SceneData scene = load_scene(scene_dir);
      std::optional<Models> models;
      if (rc.engine == Engine::kCrowdes) {
        if (ckpt_dir.empty()) throw MissingArtifactError("--ckpt is required for the crowdes engine");
        models.emplace(load_models(ckpt_dir, needs_emitter(rc), true));
      }
      gens = generate_repetitions(scene, models ? &*models : nullptr, rc, &seeds);
      gt = scene.train;
    }
    if (!gt_path.empty()) gt = read_scenario(gt_path);
    EvalOptions opts;
    opts.threads = rc.threads;
    MetricsReport report = evaluate(gens, gt, opts);
    report.seeds = seeds;
    if (oracle) {
      const QuadratGrid grid{gt.bounds(), opts.q};
      for (const Scenario& g : gens) {
        const Scenario t = truncate_scenario(g, gt.total_frames);
        const SceneSeries fast = scene_series(t, grid);
        const SceneSeries slow = scene_series_direct(t, grid);
        if (fast.dens != slow.dens || fast.freq != slow.freq || fast.cov != slow.cov || fast.pop != slow.pop ||
            metric_col(t) != metric_col_direct(t)) {
          std::cerr << "oracle mismatch on a repetition\n";
          return 1;
        }
      }
      std::cerr << "oracle: " << gens.size() << " repetition(s) agree\n";
    }
    print_warnings(report.warnings);
    std::cout << MetricsReport::csv_header() << '\n' << report.csv_row() << "\n\n" << report.table();
    if (!out_path.empty()) {
      const bool fresh = !fs::exists(out_path);
      std::ofstream csv(out_path, std::ios::app);
      if (fresh) csv << MetricsReport::csv_header() << '\n';
      csv << report.csv_row() << '\n';
    }
  } else if (render->parsed()) {
    const SceneData scene = load_scene(layout_dir);
    const Scenario s = scenario_path.empty() ? Scenario{} : read_scenario(scenario_path);
    std::ofstream svg(out_path);
    if (!svg) throw InputError("cannot write " + out_path);
    svg << render_svg(s, scene.layout);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const NoPathError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

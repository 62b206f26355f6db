// son: map generation, training, evaluation, static benchmarks and run
// comparison. Failures print one line "error: <kind>: <message>".

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "son/error.hpp"
#include "son/harness.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "experiment config (JSON)")->required();
  cmd->add_option("--seed", c.seed, "override the master seed");
  cmd->add_option("--out", c.out, "output directory");
}

son::ExperimentConfig resolve(const Common& c) {
  auto cfg = son::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  cfg.static_policy.seed = cfg.seed;
  if (!c.out.empty()) {
    cfg.output_dir = c.out;
  } else if (const char* env = std::getenv("SON_OUTPUT_DIR")) {
    cfg.output_dir = env;
  }
  if (cfg.output_dir.empty()) cfg.output_dir = "runs/" + cfg.name;
  return cfg;
}

void report(const son::ExperimentConfig& cfg, const son::RunResult& r) {
  std::printf("%s: %zu samples, throughput %.4f, peak load %.4f, load std %.4f, objective %.4f -> %s\n",
              cfg.name.c_str(), r.samples.size(), r.summary.mean_throughput_norm, r.summary.mean_peak_load_norm,
              r.summary.load_std, r.summary.objective, cfg.output_dir.c_str());
}

int fail(const char* kind, const std::string& msg, int code = 1) {
  std::fprintf(stderr, "error: %s: %s\n", kind, msg.c_str());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-organizing network tilt/CIO optimization"};
  app.require_subcommand(1);

  Common gen, train, eval, stat;
  std::string map_out;
  auto* genmap = app.add_subcommand("genmap", "generate the synthetic RSRP map");
  genmap->add_option("--config", gen.config, "experiment config (JSON)")->required();
  genmap->add_option("--out", map_out, "map file")->required();

  auto* train_cmd = app.add_subcommand("train", "train an RL policy, then evaluate it");
  add_common(train_cmd, train);

  std::string checkpoint;
  auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a trained checkpoint");
  add_common(eval_cmd, eval);
  eval_cmd->add_option("--checkpoint", checkpoint, "agent checkpoint")->required();

  auto* static_cmd = app.add_subcommand("static", "run a static oracle policy");
  add_common(static_cmd, stat);

  std::vector<std::string> runs;
  std::string compare_out;
  auto* compare = app.add_subcommand("compare", "summarize run directories");
  compare->add_option("runs", runs, "run directories");
  compare->add_option("--out", compare_out, "write compare_summary.csv and cdf.csv here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    if (*genmap) {
      auto cfg = son::load_config(gen.config);
      cfg.map_path.clear();
      son::save_map(*son::build_map(cfg), map_out);
      std::printf("wrote %s\n", map_out.c_str());
    } else if (*train_cmd) {
      auto cfg = resolve(train);
      if (cfg.policy == son::PolicyKind::kStatic) return fail("config", "train needs policy pdpg or ddpg");
      report(cfg, son::run_experiment(cfg));
    } else if (*eval_cmd) {
      auto cfg = resolve(eval);
      report(cfg, son::evaluate_checkpoint(cfg, checkpoint));
    } else if (*static_cmd) {
      auto cfg = resolve(stat);
      cfg.policy = son::PolicyKind::kStatic;
      report(cfg, son::run_experiment(cfg));
    } else if (*compare) {
      if (runs.empty()) return fail("usage", "compare needs at least one run directory", 2);
      std::vector<son::RunArtifacts> artifacts;
      for (const auto& r : runs) artifacts.push_back(son::read_artifacts(r));
      const auto table = son::compare_runs(artifacts);
      std::printf("%-20s %8s %8s %8s %10s %9s %10s %10s %10s\n", "run", "p10", "p50", "p90", "peak_load", "load_std",
                  "final_mean", "final_std", "d_p50");
      for (const auto& c : table) {
        std::printf("%-20s %8.4f %8.4f %8.4f %10.4f %9.4f %10.4f %10.4f %10.4f\n", c.name.c_str(), c.p10, c.p50, c.p90,
                    c.mean_peak_load, c.load_std, c.final_window_mean, c.final_window_std, c.delta_p50);
      }
      if (!compare_out.empty()) {
        std::filesystem::create_directories(compare_out);
        FILE* s = std::fopen((std::filesystem::path(compare_out) / "compare_summary.csv").c_str(), "w");
        FILE* d = std::fopen((std::filesystem::path(compare_out) / "cdf.csv").c_str(), "w");
        if (!s || !d) return fail("config", "cannot write to '" + compare_out + "'");
        std::fprintf(s, "run,p10,p50,p90,mean_peak_load,load_std,final_window_mean,final_window_std,delta_p50,"
                        "delta_mean_peak_load\n");
        std::fprintf(d, "run,throughput_norm,cdf\n");
        for (const auto& c : table) {
          std::fprintf(s, "%s,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g\n", c.name.c_str(), c.p10, c.p50,
                       c.p90, c.mean_peak_load, c.load_std, c.final_window_mean, c.final_window_std, c.delta_p50,
                       c.delta_mean_peak_load);
          for (const auto& p : c.cdf) std::fprintf(d, "%s,%.10g,%.10g\n", c.name.c_str(), p.value, p.fraction);
        }
        std::fclose(s);
        std::fclose(d);
      }
    }
  } catch (const son::ConfigError& e) {
    return fail("config", e.what());
  } catch (const son::ParseError& e) {
    return fail("parse", e.what());
  } catch (const son::SchemaError& e) {
    return fail("schema", e.what());
  } catch (const son::DimensionError& e) {
    return fail("dimension", e.what());
  } catch (const son::StateError& e) {
    return fail("state", e.what());
  } catch (const son::CapacityError& e) {
    return fail("capacity", e.what());
  } catch (const son::ComparisonError& e) {
    return fail("comparison", e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}

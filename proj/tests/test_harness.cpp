#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "son/error.hpp"
#include "son/harness.hpp"

using namespace son;
namespace fs = std::filesystem;

namespace {

const char* kSmallConfig = R"({
  "name": "small",
  "seed": 3,
  "policy": "pdpg",
  "map": { "grid_spacing_m": 20 },
  "mobility": { "num_users": 20 },
  "agent": { "batch_size": 16, "hidden_layers": [16, 16] },
  "train": { "periods": 120 },
  "evaluation": { "horizon_days": 1 }
})";

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("son_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliResult {
  int code;
  std::string err;
};

CliResult run_cli(const std::string& args) {
  const auto err = fs::temp_directory_path() / "son_test_cli_err.txt";
  const std::string cmd = std::string(SON_CLI_PATH) + " " + args + " >/dev/null 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

}  // namespace

TEST_CASE("one evaluated day gives 96 samples; runs are byte-identical under a seed") {
  auto cfg = parse_config(kSmallConfig);
  cfg.output_dir = scratch("run_a").string();
  const auto a = run_experiment(cfg);
  CHECK(a.samples.size() == 96);
  CHECK(a.training.size() == 120);
  for (const auto& s : a.samples) {
    CHECK(s.throughput_norm >= 0.0);
    CHECK(s.peak_load_norm >= 0.0);
    CHECK(s.cell_load_norm.size() == 4);
  }
  auto cfg_b = cfg;
  cfg_b.output_dir = scratch("run_b").string();
  run_experiment(cfg_b);
  for (const char* f : {"throughput.csv", "cell_load.csv", "convergence.csv", "timeline.csv"}) {
    CHECK(slurp(fs::path(cfg.output_dir) / f) == slurp(fs::path(cfg_b.output_dir) / f));
  }
  CHECK(slurp(fs::path(cfg.output_dir) / "checkpoint.bin") == slurp(fs::path(cfg_b.output_dir) / "checkpoint.bin"));

  // A restored checkpoint evaluates to the same samples.
  auto cfg_c = cfg;
  cfg_c.output_dir.clear();
  const auto c = evaluate_checkpoint(cfg_c, fs::path(cfg.output_dir) / "checkpoint.bin");
  REQUIRE(c.samples.size() == a.samples.size());
  for (std::size_t i = 0; i < c.samples.size(); ++i) CHECK(c.samples[i].throughput_norm == a.samples[i].throughput_norm);

  const auto art = read_artifacts(cfg.output_dir);
  CHECK(art.throughput.size() == 96);
  CHECK(art.training_reward.size() == 120);
  const auto cmp = compare_runs({art, art}, 50);
  CHECK(cmp[1].delta_p50 == 0.0);
  CHECK(cmp[1].delta_mean_peak_load == 0.0);
  CHECK(cmp[0].p50 == cmp[1].p50);

  auto other = art;
  other.sample_interval_minutes = 30.0;
  CHECK_THROWS_AS(compare_runs({art, other}), ComparisonError);
  fs::remove_all(cfg.output_dir);
  fs::remove_all(cfg_b.output_dir);
}

TEST_CASE("config parsing rejects what it does not understand") {
  CHECK_THROWS_AS(parse_config(R"({"nmae": "x"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"radio": {"noise": -120}})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"policy": "ppo"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"mobility": {"model": "levy"}})"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"name\": "), ParseError);
  CHECK_THROWS_AS(parse_config(R"({"agent": {"weights": [0.5, 0.6]}})").validate(), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"evaluation": {"sample_interval_minutes": 7}})").validate(), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
  const auto cfg = parse_config(kSmallConfig);
  CHECK(cfg.seed == 3);
  CHECK(cfg.env.mobility.num_users == 20);
  // Resolved configs re-parse to the same resolved config.
  CHECK(config_to_json(parse_config(config_to_json(cfg))) == config_to_json(cfg));
}

TEST_CASE("empirical CDF and quantiles") {
  const auto flat = empirical_cdf({2.0, 2.0, 2.0});
  REQUIRE(flat.size() == 1);
  CHECK(flat[0].value == 2.0);
  CHECK(flat[0].fraction == 1.0);
  const auto cdf = empirical_cdf({3.0, 1.0, 2.0, 2.0});
  REQUIRE(cdf.size() == 3);
  CHECK(cdf[0].fraction == 0.25);
  CHECK(cdf[1].fraction == 0.75);
  CHECK(cdf[2].fraction == 1.0);
  for (std::size_t i = 1; i < cdf.size(); ++i) {
    CHECK(cdf[i].value > cdf[i - 1].value);
    CHECK(cdf[i].fraction > cdf[i - 1].fraction);
  }
  CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
  CHECK(quantile({5}, 0.9) == 5.0);
  CHECK(quantile({4, 1, 3, 2}, 0.0) == 1.0);
  CHECK(quantile({4, 1, 3, 2}, 1.0) == 4.0);
}

TEST_CASE("shifted reward and moving average") {
  const std::vector<double> r{0.4, -0.3}, w{0.5, 0.5};
  CHECK(shifted_reward(r, w) == doctest::Approx(0.5 * 0.4 + 0.5 * 0.7));
  const auto ma = moving_average(std::vector<double>{1, 2, 3, 4}, 2);
  CHECK(ma == std::vector<double>{1.0, 1.5, 2.5, 3.5});
}

TEST_CASE("CLI error contracts") {
  const auto missing = run_cli("train --config /nonexistent/cfg.json");
  CHECK(missing.code == 1);
  CHECK(missing.err.find("/nonexistent/cfg.json") != std::string::npos);

  CHECK(run_cli("compare").code == 2);
  CHECK(run_cli("train --config x.json --bogus").code == 2);
  CHECK(run_cli("").code == 2);

  // Train on 4 BSs, then evaluate that checkpoint on a 3-BS scenario.
  const auto dir = scratch("cli");
  fs::create_directories(dir);
  std::ofstream(dir / "four.json") << kSmallConfig;
  auto three = parse_config(kSmallConfig);
  three.bs_positions = {{100, 100}, {300, 100}, {200, 300}};
  std::ofstream(dir / "three.json") << config_to_json(three);
  REQUIRE(run_cli("train --config " + (dir / "four.json").string() + " --out " + (dir / "run").string()).code == 0);
  const auto bad = run_cli("evaluate --config " + (dir / "three.json").string() + " --checkpoint " +
                           (dir / "run" / "checkpoint.bin").string() + " --out " + (dir / "eval").string());
  CHECK(bad.code == 1);
  CHECK(bad.err.find("schema") != std::string::npos);
  CHECK(bad.err.find("N=4 (state 8, action 10)") != std::string::npos);
  CHECK(bad.err.find("N=3 (state 6, action 6)") != std::string::npos);
  fs::remove_all(dir);
}

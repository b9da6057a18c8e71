// End-to-end tests of the installed command-line binary: exit codes, emitted
// artifacts, and byte-level determinism across thread counts. The binary path
// is injected by the build as TSDE_CLI_PATH.

#include <sys/wait.h>

#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "tsde/report_io.hpp"

namespace fs = std::filesystem;

namespace {

fs::path work_root() {
  static const fs::path root = [] {
    fs::path p = fs::temp_directory_path() / "tsde_cli_test";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

std::string write_file(const std::string& name, const std::string& body) {
  const fs::path p = work_root() / name;
  std::ofstream out(p);
  out << body;
  out.close();
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CliResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

CliResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path log = work_root() / ("log_" + std::to_string(counter++) + ".txt");
  const std::string cmd =
      std::string(TSDE_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.output = slurp(log);
  return r;
}

const std::string kConvergeConfig = R"([problem]
id = "ou-1d"
x0 = [1.0]

[schedule]
kind = "polynomial"
eta = 0.5
gamma = 0.6

[experiment]
alpha = 0.25
checkpoint_times = [2.0, 3.0, 4.0, 6.0, 8.0]
m = 4000
eta_ref = 0.001
seed = 7
burn_in_time = 1.0
self_consistency_m = 500
)";

}  // namespace

TEST_CASE("usage errors exit 2", "[cli]") {
  CHECK(run_cli("").exit_code == 2);
  CHECK(run_cli("frobnicate").exit_code == 2);
  const auto bad_flag = run_cli("validate-schedule --bogus");
  CHECK(bad_flag.exit_code == 2);
  CHECK(bad_flag.output.find("Usage") != std::string::npos);
  // --config is required everywhere except simulate quick mode.
  CHECK(run_cli("converge").exit_code == 2);
  const auto bad_format = run_cli("converge --config /nonexistent --format yaml");
  CHECK(bad_format.exit_code == 2);
}

TEST_CASE("help exits 0", "[cli]") {
  const auto r = run_cli("--help");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("converge") != std::string::npos);
}

TEST_CASE("validate-schedule verdicts and exit codes", "[cli]") {
  const std::string good = write_file("sched_good.toml", R"([schedule]
kind = "polynomial"
eta = 0.1
gamma = 1.0

[validate]
n_steps = 2
theta_max = 20.0
)");
  const fs::path out = work_root() / "sched_out";
  auto r = run_cli("validate-schedule --config " + good + " --out " + out.string());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("theta_min 20 <= 20") != std::string::npos);
  const auto j = nlohmann::json::parse(slurp(out / "schedule.json"));
  CHECK(j.at("pass").get<bool>());
  CHECK(j.at("theta_min").get<double>() == 20.0);

  const std::string bad = write_file("sched_bad.toml", R"([schedule]
kind = "explicit"
values = [0.1, 0.05, 0.08, 0.02]
)");
  r = run_cli("validate-schedule --config " + bad + " --out " + out.string());
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("step grows at index 3") != std::string::npos);

  const std::string constant = write_file("sched_const.toml", R"([schedule]
kind = "explicit"
values = [0.1, 0.1, 0.1, 0.1]
)");
  r = run_cli("validate-schedule --config " + constant + " --out " + out.string());
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("[FAIL] vanishing") != std::string::npos);
}

TEST_CASE("unknown config keys exit 2", "[cli]") {
  const std::string good = write_file("sched_good2.toml", R"([schedule]
kind = "polynomial"
eta = 0.1
gamma = 1.0
)");
  const auto r =
      run_cli("validate-schedule --config " + good + " --set validate.typo=3");
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("unknown key") != std::string::npos);
  CHECK(r.output.find("validate.typo") != std::string::npos);
}

TEST_CASE("check-assumptions on a conforming problem", "[cli]") {
  const std::string cfg = write_file("assume.toml", R"([problem]
id = "double-well-1d"
probe_count = 200
)");
  const fs::path out = work_root() / "assume_out";
  const auto r = run_cli("check-assumptions --config " + cfg + " --out " + out.string());
  CHECK(r.exit_code == 0);
  const auto j = nlohmann::json::parse(slurp(out / "assumptions.json"));
  CHECK(j.at("pass").get<bool>());
  CHECK(j.at("checks").size() == 4);
}

TEST_CASE("converge end-to-end with thread-count determinism", "[cli]") {
  const std::string cfg = write_file("conv.toml", kConvergeConfig);
  const fs::path out1 = work_root() / "conv_t1";
  const fs::path out3 = work_root() / "conv_t3";

  const auto r1 = run_cli("converge --config " + cfg + " --out " + out1.string() +
                          " --threads 1");
  REQUIRE(r1.exit_code == 0);
  CHECK(r1.output.find("[PASS] no_divergence") != std::string::npos);
  CHECK(r1.output.find("[PASS] w1_slope") != std::string::npos);
  CHECK(r1.output.find("[PASS] tv_trend") != std::string::npos);
  CHECK(r1.output.find("[PASS] self_consistency") != std::string::npos);

  const auto r3 = run_cli("converge --config " + cfg + " --out " + out3.string() +
                          " --threads 3");
  REQUIRE(r3.exit_code == 0);
  CHECK(slurp(out1 / "report.json") == slurp(out3 / "report.json"));
  CHECK(slurp(out1 / "distances.csv") == slurp(out3 / "distances.csv"));

  const std::string csv = slurp(out1 / "distances.csv");
  CHECK(csv.rfind("n,t_n,eta_n,w1,w1_se,tv\n", 0) == 0);

  const auto j = nlohmann::json::parse(slurp(out1 / "report.json"));
  CHECK(j.at("pass").get<bool>());
  CHECK(j.at("config_hash").get<std::string>().size() == 16);
  CHECK(j.at("series").size() == 5);
  CHECK(j.at("flags").at("w1_slope").get<bool>());

  // The embedded config replays to the same hash.
  const tsde::Config replay = tsde::config_from_json(j.at("config"));
  CHECK(replay.hash_hex() == j.at("config_hash").get<std::string>());
}

TEST_CASE("converge --format selects artifacts", "[cli]") {
  // Reuse the deterministic experiment but through format filters; artifacts
  // appear or not accordingly.
  const std::string cfg = write_file("conv_fmt.toml", kConvergeConfig);
  const fs::path outj = work_root() / "conv_json";
  const fs::path outc = work_root() / "conv_csv";
  REQUIRE(run_cli("converge --config " + cfg + " --out " + outj.string() +
                  " --format json")
              .exit_code == 0);
  CHECK(fs::exists(outj / "report.json"));
  CHECK(!fs::exists(outj / "distances.csv"));
  REQUIRE(run_cli("converge --config " + cfg + " --out " + outc.string() +
                  " --format csv")
              .exit_code == 0);
  CHECK(!fs::exists(outc / "report.json"));
  CHECK(fs::exists(outc / "distances.csv"));
}

TEST_CASE("one-step probe via CLI with seed override", "[cli]") {
  const std::string cfg = write_file("onestep.toml", R"([problem]
id = "ou-1d"

[onestep]
alpha = 0.25
x = [0.7]
etas = [0.0009765625, 0.000244140625, 6.103515625e-05]
n_sub = 64
m = 64
seed = 3
)");
  const fs::path out = work_root() / "onestep_out";
  const auto r = run_cli("one-step --config " + cfg + " --out " + out.string());
  CHECK(r.exit_code == 0);
  const auto j = nlohmann::json::parse(slurp(out / "one_step.json"));
  CHECK(j.at("pass").get<bool>());
  CHECK(j.at("expected_order").get<double>() == 5.0);
  CHECK(j.at("config").at("onestep.seed").get<std::int64_t>() == 3);

  const auto r2 = run_cli("one-step --config " + cfg + " --out " + out.string() +
                          " --seed 99");
  CHECK(r2.exit_code == 0);
  const auto j2 = nlohmann::json::parse(slurp(out / "one_step.json"));
  CHECK(j2.at("config").at("onestep.seed").get<std::int64_t>() == 99);
  CHECK(j2.at("config_hash").get<std::string>() !=
        j.at("config_hash").get<std::string>());
}

TEST_CASE("bel-check via CLI", "[cli]") {
  const std::string cfg = write_file("bel.toml", R"([problem]
id = "ou-1d"

[bel]
f = "sin"
t = 0.5
x0 = [0.7]
v = [1.0]
eta = 0.005
m = 4000
fd_h = 0.01
seed = 17
)");
  const fs::path out = work_root() / "bel_out";
  const auto r = run_cli("bel-check --config " + cfg + " --out " + out.string());
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("gradient_vs_closed_form") != std::string::npos);
  const auto j = nlohmann::json::parse(slurp(out / "bel.json"));
  CHECK(j.at("pass").get<bool>());
  CHECK(j.at("closed_form").get<double>() == Catch::Approx(0.4718915122).epsilon(1e-6));
}

TEST_CASE("probe-lemmas pass and fail paths", "[cli]") {
  const std::string sums_only = write_file("probes_sums.toml", R"([schedule]
kind = "polynomial"
eta = 0.1
gamma = 0.6

[sums]
beta = 0.25
c = 0.5
n_list = [1000, 10000, 100000]
)");
  const fs::path out = work_root() / "probes_out";
  auto r = run_cli("probe-lemmas --config " + sums_only + " --out " + out.string());
  CHECK(r.exit_code == 0);
  const auto j = nlohmann::json::parse(slurp(out / "probes.json"));
  CHECK(j.at("probes").size() == 1);
  CHECK(j.at("probes")[0].at("probe").get<std::string>() == "weighted_step_sums");

  // Undersized Monte Carlo sample: the standard-error gate fails -> exit 1.
  const std::string gauss_small = write_file("probes_gauss.toml", R"([gauss]
mu = [1.0]
sigma_diag = [1.0]
etas = [0.01, 0.005]
m = 50000
seed = 5
)");
  r = run_cli("probe-lemmas --config " + gauss_small + " --out " + out.string());
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("[FAIL] tail_se") != std::string::npos);

  // Neither section present -> config error.
  const std::string empty_cfg = write_file("probes_empty.toml", "[tolerances]\nratio_max = 3.0\n");
  CHECK(run_cli("probe-lemmas --config " + empty_cfg).exit_code == 2);
}

TEST_CASE("simulate quick mode writes a readable ensemble", "[cli]") {
  const fs::path out = work_root() / "sim_out";
  const auto r = run_cli("simulate --problem ou-1d --n-steps 500 --m 200 --seed 4 --out " +
                         out.string());
  CHECK(r.exit_code == 0);
  const auto ens = tsde::read_ensemble_bin((out / "ensemble_500.bin").string());
  CHECK(ens.dim == 1);
  CHECK(ens.size() == 200);
  CHECK(ens.checkpoint_time == Catch::Approx(2.8087458243403396));
  // Config and quick flags are mutually exclusive.
  const std::string cfg = write_file("sim.toml", "[problem]\nid = \"ou-1d\"\n");
  CHECK(run_cli("simulate --config " + cfg + " --problem ou-1d").exit_code == 2);
}

TEST_CASE("TSDE_OUT environment fallback", "[cli]") {
  const std::string cfg = write_file("sched_env.toml", R"([schedule]
kind = "polynomial"
eta = 0.1
gamma = 1.0
)");
  const fs::path out = work_root() / "env_out";
  const fs::path log = work_root() / "env_log.txt";
  const std::string cmd = "TSDE_OUT=" + out.string() + " " + std::string(TSDE_CLI_PATH) +
                          " validate-schedule --config " + cfg + " > " + log.string() +
                          " 2>&1";
  const int status = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(status) == 0);
  CHECK(fs::exists(out / "schedule.json"));
}

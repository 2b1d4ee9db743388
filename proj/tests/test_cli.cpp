#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"

#include "cbs/common.hpp"
#include "cbs/dataset.hpp"
#include "cbs/synth.hpp"

namespace {

struct RunOutput {
  int exit_code = -1;
  std::string out;
};

RunOutput run_cli(const std::string& args) {
  const std::string cmd = std::string(CBS_CLI_PATH) + " " + args + " 2>/dev/null";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  RunOutput result;
  char buf[4096];
  while (std::size_t n = fread(buf, 1, sizeof buf, pipe)) result.out.append(buf, n);
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

std::string temp_dir() {
  static const std::string dir = [] {
    char templ[] = "/tmp/cbs_cli_XXXXXX";
    REQUIRE(mkdtemp(templ) != nullptr);
    return std::string(templ);
  }();
  return dir;
}

std::string write_file(const std::string& name, const std::string& content) {
  const std::string path = temp_dir() + "/" + name;
  std::ofstream out(path);
  out << content;
  return path;
}

// Synthetic audit fixture shared by the CLI tests.
std::string fixture_csv() {
  static const std::string path = [] {
    const auto cov = cbs::make_random_covariates(500, {2, 3, 4}, 5);
    cbs::SynthSpec spec;
    spec.seed = 6;
    cbs::SynthDataset sd = cbs::generate_dataset(cov, spec);
    const auto s_bias = cbs::select_bias_subgroup(sd.data.vocab, 2, 0.5, 7);
    sd = cbs::inject_bias(sd, s_bias, cbs::BiasKind::MuSep, 2.0);
    const std::string p = temp_dir() + "/audit.csv";
    std::ofstream out(p);
    cbs::write_dataset(out, sd.data);
    return p;
  }();
  return path;
}

std::string audit_config(const std::string& extra_scan = "") {
  std::ostringstream cfg;
  cfg << "[data]\n"
      << "path = " << fixture_csv() << "\n"
      << "covariates = ";
  // The generator consumed one attribute for the protected class; read the
  // echoed header to learn which survived.
  std::ifstream in(fixture_csv());
  std::string header;
  std::getline(in, header);
  std::string covs;
  std::stringstream ss(header);
  std::string col;
  while (std::getline(ss, col, ',')) {
    if (col == "A" || col == "Y" || col == "P" || col == "P_bin") continue;
    covs += (covs.empty() ? "" : ",") + col;
  }
  cfg << covs << "\n"
      << "outcome = Y\nprediction = P\nrecommendation = P_bin\n"
      << "sensitive = A\nprotected_value = 1\n"
      << "[scan]\n"
      << "variant = sep-rec\ndirection = positive\npenalty = 1\niterations = 20\nseed = 9\n"
      << extra_scan;
  return cfg.str();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Blanks the one legitimately varying report field.
std::string strip_wall_clock(std::string text) {
  const auto pos = text.find("\"wall_clock_seconds\"");
  if (pos == std::string::npos) return text;
  const auto end = text.find('\n', pos);
  return text.replace(pos, end - pos, "\"wall_clock_seconds\": 0");
}

}  // namespace

TEST_CASE("audit runs end to end and is deterministic") {
  const std::string cfg = write_file("audit.ini", audit_config());
  const std::string out1 = temp_dir() + "/r1.json";
  const std::string out2 = temp_dir() + "/r2.json";
  CHECK(run_cli("audit --config " + cfg + " --out " + out1).exit_code == 0);
  CHECK(run_cli("audit --config " + cfg + " --out " + out2 + " --threads 4").exit_code == 0);
  const std::string r1 = strip_wall_clock(slurp(out1));
  const std::string r2 = strip_wall_clock(slurp(out2));
  CHECK(r1 != "");
  // Thread-count override changes the config echo but not the result payload.
  CHECK(r1.find("\"result\"") != std::string::npos);
  const auto result_of = [](const std::string& text) {
    const auto pos = text.find("\"result\"");
    return text.substr(pos);
  };
  CHECK(result_of(r1) == result_of(r2));
  CHECK(r1.find("\"score\"") != std::string::npos);
  CHECK(r1.find("\"subgroup\"") != std::string::npos);
}

TEST_CASE("flag overrides reach the report") {
  const std::string cfg = write_file("audit2.ini", audit_config());
  const auto run = run_cli("audit --config " + cfg + " --seed 123 --iterations 5");
  CHECK(run.exit_code == 0);
  CHECK(run.out.find("\"scan.seed\": \"123\"") != std::string::npos);
  CHECK(run.out.find("\"scan.iterations\": \"5\"") != std::string::npos);
}

TEST_CASE("value-conditional scan accepts a conditional value") {
  const std::string cfg = write_file("audit3.ini", audit_config("conditional_value = 0\n"));
  const auto run = run_cli("audit --config " + cfg);
  CHECK(run.exit_code == 0);
}

TEST_CASE("missing prediction column for a predictions variant fails with the data code") {
  const std::string cfg = write_file("audit4.ini", audit_config("variant = sep-pred\n"));
  std::string broken = slurp(cfg);
  broken.replace(broken.find("prediction = P\n"), 15, "");
  broken.replace(broken.find("variant = sep-rec"), 17, "variant = sep-pred");
  const std::string cfg2 = write_file("audit4b.ini", broken);
  CHECK(run_cli("audit --config " + cfg2).exit_code == 3);
}

TEST_CASE("config errors use exit code 2") {
  const std::string bad = write_file("bad.ini", "[scan]\nthis line has no equals sign\n");
  CHECK(run_cli("audit --config " + bad).exit_code == 2);
  const std::string cfg = write_file("audit5.ini", audit_config("direction = diagonal\n"));
  CHECK(run_cli("audit --config " + cfg).exit_code == 2);
  CHECK(run_cli("audit --config /nonexistent.ini").exit_code == 2);
  CHECK(run_cli("audit").exit_code == 2);  // missing required flag
}

TEST_CASE("significance subcommand validates n_perm and emits a permutation block") {
  const std::string cfg = write_file("sig.ini", audit_config("iterations = 5\n"));
  CHECK(run_cli("significance --config " + cfg + " --n-perm 0").exit_code == 2);
  const auto run = run_cli("significance --config " + cfg + " --n-perm 9 --threads 4");
  CHECK(run.exit_code == 0);
  CHECK(run.out.find("\"permutation\"") != std::string::npos);
  CHECK(run.out.find("\"p_value\"") != std::string::npos);
}

TEST_CASE("simulate produces a sweep table") {
  const std::string cfg = write_file(
      "sweep.ini",
      "[simulate]\n"
      "n_rows = 200\narities = 2,3,2\nn_datasets = 2\niterations = 4\nseed = 3\n"
      "variants = sep-rec,suf-rec\n"
      "[arm.null]\nkind = mu_sep\nmagnitude = 0\n"
      "[arm.strong]\nkind = mu_sep\nmagnitude = 2\n");
  const auto run = run_cli("simulate --config " + cfg);
  CHECK(run.exit_code == 0);
  CHECK(run.out.find("mean_jaccard") != std::string::npos);
  CHECK(run.out.find("null\tsep-rec") != std::string::npos);
  CHECK(run.out.find("strong\tsuf-rec") != std::string::npos);

  const std::string bad = write_file("sweep_bad.ini",
                                     "[simulate]\nn_rows = 100\n[arm.x]\nkind = sideways\n");
  CHECK(run_cli("simulate --config " + bad).exit_code == 2);
}

TEST_CASE("bin subcommand discretizes a column") {
  const std::string csv = write_file("bin.csv", "id,score\n1,10\n2,20\n3,30\n4,40\n");
  const auto run = run_cli("bin --in " + csv + " --column score --bins 2");
  CHECK(run.exit_code == 0);
  CHECK(run.out.find("bin_1") != std::string::npos);
  CHECK(run.out.find("bin_2") != std::string::npos);
  CHECK(run_cli("bin --in " + csv + " --column missing --bins 2").exit_code == 3);
}

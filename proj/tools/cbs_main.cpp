// cbs: conditional bias scan auditing tool.
//
// Subcommands: audit, significance, simulate, bin. Configuration comes from a
// key=value file with [section] headers; command-line flags override file
// values. Reports are JSON with stable keys so runs can be diffed.

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "cbs/common.hpp"
#include "cbs/config.hpp"
#include "cbs/dataset.hpp"
#include "cbs/inference.hpp"
#include "cbs/pipeline.hpp"
#include "cbs/synth.hpp"

using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Overrides {
  std::string config_path;
  std::string data_path;
  std::string out_path;
  std::optional<uint64_t> seed;
  std::optional<int> iterations;
  std::optional<double> penalty;
  std::string direction;
  std::string variant;
  std::string conditional_value;  // "0", "1", or "none"
  std::string protected_attr;     // sensitive column override
  std::string protected_value;
  std::optional<int> threads;
  std::optional<int> n_perm;
  std::optional<double> alpha;
};

void add_common_flags(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--config", ov.config_path, "configuration file")->required();
  cmd->add_option("--data", ov.data_path, "override [data] path");
  cmd->add_option("--seed", ov.seed, "override scan seed");
  cmd->add_option("--iterations", ov.iterations, "override scan restarts");
  cmd->add_option("--penalty", ov.penalty, "override penalty lambda");
  cmd->add_option("--direction", ov.direction, "positive or negative");
  cmd->add_option("--variant", ov.variant, "sep-pred, sep-rec, suf-pred, or suf-rec");
  cmd->add_option("--conditional-value", ov.conditional_value, "0, 1, or none");
  cmd->add_option("--protected-attr", ov.protected_attr, "override sensitive column");
  cmd->add_option("--protected-value", ov.protected_value, "override protected value");
  cmd->add_option("--threads", ov.threads, "worker threads");
  cmd->add_option("--out", ov.out_path, "report path (default stdout)");
}

cbs::ConfigFile load_config(const Overrides& ov) {
  cbs::ConfigFile cfg = cbs::ConfigFile::parse_file(ov.config_path);
  if (!ov.data_path.empty()) cfg.set("data.path", ov.data_path);
  if (ov.seed) cfg.set("scan.seed", std::to_string(*ov.seed));
  if (ov.iterations) cfg.set("scan.iterations", std::to_string(*ov.iterations));
  if (ov.penalty) cfg.set("scan.penalty", std::to_string(*ov.penalty));
  if (!ov.direction.empty()) cfg.set("scan.direction", ov.direction);
  if (!ov.variant.empty()) cfg.set("scan.variant", ov.variant);
  if (!ov.conditional_value.empty()) cfg.set("scan.conditional_value", ov.conditional_value);
  if (!ov.protected_attr.empty()) cfg.set("data.sensitive", ov.protected_attr);
  if (!ov.protected_value.empty()) cfg.set("data.protected_value", ov.protected_value);
  if (ov.threads) cfg.set("scan.threads", std::to_string(*ov.threads));
  if (ov.n_perm) cfg.set("significance.n_perm", std::to_string(*ov.n_perm));
  if (ov.alpha) cfg.set("significance.alpha", std::to_string(*ov.alpha));
  return cfg;
}

cbs::SchemaSpec schema_from_config(const cbs::ConfigFile& cfg) {
  cbs::SchemaSpec schema;
  schema.covariates = cbs::split_list(cfg.require("data.covariates"));
  schema.outcome_column = cfg.require("data.outcome");
  schema.prediction_column = cfg.get("data.prediction", "");
  schema.recommendation_column = cfg.get("data.recommendation", "");
  schema.sensitive_column = cfg.require("data.sensitive");
  schema.protected_value = cfg.require("data.protected_value");
  schema.binarize_threshold = cfg.get_double("data.binarize_threshold", 0.5);
  const std::string delim = cfg.get("data.delimiter", ",");
  if (delim.size() != 1) throw cbs::ConfigError("data.delimiter must be one character");
  schema.delimiter = delim[0];
  schema.bin_strategy = cfg.get("data.bin_strategy", "equal-frequency");
  for (const std::string& entry : cbs::split_list(cfg.get("data.bin_columns", ""))) {
    const auto colon = entry.find(':');
    if (colon == std::string::npos)
      throw cbs::ConfigError("data.bin_columns entries must look like column:bins");
    schema.bin_columns[entry.substr(0, colon)] = std::stoi(entry.substr(colon + 1));
  }
  return schema;
}

cbs::ScanConfig scan_from_config(const cbs::ConfigFile& cfg) {
  cbs::ScanConfig sc;
  sc.variant = cbs::parse_variant(cfg.get("scan.variant", "sep-rec"));
  const std::string z = cfg.get("scan.conditional_value", "none");
  if (z == "0") {
    sc.z = 0;
  } else if (z == "1") {
    sc.z = 1;
  } else if (z != "none") {
    throw cbs::ConfigError("scan.conditional_value must be 0, 1, or none");
  }
  sc.direction = cbs::parse_direction(cfg.get("scan.direction", "positive"));
  sc.penalty = cfg.get_double("scan.penalty", 1.0);
  sc.n_iterations = static_cast<int>(cfg.get_int("scan.iterations", 500));
  sc.seed = cfg.get_seed("scan.seed", 0);
  sc.n_threads = static_cast<int>(cfg.get_int("scan.threads", 1));
  sc.scan_attrs = cbs::split_list(cfg.get("scan.scan_attrs", ""));
  sc.expectation_attrs = cbs::split_list(cfg.get("scan.expectation_attrs", ""));
  sc.irls.ridge = cfg.get_double("scan.ridge", sc.irls.ridge);
  return sc;
}

json config_echo(const cbs::ConfigFile& cfg) {
  json echo = json::object();
  for (const auto& [key, value] : cfg.values()) echo[key] = value;
  return echo;
}

json result_to_json(const cbs::ScanResult& result) {
  json subgroup = json::object();
  const auto values = result.included_values();
  for (std::size_t j = 0; j < result.attr_names.size(); ++j)
    subgroup[result.attr_names[j]] = values[j];
  return json{
      {"score", result.score},
      {"theta", result.theta},
      {"subgroup", subgroup},
      {"found_iteration", result.found_iteration},
      {"protected_size", result.protected_size},
      {"comparison_size", result.comparison_size},
      {"protected_event_rate", result.protected_event_rate},
      {"comparison_event_rate", result.comparison_event_rate},
      {"member_row_ids", result.member_row_ids},
      {"unseen_value_warnings", result.unseen_value_warnings},
      {"propensity_converged", result.propensity_diag.converged},
      {"expectation_converged", result.expectation_diag.converged},
  };
}

void emit(const json& report, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << report.dump(2) << "\n";
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw cbs::DataError("cannot write report to " + out_path);
  out << report.dump(2) << "\n";
}

int cmd_audit(const Overrides& ov, bool with_significance) {
  const auto start = std::chrono::steady_clock::now();
  cbs::ConfigFile cfg = load_config(ov);
  const cbs::SchemaSpec schema = schema_from_config(cfg);
  const cbs::ScanConfig scan_cfg = scan_from_config(cfg);
  const cbs::Dataset ds = cbs::load_dataset_file(cfg.require("data.path"), schema);

  json report;
  report["version"] = kVersion;
  report["command"] = with_significance ? "significance" : "audit";
  report["config"] = config_echo(cfg);
  report["seed"] = scan_cfg.seed;
  report["result"] = result_to_json(cbs::run_audit(ds, scan_cfg));

  if (with_significance) {
    const int n_perm = static_cast<int>(cfg.get_int("significance.n_perm", 100));
    const double alpha = cfg.get_double("significance.alpha", 0.05);
    const uint64_t perm_seed = cfg.get_seed("significance.seed", cbs::derive_seed(scan_cfg.seed, 1));
    const cbs::PermutationReport perm =
        cbs::permutation_test(ds, scan_cfg, n_perm, alpha, perm_seed);
    report["permutation"] = json{
        {"observed_score", perm.observed_score}, {"null_scores", perm.null_scores},
        {"p_value", perm.p_value},               {"alpha", perm.alpha},
        {"reject", perm.reject},                 {"n_perm", n_perm},
        {"redraws", perm.redraws},               {"seed", perm_seed},
    };
  }

  const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start);
  report["wall_clock_seconds"] = elapsed.count();
  emit(report, ov.out_path);
  return 0;
}

cbs::SweepArm arm_from_config(const cbs::ConfigFile& cfg, const std::string& section) {
  cbs::SweepArm arm;
  arm.id = section.substr(std::string("arm.").size());
  arm.kind = cbs::parse_bias_kind(cfg.require(section + ".kind"));
  arm.magnitude = cfg.get_double(section + ".magnitude", 0.0);
  arm.spec.sigma_true = cfg.get_double(section + ".sigma_true", arm.spec.sigma_true);
  arm.spec.sigma_predict = cfg.get_double(section + ".sigma_predict", arm.spec.sigma_predict);
  arm.spec.n_bias = static_cast<int>(cfg.get_int(section + ".n_bias", arm.spec.n_bias));
  arm.spec.p_bias = cfg.get_double(section + ".p_bias", arm.spec.p_bias);
  return arm;
}

int cmd_simulate(const Overrides& ov) {
  cbs::ConfigFile cfg = load_config(ov);

  cbs::CovariateTable covariates;
  const std::string source = cfg.get("simulate.source", "generated");
  if (source == "generated") {
    std::vector<int> arities;
    for (const auto& a : cbs::split_list(cfg.get("simulate.arities", "2,3,4,2")))
      arities.push_back(std::stoi(a));
    covariates = cbs::make_random_covariates(
        static_cast<std::size_t>(cfg.get_int("simulate.n_rows", 2000)), arities,
        cfg.get_seed("simulate.covariate_seed", 17));
  } else if (source == "data") {
    covariates = cbs::covariates_from_dataset(
        cbs::load_dataset_file(cfg.require("data.path"), schema_from_config(cfg)));
  } else {
    throw cbs::ConfigError("simulate.source must be generated or data");
  }

  std::vector<cbs::ScanVariant> variants;
  for (const auto& v : cbs::split_list(
           cfg.get("simulate.variants", "sep-pred,sep-rec,suf-pred,suf-rec")))
    variants.push_back(cbs::parse_variant(v));

  std::vector<cbs::SweepArm> arms;
  for (const std::string& section : cfg.section_names())
    if (section.rfind("arm.", 0) == 0) arms.push_back(arm_from_config(cfg, section));
  if (arms.empty()) throw cbs::ConfigError("no [arm.*] sections in sweep config");

  cbs::SweepSettings settings;
  settings.n_datasets = static_cast<int>(cfg.get_int("simulate.n_datasets", 20));
  settings.n_iterations = static_cast<int>(cfg.get_int("simulate.iterations", 50));
  settings.penalty = cfg.get_double("simulate.penalty", 1.0);
  settings.seed = cfg.get_seed("simulate.seed", 0);
  settings.n_threads = static_cast<int>(cfg.get_int("simulate.threads", 1));
  if (ov.seed) settings.seed = *ov.seed;
  if (ov.threads) settings.n_threads = *ov.threads;
  if (ov.iterations) settings.n_iterations = *ov.iterations;
  if (ov.penalty) settings.penalty = *ov.penalty;

  const auto cells = cbs::run_experiment_sweep(covariates, arms, variants, settings);
  if (ov.out_path.empty()) {
    cbs::write_sweep_table(std::cout, cells);
  } else {
    std::ofstream out(ov.out_path);
    if (!out) throw cbs::DataError("cannot write results to " + ov.out_path);
    cbs::write_sweep_table(out, cells);
  }
  return 0;
}

struct BinArgs {
  std::string input;
  std::string column;
  int bins = 4;
  std::string strategy = "equal-frequency";
  std::string delimiter = ",";
  std::string out_path;
};

int cmd_bin(const BinArgs& args) {
  std::ifstream in(args.input);
  if (!in) throw cbs::DataError("cannot open " + args.input);
  if (args.delimiter.size() != 1) throw cbs::ConfigError("--delimiter must be one character");
  const char delim = args.delimiter[0];

  std::string header;
  if (!std::getline(in, header)) throw cbs::DataError("empty input file");
  std::vector<std::string> names = cbs::split_list(header, delim);
  int target = -1;
  for (std::size_t j = 0; j < names.size(); ++j)
    if (names[j] == args.column) target = static_cast<int>(j);
  if (target < 0) throw cbs::DataError("column not found: " + args.column);

  std::vector<std::vector<std::string>> rows;
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, delim)) fields.push_back(field);
    if (static_cast<int>(fields.size()) <= target)
      throw cbs::DataError("row with too few fields: " + line);
    try {
      values.push_back(std::stod(fields[static_cast<std::size_t>(target)]));
    } catch (const std::exception&) {
      throw cbs::DataError("non-numeric value in column " + args.column + ": " +
                           fields[static_cast<std::size_t>(target)]);
    }
    rows.push_back(std::move(fields));
  }

  std::vector<double> boundaries;
  bool warned = false;
  const auto labels = cbs::discretize_column(values, args.bins,
                                             cbs::parse_bin_strategy(args.strategy),
                                             &boundaries, &warned);
  if (warned) std::cerr << "warning: all values identical; produced a single bin\n";
  std::cerr << "boundaries:";
  for (double b : boundaries) std::cerr << " " << b;
  std::cerr << "\n";

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!args.out_path.empty()) {
    file.open(args.out_path);
    if (!file) throw cbs::DataError("cannot write to " + args.out_path);
    out = &file;
  }
  *out << header << "\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i][static_cast<std::size_t>(target)] = labels[i];
    for (std::size_t j = 0; j < rows[i].size(); ++j) *out << (j ? std::string(1, delim) : "") << rows[i][j];
    *out << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conditional bias scan auditing tool"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Overrides audit_ov, sig_ov, sim_ov;
  BinArgs bin_args;

  CLI::App* audit = app.add_subcommand("audit", "run a bias scan on a dataset");
  add_common_flags(audit, audit_ov);

  CLI::App* significance = app.add_subcommand("significance", "bias scan plus permutation test");
  add_common_flags(significance, sig_ov);
  significance->add_option("--n-perm", sig_ov.n_perm, "number of permutations");
  significance->add_option("--alpha", sig_ov.alpha, "significance level");

  CLI::App* simulate = app.add_subcommand("simulate", "semi-synthetic evaluation sweep");
  simulate->add_option("--config", sim_ov.config_path, "sweep configuration file")->required();
  simulate->add_option("--seed", sim_ov.seed, "override sweep seed");
  simulate->add_option("--iterations", sim_ov.iterations, "override scan restarts");
  simulate->add_option("--penalty", sim_ov.penalty, "override penalty lambda");
  simulate->add_option("--threads", sim_ov.threads, "worker threads");
  simulate->add_option("--out", sim_ov.out_path, "results path (default stdout)");

  CLI::App* bin = app.add_subcommand("bin", "discretize a numeric column");
  bin->add_option("--in", bin_args.input, "input delimited file")->required();
  bin->add_option("--column", bin_args.column, "column to discretize")->required();
  bin->add_option("--bins", bin_args.bins, "number of bins");
  bin->add_option("--strategy", bin_args.strategy, "equal-width or equal-frequency");
  bin->add_option("--delimiter", bin_args.delimiter, "field delimiter");
  bin->add_option("--out", bin_args.out_path, "output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*audit) return cmd_audit(audit_ov, false);
    if (*significance) return cmd_audit(sig_ov, true);
    if (*simulate) return cmd_simulate(sim_ov);
    if (*bin) return cmd_bin(bin_args);
  } catch (const cbs::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const cbs::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const cbs::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

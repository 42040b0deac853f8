// Command-line front end for the CPR beamforming Monte Carlo simulator.

#include "cpr/selfcheck.hpp"
#include "cpr/sim.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_path = "results.csv";
  int workers = 0;
  std::optional<int> m, km, ks, trials, n_candidates;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> snr_list, v_list, methods_list;
  std::optional<double> p, p_init, p_max, delta_p, corr_mag;
};

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string::npos) {
      comma = text.size();
    }
    out.push_back(std::stod(text.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  if (out.empty()) {
    throw std::domain_error("empty list");
  }
  return out;
}

std::vector<std::string> parse_names(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string::npos) {
      comma = text.size();
    }
    out.push_back(text.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return out;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "Scenario JSON file");
  cmd->add_option("--out", opts.out_path, "Output CSV path");
  cmd->add_option("--workers", opts.workers, "Worker threads (0 = auto)");
  cmd->add_option("--M", opts.m, "BS antenna count");
  cmd->add_option("--Km", opts.km, "Moving UE count");
  cmd->add_option("--Ks", opts.ks, "Static UE count");
  cmd->add_option("--trials", opts.trials, "Monte Carlo trials");
  cmd->add_option("--seed", opts.seed, "Master seed");
  cmd->add_option("--snr", opts.snr_list, "SNR points in dB, comma-separated");
  cmd->add_option("--v", opts.v_list, "Velocities in km/h, comma-separated");
  cmd->add_option("--methods", opts.methods_list, "Methods, comma-separated");
  cmd->add_option("--p", opts.p, "CPR threshold p");
  cmd->add_option("--p-init", opts.p_init, "FC-CPR initial p");
  cmd->add_option("--p-max", opts.p_max, "FC-CPR final p");
  cmd->add_option("--delta-p", opts.delta_p, "FC-CPR p increment");
  cmd->add_option("--corr-mag", opts.corr_mag, "Spatial correlation magnitude |r|");
  cmd->add_option("--candidates", opts.n_candidates, "Candidate channels per moving UE");
}

// Flags override config-file values, which override defaults.
cpr::Scenario build_scenario(const CommonOpts& opts) {
  cpr::Scenario sc;
  if (!opts.config_path.empty()) {
    sc = cpr::load_scenario(opts.config_path);
  }
  if (opts.m) sc.M = *opts.m;
  if (opts.km) sc.K_m = *opts.km;
  if (opts.ks) sc.K_s = *opts.ks;
  if (opts.trials) sc.trials = *opts.trials;
  if (opts.seed) sc.seed = *opts.seed;
  if (opts.snr_list) sc.snr_db_list = parse_list(*opts.snr_list);
  if (opts.v_list) sc.velocity_kmh_list = parse_list(*opts.v_list);
  if (opts.methods_list) sc.methods = parse_names(*opts.methods_list);
  if (opts.p) sc.cpr.p = *opts.p;
  if (opts.p_init) sc.fc.p_init = *opts.p_init;
  if (opts.p_max) sc.fc.p_max = *opts.p_max;
  if (opts.delta_p) sc.fc.delta_p = *opts.delta_p;
  if (opts.corr_mag) sc.corr_mag = *opts.corr_mag;
  if (opts.n_candidates) sc.n_candidates = *opts.n_candidates;
  return sc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CPR multi-user MIMO beamforming simulator"};
  app.require_subcommand(1);

  CommonOpts conv_opts, snr_opts, vel_opts;
  CLI::App* conv = app.add_subcommand(
      "convergence", "Mean sum-rate per iteration over static channels");
  add_common(conv, conv_opts);
  CLI::App* snr = app.add_subcommand("sweep-snr", "Mean rates over an SNR sweep");
  add_common(snr, snr_opts);
  CLI::App* vel =
      app.add_subcommand("sweep-velocity", "Moving-UE rates over a velocity sweep");
  add_common(vel, vel_opts);

  std::uint64_t check_seed = 1;
  int check_instances = 200;
  CLI::App* check =
      app.add_subcommand("check", "Run the randomized invariant suite");
  check->add_option("--seed", check_seed, "Suite seed");
  check->add_option("--trials", check_instances, "Instances per suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (check->parsed()) {
      const cpr::CheckReport report = cpr::run_self_check(check_seed, check_instances);
      for (const auto& suite : report.suites) {
        std::printf("%-32s passed %d failed %d\n", suite.name.c_str(),
                    suite.passed, suite.failed);
      }
      return report.ok() ? 0 : 1;
    }
    const CommonOpts& opts = conv->parsed()  ? conv_opts
                             : snr->parsed() ? snr_opts
                                             : vel_opts;
    cpr::Scenario sc;
    try {
      sc = build_scenario(opts);
      sc.validate();
    } catch (const std::domain_error& e) {
      std::fprintf(stderr, "invalid scenario: %s\n", e.what());
      return 1;
    } catch (const std::invalid_argument& e) {
      std::fprintf(stderr, "invalid scenario: %s\n", e.what());
      return 1;
    }
    cpr::RunResult result;
    if (conv->parsed()) {
      result = cpr::run_convergence(sc, opts.workers);
    } else if (snr->parsed()) {
      result = cpr::sweep_snr(sc, opts.workers);
    } else {
      result = cpr::sweep_velocity(sc, opts.workers);
    }
    cpr::write_results(result, opts.out_path);
    std::printf("wrote %s and %s.json\n", opts.out_path.c_str(),
                opts.out_path.c_str());
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

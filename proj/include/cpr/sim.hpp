#pragma once

#include "cpr/beamform.hpp"
#include "cpr/channel.hpp"
#include "cpr/metrics.hpp"
#include "cpr/rng.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace cpr {

inline bool operator==(const CprConfig& a, const CprConfig& b) {
  return a.p == b.p && a.power_frac_stop == b.power_frac_stop &&
         a.ant_frac_stop == b.ant_frac_stop && a.ant_full_tol == b.ant_full_tol &&
         a.max_iter_override == b.max_iter_override;
}
inline bool operator==(const FcConfig& a, const FcConfig& b) {
  return a.p_init == b.p_init && a.delta_p == b.delta_p && a.p_max == b.p_max &&
         a.inner == b.inner;
}
inline bool operator==(const PhysicalParams& a, const PhysicalParams& b) {
  return a.carrier_hz == b.carrier_hz && a.interval_s == b.interval_s &&
         a.light_speed == b.light_speed;
}

struct Scenario {
  int M = 16;
  int K_m = 0;
  int K_s = 4;
  std::vector<double> snr_db_list{0.0};
  std::vector<double> velocity_kmh_list{3.0};
  int trials = 200;
  std::uint64_t seed = 1;
  std::vector<std::string> methods{"cpr_wf", "normalized_zf"};
  CprConfig cpr;
  FcConfig fc;
  PhysicalParams physical;
  double corr_mag = 0.6;
  int n_candidates = 2;

  int num_ues() const { return K_m + K_s; }

  void validate() const {
    if (M < 1 || K_m < 0 || K_s < 0 || num_ues() < 1 || num_ues() > M) {
      throw std::domain_error("Scenario: need 1 <= K_m + K_s <= M");
    }
    if (trials < 1) {
      throw std::domain_error("Scenario: trials must be >= 1");
    }
    if (methods.empty()) {
      throw std::domain_error("Scenario: no methods selected");
    }
    if (!(corr_mag >= 0.0) || !(corr_mag < 1.0)) {
      throw std::domain_error("Scenario: corr_mag must be in [0, 1)");
    }
    if (n_candidates < 1 || n_candidates > 2) {
      throw std::domain_error("Scenario: n_candidates must be 1 or 2");
    }
    cpr.validate();
    fc.validate();
    physical.validate();
    for (const std::string& m : methods) {
      if (m != "cpr_ep" && m != "cpr_wf" && m != "fc_cpr_ep" &&
          m != "fc_cpr_wf" && m != "cpr_cc_wf" && m != "normalized_zf" &&
          m != "miso_opt") {
        throw std::domain_error("Scenario: unknown method '" + m + "'");
      }
      if (m == "miso_opt" && num_ues() != 1) {
        throw std::domain_error("Scenario: miso_opt requires exactly one UE");
      }
      if (m == "cpr_cc_wf" && num_ues() + K_m > M) {
        throw std::domain_error("Scenario: cpr_cc_wf needs K + K_m <= M");
      }
    }
  }

  bool operator==(const Scenario&) const = default;
};

inline void to_json(nlohmann::json& j, const CprConfig& c) {
  j = nlohmann::json{{"p", c.p},
                     {"power_frac_stop", c.power_frac_stop},
                     {"ant_frac_stop", c.ant_frac_stop},
                     {"ant_full_tol", c.ant_full_tol}};
  if (c.max_iter_override) {
    j["max_iter_override"] = *c.max_iter_override;
  }
}
inline void from_json(const nlohmann::json& j, CprConfig& c) {
  c.p = j.value("p", c.p);
  c.power_frac_stop = j.value("power_frac_stop", c.power_frac_stop);
  c.ant_frac_stop = j.value("ant_frac_stop", c.ant_frac_stop);
  c.ant_full_tol = j.value("ant_full_tol", c.ant_full_tol);
  if (j.contains("max_iter_override") && !j["max_iter_override"].is_null()) {
    c.max_iter_override = j["max_iter_override"].get<int>();
  }
}
inline void to_json(nlohmann::json& j, const FcConfig& c) {
  j = nlohmann::json{{"p_init", c.p_init},
                     {"delta_p", c.delta_p},
                     {"p_max", c.p_max},
                     {"inner", c.inner}};
}
inline void from_json(const nlohmann::json& j, FcConfig& c) {
  c.p_init = j.value("p_init", c.p_init);
  c.delta_p = j.value("delta_p", c.delta_p);
  c.p_max = j.value("p_max", c.p_max);
  if (j.contains("inner")) {
    j["inner"].get_to(c.inner);
  }
}
inline void to_json(nlohmann::json& j, const PhysicalParams& p) {
  j = nlohmann::json{{"carrier_hz", p.carrier_hz},
                     {"interval_s", p.interval_s},
                     {"light_speed", p.light_speed}};
}
inline void from_json(const nlohmann::json& j, PhysicalParams& p) {
  p.carrier_hz = j.value("carrier_hz", p.carrier_hz);
  p.interval_s = j.value("interval_s", p.interval_s);
  p.light_speed = j.value("light_speed", p.light_speed);
}
inline void to_json(nlohmann::json& j, const Scenario& s) {
  j = nlohmann::json{{"M", s.M},
                     {"K_m", s.K_m},
                     {"K_s", s.K_s},
                     {"snr_db_list", s.snr_db_list},
                     {"velocity_kmh_list", s.velocity_kmh_list},
                     {"trials", s.trials},
                     {"seed", s.seed},
                     {"methods", s.methods},
                     {"cpr", s.cpr},
                     {"fc", s.fc},
                     {"physical", s.physical},
                     {"corr_mag", s.corr_mag},
                     {"n_candidates", s.n_candidates}};
}
inline void from_json(const nlohmann::json& j, Scenario& s) {
  s.M = j.value("M", s.M);
  s.K_m = j.value("K_m", s.K_m);
  s.K_s = j.value("K_s", s.K_s);
  s.snr_db_list = j.value("snr_db_list", s.snr_db_list);
  s.velocity_kmh_list = j.value("velocity_kmh_list", s.velocity_kmh_list);
  s.trials = j.value("trials", s.trials);
  s.seed = j.value("seed", s.seed);
  s.methods = j.value("methods", s.methods);
  if (j.contains("cpr")) j["cpr"].get_to(s.cpr);
  if (j.contains("fc")) j["fc"].get_to(s.fc);
  if (j.contains("physical")) j["physical"].get_to(s.physical);
  s.corr_mag = j.value("corr_mag", s.corr_mag);
  s.n_candidates = j.value("n_candidates", s.n_candidates);
}

struct ResultRow {
  std::string method;
  std::string sweep_var;
  double sweep_value = 0.0;
  std::string metric;
  double mean = 0.0;
  double ci95 = 0.0;
  int trials = 0;
};

struct RunResult {
  Scenario scenario;
  std::vector<ResultRow> rows;
};

/// Worker count: explicit request, else hardware concurrency, both capped by
/// the CPR_THREADS environment variable (0 or unset means no cap).
inline int resolve_workers(int requested) {
  int w = requested > 0 ? requested
                        : static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("CPR_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) {
      w = requested > 0 ? std::min(w, cap) : cap;
    }
  }
  return std::max(1, w);
}

template <typename Fn>
void parallel_for(int n, int workers, Fn&& fn) {
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) {
      fn(i);
    }
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) {
          return;
        }
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) {
            first_error = std::current_exception();
          }
        }
      }
    });
  }
  for (std::thread& th : pool) {
    th.join();
  }
  if (first_error) {
    std::rethrow_exception(first_error);
  }
}

namespace detail {

struct TrialOutcome {
  double sum_rate = 0.0;
  double moving_rate = 0.0;
  double static_rate = 0.0;
  int iterations = 0;
  bool iterative = false;
  std::vector<double> trace_sum_rate;
};

inline std::vector<UEProfile> draw_profiles(const Scenario& sc, double velocity,
                                            RngStream& rng) {
  std::vector<UEProfile> profiles;
  profiles.reserve(static_cast<std::size_t>(sc.num_ues()));
  for (int k = 0; k < sc.num_ues(); ++k) {
    UEProfile ue;
    ue.spatial_corr_mag = sc.corr_mag;
    ue.beta = sample_large_scale(rng);
    ue.spatial_corr_phase = rng.uniform(0.0, kTwoPi);
    const bool moving = k < sc.K_m && velocity > 0.0;
    ue.velocity_kmh = moving ? velocity : 0.0;
    ue.is_moving = moving;
    profiles.push_back(ue);
  }
  return profiles;
}

/// One Monte Carlo trial: draw channels, design every requested beamformer
/// from the outdated block, evaluate on the current block.
inline std::map<std::string, TrialOutcome> run_trial(const Scenario& sc,
                                                     double snr_db,
                                                     double velocity,
                                                     RngStream& rng,
                                                     bool capture_trace) {
  const int m = sc.M;
  const int k = sc.num_ues();
  const std::vector<UEProfile> profiles = draw_profiles(sc, velocity, rng);
  const ChannelSet cs = make_channel_set(m, profiles, sc.physical, rng);
  const CMatrix& h_oldest = cs.history[0];  // H_{i-2}
  const CMatrix& h_design = cs.history[1];  // H_{i-1}
  const CMatrix& h_eval = cs.history[2];    // H_i
  const double noise_var = std::pow(10.0, -snr_db / 10.0);
  const PowerBudget budget = PowerBudget::from_total(1.0, m);
  const DistributionWeights ep = DistributionWeights::equal(k);
  std::optional<DistributionWeights> wf;
  const auto wf_weights = [&]() -> const DistributionWeights& {
    if (!wf) {
      wf = waterfill(h_design, budget, noise_var);
    }
    return *wf;
  };

  std::map<std::string, TrialOutcome> outcomes;
  for (const std::string& name : sc.methods) {
    Beamformer bf;
    bool iterative = true;
    if (name == "cpr_ep") {
      bf = cpr(h_design, sc.cpr, ep, budget);
    } else if (name == "cpr_wf") {
      bf = cpr(h_design, sc.cpr, wf_weights(), budget);
    } else if (name == "fc_cpr_ep") {
      bf = fc_cpr(h_design, sc.fc, ep, budget);
    } else if (name == "fc_cpr_wf") {
      bf = fc_cpr(h_design, sc.fc, wf_weights(), budget);
    } else if (name == "cpr_cc_wf") {
      std::vector<std::vector<CVector>> candidates;
      candidates.reserve(static_cast<std::size_t>(sc.K_m));
      for (int ue = 0; ue < sc.K_m; ++ue) {
        std::vector<CVector> list;
        list.emplace_back(h_design.col(ue));
        if (sc.n_candidates >= 2) {
          list.emplace_back(h_oldest.col(ue));
        }
        candidates.push_back(std::move(list));
      }
      bf = cpr_cc(h_design, candidates, sc.K_m, sc.cpr, wf_weights(), budget);
    } else if (name == "normalized_zf") {
      bf = normalized_zf(h_design, budget);
      iterative = false;
    } else if (name == "miso_opt") {
      bf = miso_optimal(CVector(h_design.col(0)), budget);
      iterative = false;
    } else {
      throw std::domain_error("run_trial: unknown method '" + name + "'");
    }

    if (papc_check(bf.F, budget) > 1e-9 * budget.p_ant) {
      throw std::runtime_error("run_trial: PAPC violated by method '" + name + "'");
    }

    const LinkReport rep = evaluate(h_eval, bf.F, noise_var, budget);
    TrialOutcome outcome;
    outcome.sum_rate = rep.sum_rate;
    outcome.iterations = bf.iterations_used;
    outcome.iterative = iterative;
    if (sc.K_m > 0) {
      outcome.moving_rate = rep.per_ue_rate.head(sc.K_m).mean();
    }
    if (sc.K_s > 0) {
      outcome.static_rate = rep.per_ue_rate.tail(sc.K_s).mean();
    }
    if (capture_trace && iterative) {
      outcome.trace_sum_rate.reserve(bf.trace.size());
      for (const IterationRecord& rec : bf.trace) {
        outcome.trace_sum_rate.push_back(
            evaluate(h_eval, rec.snapshot, noise_var, budget).sum_rate);
      }
    }
    outcomes.emplace(name, std::move(outcome));
  }
  return outcomes;
}

struct MeanCi {
  double mean = 0.0;
  double ci95 = 0.0;
};

inline MeanCi mean_ci(const std::vector<double>& xs) {
  MeanCi out;
  const int n = static_cast<int>(xs.size());
  if (n == 0) {
    return out;
  }
  double sum = 0.0;
  for (double x : xs) {
    sum += x;
  }
  out.mean = sum / n;
  if (n > 1) {
    double ss = 0.0;
    for (double x : xs) {
      ss += (x - out.mean) * (x - out.mean);
    }
    out.ci95 = 1.959963984540054 * std::sqrt(ss / (n - 1) / n);
  }
  return out;
}

}  // namespace detail

/// Mean per-iteration sum-rate trace per method over static channels.
/// Traces shorter than M - K + 1 are padded with their final value.
inline RunResult run_convergence(const Scenario& scenario, int workers = 0) {
  scenario.validate();
  if (scenario.snr_db_list.empty()) {
    throw std::domain_error("run_convergence: need an SNR point");
  }
  const double snr_db = scenario.snr_db_list.front();
  const int trials = scenario.trials;
  const int trace_len = std::max(1, scenario.M - scenario.num_ues() + 1);
  std::vector<std::map<std::string, detail::TrialOutcome>> per_trial(
      static_cast<std::size_t>(trials));
  parallel_for(trials, resolve_workers(workers), [&](int t) {
    RngStream rng(scenario.seed, static_cast<std::uint64_t>(t));
    per_trial[static_cast<std::size_t>(t)] =
        detail::run_trial(scenario, snr_db, 0.0, rng, true);
  });

  RunResult result;
  result.scenario = scenario;
  for (const std::string& name : scenario.methods) {
    const bool iterative = per_trial.front().at(name).iterative;
    if (iterative) {
      for (int it = 0; it < trace_len; ++it) {
        std::vector<double> xs;
        xs.reserve(static_cast<std::size_t>(trials));
        for (int t = 0; t < trials; ++t) {
          const auto& trace = per_trial[static_cast<std::size_t>(t)].at(name).trace_sum_rate;
          const double v =
              trace.empty() ? 0.0
                            : trace[std::min<std::size_t>(static_cast<std::size_t>(it),
                                                          trace.size() - 1)];
          xs.push_back(v);
        }
        const detail::MeanCi mc = detail::mean_ci(xs);
        result.rows.push_back({name, "iteration", static_cast<double>(it + 1),
                               "sum_rate", mc.mean, mc.ci95, trials});
      }
    }
    std::vector<double> final_rate;
    std::vector<double> iters;
    final_rate.reserve(static_cast<std::size_t>(trials));
    iters.reserve(static_cast<std::size_t>(trials));
    for (int t = 0; t < trials; ++t) {
      const auto& outcome = per_trial[static_cast<std::size_t>(t)].at(name);
      final_rate.push_back(outcome.sum_rate);
      iters.push_back(static_cast<double>(outcome.iterations));
    }
    const detail::MeanCi rate_mc = detail::mean_ci(final_rate);
    const detail::MeanCi iter_mc = detail::mean_ci(iters);
    result.rows.push_back(
        {name, "final", 0.0, "sum_rate", rate_mc.mean, rate_mc.ci95, trials});
    result.rows.push_back(
        {name, "final", 0.0, "iterations", iter_mc.mean, iter_mc.ci95, trials});
  }
  return result;
}

namespace detail {

inline RunResult run_sweep(const Scenario& scenario, const std::string& sweep_var,
                           const std::vector<double>& points, int workers) {
  scenario.validate();
  if (points.empty()) {
    throw std::domain_error("sweep: empty sweep point list");
  }
  const int trials = scenario.trials;
  const int n_points = static_cast<int>(points.size());
  std::vector<std::map<std::string, TrialOutcome>> outcomes(
      static_cast<std::size_t>(n_points) * static_cast<std::size_t>(trials));
  parallel_for(n_points * trials, resolve_workers(workers), [&](int job) {
    const int pi = job / trials;
    const int t = job % trials;
    const double point = points[static_cast<std::size_t>(pi)];
    const double snr_db =
        sweep_var == "snr_db" ? point : scenario.snr_db_list.front();
    const double velocity =
        sweep_var == "velocity_kmh" ? point : scenario.velocity_kmh_list.front();
    RngStream rng(scenario.seed, (static_cast<std::uint64_t>(pi) << 32) |
                                     static_cast<std::uint64_t>(t));
    outcomes[static_cast<std::size_t>(job)] =
        run_trial(scenario, snr_db, velocity, rng, false);
  });

  RunResult result;
  result.scenario = scenario;
  for (const std::string& name : scenario.methods) {
    for (int pi = 0; pi < n_points; ++pi) {
      std::vector<double> sum_rate, moving, stat, iters;
      bool iterative = false;
      for (int t = 0; t < trials; ++t) {
        const TrialOutcome& o =
            outcomes[static_cast<std::size_t>(pi) * static_cast<std::size_t>(trials) +
                     static_cast<std::size_t>(t)]
                .at(name);
        sum_rate.push_back(o.sum_rate);
        moving.push_back(o.moving_rate);
        stat.push_back(o.static_rate);
        iters.push_back(static_cast<double>(o.iterations));
        iterative = o.iterative;
      }
      const double point = points[static_cast<std::size_t>(pi)];
      const MeanCi rate_mc = mean_ci(sum_rate);
      result.rows.push_back({name, sweep_var, point, "sum_rate", rate_mc.mean,
                             rate_mc.ci95, trials});
      if (scenario.K_m > 0) {
        const MeanCi mc = mean_ci(moving);
        result.rows.push_back(
            {name, sweep_var, point, "rate_moving", mc.mean, mc.ci95, trials});
      }
      if (scenario.K_s > 0) {
        const MeanCi mc = mean_ci(stat);
        result.rows.push_back(
            {name, sweep_var, point, "rate_static", mc.mean, mc.ci95, trials});
      }
      if (iterative) {
        const MeanCi mc = mean_ci(iters);
        result.rows.push_back(
            {name, sweep_var, point, "iterations", mc.mean, mc.ci95, trials});
      }
    }
  }
  return result;
}

}  // namespace detail

inline RunResult sweep_snr(const Scenario& scenario, int workers = 0) {
  if (scenario.snr_db_list.empty()) {
    throw std::domain_error("sweep_snr: empty SNR list");
  }
  if (scenario.K_m > 0 && scenario.velocity_kmh_list.empty()) {
    throw std::domain_error("sweep_snr: need a velocity for moving UEs");
  }
  return detail::run_sweep(scenario, "snr_db", scenario.snr_db_list, workers);
}

inline RunResult sweep_velocity(const Scenario& scenario, int workers = 0) {
  if (scenario.velocity_kmh_list.empty()) {
    throw std::domain_error("sweep_velocity: empty velocity list");
  }
  if (scenario.K_m < 1) {
    throw std::domain_error("sweep_velocity: needs at least one moving UE");
  }
  return detail::run_sweep(scenario, "velocity_kmh", scenario.velocity_kmh_list,
                           workers);
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline std::string results_csv(const RunResult& result) {
  std::string out = "method,sweep_var,sweep_value,metric,mean,ci95,trials\n";
  for (const ResultRow& row : result.rows) {
    out += row.method;
    out += ',';
    out += row.sweep_var;
    out += ',';
    out += format_double(row.sweep_value);
    out += ',';
    out += row.metric;
    out += ',';
    out += format_double(row.mean);
    out += ',';
    out += format_double(row.ci95);
    out += ',';
    out += std::to_string(row.trials);
    out += '\n';
  }
  return out;
}

/// Writes the CSV plus a "<path>.json" sidecar echoing the full scenario.
inline void write_results(const RunResult& result, const std::string& csv_path) {
  {
    std::ofstream csv(csv_path, std::ios::binary);
    if (!csv) {
      throw std::runtime_error("write_results: cannot open " + csv_path);
    }
    csv << results_csv(result);
    if (!csv) {
      throw std::runtime_error("write_results: write failed for " + csv_path);
    }
  }
  const std::string sidecar_path = csv_path + ".json";
  std::ofstream sidecar(sidecar_path, std::ios::binary);
  if (!sidecar) {
    throw std::runtime_error("write_results: cannot open " + sidecar_path);
  }
  const nlohmann::json j = result.scenario;
  sidecar << j.dump(2) << '\n';
  if (!sidecar) {
    throw std::runtime_error("write_results: write failed for " + sidecar_path);
  }
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("load_scenario: cannot open " + path);
  }
  nlohmann::json j;
  in >> j;
  Scenario sc;
  j.get_to(sc);
  return sc;
}

}  // namespace cpr

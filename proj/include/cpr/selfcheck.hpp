#pragma once

#include "cpr/beamform.hpp"
#include "cpr/channel.hpp"
#include "cpr/metrics.hpp"
#include "cpr/rng.hpp"

#include <string>
#include <vector>

namespace cpr {

struct CheckReport {
  struct Suite {
    std::string name;
    int passed = 0;
    int failed = 0;
  };
  std::vector<Suite> suites;

  bool ok() const {
    for (const Suite& s : suites) {
      if (s.failed > 0) {
        return false;
      }
    }
    return true;
  }
};

namespace detail {

inline CMatrix random_cmatrix(int rows, int cols, RngStream& rng) {
  CMatrix a(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      a(i, j) = rng.cnormal(1.0);
    }
  }
  return a;
}

inline void tally(CheckReport::Suite& suite, bool pass) {
  if (pass) {
    ++suite.passed;
  } else {
    ++suite.failed;
  }
}

}  // namespace detail

/// Randomized invariant suite behind the CLI `check` subcommand.
inline CheckReport run_self_check(std::uint64_t seed, int instances) {
  CheckReport report;
  RngStream rng(seed, 0);

  {
    CheckReport::Suite suite{"pseudo_inverse_moore_penrose"};
    for (int i = 0; i < instances; ++i) {
      const int rows = 1 + static_cast<int>(rng.next_u64() % 32);
      const int cols = 1 + static_cast<int>(rng.next_u64() % 32);
      CMatrix a;
      if (i % 3 == 0 && std::min(rows, cols) > 1) {
        const int r = 1 + static_cast<int>(rng.next_u64() %
                                           static_cast<unsigned>(std::min(rows, cols) - 1));
        a = detail::random_cmatrix(rows, r, rng) * detail::random_cmatrix(r, cols, rng);
      } else {
        a = detail::random_cmatrix(rows, cols, rng);
      }
      const CMatrix pinv = pseudo_inverse(a);
      const double scale = std::max(a.norm(), 1e-30);
      const bool pass =
          (a * pinv * a - a).norm() <= 1e-8 * scale &&
          (pinv * a * pinv - pinv).norm() <= 1e-8 * std::max(pinv.norm(), 1e-30) &&
          (a * pinv - (a * pinv).adjoint()).norm() <= 1e-8 * std::max(1.0, (a * pinv).norm()) &&
          (pinv * a - (pinv * a).adjoint()).norm() <= 1e-8 * std::max(1.0, (pinv * a).norm());
      detail::tally(suite, pass);
    }
    report.suites.push_back(suite);
  }

  {
    CheckReport::Suite suite{"hermitian_sqrt_psd"};
    for (int i = 0; i < instances; ++i) {
      const int n = 1 + static_cast<int>(rng.next_u64() % 12);
      const CMatrix b = detail::random_cmatrix(n, n, rng);
      const CMatrix r = b * b.adjoint();
      const CMatrix s = hermitian_sqrt(r);
      Eigen::SelfAdjointEigenSolver<CMatrix> eig(s);
      const bool pass =
          (s * s.adjoint() - r).norm() <= 1e-9 * std::max(r.norm(), 1e-30) &&
          (s - s.adjoint()).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, s.cwiseAbs().maxCoeff()) &&
          eig.eigenvalues().minCoeff() >= -1e-9;
      detail::tally(suite, pass);
    }
    report.suites.push_back(suite);
  }

  {
    CheckReport::Suite suite{"bessel_j0_series"};
    for (int i = 0; i < instances; ++i) {
      const double x = rng.uniform(-8.0, 8.0);
      double term = 1.0, series = 1.0;
      for (int k = 1; k <= 50; ++k) {
        term *= -0.25 * x * x / (static_cast<double>(k) * k);
        series += term;
      }
      const double j0 = bessel_j0(x);
      detail::tally(suite, std::fabs(j0 - series) <= 1e-9 && std::fabs(j0) <= 1.0 + 1e-12);
    }
    for (int i = 0; i < instances; ++i) {
      const double x = rng.uniform(-100.0, 100.0);
      detail::tally(suite, std::fabs(bessel_j0(x)) <= 1.0 + 1e-12);
    }
    report.suites.push_back(suite);
  }

  {
    CheckReport::Suite suite{"exp_correlation_structure"};
    for (int i = 0; i < instances; ++i) {
      const int m = 2 + static_cast<int>(rng.next_u64() % 63);
      const Complex r = std::polar(rng.uniform(0.0, 0.99), rng.uniform(0.0, kTwoPi));
      const CMatrix corr = exp_correlation(r, m);
      Eigen::SelfAdjointEigenSolver<CMatrix> eig(corr);
      bool pass = (corr - corr.adjoint()).cwiseAbs().maxCoeff() <= 1e-12 &&
                  eig.eigenvalues().minCoeff() >= -1e-9;
      for (int d = 0; d < m && pass; ++d) {
        pass = std::abs(corr(d, d) - Complex(1.0, 0.0)) <= 1e-12;
      }
      detail::tally(suite, pass);
    }
    report.suites.push_back(suite);
  }

  {
    CheckReport::Suite suite{"cpr_papc_and_iteration_bound"};
    for (int i = 0; i < instances; ++i) {
      const int m = 4 + static_cast<int>(rng.next_u64() % 29);
      const int k = 1 + static_cast<int>(rng.next_u64() %
                                         static_cast<unsigned>(std::min(m, 8)));
      const CMatrix h = detail::random_cmatrix(m, k, rng);
      const PowerBudget budget = PowerBudget::from_total(1.0, m);
      const DistributionWeights ep = DistributionWeights::equal(k);
      CprConfig cfg;
      cfg.p = 0.999;
      const Beamformer bf = cpr(h, cfg, ep, budget);
      FcConfig fc;
      const Beamformer fbf = fc_cpr(h, fc, ep, budget);
      const bool papc_ok = papc_check(bf.F, budget) <= 1e-9 * budget.p_ant &&
                           papc_check(fbf.F, budget) <= 1e-9 * budget.p_ant;
      const bool iter_ok = bf.iterations_used <= m - k + 1 &&
                           fbf.iterations_used <= m - k + 1;
      const bool zero_interf = zf_residual(h, bf.F) < 1e-7;
      detail::tally(suite, papc_ok && iter_ok && zero_interf);
    }
    report.suites.push_back(suite);
  }

  {
    CheckReport::Suite suite{"cpr_gain_monotone"};
    for (int i = 0; i < instances; ++i) {
      const int m = 6 + static_cast<int>(rng.next_u64() % 11);
      const int k = 2 + static_cast<int>(rng.next_u64() % 3);
      const CMatrix h = detail::random_cmatrix(m, k, rng);
      const PowerBudget budget = PowerBudget::from_total(1.0, m);
      CprConfig cfg;
      cfg.p = 0.999;
      cfg.power_frac_stop = 1.0;
      cfg.ant_frac_stop = 1.0;
      const Beamformer bf = cpr(h, cfg, DistributionWeights::equal(k), budget);
      bool pass = !bf.trace.empty();
      RVector prev = RVector::Zero(k);
      for (const IterationRecord& rec : bf.trace) {
        for (int j = 0; j < k && pass; ++j) {
          pass = rec.per_ue_gain(j) > prev(j);
        }
        prev = rec.per_ue_gain;
        if (pass) {
          pass = zf_residual(h, rec.snapshot) < 1e-7;
        }
      }
      detail::tally(suite, pass);
    }
    report.suites.push_back(suite);
  }

  {
    CheckReport::Suite suite{"waterfill_kkt"};
    for (int i = 0; i < instances; ++i) {
      const int m = 4 + static_cast<int>(rng.next_u64() % 13);
      const int k = 1 + static_cast<int>(rng.next_u64() %
                                         static_cast<unsigned>(std::min(m, 6)));
      const CMatrix h = detail::random_cmatrix(m, k, rng);
      const PowerBudget budget = PowerBudget::from_total(1.0, m);
      const double noise_var = std::pow(10.0, rng.uniform(-2.0, 1.0));
      const DistributionWeights wf = waterfill(h, budget, noise_var);
      const CMatrix w = zf(h);
      bool pass = std::fabs(wf.b.squaredNorm() - budget.p_tot) <= 1e-10;
      double level = -1.0;
      for (int j = 0; j < k && pass; ++j) {
        if (wf.b(j) > 0.0) {
          const double inv_gamma = w.col(j).squaredNorm();
          const double lv = wf.b(j) * wf.b(j) / noise_var + inv_gamma;
          if (level < 0.0) {
            level = lv;
          } else {
            pass = std::fabs(lv - level) <= 1e-8 * level;
          }
        }
      }
      detail::tally(suite, pass);
    }
    report.suites.push_back(suite);
  }

  return report;
}

}  // namespace cpr

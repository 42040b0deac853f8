#pragma once

#include "cpr/numerics.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace cpr {

struct PowerBudget {
  double p_tot = 1.0;
  double p_ant = 1.0;

  static PowerBudget from_total(double p_tot, int m) {
    if (!(p_tot > 0.0) || m < 1) {
      throw std::domain_error("PowerBudget: need p_tot > 0 and M >= 1");
    }
    return PowerBudget{p_tot, p_tot / m};
  }
};

struct CprConfig {
  double p = 0.999;
  double power_frac_stop = 0.99;  // stop once this fraction of P_tot is used
  double ant_frac_stop = 0.90;    // stop once this fraction of antennas is full
  double ant_full_tol = 1e-6;     // relative tolerance for "full antenna"
  std::optional<int> max_iter_override;

  void validate() const {
    if (!(p > 0.0) || !(p <= 1.0)) {
      throw std::domain_error("CprConfig: p must be in (0, 1]");
    }
    if (!(power_frac_stop > 0.0) || !(power_frac_stop <= 1.0) ||
        !(ant_frac_stop > 0.0) || !(ant_frac_stop <= 1.0)) {
      throw std::domain_error("CprConfig: stop fractions must be in (0, 1]");
    }
    if (max_iter_override && *max_iter_override < 1) {
      throw std::domain_error("CprConfig: max_iter_override must be positive");
    }
  }
};

struct FcConfig {
  double p_init = 0.699;
  double delta_p = 0.05;
  double p_max = 0.999;
  CprConfig inner;

  void validate() const {
    if (!(p_init > 0.0) || !(p_init < p_max) || !(p_max <= 1.0) ||
        !(delta_p > 0.0)) {
      throw std::domain_error("FcConfig: need 0 < p_init < p_max <= 1, delta_p > 0");
    }
    inner.validate();
  }
};

/// Per-UE amplitude weights; all-ones gives the equal power distribution.
struct DistributionWeights {
  RVector b;

  static DistributionWeights equal(int k) {
    return DistributionWeights{RVector::Ones(k)};
  }

  void validate(int k) const {
    if (b.size() != k) {
      throw std::domain_error("DistributionWeights: size mismatch");
    }
    if ((b.array() < 0.0).any() || !(b.maxCoeff() > 0.0)) {
      throw std::domain_error("DistributionWeights: need nonnegative entries, at least one positive");
    }
  }
};

struct IterationRecord {
  double total_power = 0.0;
  int antennas_at_cap = 0;
  RVector per_ue_gain;
  CMatrix snapshot;  // F after this iteration
};

struct Beamformer {
  CMatrix F;
  int iterations_used = 0;
  std::vector<IterationRecord> trace;
};

inline RVector per_antenna_power(const CMatrix& f) {
  return f.rowwise().squaredNorm();
}

inline double total_power(const CMatrix& f) { return f.squaredNorm(); }

/// ZF beamformer (H^H)^dagger with an explicit rank check.
inline CMatrix zf(const CMatrix& h) {
  if (h.rows() < h.cols() || h.cols() < 1) {
    throw std::domain_error("zf: need rows >= cols >= 1");
  }
  Eigen::BDCSVD<CMatrix> svd(h.adjoint(), Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RVector& sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(sv.size() - 1) < 1e-10 * sv(0)) {
    throw RankError("zf: rank-deficient channel");
  }
  return svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().adjoint();
}

/// Closed-form MISO optimum under both power constraints: every antenna at
/// sqrt(P_ant) with the channel's phase.
inline Beamformer miso_optimal(const CVector& h, const PowerBudget& budget) {
  if (h.size() < 1 || !(h.norm() > 0.0)) {
    throw std::domain_error("miso_optimal: zero channel");
  }
  const double amp = std::sqrt(budget.p_ant);
  CMatrix f(h.size(), 1);
  for (Eigen::Index m = 0; m < h.size(); ++m) {
    f(m, 0) = std::polar(amp, std::arg(h(m)));
  }
  Beamformer out;
  out.F = std::move(f);
  return out;
}

inline double miso_optimal_gain(const CVector& h, const PowerBudget& budget) {
  const double amp_sum = h.cwiseAbs().sum();
  return budget.p_ant * amp_sum * amp_sum;
}

/// Matched beamformer scaled so the strongest antenna is exactly at the cap.
inline CVector scaled_matched(const CVector& h, const PowerBudget& budget) {
  if (h.size() < 1 || !(h.norm() > 0.0)) {
    throw std::domain_error("scaled_matched: zero channel");
  }
  Eigen::Index m_max = 0;
  const double h_max = h.cwiseAbs().maxCoeff(&m_max);
  return (std::sqrt(budget.p_ant) / h_max) * h;
}

/// Antennas whose allocated power is still below p * P_ant, ascending.
inline std::vector<int> antenna_set(const CMatrix& f, double p,
                                    const PowerBudget& budget) {
  const RVector pw = per_antenna_power(f);
  std::vector<int> idx;
  idx.reserve(static_cast<std::size_t>(f.rows()));
  for (Eigen::Index m = 0; m < f.rows(); ++m) {
    if (pw(m) < p * budget.p_ant) {
      idx.push_back(static_cast<int>(m));
    }
  }
  return idx;
}

/// Scatter the rows of a sub-array beamformer back into the full array.
inline CMatrix expand_rows(const CMatrix& w_hat, const std::vector<int>& idx,
                           int m) {
  if (static_cast<int>(idx.size()) != w_hat.rows()) {
    throw std::domain_error("expand_rows: index count must match rows");
  }
  CMatrix out = CMatrix::Zero(m, w_hat.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= m) {
      throw std::domain_error("expand_rows: index out of range");
    }
    out.row(idx[i]) = w_hat.row(static_cast<Eigen::Index>(i));
  }
  return out;
}

/// Minimum-modulus root of the per-antenna cap equation over the antenna set.
/// The phase term keeps the update aligned with F_prev, which makes the root
/// real up to rounding.
inline Complex solve_alpha(const CMatrix& f_prev, const CMatrix& w,
                           const RVector& col_norm_inv,
                           const DistributionWeights& weights,
                           const std::vector<int>& idx,
                           const PowerBudget& budget) {
  const Eigen::Index k = w.cols();
  const RVector scale = weights.b.cwiseProduct(col_norm_inv);  // b .* w_bar
  Complex best(0.0, 0.0);
  double best_mod = 0.0;
  bool found = false;
  for (int m : idx) {
    Eigen::RowVectorXcd u(k);
    for (Eigen::Index j = 0; j < k; ++j) {
      u(j) = w(m, j) * scale(j);
    }
    const double nu2 = u.squaredNorm();
    if (nu2 <= 1e-300) {
      continue;  // weighted row vanishes, this antenna gives no constraint
    }
    const Complex d = (f_prev.row(m) * u.adjoint())(0);
    const double fp2 = f_prev.row(m).squaredNorm();
    const double radicand = std::norm(d) - nu2 * (fp2 - budget.p_ant);
    if (radicand < 0.0) {
      throw std::logic_error("solve_alpha: negative radicand on the antenna set");
    }
    const double s = std::sqrt(radicand);
    const double sin_t = s > 0.0 ? std::clamp(d.imag() / s, -1.0, 1.0) : 0.0;
    const double cos_t = std::sqrt(std::max(0.0, 1.0 - sin_t * sin_t));
    const Complex alpha = (-d + s * Complex(cos_t, sin_t)) / nu2;
    const double mod = std::abs(alpha);
    if (!found || mod < best_mod - 1e-12) {
      best = alpha;
      best_mod = mod;
      found = true;
    }
  }
  if (!found) {
    throw NoProgressError("solve_alpha: all weighted rows vanish on the antenna set");
  }
  return best;
}

namespace detail {

/// Produces the |I| x K extra beamformer for a given antenna set.
using ExtraBuilder = std::function<CMatrix(const std::vector<int>&)>;

/// Shared CPR iteration: antenna set, cardinality stop, extra beamformer,
/// coefficient solve, accumulate, stopping criteria.
inline Beamformer run_cpr_loop(const CMatrix& h_gain, int min_set_size,
                               const ExtraBuilder& builder,
                               const CprConfig& config,
                               const DistributionWeights& weights,
                               const PowerBudget& budget, const CMatrix* f0) {
  config.validate();
  const int m = static_cast<int>(h_gain.rows());
  const int k = static_cast<int>(h_gain.cols());
  weights.validate(k);
  Beamformer out;
  if (f0 != nullptr) {
    if (f0->rows() != m || f0->cols() != k) {
      throw std::domain_error("cpr: initial beamformer shape mismatch");
    }
    out.F = *f0;
  } else {
    out.F = CMatrix::Zero(m, k);
  }
  const int max_iter = config.max_iter_override.value_or(std::max(1, m - k + 1));
  for (int n = 1; n <= max_iter; ++n) {
    const std::vector<int> idx = antenna_set(out.F, config.p, budget);
    if (static_cast<int>(idx.size()) < min_set_size) {
      break;
    }
    const CMatrix w = expand_rows(builder(idx), idx, m);
    RVector col_norm_inv(k);
    for (int j = 0; j < k; ++j) {
      const double nn = w.col(j).norm();
      if (!(nn > 0.0)) {
        throw RankError("cpr: extra beamformer has a zero column");
      }
      col_norm_inv(j) = 1.0 / nn;
    }
    Complex alpha = solve_alpha(out.F, w, col_norm_inv, weights, idx, budget);
    const double mod = std::abs(alpha);
    if (mod > 0.0 && std::fabs(alpha.imag()) > 1e-6 * mod) {
      std::fprintf(stderr, "cpr: projecting alpha with imaginary residue %.3e\n",
                   alpha.imag() / mod);
    }
    const RVector a = alpha.real() * weights.b.cwiseProduct(col_norm_inv);
    out.F += w * a.cast<Complex>().asDiagonal();
    out.iterations_used = n;

    const RVector pw = per_antenna_power(out.F);
    const double cap = budget.p_ant;
    if (pw.maxCoeff() > cap * (1.0 + 1e-9)) {
      throw std::logic_error("cpr: PAPC violated after update");
    }
    bool cap_hit = false;
    for (int mm : idx) {
      if (pw(mm) >= cap * (1.0 - 1e-8)) {
        cap_hit = true;
        break;
      }
    }
    if (!cap_hit) {
      throw std::logic_error("cpr: no antenna in the set reached the cap");
    }

    IterationRecord rec;
    rec.total_power = pw.sum();
    rec.antennas_at_cap = 0;
    for (Eigen::Index mm = 0; mm < pw.size(); ++mm) {
      if (pw(mm) >= cap * (1.0 - config.ant_full_tol)) {
        ++rec.antennas_at_cap;
      }
    }
    rec.per_ue_gain = RVector(k);
    for (int j = 0; j < k; ++j) {
      rec.per_ue_gain(j) = std::norm((h_gain.col(j).adjoint() * out.F.col(j))(0));
    }
    rec.snapshot = out.F;
    out.trace.push_back(std::move(rec));

    if (out.trace.back().total_power >= config.power_frac_stop * budget.p_tot) {
      break;
    }
    if (out.trace.back().antennas_at_cap >= config.ant_frac_stop * m) {
      break;
    }
  }
  return out;
}

}  // namespace detail

/// ZF-based complete power reallocation (equal or weighted distribution).
inline Beamformer cpr(const CMatrix& h, const CprConfig& config,
                      const DistributionWeights& weights,
                      const PowerBudget& budget, const CMatrix* f0 = nullptr) {
  if (h.cols() > h.rows()) {
    throw std::domain_error("cpr: more UEs than antennas");
  }
  const auto builder = [&h](const std::vector<int>& idx) {
    return zf(select_rows(h, idx));
  };
  return detail::run_cpr_loop(h, static_cast<int>(h.cols()), builder, config,
                              weights, budget, f0);
}

/// Fast-convergence CPR: re-enters CPR with a growing threshold p, warm
/// starting from the previous output.
inline Beamformer fc_cpr(const CMatrix& h, const FcConfig& fc,
                         const DistributionWeights& weights,
                         const PowerBudget& budget) {
  fc.validate();
  const int m = static_cast<int>(h.rows());
  const int k = static_cast<int>(h.cols());
  CMatrix f0 = CMatrix::Zero(m, k);
  double p = fc.p_init;
  Beamformer out;
  out.F = f0;
  const int rounds_max = std::max(1, m - k + 1);
  for (int round = 0; round < rounds_max; ++round) {
    CprConfig cfg = fc.inner;
    cfg.p = p;
    Beamformer stage = cpr(h, cfg, weights, budget, &f0);
    out.iterations_used += stage.iterations_used;
    for (IterationRecord& rec : stage.trace) {
      out.trace.push_back(std::move(rec));
    }
    out.F = std::move(stage.F);
    if (p < fc.p_max) {
      p = std::min(p + fc.delta_p, 1.0);
      f0 = out.F;
    } else {
      break;
    }
  }
  return out;
}

/// Water-filling amplitude weights over the normalized ZF directions.
inline DistributionWeights waterfill(const CMatrix& h, const PowerBudget& budget,
                                     double noise_var) {
  if (!(noise_var > 0.0)) {
    throw std::domain_error("waterfill: noise variance must be positive");
  }
  const CMatrix w = zf(h);
  const int k = static_cast<int>(h.cols());
  RVector gamma(k);  // per-UE gain of the unit-norm ZF direction
  for (int j = 0; j < k; ++j) {
    gamma(j) = 1.0 / w.col(j).squaredNorm();
  }
  std::vector<int> order(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    order[static_cast<std::size_t>(j)] = j;
  }
  std::sort(order.begin(), order.end(),
            [&gamma](int a, int b) { return gamma(a) > gamma(b); });
  double inv_sum = 0.0;
  double level = 0.0;  // 1 / lambda
  int active = 0;
  for (int n = 1; n <= k; ++n) {
    const int j = order[static_cast<std::size_t>(n - 1)];
    inv_sum += 1.0 / gamma(j);
    const double cand = (budget.p_tot / noise_var + inv_sum) / n;
    if (cand > 1.0 / gamma(j)) {
      level = cand;
      active = n;
    }
  }
  const double sigma = std::sqrt(noise_var);
  RVector b = RVector::Zero(k);
  for (int n = 0; n < active; ++n) {
    const int j = order[static_cast<std::size_t>(n)];
    b(j) = sigma * std::sqrt(std::max(0.0, level - 1.0 / gamma(j)));
  }
  return DistributionWeights{std::move(b)};
}

/// CPR with candidate channels: extends the nulled column set with outdated
/// channels of moving UEs. Candidate columns equal to an existing column are
/// dropped.
inline Beamformer cpr_cc(const CMatrix& h_outdated,
                         const std::vector<std::vector<CVector>>& candidates,
                         int k_moving, const CprConfig& config,
                         const DistributionWeights& weights,
                         const PowerBudget& budget) {
  const int m = static_cast<int>(h_outdated.rows());
  const int k = static_cast<int>(h_outdated.cols());
  if (k_moving < 0 || k_moving > k ||
      static_cast<int>(candidates.size()) != k_moving) {
    throw std::domain_error("cpr_cc: candidate lists must match the moving-UE count");
  }
  const auto exact_equal = [](const CVector& a, const CVector& b) {
    if (a.size() != b.size()) {
      return false;
    }
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      if (a(i) != b(i)) {
        return false;
      }
    }
    return true;
  };
  std::vector<CVector> cols;
  std::vector<int> owner;  // UE index owning each extended column
  cols.reserve(static_cast<std::size_t>(k) + 4);
  for (int j = 0; j < k; ++j) {
    cols.emplace_back(h_outdated.col(j));
    owner.push_back(j);
  }
  for (int ue = 0; ue < k_moving; ++ue) {
    for (const CVector& cand : candidates[static_cast<std::size_t>(ue)]) {
      if (cand.size() != m) {
        throw std::domain_error("cpr_cc: candidate column length mismatch");
      }
      bool dup = false;
      for (const CVector& c : cols) {
        if (exact_equal(c, cand)) {
          dup = true;
          break;
        }
      }
      if (!dup) {
        cols.push_back(cand);
        owner.push_back(ue);
      }
    }
  }
  const int k_ext = static_cast<int>(cols.size());
  if (k_ext > m) {
    throw std::domain_error("cpr_cc: extended channel wider than antenna count");
  }
  CMatrix hbar(m, k_ext);
  for (int j = 0; j < k_ext; ++j) {
    hbar.col(j) = cols[static_cast<std::size_t>(j)];
  }
  const auto builder = [&](const std::vector<int>& idx) {
    CMatrix w_hat(static_cast<Eigen::Index>(idx.size()), k);
    CMatrix full;  // ZF of the full extended channel, shared by static UEs
    bool have_full = false;
    for (int ue = 0; ue < k; ++ue) {
      if (ue < k_moving) {
        // [h_ue, extended columns not owned by ue], restricted to the set
        std::vector<int> keep;
        for (int j = 0; j < k_ext; ++j) {
          if (owner[static_cast<std::size_t>(j)] != ue) {
            keep.push_back(j);
          }
        }
        CMatrix ext(m, 1 + static_cast<int>(keep.size()));
        ext.col(0) = h_outdated.col(ue);
        for (std::size_t j = 0; j < keep.size(); ++j) {
          ext.col(static_cast<Eigen::Index>(j + 1)) = hbar.col(keep[j]);
        }
        w_hat.col(ue) = zf(select_rows(ext, idx)).col(0);
      } else {
        if (!have_full) {
          full = zf(select_rows(hbar, idx));
          have_full = true;
        }
        w_hat.col(ue) = full.col(ue);
      }
    }
    return w_hat;
  };
  return detail::run_cpr_loop(h_outdated, k_ext, builder, config, weights,
                              budget, nullptr);
}

/// Baseline: ZF columns normalized to unit norm, then a common scale that
/// makes the busiest antenna exactly hit the cap.
inline Beamformer normalized_zf(const CMatrix& h, const PowerBudget& budget) {
  CMatrix w = zf(h);
  for (Eigen::Index j = 0; j < w.cols(); ++j) {
    w.col(j).normalize();
  }
  const RVector pw = per_antenna_power(w);
  const double nu = std::sqrt(budget.p_ant / pw.maxCoeff());
  Beamformer out;
  out.F = nu * w;
  return out;
}

}  // namespace cpr

#pragma once

#include "cpr/beamform.hpp"
#include "cpr/numerics.hpp"

namespace cpr {

struct LinkReport {
  RVector per_ue_rate;          // bits/s/Hz
  double sum_rate = 0.0;
  RVector per_ue_gain;          // |h_k^H f_k|^2
  RVector per_ue_interference;  // |sum_{l != k} h_k^H f_l|^2
  RVector per_antenna_power;
  double papc_excess = 0.0;  // max antenna power minus P_ant
  double total_power = 0.0;
};

/// max_m sum_k |F(m,k)|^2 - P_ant; negative when the PAPC holds.
inline double papc_check(const CMatrix& f, const PowerBudget& budget) {
  return per_antenna_power(f).maxCoeff() - budget.p_ant;
}

/// Largest normalized cross-channel leakage |h_k^H f_l| for k != l.
inline double zf_residual(const CMatrix& h, const CMatrix& f) {
  if (h.rows() != f.rows()) {
    throw std::domain_error("zf_residual: shape mismatch");
  }
  const CMatrix g = h.adjoint() * f;
  double worst = 0.0;
  for (Eigen::Index k = 0; k < g.rows(); ++k) {
    for (Eigen::Index l = 0; l < g.cols(); ++l) {
      if (k == l) {
        continue;
      }
      const double denom = h.col(k).norm() * f.col(l).norm() + 1e-30;
      worst = std::max(worst, std::abs(g(k, l)) / denom);
    }
  }
  return worst;
}

/// Analytic sum-rate and constraint diagnostics. The interference term is the
/// squared magnitude of the summed cross products.
inline LinkReport evaluate(const CMatrix& h_true, const CMatrix& f,
                           double noise_var, const PowerBudget& budget) {
  if (h_true.rows() != f.rows() || h_true.cols() != f.cols()) {
    throw std::domain_error("evaluate: shape mismatch");
  }
  if (!(noise_var > 0.0)) {
    throw std::domain_error("evaluate: noise variance must be positive");
  }
  const Eigen::Index k = h_true.cols();
  const CMatrix g = h_true.adjoint() * f;  // g(k, l) = h_k^H f_l
  LinkReport rep;
  rep.per_ue_rate = RVector(k);
  rep.per_ue_gain = RVector(k);
  rep.per_ue_interference = RVector(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const Complex cross = g.row(i).sum() - g(i, i);
    rep.per_ue_gain(i) = std::norm(g(i, i));
    rep.per_ue_interference(i) = std::norm(cross);
    rep.per_ue_rate(i) = std::log2(
        1.0 + rep.per_ue_gain(i) / (noise_var + rep.per_ue_interference(i)));
  }
  rep.sum_rate = rep.per_ue_rate.sum();
  rep.per_antenna_power = per_antenna_power(f);
  rep.total_power = rep.per_antenna_power.sum();
  rep.papc_excess = rep.per_antenna_power.maxCoeff() - budget.p_ant;
  return rep;
}

}  // namespace cpr

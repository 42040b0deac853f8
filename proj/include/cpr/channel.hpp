#pragma once

#include "cpr/numerics.hpp"
#include "cpr/rng.hpp"

#include <vector>

namespace cpr {

struct PhysicalParams {
  double carrier_hz = 2.3e9;
  double interval_s = 0.04;
  double light_speed = 3.0e8;

  void validate() const {
    if (!(carrier_hz > 0.0) || !(interval_s > 0.0) || !(light_speed > 0.0)) {
      throw std::domain_error("PhysicalParams: fields must be positive");
    }
  }
};

struct UEProfile {
  double spatial_corr_mag = 0.6;    // |r|
  double spatial_corr_phase = 0.0;  // angle of r, [0, 2*pi)
  double velocity_kmh = 0.0;
  double beta = 1.0;  // large-scale gain
  bool is_moving = false;

  void validate() const {
    if (!(spatial_corr_mag >= 0.0) || !(spatial_corr_mag < 1.0)) {
      throw std::domain_error("UEProfile: |r| must be in [0, 1)");
    }
    if (!(beta > 0.0)) {
      throw std::domain_error("UEProfile: beta must be positive");
    }
    if (!(velocity_kmh >= 0.0)) {
      throw std::domain_error("UEProfile: velocity must be non-negative");
    }
    if (is_moving != (velocity_kmh > 0.0)) {
      throw std::domain_error("UEProfile: velocity and is_moving disagree");
    }
  }
};

/// Hermitian Toeplitz matrix with entry (a, b) = r^(b-a) above the diagonal.
inline CMatrix exp_correlation(Complex r, int m) {
  if (!(std::abs(r) < 1.0)) {
    throw std::domain_error("exp_correlation: |r| must be < 1");
  }
  if (m < 1) {
    throw std::domain_error("exp_correlation: M must be positive");
  }
  std::vector<Complex> powers(static_cast<std::size_t>(m));
  powers[0] = Complex(1.0, 0.0);
  for (int d = 1; d < m; ++d) {
    powers[static_cast<std::size_t>(d)] = powers[static_cast<std::size_t>(d - 1)] * r;
  }
  CMatrix out(m, m);
  for (int a = 0; a < m; ++a) {
    for (int b = 0; b < m; ++b) {
      out(a, b) = b >= a ? powers[static_cast<std::size_t>(b - a)]
                         : std::conj(powers[static_cast<std::size_t>(a - b)]);
    }
  }
  return out;
}

/// Jakes temporal correlation J0(2*pi*f_D*t), f_D = v * f_c / c.
inline double temporal_corr(double velocity_kmh, const PhysicalParams& params) {
  params.validate();
  if (!std::isfinite(velocity_kmh) || velocity_kmh < 0.0) {
    throw std::domain_error("temporal_corr: velocity must be finite and >= 0");
  }
  const double v_ms = velocity_kmh / 3.6;
  const double doppler_hz = v_ms * params.carrier_hz / params.light_speed;
  return bessel_j0(kTwoPi * doppler_hz * params.interval_s);
}

/// Shadowing term z with 10*log10(z) ~ Normal(0, 8^2).
inline double sample_shadowing(RngStream& rng) {
  return std::pow(10.0, 0.8 * rng.normal());
}

/// Pathloss term x ~ U[1, 5].
inline double sample_pathloss(RngStream& rng) { return rng.uniform(1.0, 5.0); }

/// Large-scale gain beta = z / x.
inline double sample_large_scale(RngStream& rng) {
  const double z = sample_shadowing(rng);
  const double x = sample_pathloss(rng);
  return z / x;
}

/// sqrt(beta) * R^{1/2} for one UE, so channel draws use unit-variance
/// innovations.
inline CMatrix correlation_sqrt(const UEProfile& ue, int m) {
  ue.validate();
  const Complex r = std::polar(ue.spatial_corr_mag, ue.spatial_corr_phase);
  return std::sqrt(ue.beta) * hermitian_sqrt(exp_correlation(r, m));
}

inline CVector init_channel(const CMatrix& sqrt_corr, RngStream& rng) {
  return sqrt_corr * complex_gaussian(static_cast<int>(sqrt_corr.rows()), 1.0, rng);
}

inline CVector init_channel(const UEProfile& ue, int m, RngStream& rng) {
  return init_channel(correlation_sqrt(ue, m), rng);
}

/// First-order Gauss-Markov step: eta * h + sqrt(1 - eta^2) * R^{1/2} * g.
inline CVector evolve_channel(const CVector& h_prev, double eta,
                              const CMatrix& sqrt_corr, RngStream& rng) {
  if (std::fabs(eta) > 1.0) {
    throw std::logic_error("evolve_channel: |eta| > 1");
  }
  const double innovation_var = 1.0 - eta * eta;
  if (innovation_var <= 0.0) {
    return h_prev;
  }
  return eta * h_prev +
         std::sqrt(innovation_var) *
             (sqrt_corr * complex_gaussian(static_cast<int>(h_prev.size()), 1.0, rng));
}

inline CVector evolve_channel(const CVector& h_prev, const UEProfile& ue,
                              const PhysicalParams& params, RngStream& rng) {
  return evolve_channel(h_prev, temporal_corr(ue.velocity_kmh, params),
                        correlation_sqrt(ue, static_cast<int>(h_prev.size())), rng);
}

/// Channel state for one trial: per-UE statistics plus a short history of
/// fading blocks, oldest first.
struct ChannelSet {
  int num_antennas = 0;
  int num_ues = 0;
  std::vector<UEProfile> profiles;
  std::vector<CMatrix> sqrt_corr;  // per UE, includes sqrt(beta)
  std::vector<double> eta;
  std::vector<CMatrix> history;

  const CMatrix& oldest() const { return history.front(); }
  const CMatrix& current() const { return history.back(); }
};

inline ChannelSet make_channel_set(int m, const std::vector<UEProfile>& profiles,
                                   const PhysicalParams& params, RngStream& rng,
                                   int depth = 3) {
  if (m < 1 || profiles.empty() || depth < 1) {
    throw std::domain_error("make_channel_set: bad dimensions");
  }
  ChannelSet cs;
  cs.num_antennas = m;
  cs.num_ues = static_cast<int>(profiles.size());
  cs.profiles = profiles;
  cs.sqrt_corr.reserve(profiles.size());
  cs.eta.reserve(profiles.size());
  for (const UEProfile& ue : profiles) {
    cs.sqrt_corr.push_back(correlation_sqrt(ue, m));
    cs.eta.push_back(ue.is_moving ? temporal_corr(ue.velocity_kmh, params) : 1.0);
  }
  CMatrix h(m, cs.num_ues);
  for (int k = 0; k < cs.num_ues; ++k) {
    h.col(k) = init_channel(cs.sqrt_corr[static_cast<std::size_t>(k)], rng);
  }
  cs.history.push_back(h);
  for (int step = 1; step < depth; ++step) {
    CMatrix next(m, cs.num_ues);
    for (int k = 0; k < cs.num_ues; ++k) {
      next.col(k) = evolve_channel(CVector(cs.history.back().col(k)),
                                   cs.eta[static_cast<std::size_t>(k)],
                                   cs.sqrt_corr[static_cast<std::size_t>(k)], rng);
    }
    cs.history.push_back(std::move(next));
  }
  return cs;
}

}  // namespace cpr

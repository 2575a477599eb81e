#pragma once

#include <array>
#include <cstdint>

#include "qkd/config.hpp"

namespace qkd {

// Per-intensity detection and error tallies feeding the decoy bounds.
// Counts are real-valued so the analytic rate model can push expected
// (fractional) tallies through the same pipeline; the protocol path fills
// integers. Index 0 = signal (mu1), 1 = decoy (mu2).
struct IntensityTallies {
    std::array<double, 2> n_z{0, 0};
    std::array<double, 2> n_x{0, 0};
    std::array<double, 2> m_x{0, 0};
    double m_z_total = 0;  // from Cascade corrections

    double n_z_total() const { return n_z[0] + n_z[1]; }
    double n_x_total() const { return n_x[0] + n_x[1]; }
    double m_x_total() const { return m_x[0] + m_x[1]; }
};

struct FiniteKeyBounds {
    double s_z0_low = 0, s_z0_high = 0, s_z1_low = 0;
    double s_x0_low = 0, s_x1_low = 0;
    double v_x1_high = 0;
    double phi_z_high = 0.5;
    double tau0 = 0, tau1 = 0;
    uint64_t l = 0;
};

// P(n photons emitted), averaged over the two intensity choices.
double tau(int n, double mu1, double mu2, double p_mu1);

// Hoeffding half-width sqrt(n/2 * ln(1/eps)).
double hoeffding_delta(double n, double eps);

// Random-sampling-without-replacement correction used by the phase error
// bound; zero at the degenerate points.
double gamma_correction(double eps, double lambda, double n, double m);

// Full one-decoy bound pipeline. Every concentration step uses
// eps' = eps_sec/7, matching the 4*log2(7/eps_sec) term of the key length.
FiniteKeyBounds compute_bounds(const IntensityTallies& t, const ProtocolParams& p,
                               const SecurityParams& sec);

// floor(s_z0 + s_z1*(1-h(phi)) - lambda_ec - 4*log2(7/eps_sec) - log2(1/eps_cor)),
// clamped at zero; also stored in bounds.l.
uint64_t secret_key_length(FiniteKeyBounds& bounds, double lambda_ec_total,
                           const SecurityParams& sec);

struct RateModelResult {
    double skr_bps = 0;
    double qber_z = 0, qber_x = 0;
    uint64_t l = 0;
    double accumulation_seconds = 0;  // source time to fill n_z_pa
    IntensityTallies tallies;
    FiniteKeyBounds bounds;
};

// Closed-form expected tallies (Poissonian clicks, non-paralyzable dead
// time, dark and misalignment errors) pushed through the bounds pipeline
// at n_z_pa scale. lambda_EC uses the f_EC*n*h(Q) formula with f_EC 1.06.
RateModelResult expected_rate_model(const Config& cfg);

struct OptimizeResult {
    double mu1 = 0, mu2 = 0, p_mu1 = 0;
    double skr_bps = 0;
};

// Deterministic coarse grid over (mu1, mu2, p_mu1) followed by downhill
// simplex refinement of the analytic rate at the given distance.
OptimizeResult optimize_params(double distance_km, const Config& base);

}  // namespace qkd

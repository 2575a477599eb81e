#pragma once

// Closed-form per-slot click statistics for the receiver, derived only from
// Poisson splitting: detected photons land in the four (detector, bin)
// cells as independent Poisson counts, darks hit each cell with p_dark/2.
// Dead time must be off. Used as the independent oracle for both the
// slot-by-slot receiver and the event-driven sampler.

#include <array>
#include <cmath>

#include "qkd/config.hpp"
#include "qkd/photonics.hpp"

namespace clickmodel {

struct SlotProbs {
    double event = 0;        // a DetectionEvent is registered (discard policy)
    double event_z = 0;      // ... with Z time bin
    double event_z_error = 0;  // ... Z bin, bit != sent bit (Z pulses only)
    double event_from_dark = 0;
    double double_click = 0;
};

// cell occupation probabilities for one photon given the pulse
inline std::array<std::array<double, 2>, 2> cell_probs(qkd::Basis pulse_basis, uint8_t bit,
                                                       double p_x_bob, double e_z, double e_x) {
    std::array<std::array<double, 2>, 2> q{};  // [detector][bin]
    const double pz = 1.0 - p_x_bob;
    if (pulse_basis == qkd::Basis::Z) {
        q[bit][0] = pz * (1.0 - e_z);
        q[bit ^ 1][0] = pz * e_z;
        q[0][1] = p_x_bob * 0.5;
        q[1][1] = p_x_bob * 0.5;
    } else {
        q[0][0] = pz * 0.5;
        q[1][0] = pz * 0.5;
        q[0][1] = p_x_bob * (1.0 - e_x);
        q[1][1] = p_x_bob * e_x;
    }
    return q;
}

// Statistics for one pulse configuration at detected-photon mean lam.
inline SlotProbs config_probs(double lam, qkd::Basis pulse_basis, uint8_t bit, double p_x_bob,
                              double e_z, double e_x, double p_dark) {
    const auto q = cell_probs(pulse_basis, bit, p_x_bob, e_z, e_x);
    const double pdb = p_dark / 2.0;  // dark per cell

    // P(cell has no candidate)
    std::array<std::array<double, 2>, 2> none{};
    for (int d = 0; d < 2; ++d)
        for (int b = 0; b < 2; ++b) none[d][b] = std::exp(-lam * q[d][b]) * (1.0 - pdb);
    // P(cell candidate present and purely dark)
    std::array<std::array<double, 2>, 2> darkonly{};
    for (int d = 0; d < 2; ++d)
        for (int b = 0; b < 2; ++b) darkonly[d][b] = std::exp(-lam * q[d][b]) * pdb;

    const double silent0 = none[0][0] * none[0][1];
    const double silent1 = none[1][0] * none[1][1];
    const double c0 = 1.0 - silent0, c1 = 1.0 - silent1;

    SlotProbs out;
    out.event = c0 * silent1 + c1 * silent0;
    out.double_click = c0 * c1;

    // detector d wins with the Z bin iff cell (d,Z) has a candidate
    const auto winz = [&](int d) { return 1.0 - none[d][0]; };
    const double other[2] = {silent1, silent0};
    for (int d = 0; d < 2; ++d) out.event_z += winz(d) * other[d];

    if (pulse_basis == qkd::Basis::Z)
        out.event_z_error = winz(bit ^ 1) * other[bit ^ 1];

    for (int d = 0; d < 2; ++d) {
        const double win_z_dark = darkonly[d][0];               // Z cell candidate, dark only
        const double win_x_dark = none[d][0] * darkonly[d][1];  // Z silent, X cell dark only
        out.event_from_dark += (win_z_dark + win_x_dark) * other[d];
    }
    return out;
}

// Marginal over intensity, basis and bit choices.
inline SlotProbs marginal_probs(const qkd::Config& cfg) {
    const auto& p = cfg.protocol;
    const double s = qkd::effective_transmittance(cfg.channel) * cfg.detector.efficiency;
    const double p_dark = cfg.detector.dark_rate * 2.0 / p.rep_rate;
    const double floor = qkd::extinction_floor(cfg.detector.pbs_extinction);
    qkd::PolarizationState pol{cfg.channel.misalignment_angle0, cfg.channel.misalignment_angle0};
    const double e_z = qkd::z_error_prob(pol, floor);
    const double e_x = qkd::x_error_prob(pol, floor);

    const double mus[2] = {p.mu1, p.mu2};
    const double pk[2] = {p.p_mu1, 1.0 - p.p_mu1};

    SlotProbs acc;
    for (int k = 0; k < 2; ++k) {
        const double lam = mus[k] * s;
        struct Cfg {
            qkd::Basis basis;
            uint8_t bit;
            double w;
        } cases[3] = {
            {qkd::Basis::Z, 0, (1.0 - p.p_x_alice) * 0.5},
            {qkd::Basis::Z, 1, (1.0 - p.p_x_alice) * 0.5},
            {qkd::Basis::X, 0, p.p_x_alice},
        };
        for (const auto& c : cases) {
            const SlotProbs sp = config_probs(lam, c.basis, c.bit, p.p_x_bob, e_z, e_x, p_dark);
            const double w = pk[k] * c.w;
            acc.event += w * sp.event;
            acc.event_z += w * sp.event_z;
            acc.event_z_error += w * sp.event_z_error;
            acc.event_from_dark += w * sp.event_from_dark;
            acc.double_click += w * sp.double_click;
        }
    }
    return acc;
}

}  // namespace clickmodel

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace qkd {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Source and block-size parameters. mu1 is the signal intensity, mu2 the
// decoy; defaults are the 175 km operating point.
struct ProtocolParams {
    double rep_rate = 6.25e8;   // pulses/s
    double mu1 = 0.33;          // mean photon number, signal
    double mu2 = 0.14;          // mean photon number, decoy
    double p_mu1 = 0.75;        // probability of signal intensity
    double p_x_alice = 0.125;   // Alice X-basis probability
    double p_x_bob = 0.5;       // Bob X-basis probability (splitter ratio)
    uint64_t n_z_ec = 8192;     // error-correction block, bits
    uint64_t n_z_pa = 8192000;  // privacy-amplification block, bits
    double f_ec_cap = 1.5;      // abort threshold on measured reconciliation efficiency
};

struct ChannelParams {
    double fiber_length = 0.0;  // km
    double attenuation = 0.2;   // dB/km
    // Receiver chain loss beyond the fiber (PBS stages, recombination,
    // connectors). 8 dB plus efficiency in [0.15, 0.35] reproduces the
    // reference operating points at 175 and 200 km.
    double extra_loss = 8.0;           // dB
    double misalignment_angle0 = 0.0;  // rad, initial polarization rotation
    double drift_rate = 0.0;           // rad/sqrt(s), random-walk scale
};

struct DetectorParams {
    double efficiency = 0.25;     // detection probability per arriving photon
    double dark_rate = 10.0;      // counts/s per detector
    double dead_time = 30e-6;     // s
    double pbs_extinction = 20.0; // dB
};

struct SecurityParams {
    double eps_sec = 1e-9;
    double eps_cor = 1e-15;
};

struct Config {
    ProtocolParams protocol;
    ChannelParams channel;
    DetectorParams detector;
    SecurityParams security;

    // receiver policy: assign double clicks randomly instead of discarding
    bool double_click_random = false;

    // polarization feedback loop
    bool feedback_enabled = true;
    double feedback_step_init = 0.05;   // rad
    double feedback_step_floor = 0.002; // rad

    uint32_t max_failed_blocks = 8;     // verification failures before abort
    uint64_t watchdog_slots = 1ULL << 44;  // per-block slot budget
};

// Throws ConfigError naming the violated invariant.
void validate(const Config& cfg);

// Flat JSON document; every key optional, unknown keys rejected.
Config load_config(const std::string& json_text);
std::string save_config(const Config& cfg);

// 10^(-(length*attenuation + extra_loss)/10)
double effective_transmittance(const ChannelParams& ch);

}  // namespace qkd

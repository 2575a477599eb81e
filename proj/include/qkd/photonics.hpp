#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "qkd/config.hpp"
#include "qkd/rng.hpp"

namespace qkd {

enum class Basis : uint8_t { Z = 0, X = 1 };
enum class Intensity : uint8_t { Signal = 0, Decoy = 1 };  // mu1 / mu2

// Alice's per-slot choice. true_photons is ground truth for the test
// harness; it never reaches the protocol path.
struct PulseRecord {
    uint64_t slot = 0;
    Basis basis = Basis::Z;
    uint8_t bit = 0;  // always 0 in X: only |+> is prepared
    Intensity intensity = Intensity::Signal;
    uint32_t true_photons = 0;
};

// Bob's per-slot outcome. The basis is decoded from the 800 ps time bin;
// in X, bit 1 means the |-> port. from_dark is ground truth only.
struct DetectionEvent {
    uint64_t slot = 0;
    Basis basis = Basis::Z;
    uint8_t bit = 0;
    uint8_t detector = 0;  // D0 / D1
    bool from_dark = false;
};

// Rotation between Alice's and Bob's polarization frames. theta feeds the
// Z-basis error, phi only the phase between H and V and hence the X basis.
struct PolarizationState {
    double theta = 0.0;
    double phi = 0.0;
};

double wrap_angle(double a);  // to (-pi, pi]

inline double extinction_floor(double pbs_extinction_db) {
    return std::pow(10.0, -pbs_extinction_db / 10.0);
}
double z_error_prob(const PolarizationState& pol, double floor);  // sin^2(theta) + floor
double x_error_prob(const PolarizationState& pol, double floor);  // sin^2(phi/2) + floor

std::vector<PulseRecord> alice_emit(Rng& rng, const ProtocolParams& p, uint64_t count,
                                    uint64_t first_slot = 0);

// Binomial thinning of the pulse's photons by the channel transmittance.
uint32_t channel_transform(const PulseRecord& pulse, double transmittance, Rng& rng);

struct DetectorClocks {
    std::array<uint64_t, 2> next_free = {0, 0};  // first slot each detector may fire in
};

// Full receiver for one slot: basis routing, PBS projection, dark counts,
// dead time, double-click policy. Reference path; the sampler below must
// stay statistically identical to looping this over every slot.
std::optional<DetectionEvent> bob_detect(uint32_t surviving, const PulseRecord& pulse,
                                         const PolarizationState& pol, const DetectorParams& det,
                                         const ProtocolParams& p, DetectorClocks& clocks, Rng& rng,
                                         bool double_click_random = false);

// Geometric gap (>= 1) to the next per-slot success at probability p.
// Returns nullopt when p <= 0: no detections possible.
std::optional<uint64_t> skip_sample_next_detection(double p, Rng& rng);

struct SampledDetection {
    PulseRecord pulse;
    DetectionEvent event;
};

// Event-driven simulation of the whole quantum layer. Jumps geometrically
// between candidate-click slots instead of visiting all 6.25e8 slots per
// second, fast-forwards spans where both detectors are dead, and applies
// polarization drift piecewise-constantly between landings.
class DetectionSampler {
public:
    DetectionSampler(const Config& cfg, uint64_t seed);

    // EPC compensation subtracted from the drifting frame.
    void set_compensation(double theta_comp, double phi_comp);

    bool detections_possible() const { return p_max_ > 0.0; }

    // Next registered detection at slot < slot_limit. nullopt when the
    // limit is reached (state is kept; calling again with a larger limit
    // resumes exactly) or when no detection can ever occur.
    std::optional<SampledDetection> next(uint64_t slot_limit);

    uint64_t slots_elapsed() const { return cursor_; }
    const PolarizationState& drift_state() const { return drift_; }
    PolarizationState effective_state() const;

private:
    void refresh_probabilities();

    Config cfg_;
    Rng rng_;
    double transmittance_ = 0.0;
    double floor_ = 0.0;
    double p_detect_ = 0.0;        // survival * detector efficiency
    std::array<double, 2> lambda_; // mean detected photons per slot, by intensity
    std::array<double, 2> p_any_;  // P(any candidate click in slot), by intensity
    double p_dark_det_ = 0.0;      // per detector per slot
    double p_max_ = 0.0;
    uint64_t dead_slots_ = 0;

    uint64_t cursor_ = 0;  // next unconsumed slot
    std::optional<uint64_t> pending_landing_;  // jump held across slot-limit boundaries
    DetectorClocks clocks_;
    PolarizationState drift_;
    double theta_comp_ = 0.0, phi_comp_ = 0.0;
    uint64_t last_drift_slot_ = 0;
};

}  // namespace qkd

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "qkd/photonics.hpp"
#include "qkd/rng.hpp"

namespace qkd {

// Electronic polarization controller: three phase plates. Plates 0 and 1
// act on theta, plate 2 only on the H/V phase (commuting-plate model).
struct EPCState {
    std::array<double, 3> plate = {0.0, 0.0, 0.0};  // rad
    double step_size = 0.05;                        // rad
};

// Gaussian random walk with std dev drift_rate*sqrt(dt) on both angles.
PolarizationState drift_step(const PolarizationState& pol, double dt, double drift_rate,
                             Rng& rng);

PolarizationState epc_apply(const PolarizationState& pol, const EPCState& epc);

// Trial-and-error hill climber on a noisy QBER signal. Each window one
// plate is perturbed by +/- step_size (round-robin); the move is kept when
// the scored QBER did not increase, reverted otherwise. Plates 0-1 are
// scored by QBER_Z, plate 2 by QBER_X.
class FeedbackController {
public:
    struct TraceRow {
        uint64_t window;
        double qber_z, qber_x;
        std::array<double, 3> plate;
        double step_size;
        bool kept;  // whether the trial evaluated this window was kept
    };

    FeedbackController(double step_init, double step_floor, double qber_floor, uint64_t seed);

    // Called once per measurement window with the QBERs observed under the
    // current plate settings; returns the settings for the next window.
    const EPCState& step(double qber_z, double qber_x);

    const EPCState& state() const { return epc_; }
    const std::vector<TraceRow>& trace() const { return trace_; }
    void write_trace_csv(const std::string& path) const;

private:
    double score(int plate, double qz, double qx) const { return plate < 2 ? qz : qx; }

    EPCState epc_;
    Rng rng_;
    double step_init_, step_floor_, qber_floor_;
    int next_plate_ = 0;
    int consecutive_reverts_ = 0;
    uint64_t window_ = 0;
    double ewma_z_ = -1.0, ewma_x_ = -1.0;  // smoothed scores; single-window
                                            // spikes must not pump the step

    bool trial_active_ = false;
    int trial_plate_ = 0;
    double trial_delta_ = 0.0;
    double trial_baseline_ = 0.0;

    std::vector<TraceRow> trace_;
};

}  // namespace qkd

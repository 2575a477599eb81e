#include "qkd/polfeedback.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace qkd {

PolarizationState drift_step(const PolarizationState& pol, double dt, double drift_rate,
                             Rng& rng) {
    if (dt <= 0.0) throw std::invalid_argument("drift_step: dt must be positive");
    if (drift_rate <= 0.0) return pol;
    const double sigma = drift_rate * std::sqrt(dt);
    PolarizationState out;
    out.theta = wrap_angle(pol.theta + rng.normal(sigma));
    out.phi = wrap_angle(pol.phi + rng.normal(sigma));
    return out;
}

PolarizationState epc_apply(const PolarizationState& pol, const EPCState& epc) {
    PolarizationState out;
    out.theta = wrap_angle(pol.theta - epc.plate[0] - epc.plate[1]);
    out.phi = wrap_angle(pol.phi - epc.plate[2]);
    return out;
}

FeedbackController::FeedbackController(double step_init, double step_floor, double qber_floor,
                                       uint64_t seed)
    : rng_(seed), step_init_(step_init), step_floor_(step_floor), qber_floor_(qber_floor) {
    epc_.step_size = step_init;
}

const EPCState& FeedbackController::step(double qber_z, double qber_x) {
    bool kept = true;
    if (trial_active_) {
        const double trial_score = score(trial_plate_, qber_z, qber_x);
        if (trial_score <= trial_baseline_) {
            consecutive_reverts_ = 0;  // keep the move
        } else {
            epc_.plate[trial_plate_] -= trial_delta_;
            kept = false;
            if (++consecutive_reverts_ >= 3) {
                epc_.step_size = std::max(epc_.step_size / 2.0, step_floor_);
                consecutive_reverts_ = 0;
            }
        }
    }
    trace_.push_back({window_, qber_z, qber_x, epc_.plate, epc_.step_size, kept});
    ++window_;

    ewma_z_ = ewma_z_ < 0 ? qber_z : 0.8 * ewma_z_ + 0.2 * qber_z;
    ewma_x_ = ewma_x_ < 0 ? qber_x : 0.8 * ewma_x_ + 0.2 * qber_x;

    // A sustained excursion means the walk drifted away; start over with
    // big steps. The smoothed score keeps one noisy window from resetting.
    if (std::max(ewma_z_, ewma_x_) > 2.0 * qber_floor_ && epc_.step_size < step_init_)
        epc_.step_size = step_init_;

    trial_plate_ = next_plate_;
    next_plate_ = (next_plate_ + 1) % 3;
    trial_delta_ = rng_.bernoulli(0.5) ? epc_.step_size : -epc_.step_size;
    // guard against an upward noise spike in the baseline window
    const double ewma = trial_plate_ < 2 ? ewma_z_ : ewma_x_;
    trial_baseline_ = std::min(score(trial_plate_, qber_z, qber_x), ewma);
    epc_.plate[trial_plate_] += trial_delta_;
    trial_active_ = true;
    return epc_;
}

void FeedbackController::write_trace_csv(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open feedback trace file: " + path);
    f << "window,qber_z,qber_x,plate1,plate2,plate3,step_size,kept\n";
    for (const auto& r : trace_)
        f << r.window << ',' << r.qber_z << ',' << r.qber_x << ',' << r.plate[0] << ','
          << r.plate[1] << ',' << r.plate[2] << ',' << r.step_size << ','
          << (r.kept ? 1 : 0) << '\n';
}

}  // namespace qkd

#include "qkd/photonics.hpp"

#include <cmath>

#include "qkd/polfeedback.hpp"

namespace qkd {

namespace {
constexpr double kPi = 3.14159265358979323846;

double clamp01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

uint64_t dead_time_slots(const DetectorParams& det, double rep_rate) {
    if (det.dead_time <= 0.0) return 0;
    return uint64_t(std::ceil(det.dead_time * rep_rate - 1e-9));
}

// Candidate clicks of one slot: detector x time bin, with a flag telling
// whether a real photon contributed to that (detector, bin) cell.
struct SlotCandidates {
    bool cand[2][2] = {{false, false}, {false, false}};  // [detector][bin]
    bool photon[2][2] = {{false, false}, {false, false}};

    void add_photon(uint8_t detector, Basis bin) {
        cand[detector][int(bin)] = true;
        photon[detector][int(bin)] = true;
    }
    void add_dark(uint8_t detector, Basis bin) { cand[detector][int(bin)] = true; }
    bool any() const { return cand[0][0] || cand[0][1] || cand[1][0] || cand[1][1]; }
};

// Per detector the earlier time bin wins (the X arm is delayed); a live
// detector that wins latches its dead time even if the event is later
// discarded as a double click.
std::optional<DetectionEvent> resolve_clicks(const SlotCandidates& c, uint64_t slot,
                                             DetectorClocks& clocks, uint64_t dead_slots,
                                             bool double_click_random, Rng& rng) {
    bool fired[2] = {false, false};
    Basis bin[2] = {Basis::Z, Basis::Z};
    bool from_photon[2] = {false, false};

    for (int d = 0; d < 2; ++d) {
        if (!(c.cand[d][0] || c.cand[d][1])) continue;
        if (slot < clocks.next_free[d]) continue;  // dead, swallowed
        const Basis b = c.cand[d][int(Basis::Z)] ? Basis::Z : Basis::X;
        fired[d] = true;
        bin[d] = b;
        from_photon[d] = c.photon[d][int(b)];
        clocks.next_free[d] = slot + dead_slots;
    }

    int n_fired = int(fired[0]) + int(fired[1]);
    if (n_fired == 0) return std::nullopt;

    uint8_t d;
    if (n_fired == 2) {
        if (!double_click_random) return std::nullopt;  // discard policy
        d = uint8_t(rng.bernoulli(0.5));
    } else {
        d = fired[0] ? 0 : 1;
    }
    DetectionEvent ev;
    ev.slot = slot;
    ev.basis = bin[d];
    ev.bit = d;
    ev.detector = d;
    ev.from_dark = !from_photon[d];
    return ev;
}

// Routing + projection of one arriving photon.
void project_photon(SlotCandidates& c, const PulseRecord& pulse, double p_x_bob, double e_z,
                    double e_x, Rng& rng) {
    const Basis routed = rng.bernoulli(p_x_bob) ? Basis::X : Basis::Z;
    uint8_t outcome;
    if (routed == Basis::Z) {
        if (pulse.basis == Basis::Z)
            outcome = pulse.bit ^ uint8_t(rng.bernoulli(e_z));
        else
            outcome = uint8_t(rng.bernoulli(0.5));  // |+> measured in Z
    } else {
        if (pulse.basis == Basis::X)
            outcome = uint8_t(rng.bernoulli(e_x));  // 1 = |->
        else
            outcome = uint8_t(rng.bernoulli(0.5));  // H/V measured in X
    }
    c.add_photon(outcome, routed);
}

}  // namespace

double wrap_angle(double a) {
    a = std::fmod(a, 2.0 * kPi);
    if (a > kPi) a -= 2.0 * kPi;
    if (a <= -kPi) a += 2.0 * kPi;
    return a;
}

double z_error_prob(const PolarizationState& pol, double floor) {
    const double s = std::sin(pol.theta);
    return clamp01(s * s + floor);
}

double x_error_prob(const PolarizationState& pol, double floor) {
    const double s = std::sin(pol.phi / 2.0);
    return clamp01(s * s + floor);
}

std::vector<PulseRecord> alice_emit(Rng& rng, const ProtocolParams& p, uint64_t count,
                                    uint64_t first_slot) {
    std::vector<PulseRecord> out;
    out.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
        PulseRecord r;
        r.slot = first_slot + i;
        r.basis = rng.bernoulli(p.p_x_alice) ? Basis::X : Basis::Z;
        r.bit = r.basis == Basis::Z ? uint8_t(rng.bernoulli(0.5)) : 0;
        r.intensity = rng.bernoulli(p.p_mu1) ? Intensity::Signal : Intensity::Decoy;
        const double mu = r.intensity == Intensity::Signal ? p.mu1 : p.mu2;
        r.true_photons = rng.poisson(mu);
        out.push_back(r);
    }
    return out;
}

uint32_t channel_transform(const PulseRecord& pulse, double transmittance, Rng& rng) {
    uint32_t surviving = 0;
    for (uint32_t i = 0; i < pulse.true_photons; ++i)
        if (rng.bernoulli(transmittance)) ++surviving;
    return surviving;
}

std::optional<DetectionEvent> bob_detect(uint32_t surviving, const PulseRecord& pulse,
                                         const PolarizationState& pol, const DetectorParams& det,
                                         const ProtocolParams& p, DetectorClocks& clocks, Rng& rng,
                                         bool double_click_random) {
    const double floor = extinction_floor(det.pbs_extinction);
    const double e_z = z_error_prob(pol, floor);
    const double e_x = x_error_prob(pol, floor);

    SlotCandidates c;
    for (uint32_t i = 0; i < surviving; ++i) {
        if (!rng.bernoulli(det.efficiency)) continue;
        project_photon(c, pulse, p.p_x_bob, e_z, e_x, rng);
    }
    const double p_dark = det.dark_rate * 2.0 / p.rep_rate;
    for (int d = 0; d < 2; ++d)
        if (rng.bernoulli(p_dark))
            c.add_dark(uint8_t(d), rng.bernoulli(0.5) ? Basis::X : Basis::Z);

    if (!c.any()) return std::nullopt;
    return resolve_clicks(c, pulse.slot, clocks, dead_time_slots(det, p.rep_rate),
                          double_click_random, rng);
}

std::optional<uint64_t> skip_sample_next_detection(double p, Rng& rng) {
    if (p <= 0.0) return std::nullopt;
    return rng.geometric_slots(p < 1.0 ? p : 1.0);
}

DetectionSampler::DetectionSampler(const Config& cfg, uint64_t seed) : cfg_(cfg), rng_(seed) {
    drift_.theta = cfg.channel.misalignment_angle0;
    drift_.phi = cfg.channel.misalignment_angle0;
    refresh_probabilities();
}

void DetectionSampler::refresh_probabilities() {
    const auto& p = cfg_.protocol;
    const auto& det = cfg_.detector;
    transmittance_ = effective_transmittance(cfg_.channel);
    floor_ = extinction_floor(det.pbs_extinction);
    p_detect_ = transmittance_ * det.efficiency;
    lambda_[0] = p.mu1 * p_detect_;
    lambda_[1] = p.mu2 * p_detect_;
    p_dark_det_ = det.dark_rate * 2.0 / p.rep_rate;
    const double no_dark = (1.0 - p_dark_det_) * (1.0 - p_dark_det_);
    for (int k = 0; k < 2; ++k)
        p_any_[k] = 1.0 - std::exp(-lambda_[k]) * no_dark;
    p_max_ = p_any_[0];  // mu1 > mu2
    dead_slots_ = dead_time_slots(det, p.rep_rate);
}

void DetectionSampler::set_compensation(double theta_comp, double phi_comp) {
    theta_comp_ = theta_comp;
    phi_comp_ = phi_comp;
}

PolarizationState DetectionSampler::effective_state() const {
    return {wrap_angle(drift_.theta - theta_comp_), wrap_angle(drift_.phi - phi_comp_)};
}

std::optional<SampledDetection> DetectionSampler::next(uint64_t slot_limit) {
    if (p_max_ <= 0.0) return std::nullopt;
    const auto& p = cfg_.protocol;

    for (;;) {
        if (!pending_landing_) {
            // Nothing can register while both detectors are dead.
            const uint64_t free_at = std::min(clocks_.next_free[0], clocks_.next_free[1]);
            if (cursor_ < free_at) cursor_ = free_at;
            const uint64_t gap = rng_.geometric_slots(p_max_);
            pending_landing_ =
                gap - 1 > UINT64_MAX - cursor_ ? UINT64_MAX : cursor_ + gap - 1;
        }
        // Held, not redrawn: the stream does not depend on how the caller
        // slices its slot budget.
        if (*pending_landing_ >= slot_limit) return std::nullopt;
        const uint64_t slot = *pending_landing_;
        pending_landing_.reset();
        cursor_ = slot + 1;

        const Intensity k = rng_.bernoulli(p.p_mu1) ? Intensity::Signal : Intensity::Decoy;
        const int ki = int(k);
        if (k == Intensity::Decoy && !rng_.bernoulli(p_any_[1] / p_max_))
            continue;  // thinning to the decoy's lower candidate probability

        // Candidate configuration conditioned on "at least one candidate".
        const double a = 1.0 - std::exp(-lambda_[ki]);
        const double b = p_dark_det_ * (2.0 - p_dark_det_);
        const double w_photon_only = a * (1.0 - b);
        const double w_dark_only = (1.0 - a) * b;
        double u = rng_.uniform() * p_any_[ki];
        const bool has_photons = u < w_photon_only || u >= w_photon_only + w_dark_only;
        const bool has_dark = u >= w_photon_only;

        uint32_t n_det = has_photons ? rng_.poisson_at_least_one(lambda_[ki]) : 0;
        bool dark[2] = {false, false};
        if (has_dark) {
            const double pd = p_dark_det_;
            const double u2 = rng_.uniform() * b;
            if (u2 < pd * (1.0 - pd)) dark[0] = true;
            else if (u2 < 2.0 * pd * (1.0 - pd)) dark[1] = true;
            else dark[0] = dark[1] = true;
        }

        if (cfg_.channel.drift_rate > 0.0 && slot > last_drift_slot_) {
            const double dt = double(slot - last_drift_slot_) / p.rep_rate;
            drift_ = drift_step(drift_, dt, cfg_.channel.drift_rate, rng_);
            last_drift_slot_ = slot;
        }
        const PolarizationState eff = effective_state();
        const double e_z = z_error_prob(eff, floor_);
        const double e_x = x_error_prob(eff, floor_);

        PulseRecord pulse;
        pulse.slot = slot;
        pulse.basis = rng_.bernoulli(p.p_x_alice) ? Basis::X : Basis::Z;
        pulse.bit = pulse.basis == Basis::Z ? uint8_t(rng_.bernoulli(0.5)) : 0;
        pulse.intensity = k;
        const double mu = k == Intensity::Signal ? p.mu1 : p.mu2;
        // undetected photons of the same pulse, for the ground-truth tag
        pulse.true_photons = n_det + rng_.poisson(mu * (1.0 - p_detect_));

        SlotCandidates c;
        for (uint32_t i = 0; i < n_det; ++i)
            project_photon(c, pulse, p.p_x_bob, e_z, e_x, rng_);
        for (int d = 0; d < 2; ++d)
            if (dark[d]) c.add_dark(uint8_t(d), rng_.bernoulli(0.5) ? Basis::X : Basis::Z);

        auto ev = resolve_clicks(c, slot, clocks_, dead_slots_, cfg_.double_click_random, rng_);
        if (ev) return SampledDetection{pulse, *ev};
    }
}

}  // namespace qkd

#include "qkd/finitekey.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "qkd/cascade.hpp"
#include "qkd/photonics.hpp"

namespace qkd {

namespace {
constexpr double kTwoPi = 6.283185307179586;
constexpr double kAnalyticFEc = 1.06;

double clamp_nonneg(double x) { return x > 0.0 ? x : 0.0; }
}  // namespace

double tau(int n, double mu1, double mu2, double p_mu1) {
    if (n < 0) throw std::domain_error("tau: negative photon number");
    double fact = 1.0;
    for (int i = 2; i <= n; ++i) fact *= i;
    const double t1 = p_mu1 * std::exp(-mu1) * std::pow(mu1, n) / fact;
    const double t2 = (1.0 - p_mu1) * std::exp(-mu2) * std::pow(mu2, n) / fact;
    return t1 + t2;
}

double hoeffding_delta(double n, double eps) {
    if (n < 0) throw std::domain_error("hoeffding_delta: negative count");
    if (!(eps > 0.0 && eps < 1.0)) throw std::domain_error("hoeffding_delta: eps outside (0,1)");
    return std::sqrt(n / 2.0 * std::log(1.0 / eps));
}

double gamma_correction(double eps, double lambda, double n, double m) {
    if (lambda <= 0.0 || lambda >= 1.0 || n <= 0.0 || m <= 0.0) return 0.0;
    const double v = lambda * (1.0 - lambda);
    const double scale = (n + m) * v / (n * m);
    const double arg = (n + m) / (kTwoPi * n * m * v * eps * eps);
    const double prod = scale * std::log(arg);
    return prod > 0.0 ? std::sqrt(prod) : 0.0;
}

FiniteKeyBounds compute_bounds(const IntensityTallies& t, const ProtocolParams& p,
                               const SecurityParams& sec) {
    if (!(p.mu1 > p.mu2))
        throw std::domain_error("compute_bounds: degenerate intensities (mu1 <= mu2)");

    const double mu1 = p.mu1, mu2 = p.mu2;
    const double eps = sec.eps_sec / 7.0;

    FiniteKeyBounds b;
    b.tau0 = tau(0, mu1, mu2, p.p_mu1);
    b.tau1 = tau(1, mu1, mu2, p.p_mu1);

    const std::array<double, 2> scale = {std::exp(mu1) / p.p_mu1,
                                         std::exp(mu2) / (1.0 - p.p_mu1)};

    // n^+/- per intensity; the half-width uses the basis total
    auto plus = [&](const std::array<double, 2>& c, double d, int k) {
        return scale[k] * (c[k] + d);
    };
    auto minus = [&](const std::array<double, 2>& c, double d, int k) {
        return scale[k] * clamp_nonneg(c[k] - d);
    };

    const double dZ = hoeffding_delta(t.n_z_total(), eps);
    const double dX = hoeffding_delta(t.n_x_total(), eps);
    const double dmX = hoeffding_delta(t.m_x_total(), eps);
    const double dmZ = hoeffding_delta(t.m_z_total, eps);

    const double span = mu1 - mu2;

    // vacuum: lower from the decoy difference, upper from attributing every
    // error to vacuum clicks (which are wrong half the time)
    b.s_z0_low = clamp_nonneg(b.tau0 * (mu1 * minus(t.n_z, dZ, 1) - mu2 * plus(t.n_z, dZ, 0)) / span);
    b.s_z0_high = std::min(2.0 * (t.m_z_total + dmZ), t.n_z_total());
    b.s_z0_low = std::min(b.s_z0_low, b.s_z0_high);
    b.s_x0_low = clamp_nonneg(b.tau0 * (mu1 * minus(t.n_x, dX, 1) - mu2 * plus(t.n_x, dX, 0)) / span);
    const double s_x0_high = std::min(2.0 * (t.m_x_total() + dmX), t.n_x_total());
    b.s_x0_low = std::min(b.s_x0_low, s_x0_high);

    auto single_low = [&](const std::array<double, 2>& c, double d, double s0_high) {
        const double r2 = (mu2 * mu2) / (mu1 * mu1);
        const double inner = minus(c, d, 1) - r2 * plus(c, d, 0) -
                             ((mu1 * mu1 - mu2 * mu2) / (mu1 * mu1)) * (s0_high / b.tau0);
        return clamp_nonneg(b.tau1 * mu1 / (mu2 * span) * inner);
    };
    b.s_z1_low = single_low(t.n_z, dZ, b.s_z0_high);
    b.s_x1_low = single_low(t.n_x, dX, s_x0_high);

    b.v_x1_high = b.tau1 * (plus(t.m_x, dmX, 0) - minus(t.m_x, dmX, 1)) / span;
    b.v_x1_high = std::clamp(b.v_x1_high, 0.0, b.s_x1_low);

    if (b.s_x1_low <= 0.0) {
        b.phi_z_high = 0.5;
    } else {
        const double ratio = b.v_x1_high / b.s_x1_low;
        b.phi_z_high =
            std::clamp(ratio + gamma_correction(eps, ratio, b.s_x1_low, b.s_z1_low), 0.0, 0.5);
    }
    return b;
}

uint64_t secret_key_length(FiniteKeyBounds& bounds, double lambda_ec_total,
                           const SecurityParams& sec) {
    const double raw = bounds.s_z0_low + bounds.s_z1_low * (1.0 - binary_entropy(bounds.phi_z_high)) -
                       lambda_ec_total - 4.0 * std::log2(7.0 / sec.eps_sec) -
                       std::log2(1.0 / sec.eps_cor);
    bounds.l = raw > 0.0 ? uint64_t(std::floor(raw)) : 0;
    return bounds.l;
}

RateModelResult expected_rate_model(const Config& cfg) {
    const auto& p = cfg.protocol;
    const auto& det = cfg.detector;

    RateModelResult out;

    const double t = effective_transmittance(cfg.channel);
    const double s = t * det.efficiency;
    const double pd = det.dark_rate * 2.0 / p.rep_rate;     // per detector per slot
    const double pd_bin = pd / 2.0;                         // per detector per time bin
    const double dark_bin_any = 1.0 - (1.0 - pd_bin) * (1.0 - pd_bin);

    // residual misalignment: the feedback loop drives it to zero
    PolarizationState pol;
    if (!cfg.feedback_enabled) pol.theta = pol.phi = cfg.channel.misalignment_angle0;
    const double floor = extinction_floor(det.pbs_extinction);
    const double e_z = z_error_prob(pol, floor);
    const double e_x = x_error_prob(pol, floor);

    const std::array<double, 2> mu = {p.mu1, p.mu2};
    const std::array<double, 2> pk = {p.p_mu1, 1.0 - p.p_mu1};

    double raw_click_per_slot = 0;
    std::array<double, 2> pZ{}, pX{}, mZfrac{}, mXfrac{};
    for (int k = 0; k < 2; ++k) {
        const double lam = mu[k] * s;
        const double aZ = 1.0 - std::exp(-lam * (1.0 - p.p_x_bob));
        const double aX = 1.0 - std::exp(-lam * p.p_x_bob);
        const double a = 1.0 - std::exp(-lam);
        raw_click_per_slot += pk[k] * (1.0 - (1.0 - a) * (1.0 - pd) * (1.0 - pd));
        pZ[k] = 1.0 - (1.0 - aZ) * (1.0 - pd_bin) * (1.0 - pd_bin);
        pX[k] = 1.0 - (1.0 - aX) * (1.0 - pd_bin) * (1.0 - pd_bin);
        mZfrac[k] = aZ * e_z + (1.0 - aZ) * dark_bin_any * 0.5;
        mXfrac[k] = aX * e_x + (1.0 - aX) * dark_bin_any * 0.5;
    }

    const double raw_rate = p.rep_rate * raw_click_per_slot;
    const double dead_factor =
        det.dead_time > 0 ? 1.0 / (1.0 + raw_rate * det.dead_time / 2.0) : 1.0;

    double z_sift_per_slot = 0;
    for (int k = 0; k < 2; ++k)
        z_sift_per_slot += pk[k] * (1.0 - p.p_x_alice) * pZ[k] * dead_factor;
    if (z_sift_per_slot <= 0.0) return out;  // no detections, zero rate

    const double slots = double(p.n_z_pa) / z_sift_per_slot;
    out.accumulation_seconds = slots / p.rep_rate;

    IntensityTallies& tal = out.tallies;
    for (int k = 0; k < 2; ++k) {
        tal.n_z[k] = slots * pk[k] * (1.0 - p.p_x_alice) * pZ[k] * dead_factor;
        tal.n_x[k] = slots * pk[k] * p.p_x_alice * pX[k] * dead_factor;
        tal.m_x[k] = slots * pk[k] * p.p_x_alice * mXfrac[k] * dead_factor;
        tal.m_z_total += slots * pk[k] * (1.0 - p.p_x_alice) * mZfrac[k] * dead_factor;
    }

    out.qber_z = tal.m_z_total / tal.n_z_total();
    out.qber_x = tal.n_x_total() > 0 ? tal.m_x_total() / tal.n_x_total() : 0.0;

    out.bounds = compute_bounds(tal, p, cfg.security);
    const double blocks = double(p.n_z_pa) / double(p.n_z_ec);
    const double lambda_ec = kAnalyticFEc * double(p.n_z_pa) * binary_entropy(out.qber_z) +
                             kVerifyHashBits * blocks;
    out.l = secret_key_length(out.bounds, lambda_ec, cfg.security);
    out.skr_bps = double(out.l) / out.accumulation_seconds;
    return out;
}

namespace {

struct SimplexPoint {
    std::array<double, 3> x;
    double neg_skr;
};

double rate_at(const Config& base, double distance_km, const std::array<double, 3>& x) {
    if (!(x[0] >= 0.05 && x[0] <= 0.9)) return -1.0;
    if (!(x[1] >= 0.01 && x[1] < x[0])) return -1.0;
    if (!(x[2] >= 0.1 && x[2] <= 0.95)) return -1.0;
    Config c = base;
    c.channel.fiber_length = distance_km;
    c.protocol.mu1 = x[0];
    c.protocol.mu2 = x[1];
    c.protocol.p_mu1 = x[2];
    return expected_rate_model(c).skr_bps;
}

}  // namespace

OptimizeResult optimize_params(double distance_km, const Config& base) {
    if (distance_km < 0) throw std::domain_error("optimize_params: negative distance");

    std::array<double, 3> best{base.protocol.mu1, base.protocol.mu2, base.protocol.p_mu1};
    double best_rate = rate_at(base, distance_km, best);
    if (best_rate < 0) best_rate = 0;

    for (double mu1 = 0.05; mu1 <= 0.9 + 1e-12; mu1 += 0.05) {
        for (double frac = 0.08; frac <= 0.88 + 1e-12; frac += 0.08) {
            const double mu2 = std::max(0.01, frac * mu1);
            if (mu2 >= mu1) continue;
            for (double pm = 0.1; pm <= 0.95 + 1e-12; pm += 0.05) {
                const double r = rate_at(base, distance_km, {mu1, mu2, pm});
                if (r > best_rate) {
                    best_rate = r;
                    best = {mu1, mu2, pm};
                }
            }
        }
    }

    // downhill simplex refinement around the best grid point
    if (best_rate > 0) {
        auto f = [&](const std::array<double, 3>& x) {
            const double r = rate_at(base, distance_km, x);
            return r < 0 ? 1e300 : -r;
        };
        std::vector<SimplexPoint> sx(4);
        sx[0] = {best, f(best)};
        for (int i = 1; i < 4; ++i) {
            auto x = best;
            x[i - 1] *= 0.93;
            if (i == 2) x[1] = std::max(0.01, x[1]);
            sx[i] = {x, f(x)};
        }
        for (int iter = 0; iter < 250; ++iter) {
            std::sort(sx.begin(), sx.end(),
                      [](const SimplexPoint& a, const SimplexPoint& b) { return a.neg_skr < b.neg_skr; });
            if (std::abs(sx[3].neg_skr - sx[0].neg_skr) <=
                1e-9 * (std::abs(sx[0].neg_skr) + 1e-300))
                break;
            std::array<double, 3> cen{};
            for (int i = 0; i < 3; ++i)
                cen = {cen[0] + sx[i].x[0] / 3, cen[1] + sx[i].x[1] / 3, cen[2] + sx[i].x[2] / 3};
            auto combine = [&](double coef) {
                std::array<double, 3> x;
                for (int d = 0; d < 3; ++d) x[d] = cen[d] + coef * (sx[3].x[d] - cen[d]);
                return x;
            };
            auto xr = combine(-1.0);
            const double fr = f(xr);
            if (fr < sx[0].neg_skr) {
                auto xe = combine(-2.0);
                const double fe = f(xe);
                sx[3] = fe < fr ? SimplexPoint{xe, fe} : SimplexPoint{xr, fr};
            } else if (fr < sx[2].neg_skr) {
                sx[3] = {xr, fr};
            } else {
                auto xc = combine(0.5);
                const double fc = f(xc);
                if (fc < sx[3].neg_skr) {
                    sx[3] = {xc, fc};
                } else {
                    for (int i = 1; i < 4; ++i) {
                        for (int d = 0; d < 3; ++d)
                            sx[i].x[d] = sx[0].x[d] + 0.5 * (sx[i].x[d] - sx[0].x[d]);
                        sx[i].neg_skr = f(sx[i].x);
                    }
                }
            }
        }
        std::sort(sx.begin(), sx.end(),
                  [](const SimplexPoint& a, const SimplexPoint& b) { return a.neg_skr < b.neg_skr; });
        if (-sx[0].neg_skr > best_rate) {
            best = sx[0].x;
            best_rate = -sx[0].neg_skr;
        }
    }

    OptimizeResult r;
    r.mu1 = best[0];
    r.mu2 = best[1];
    r.p_mu1 = best[2];
    r.skr_bps = best_rate > 0 ? best_rate : 0.0;
    return r;
}

}  // namespace qkd

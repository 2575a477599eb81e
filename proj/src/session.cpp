#include "qkd/session.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "qkd/polfeedback.hpp"
#include "qkd/privamp.hpp"

namespace qkd {

namespace {

LinkMessage abort_message(uint8_t code, const std::string& reason) {
    return {MsgType::Abort, encode_abort({code, reason})};
}

// Bob's adapter: Cascade parity queries for one block over the classical
// channel.
class LinkParityChannel : public ParityChannel {
public:
    LinkParityChannel(RequestChannel& ch, uint32_t block_idx) : ch_(ch), block_(block_idx) {}

    BitVec open_pass(uint32_t pass, uint64_t perm_seed, uint32_t block_size) override {
        ParityReqMsg req;
        req.block_idx = block_;
        req.pass = uint8_t(pass);
        req.kind = 0;
        req.perm_seed = perm_seed;
        req.block_size = block_size;
        return roundtrip(req);
    }

    BitVec parities(uint32_t pass, const std::vector<ParityRange>& ranges) override {
        ParityReqMsg req;
        req.block_idx = block_;
        req.pass = uint8_t(pass);
        req.kind = 1;
        req.ranges = ranges;
        return roundtrip(req);
    }

private:
    BitVec roundtrip(const ParityReqMsg& req) {
        const LinkMessage reply = ch_.call({MsgType::ParityReq, encode_parity_req(req)});
        if (reply.type == MsgType::Abort)
            throw ProtocolError("peer abort: " + decode_abort(reply.payload).reason);
        if (reply.type != MsgType::ParityResp)
            throw ProtocolError("unexpected reply to parity request");
        return decode_parity_resp(reply.payload).bits;
    }

    RequestChannel& ch_;
    uint32_t block_;
};

}  // namespace

AliceEndpoint::AliceEndpoint(const Config& cfg) : cfg_(cfg) {}

void AliceEndpoint::add_pulses(const std::vector<PulseRecord>& pulses) {
    std::lock_guard<std::mutex> lock(mu_);
    for (const auto& p : pulses) {
        store_.add(p);
        last_slot_ = std::max(last_slot_, p.slot);
    }
}

LinkMessage AliceEndpoint::handle(const LinkMessage& request) {
    std::lock_guard<std::mutex> lock(mu_);
    try {
        switch (request.type) {
            case MsgType::BasisAnnounce: return on_announce(request);
            case MsgType::ParityReq: return on_parity_req(request);
            case MsgType::Verify: return on_verify(request);
            case MsgType::SessionStats:
                if (!request.payload.empty())
                    throw ProtocolError("unexpected stats payload from peer");
                return on_stats_request();
            case MsgType::PaSeed: return on_pa_seed(request);
            case MsgType::Abort: return request;  // echo
            default: throw ProtocolError("unexpected message type");
        }
    } catch (const ProtocolError& e) {
        return abort_message(1, e.what());
    } catch (const WireError& e) {
        return abort_message(2, e.what());
    }
}

LinkMessage AliceEndpoint::on_announce(const LinkMessage& m) {
    const BasisAnnounce ann = decode_basis_announce(m.payload);
    const SiftReply reply = alice_process_announcement(ann, store_, live_);
    return {MsgType::SiftReply, encode_sift_reply(reply)};
}

LinkMessage AliceEndpoint::on_parity_req(const LinkMessage& m) {
    const ParityReqMsg req = decode_parity_req(m.payload);
    const uint64_t n_ec = cfg_.protocol.n_z_ec;
    if (req.kind == 0) {
        if (!block_server_ || serving_block_ != req.block_idx) {
            if (live_.raw_key_alice.size() - consumed_ < n_ec)
                throw ProtocolError("parity request before the block is filled");
            block_server_.emplace(live_.raw_key_alice.slice(consumed_, n_ec));
            serving_block_ = req.block_idx;
        }
        ParityRespMsg resp{block_server_->open_pass(req.pass, req.perm_seed, req.block_size)};
        window_parity_bits_ += resp.bits.size();
        return {MsgType::ParityResp, encode_parity_resp(resp)};
    }
    if (!block_server_ || serving_block_ != req.block_idx)
        throw ProtocolError("parity range query for unknown block");
    ParityRespMsg resp{block_server_->parities(req.pass, req.ranges)};
    window_parity_bits_ += resp.bits.size();
    return {MsgType::ParityResp, encode_parity_resp(resp)};
}

LinkMessage AliceEndpoint::on_verify(const LinkMessage& m) {
    const VerifyMsg v = decode_verify(m.payload);
    if (!block_server_ || serving_block_ != v.block_idx)
        throw ProtocolError("verify for unknown block");

    const bool ok = block_hash64(block_server_->block(), v.hash_seed) == v.hash;
    if (ok) {
        consumed_ += cfg_.protocol.n_z_ec;
        ledger_parity_bits_ += window_parity_bits_;
        m_z_total_ += v.corrected;
        blocks_ok_ += 1;
        committed_n_ = live_.n;
        committed_m_ = live_.m;
        committed_raw_len_ = live_.raw_key_alice.size();
    } else {
        // drop everything announced since the last verified block
        live_.n = committed_n_;
        live_.m = committed_m_;
        live_.raw_key_alice.resize(committed_raw_len_);
        blocks_failed_ += 1;
    }
    window_parity_bits_ = 0;
    block_server_.reset();
    return {MsgType::VerifyAck, encode_verify_ack({v.block_idx, uint8_t(ok)})};
}

LinkMessage AliceEndpoint::on_stats_request() {
    const auto& p = cfg_.protocol;
    const uint64_t k = p.n_z_pa / p.n_z_ec;
    if (blocks_ok_ != k)
        throw ProtocolError("stats requested before all blocks verified");

    IntensityTallies t;
    for (int i = 0; i < 2; ++i) {
        t.n_z[i] = double(committed_n_[int(Basis::Z)][i]);
        t.n_x[i] = double(committed_n_[int(Basis::X)][i]);
        t.m_x[i] = double(committed_m_[int(Basis::X)][i]);
    }
    t.m_z_total = double(m_z_total_);

    FiniteKeyBounds b = compute_bounds(t, p, cfg_.security);
    const uint64_t lambda = ledger_parity_bits_ + uint64_t(kVerifyHashBits) * blocks_ok_;
    secret_key_length(b, double(lambda), cfg_.security);

    stats_.s_z0_low = b.s_z0_low;
    stats_.s_z0_high = b.s_z0_high;
    stats_.s_z1_low = b.s_z1_low;
    stats_.s_x0_low = b.s_x0_low;
    stats_.s_x1_low = b.s_x1_low;
    stats_.v_x1_high = b.v_x1_high;
    stats_.phi_z_high = b.phi_z_high;
    stats_.tau0 = b.tau0;
    stats_.tau1 = b.tau1;
    stats_.l = b.l;
    stats_.lambda_ec = lambda;
    stats_.qber_z = double(m_z_total_) / double(blocks_ok_ * p.n_z_ec);
    const double nx = t.n_x_total();
    stats_.qber_x = nx > 0 ? t.m_x_total() / nx : 0.0;
    stats_.blocks_failed = blocks_failed_;
    stats_.slots_sent = last_slot_ + 1;
    stats_ready_ = true;
    return {MsgType::SessionStats, encode_session_stats(stats_)};
}

LinkMessage AliceEndpoint::on_pa_seed(const LinkMessage& m) {
    const PaSeedMsg seed = decode_pa_seed(m.payload);
    if (!stats_ready_) throw ProtocolError("PA seed before session stats");
    if (seed.l != stats_.l) throw ProtocolError("PA length does not match the computed bound");
    const uint64_t n_pa = cfg_.protocol.n_z_pa;
    if (seed.l > 0) {
        if (seed.seed_bits.size() != n_pa + seed.l - 1)
            throw ProtocolError("PA seed has the wrong length");
        secret_ = toeplitz_hash(live_.raw_key_alice.slice(0, n_pa), seed.seed_bits, seed.l);
    } else {
        secret_ = BitVec();
    }
    pa_done_ = true;
    return {MsgType::VerifyAck, encode_verify_ack({kFinalAckBlock, 1})};
}

namespace {

struct EventTrace {
    std::ofstream f;
    explicit EventTrace(const std::string& path) {
        if (path.empty()) return;
        f.open(path);
        if (!f) throw std::runtime_error("cannot open event trace file: " + path);
        f << "# oracle columns: bit_sent,intensity,from_dark,true_photons\n";
        f << "slot,basis,bit_sent,intensity,bit_measured,detector,from_dark,true_photons\n";
    }
    void row(const SampledDetection& d) {
        if (!f.is_open()) return;
        f << d.event.slot << ',' << (d.event.basis == Basis::Z ? 'Z' : 'X') << ','
          << int(d.pulse.bit) << ',' << (d.pulse.intensity == Intensity::Signal ? "mu1" : "mu2")
          << ',' << int(d.event.bit) << ',' << int(d.event.detector) << ','
          << int(d.event.from_dark) << ',' << d.pulse.true_photons << '\n';
    }
};

}  // namespace

SessionResult run_session(const Config& cfg, uint64_t seed, const SessionOptions& opts) {
    validate(cfg);
    const auto& p = cfg.protocol;
    const uint64_t n_ec = p.n_z_ec;
    const uint64_t k = p.n_z_pa / p.n_z_ec;

    Rng master(seed);
    const uint64_t sim_seed = master.next_u64();
    Rng bob_rng(master.next_u64());
    const uint64_t fb_seed = master.next_u64();

    DetectionSampler sampler(cfg, sim_seed);

    AliceEndpoint local_alice(cfg);
    AliceEndpoint* alice = opts.remote_alice ? opts.remote_alice : &local_alice;
    LocalChannel local_channel(*alice, opts.tap);
    RequestChannel& ch = opts.channel ? *opts.channel : local_channel;

    const double qber_floor = extinction_floor(cfg.detector.pbs_extinction) + 0.002;
    FeedbackController feedback(cfg.feedback_step_init, cfg.feedback_step_floor, qber_floor,
                                fb_seed);

    SessionResult out;
    out.report.distance_km = cfg.channel.fiber_length;

    auto abort_session = [&](const std::string& reason) -> SessionResult& {
        out.report.aborted = true;
        out.report.abort_reason = reason;
        out.report.slots_sent = sampler.slots_elapsed();
        try {
            ch.call(abort_message(1, reason));
        } catch (...) {
        }
        return out;
    };

    if (!sampler.detections_possible()) return abort_session("no detections possible");

    EventTrace trace(opts.event_trace_csv);

    SiftedStats bob_stats;
    BitVec& bob_raw = bob_stats.raw_key_bob;
    size_t consumed = 0;
    size_t window_start_len = 0;
    BitVec pa_input;

    uint64_t ledger = 0;
    uint64_t m_z_total = 0;
    uint32_t blocks_ok = 0, blocks_failed = 0, attempt = 0;
    double qber_sum = 0;
    uint32_t qber_count = 0;
    uint64_t wx_n = 0, wx_m = 0;  // X tallies of the current feedback window

    constexpr size_t kAnnounceBatch = 4096;

    try {
        while (blocks_ok < k) {
            while (bob_raw.size() - consumed < n_ec) {
                std::vector<PulseRecord> pulses;
                std::vector<DetectionEvent> events;
                pulses.reserve(kAnnounceBatch);
                events.reserve(kAnnounceBatch);
                for (size_t i = 0; i < kAnnounceBatch; ++i) {
                    auto d = sampler.next(sampler.slots_elapsed() + cfg.watchdog_slots);
                    if (!d) {
                        if (!events.empty()) break;
                        return abort_session(sampler.detections_possible()
                                                 ? "watchdog: no detections within slot budget"
                                                 : "no detections possible");
                    }
                    trace.row(*d);
                    pulses.push_back(d->pulse);
                    events.push_back(d->event);
                }
                alice->add_pulses(pulses);

                const BasisAnnounce ann = make_announcement(events);
                const LinkMessage reply =
                    ch.call({MsgType::BasisAnnounce, encode_basis_announce(ann)});
                if (reply.type == MsgType::Abort)
                    return abort_session("peer abort: " + decode_abort(reply.payload).reason);
                if (reply.type != MsgType::SiftReply)
                    return abort_session("unexpected reply to basis announcement");

                const auto nx0 = bob_stats.n_total(Basis::X), mx0 = bob_stats.m_total(Basis::X);
                bob_apply_reply(events, decode_sift_reply(reply.payload), bob_stats);
                wx_n += bob_stats.n_total(Basis::X) - nx0;
                wx_m += bob_stats.m_total(Basis::X) - mx0;
            }

            const double q_prior =
                qber_count == 0 ? 0.03 : std::clamp(qber_sum / qber_count, 0.001, 0.49);
            LinkParityChannel parity_ch(ch, attempt);
            const ECBlockResult res =
                cascade_correct(bob_raw.slice(consumed, n_ec), q_prior, parity_ch, bob_rng);
            qber_sum += res.qber_estimate;
            qber_count += 1;
            const auto corrected = uint32_t(std::llround(res.qber_estimate * double(n_ec)));

            VerifyMsg vm;
            vm.block_idx = attempt;
            vm.hash_seed = bob_rng.next_u64();
            vm.hash = block_hash64(res.corrected_bits, vm.hash_seed);
            vm.corrected = corrected;
            const LinkMessage ackm = ch.call({MsgType::Verify, encode_verify(vm)});
            if (ackm.type == MsgType::Abort)
                return abort_session("peer abort: " + decode_abort(ackm.payload).reason);
            const VerifyAckMsg ack = decode_verify_ack(ackm.payload);

            if (ack.ok) {
                pa_input.append(res.corrected_bits);
                consumed += n_ec;
                window_start_len = bob_raw.size();
                ledger += res.leaked_bits + kVerifyHashBits;
                m_z_total += corrected;
                blocks_ok += 1;

                if (cfg.feedback_enabled) {
                    const double qx = wx_n > 0 ? double(wx_m) / double(wx_n) : 0.5;
                    const EPCState& epc = feedback.step(res.qber_estimate, qx);
                    sampler.set_compensation(epc.plate[0] + epc.plate[1], epc.plate[2]);
                    wx_n = wx_m = 0;
                }
            } else {
                bob_raw.resize(window_start_len);
                blocks_failed += 1;
                wx_n = wx_m = 0;
                if (blocks_failed > cfg.max_failed_blocks)
                    return abort_session("verification failure budget exceeded");
            }
            attempt += 1;
        }

        // session-level reconciliation efficiency check
        const double q_cum = double(m_z_total) / double(k * n_ec);
        if (q_cum >= 0.005) {
            const double f_ec =
                double(ledger - uint64_t(kVerifyHashBits) * k) / (double(k * n_ec) * binary_entropy(q_cum));
            if (f_ec > p.f_ec_cap) {
                std::ostringstream msg;
                msg << "reconciliation efficiency " << f_ec << " above cap " << p.f_ec_cap;
                return abort_session(msg.str());
            }
        }

        const LinkMessage statm = ch.call({MsgType::SessionStats, {}});
        if (statm.type == MsgType::Abort)
            return abort_session("peer abort: " + decode_abort(statm.payload).reason);
        const SessionStatsMsg stats = decode_session_stats(statm.payload);
        if (stats.l > p.n_z_pa) return abort_session("peer reported an oversized key length");

        PaSeedMsg pam;
        pam.l = uint32_t(stats.l);
        const ToeplitzSeed ts = make_toeplitz_seed(bob_rng.next_u64(), 0, p.n_z_pa, stats.l);
        pam.seed_bits = ts.bits;
        const LinkMessage pack = ch.call({MsgType::PaSeed, encode_pa_seed(pam)});
        if (pack.type == MsgType::Abort)
            return abort_session("peer abort: " + decode_abort(pack.payload).reason);
        if (decode_verify_ack(pack.payload).ok != 1)
            return abort_session("peer rejected the PA seed");

        out.bob_secret = stats.l > 0 ? toeplitz_hash(pa_input, ts.bits, stats.l) : BitVec();
        if (!opts.remote_alice) out.alice_secret = local_alice.secret_key();

        out.report.l_total = stats.l;
        out.report.qber_z = stats.qber_z;
        out.report.qber_x = stats.qber_x;
        out.report.blocks_failed = stats.blocks_failed;
        out.report.lambda_ec = stats.lambda_ec;
        out.report.bounds.s_z0_low = stats.s_z0_low;
        out.report.bounds.s_z0_high = stats.s_z0_high;
        out.report.bounds.s_z1_low = stats.s_z1_low;
        out.report.bounds.s_x0_low = stats.s_x0_low;
        out.report.bounds.s_x1_low = stats.s_x1_low;
        out.report.bounds.v_x1_high = stats.v_x1_high;
        out.report.bounds.phi_z_high = stats.phi_z_high;
        out.report.bounds.tau0 = stats.tau0;
        out.report.bounds.tau1 = stats.tau1;
        out.report.bounds.l = stats.l;
        out.report.slots_sent = sampler.slots_elapsed();
        out.report.skr = double(stats.l) / (double(out.report.slots_sent) / p.rep_rate);
    } catch (const ProtocolError& e) {
        return abort_session(e.what());
    } catch (const WireError& e) {
        return abort_session(e.what());
    }

    if (!opts.feedback_trace_csv.empty()) feedback.write_trace_csv(opts.feedback_trace_csv);
    return out;
}

std::vector<CurveRow> curve(const Config& base, const std::vector<double>& distances,
                            bool analytic, bool optimize, uint64_t seed) {
    if (distances.empty()) throw std::invalid_argument("curve: empty distance list");
    std::vector<CurveRow> rows;
    rows.reserve(distances.size());
    for (size_t i = 0; i < distances.size(); ++i) {
        const double d = distances[i];
        Config cfg = base;
        cfg.channel.fiber_length = d;
        if (optimize) {
            const OptimizeResult opt = optimize_params(d, base);
            if (opt.skr_bps > 0) {
                cfg.protocol.mu1 = opt.mu1;
                cfg.protocol.mu2 = opt.mu2;
                cfg.protocol.p_mu1 = opt.p_mu1;
            }
        }
        CurveRow row;
        row.distance_km = d;
        row.mu1 = cfg.protocol.mu1;
        row.mu2 = cfg.protocol.mu2;
        row.p_mu1 = cfg.protocol.p_mu1;
        try {
            if (analytic) {
                const RateModelResult rm = expected_rate_model(cfg);
                row.skr_bps = rm.skr_bps;
                row.qber_z = rm.qber_z;
                row.qber_x = rm.qber_x;
                row.l_total = rm.l;
            } else {
                const SessionResult sr = run_session(cfg, seed + i);
                if (sr.report.aborted) {
                    row.skr_bps = 0;
                    row.cause = sr.report.abort_reason;
                } else {
                    row.skr_bps = sr.report.skr;
                    row.qber_z = sr.report.qber_z;
                    row.qber_x = sr.report.qber_x;
                    row.l_total = sr.report.l_total;
                }
            }
        } catch (const std::exception& e) {
            row.skr_bps = 0;
            row.cause = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string curve_csv(const std::vector<CurveRow>& rows) {
    std::ostringstream os;
    os << "distance_km,skr_bps,qber_z,qber_x,l_total,mu1,mu2,p_mu1,cause\n";
    for (const auto& r : rows)
        os << r.distance_km << ',' << r.skr_bps << ',' << r.qber_z << ',' << r.qber_x << ','
           << r.l_total << ',' << r.mu1 << ',' << r.mu2 << ',' << r.p_mu1 << ',' << r.cause
           << '\n';
    return os.str();
}

}  // namespace qkd

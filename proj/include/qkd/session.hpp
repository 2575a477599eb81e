#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "qkd/cascade.hpp"
#include "qkd/config.hpp"
#include "qkd/finitekey.hpp"
#include "qkd/photonics.hpp"
#include "qkd/sift.hpp"
#include "qkd/transport.hpp"

namespace qkd {

struct SessionReport {
    double distance_km = 0;
    double skr = 0;  // secret bits per second of source time
    double qber_z = 0, qber_x = 0;
    uint64_t l_total = 0;
    uint32_t blocks_failed = 0;
    FiniteKeyBounds bounds;
    uint64_t lambda_ec = 0;
    uint64_t slots_sent = 0;
    bool aborted = false;
    std::string abort_reason;
};

struct SessionResult {
    SessionReport report;
    BitVec alice_secret;
    BitVec bob_secret;
};

// Alice: parity server, sift responder, bounds computation. Collection is
// window-aligned: everything announced since the last verified block is
// rolled back wholesale when verification fails.
class AliceEndpoint : public MessageServer {
public:
    explicit AliceEndpoint(const Config& cfg);

    // Source-side knowledge of emitted pulses (no photon numbers).
    void add_pulses(const std::vector<PulseRecord>& pulses);

    LinkMessage handle(const LinkMessage& request) override;

    const BitVec& secret_key() const { return secret_; }
    bool pa_done() const { return pa_done_; }
    const SessionStatsMsg& stats() const { return stats_; }

private:
    LinkMessage on_announce(const LinkMessage& m);
    LinkMessage on_parity_req(const LinkMessage& m);
    LinkMessage on_verify(const LinkMessage& m);
    LinkMessage on_stats_request();
    LinkMessage on_pa_seed(const LinkMessage& m);

    Config cfg_;
    std::mutex mu_;  // add_pulses may come from another thread (TCP demo)

    PulseStore store_;
    SiftedStats live_;  // tallies plus the full raw-key buffer, in order
    // committed state at the last verified block; the live raw key always
    // extends the committed prefix, so a rollback is a truncation
    std::array<std::array<uint64_t, 2>, 2> committed_n_{{{0, 0}, {0, 0}}};
    std::array<std::array<uint64_t, 2>, 2> committed_m_{{{0, 0}, {0, 0}}};
    size_t committed_raw_len_ = 0;
    size_t consumed_ = 0;  // bits already bound to verified blocks

    std::optional<BlockParityServer> block_server_;
    uint32_t serving_block_ = 0;
    uint64_t window_parity_bits_ = 0;

    uint64_t ledger_parity_bits_ = 0;  // committed blocks only
    uint64_t m_z_total_ = 0;
    uint32_t blocks_ok_ = 0, blocks_failed_ = 0;
    uint64_t last_slot_ = 0;

    SessionStatsMsg stats_;
    bool stats_ready_ = false;
    BitVec secret_;
    bool pa_done_ = false;
};

struct SessionOptions {
    MessageTap* tap = nullptr;
    RequestChannel* channel = nullptr;       // default: in-process to a local Alice
    AliceEndpoint* remote_alice = nullptr;   // Alice behind an external channel
    std::string event_trace_csv;
    std::string feedback_trace_csv;
};

// Full protocol run: collect -> sift -> Cascade x k -> bounds -> PA.
// (config, seed) determines everything including the transcript.
SessionResult run_session(const Config& cfg, uint64_t seed, const SessionOptions& opts = {});

struct CurveRow {
    double distance_km = 0;
    double skr_bps = 0;
    double qber_z = 0, qber_x = 0;
    uint64_t l_total = 0;
    double mu1 = 0, mu2 = 0, p_mu1 = 0;
    std::string cause;  // empty on success
};

std::vector<CurveRow> curve(const Config& base, const std::vector<double>& distances,
                            bool analytic, bool optimize, uint64_t seed);
std::string curve_csv(const std::vector<CurveRow>& rows);

}  // namespace qkd

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qkd/bitvec.hpp"
#include "qkd/cascade.hpp"
#include "qkd/errors.hpp"
#include "qkd/finitekey.hpp"
#include "qkd/sift.hpp"

namespace qkd {

enum class MsgType : uint8_t {
    BasisAnnounce = 1,
    SiftReply = 2,
    ParityReq = 3,
    ParityResp = 4,
    Verify = 5,
    VerifyAck = 6,
    PaSeed = 7,
    SessionStats = 8,
    Abort = 9,
};

struct LinkMessage {
    MsgType type;
    std::vector<uint8_t> payload;
};

// Framing: [type: 1 byte][length: 4 bytes LE][payload]. decode throws
// WireError on unknown type, truncation or trailing bytes.
std::vector<uint8_t> frame_encode(const LinkMessage& msg);
LinkMessage frame_decode(const std::vector<uint8_t>& bytes);

// Streaming helper: bytes needed for the frame starting at the buffer
// head, or 0 if the header itself is still incomplete.
size_t frame_size_hint(const uint8_t* data, size_t avail);

// --- payload bodies ---------------------------------------------------------

struct ParityReqMsg {
    uint32_t block_idx = 0;
    uint8_t pass = 0;
    uint8_t kind = 0;  // 0 = open pass, 1 = range query
    uint64_t perm_seed = 0;   // open only
    uint32_t block_size = 0;  // open only
    std::vector<ParityRange> ranges;  // range query only
};

struct ParityRespMsg {
    BitVec bits;
};

struct VerifyMsg {
    uint32_t block_idx = 0;
    uint64_t hash_seed = 0;
    uint64_t hash = 0;
    uint32_t corrected = 0;  // errors fixed in the block
};

struct VerifyAckMsg {
    uint32_t block_idx = 0;
    uint8_t ok = 0;
};
inline constexpr uint32_t kFinalAckBlock = 0xFFFFFFFF;

struct PaSeedMsg {
    uint32_t l = 0;
    BitVec seed_bits;  // length carried as a 64-bit bit count
    uint32_t prng_id = 0;
};

struct SessionStatsMsg {
    double s_z0_low = 0, s_z0_high = 0, s_z1_low = 0;
    double s_x0_low = 0, s_x1_low = 0, v_x1_high = 0;
    double phi_z_high = 0, tau0 = 0, tau1 = 0;
    uint64_t l = 0;
    uint64_t lambda_ec = 0;
    double qber_z = 0, qber_x = 0;
    uint32_t blocks_failed = 0;
    uint64_t slots_sent = 0;
};

struct AbortMsg {
    uint8_t code = 0;
    std::string reason;
};

std::vector<uint8_t> encode_basis_announce(const BasisAnnounce& m);
BasisAnnounce decode_basis_announce(const std::vector<uint8_t>& p);

std::vector<uint8_t> encode_sift_reply(const SiftReply& m);
SiftReply decode_sift_reply(const std::vector<uint8_t>& p);

std::vector<uint8_t> encode_parity_req(const ParityReqMsg& m);
ParityReqMsg decode_parity_req(const std::vector<uint8_t>& p);

std::vector<uint8_t> encode_parity_resp(const ParityRespMsg& m);
ParityRespMsg decode_parity_resp(const std::vector<uint8_t>& p);

std::vector<uint8_t> encode_verify(const VerifyMsg& m);
VerifyMsg decode_verify(const std::vector<uint8_t>& p);

std::vector<uint8_t> encode_verify_ack(const VerifyAckMsg& m);
VerifyAckMsg decode_verify_ack(const std::vector<uint8_t>& p);

std::vector<uint8_t> encode_pa_seed(const PaSeedMsg& m);
PaSeedMsg decode_pa_seed(const std::vector<uint8_t>& p);

std::vector<uint8_t> encode_session_stats(const SessionStatsMsg& m);
SessionStatsMsg decode_session_stats(const std::vector<uint8_t>& p);

std::vector<uint8_t> encode_abort(const AbortMsg& m);
AbortMsg decode_abort(const std::vector<uint8_t>& p);

}  // namespace qkd

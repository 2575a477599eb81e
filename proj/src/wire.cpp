#include "qkd/wire.hpp"

#include <cstring>

namespace qkd {

namespace {

struct Writer {
    std::vector<uint8_t> buf;
    void u8(uint8_t v) { buf.push_back(v); }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back(uint8_t(v >> (8 * i)));
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) buf.push_back(uint8_t(v >> (8 * i)));
    }
    void f64(double v) {
        uint64_t b;
        std::memcpy(&b, &v, 8);
        u64(b);
    }
    void bytes(const std::vector<uint8_t>& v) { buf.insert(buf.end(), v.begin(), v.end()); }
};

struct Reader {
    const uint8_t* p;
    size_t n, pos = 0;
    Reader(const std::vector<uint8_t>& v) : p(v.data()), n(v.size()) {}
    void need(size_t k) const {
        if (pos + k > n) throw WireError("truncated message payload");
    }
    uint8_t u8() {
        need(1);
        return p[pos++];
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(p[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= uint64_t(p[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() {
        const uint64_t b = u64();
        double v;
        std::memcpy(&v, &b, 8);
        return v;
    }
    const uint8_t* raw(size_t k) {
        need(k);
        const uint8_t* r = p + pos;
        pos += k;
        return r;
    }
    void done() const {
        if (pos != n) throw WireError("trailing bytes in message payload");
    }
};

bool known_type(uint8_t t) {
    return t >= uint8_t(MsgType::BasisAnnounce) && t <= uint8_t(MsgType::Abort);
}

}  // namespace

std::vector<uint8_t> frame_encode(const LinkMessage& msg) {
    Writer w;
    w.u8(uint8_t(msg.type));
    w.u32(uint32_t(msg.payload.size()));
    w.bytes(msg.payload);
    return w.buf;
}

LinkMessage frame_decode(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 5) throw WireError("truncated frame header");
    if (!known_type(bytes[0])) throw WireError("unknown message type");
    uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= uint32_t(bytes[1 + i]) << (8 * i);
    if (bytes.size() != size_t(5) + len) throw WireError("frame length mismatch");
    LinkMessage m;
    m.type = MsgType(bytes[0]);
    m.payload.assign(bytes.begin() + 5, bytes.end());
    return m;
}

size_t frame_size_hint(const uint8_t* data, size_t avail) {
    if (avail < 5) return 0;
    uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= uint32_t(data[1 + i]) << (8 * i);
    return size_t(5) + len;
}

std::vector<uint8_t> encode_basis_announce(const BasisAnnounce& m) {
    Writer w;
    w.u32(uint32_t(m.entries.size()));
    for (const auto& e : m.entries) {
        w.u64(e.slot);
        w.u8(uint8_t(e.basis));
        w.u8(e.x_outcome);
    }
    return w.buf;
}

BasisAnnounce decode_basis_announce(const std::vector<uint8_t>& p) {
    Reader r(p);
    BasisAnnounce m;
    const uint32_t count = r.u32();
    m.entries.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        AnnounceEntry e;
        e.slot = r.u64();
        const uint8_t b = r.u8();
        if (b > 1) throw WireError("bad basis value in announcement");
        e.basis = Basis(b);
        e.x_outcome = r.u8();
        m.entries.push_back(e);
    }
    r.done();
    return m;
}

std::vector<uint8_t> encode_sift_reply(const SiftReply& m) {
    Writer w;
    w.u32(uint32_t(m.entries.size()));
    for (const auto& e : m.entries) {
        w.u8(e.keep);
        w.u8(e.intensity);
    }
    return w.buf;
}

SiftReply decode_sift_reply(const std::vector<uint8_t>& p) {
    Reader r(p);
    SiftReply m;
    const uint32_t count = r.u32();
    m.entries.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        SiftReplyEntry e;
        e.keep = r.u8();
        e.intensity = r.u8();
        m.entries.push_back(e);
    }
    r.done();
    return m;
}

std::vector<uint8_t> encode_parity_req(const ParityReqMsg& m) {
    Writer w;
    w.u32(m.block_idx);
    w.u8(m.pass);
    w.u8(m.kind);
    if (m.kind == 0) {
        w.u64(m.perm_seed);
        w.u32(m.block_size);
    } else {
        w.u32(uint32_t(m.ranges.size()));
        for (const auto& rg : m.ranges) {
            w.u32(rg.start);
            w.u32(rg.len);
        }
    }
    return w.buf;
}

ParityReqMsg decode_parity_req(const std::vector<uint8_t>& p) {
    Reader r(p);
    ParityReqMsg m;
    m.block_idx = r.u32();
    m.pass = r.u8();
    m.kind = r.u8();
    if (m.kind == 0) {
        m.perm_seed = r.u64();
        m.block_size = r.u32();
    } else if (m.kind == 1) {
        const uint32_t count = r.u32();
        m.ranges.reserve(count);
        for (uint32_t i = 0; i < count; ++i) {
            ParityRange rg;
            rg.start = r.u32();
            rg.len = r.u32();
            m.ranges.push_back(rg);
        }
    } else {
        throw WireError("bad parity request kind");
    }
    r.done();
    return m;
}

std::vector<uint8_t> encode_parity_resp(const ParityRespMsg& m) {
    Writer w;
    w.u32(uint32_t(m.bits.size()));
    w.bytes(m.bits.to_bytes());
    return w.buf;
}

ParityRespMsg decode_parity_resp(const std::vector<uint8_t>& p) {
    Reader r(p);
    ParityRespMsg m;
    const uint32_t count = r.u32();
    m.bits = BitVec::from_bytes(r.raw((count + 7) / 8), count);
    r.done();
    return m;
}

std::vector<uint8_t> encode_verify(const VerifyMsg& m) {
    Writer w;
    w.u32(m.block_idx);
    w.u64(m.hash_seed);
    w.u64(m.hash);
    w.u32(m.corrected);
    return w.buf;
}

VerifyMsg decode_verify(const std::vector<uint8_t>& p) {
    Reader r(p);
    VerifyMsg m;
    m.block_idx = r.u32();
    m.hash_seed = r.u64();
    m.hash = r.u64();
    m.corrected = r.u32();
    r.done();
    return m;
}

std::vector<uint8_t> encode_verify_ack(const VerifyAckMsg& m) {
    Writer w;
    w.u32(m.block_idx);
    w.u8(m.ok);
    return w.buf;
}

VerifyAckMsg decode_verify_ack(const std::vector<uint8_t>& p) {
    Reader r(p);
    VerifyAckMsg m;
    m.block_idx = r.u32();
    m.ok = r.u8();
    r.done();
    return m;
}

std::vector<uint8_t> encode_pa_seed(const PaSeedMsg& m) {
    Writer w;
    w.u32(m.l);
    w.u64(uint64_t(m.seed_bits.size()));
    w.bytes(m.seed_bits.to_bytes());
    w.u32(m.prng_id);
    return w.buf;
}

PaSeedMsg decode_pa_seed(const std::vector<uint8_t>& p) {
    Reader r(p);
    PaSeedMsg m;
    m.l = r.u32();
    const uint64_t nbits = r.u64();
    m.seed_bits = BitVec::from_bytes(r.raw((nbits + 7) / 8), nbits);
    m.prng_id = r.u32();
    r.done();
    return m;
}

std::vector<uint8_t> encode_session_stats(const SessionStatsMsg& m) {
    Writer w;
    w.f64(m.s_z0_low);
    w.f64(m.s_z0_high);
    w.f64(m.s_z1_low);
    w.f64(m.s_x0_low);
    w.f64(m.s_x1_low);
    w.f64(m.v_x1_high);
    w.f64(m.phi_z_high);
    w.f64(m.tau0);
    w.f64(m.tau1);
    w.u64(m.l);
    w.u64(m.lambda_ec);
    w.f64(m.qber_z);
    w.f64(m.qber_x);
    w.u32(m.blocks_failed);
    w.u64(m.slots_sent);
    return w.buf;
}

SessionStatsMsg decode_session_stats(const std::vector<uint8_t>& p) {
    Reader r(p);
    SessionStatsMsg m;
    m.s_z0_low = r.f64();
    m.s_z0_high = r.f64();
    m.s_z1_low = r.f64();
    m.s_x0_low = r.f64();
    m.s_x1_low = r.f64();
    m.v_x1_high = r.f64();
    m.phi_z_high = r.f64();
    m.tau0 = r.f64();
    m.tau1 = r.f64();
    m.l = r.u64();
    m.lambda_ec = r.u64();
    m.qber_z = r.f64();
    m.qber_x = r.f64();
    m.blocks_failed = r.u32();
    m.slots_sent = r.u64();
    r.done();
    return m;
}

std::vector<uint8_t> encode_abort(const AbortMsg& m) {
    Writer w;
    w.u8(m.code);
    w.u32(uint32_t(m.reason.size()));
    for (char c : m.reason) w.u8(uint8_t(c));
    return w.buf;
}

AbortMsg decode_abort(const std::vector<uint8_t>& p) {
    Reader r(p);
    AbortMsg m;
    m.code = r.u8();
    const uint32_t len = r.u32();
    const uint8_t* s = r.raw(len);
    m.reason.assign(reinterpret_cast<const char*>(s), len);
    r.done();
    return m;
}

}  // namespace qkd

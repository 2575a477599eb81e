#include "qkd/sift.hpp"

namespace qkd {

SiftedStats sift(const std::vector<PulseRecord>& records,
                 const std::vector<DetectionEvent>& events) {
    std::unordered_map<uint64_t, const PulseRecord*> by_slot;
    by_slot.reserve(records.size());
    for (const auto& r : records) by_slot[r.slot] = &r;

    SiftedStats s;
    if (!records.empty()) {
        uint64_t last = 0;
        for (const auto& r : records) last = std::max(last, r.slot);
        s.slots_sent = last + 1;
    }

    for (const auto& ev : events) {
        auto it = by_slot.find(ev.slot);
        if (it == by_slot.end())
            throw ProtocolError("sift: detection at slot " + std::to_string(ev.slot) +
                                " has no matching pulse record");
        const PulseRecord& r = *it->second;
        if (r.basis != ev.basis) continue;  // basis mismatch, discarded

        const int b = int(r.basis), k = int(r.intensity);
        s.n[b][k] += 1;
        if (r.basis == Basis::Z) {
            s.raw_key_alice.push_back(r.bit);
            s.raw_key_bob.push_back(ev.bit);
            if (ev.bit != r.bit) s.m[b][k] += 1;  // ground truth; protocol learns Q_Z from Cascade
        } else {
            if (ev.bit == 1) s.m[b][k] += 1;  // |-> outcome on a |+> preparation
        }
    }
    return s;
}

BasisAnnounce make_announcement(const std::vector<DetectionEvent>& events) {
    BasisAnnounce ann;
    ann.entries.reserve(events.size());
    for (const auto& ev : events)
        ann.entries.push_back(
            {ev.slot, ev.basis, ev.basis == Basis::X ? ev.bit : kNoBit});
    return ann;
}

PulseStore::Entry PulseStore::take(uint64_t slot) {
    auto it = map_.find(slot);
    if (it == map_.end())
        throw ProtocolError("sift: announced slot " + std::to_string(slot) +
                            " has no pulse record (desynchronized)");
    Entry e = it->second;
    map_.erase(it);
    return e;
}

SiftReply alice_process_announcement(const BasisAnnounce& ann, PulseStore& store,
                                     SiftedStats& stats) {
    SiftReply reply;
    reply.entries.reserve(ann.entries.size());
    for (const auto& e : ann.entries) {
        const auto rec = store.take(e.slot);
        SiftReplyEntry re{0, kNoBit};
        if (rec.basis == e.basis) {
            re.keep = 1;
            const int b = int(rec.basis), k = int(rec.intensity);
            stats.n[b][k] += 1;
            if (rec.basis == Basis::Z) {
                stats.raw_key_alice.push_back(rec.bit);
            } else {
                re.intensity = uint8_t(rec.intensity);
                if (e.x_outcome == 1) stats.m[b][k] += 1;
            }
        }
        reply.entries.push_back(re);
    }
    return reply;
}

void bob_apply_reply(const std::vector<DetectionEvent>& announced, const SiftReply& reply,
                     SiftedStats& stats) {
    if (announced.size() != reply.entries.size())
        throw ProtocolError("sift: reply length does not match announcement");
    for (size_t i = 0; i < announced.size(); ++i) {
        const auto& ev = announced[i];
        const auto& re = reply.entries[i];
        if (!re.keep) continue;
        if (ev.basis == Basis::Z) {
            stats.n[int(Basis::Z)][0] += 1;  // intensity unknown to Bob; aggregate count
            stats.raw_key_bob.push_back(ev.bit);
        } else {
            if (re.intensity > 1)
                throw ProtocolError("sift: kept X entry without intensity label");
            stats.n[int(Basis::X)][re.intensity] += 1;
            if (ev.bit == 1) stats.m[int(Basis::X)][re.intensity] += 1;
        }
    }
}

}  // namespace qkd

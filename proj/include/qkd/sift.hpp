#pragma once

#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "qkd/bitvec.hpp"
#include "qkd/errors.hpp"
#include "qkd/photonics.hpp"

namespace qkd {

// Per-(basis, intensity) tallies plus the Z-basis raw key buffers. An
// endpoint fills the buffers it legitimately knows; the full-knowledge
// sift() below fills everything including the ground-truth m[Z].
struct SiftedStats {
    std::array<std::array<uint64_t, 2>, 2> n{{{0, 0}, {0, 0}}};  // [basis][intensity]
    std::array<std::array<uint64_t, 2>, 2> m{{{0, 0}, {0, 0}}};
    BitVec raw_key_alice;
    BitVec raw_key_bob;
    uint64_t slots_sent = 0;

    uint64_t n_total(Basis b) const { return n[int(b)][0] + n[int(b)][1]; }
    uint64_t m_total(Basis b) const { return m[int(b)][0] + m[int(b)][1]; }
};

// Basis reconciliation with both sides' data on the table (simulation and
// test path). Events with mismatched bases are discarded; Z matches feed
// the raw keys, X matches the m_X error tallies (outcome 1 = |->).
SiftedStats sift(const std::vector<PulseRecord>& records,
                 const std::vector<DetectionEvent>& events);

// --- protocol messages -----------------------------------------------------

inline constexpr uint8_t kNoBit = 0xFF;

struct AnnounceEntry {
    uint64_t slot;
    Basis basis;
    uint8_t x_outcome;  // disclosed for X-basis detections, kNoBit for Z
};
struct BasisAnnounce {
    std::vector<AnnounceEntry> entries;
};

struct SiftReplyEntry {
    uint8_t keep;       // 1 = bases matched
    uint8_t intensity;  // Alice's label for kept X entries, else kNoBit
};
struct SiftReply {
    std::vector<SiftReplyEntry> entries;  // aligned with the announcement
};

// Z-basis bit values never enter the announcement.
BasisAnnounce make_announcement(const std::vector<DetectionEvent>& events);

// Alice's compact record of emitted pulses (basis, bit, intensity by slot).
// The photon number is not physical knowledge and is not stored here.
class PulseStore {
public:
    void add(const PulseRecord& r) {
        map_[r.slot] = Entry{r.basis, r.bit, r.intensity};
    }
    size_t size() const { return map_.size(); }

    struct Entry {
        Basis basis;
        uint8_t bit;
        Intensity intensity;
    };
    // Throws ProtocolError for an unknown slot (desynchronization).
    Entry take(uint64_t slot);

private:
    std::unordered_map<uint64_t, Entry> map_;
};

// Alice's side: decides keep/discard, updates her tallies and raw key,
// reveals intensity labels only for kept X-basis slots.
SiftReply alice_process_announcement(const BasisAnnounce& ann, PulseStore& store,
                                     SiftedStats& stats);

// Bob's side: applies the reply to his announced detections; his raw key
// and his per-intensity X tallies (intensity labels come from the reply).
void bob_apply_reply(const std::vector<DetectionEvent>& announced, const SiftReply& reply,
                     SiftedStats& stats);

}  // namespace qkd

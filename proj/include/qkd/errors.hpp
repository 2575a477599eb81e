#pragma once

#include <stdexcept>

namespace qkd {

// Desynchronization, malformed peer behaviour, aborted sessions.
struct ProtocolError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Framing and payload decode failures.
struct WireError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace qkd

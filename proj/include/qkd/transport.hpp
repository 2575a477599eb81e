#pragma once

#include <cstdint>
#include <memory>

#include "qkd/wire.hpp"

namespace qkd {

// Observer on the classical channel; tests hang order checkers and leak
// meters here.
class MessageTap {
public:
    virtual ~MessageTap() = default;
    virtual void on_message(bool bob_to_alice, const LinkMessage& msg) = 0;
};

// The passive endpoint: answers one request with one reply.
class MessageServer {
public:
    virtual ~MessageServer() = default;
    virtual LinkMessage handle(const LinkMessage& request) = 0;
};

// The driving endpoint's view of the classical channel: reliable, ordered,
// request-reply.
class RequestChannel {
public:
    virtual ~RequestChannel() = default;
    virtual LinkMessage call(const LinkMessage& request) = 0;
};

// In-process channel. Every message still goes through frame encode/decode
// so the byte path is exercised on each call.
class LocalChannel : public RequestChannel {
public:
    explicit LocalChannel(MessageServer& server, MessageTap* tap = nullptr)
        : server_(server), tap_(tap) {}
    LinkMessage call(const LinkMessage& request) override;

private:
    MessageServer& server_;
    MessageTap* tap_;
};

// TCP loopback variants with the same framing.
class TcpRequestChannel : public RequestChannel {
public:
    TcpRequestChannel(const std::string& host, uint16_t port);
    ~TcpRequestChannel() override;
    LinkMessage call(const LinkMessage& request) override;

private:
    int fd_ = -1;
};

class TcpServer {
public:
    explicit TcpServer(uint16_t port);  // 0 picks an ephemeral port
    ~TcpServer();
    uint16_t port() const { return port_; }
    // Accept one connection and serve requests until the peer closes.
    void serve_one(MessageServer& server);

private:
    int listen_fd_ = -1;
    uint16_t port_ = 0;
};

}  // namespace qkd

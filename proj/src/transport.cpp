#include "qkd/transport.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace qkd {

LinkMessage LocalChannel::call(const LinkMessage& request) {
    const auto req_bytes = frame_encode(request);
    if (tap_) tap_->on_message(true, request);
    const LinkMessage decoded = frame_decode(req_bytes);
    LinkMessage reply = server_.handle(decoded);
    const auto rep_bytes = frame_encode(reply);
    if (tap_) tap_->on_message(false, reply);
    return frame_decode(rep_bytes);
}

namespace {

void write_all(int fd, const uint8_t* data, size_t n) {
    while (n > 0) {
        const ssize_t k = ::write(fd, data, n);
        if (k <= 0) {
            if (k < 0 && errno == EINTR) continue;
            throw ProtocolError("transport: connection lost while writing");
        }
        data += k;
        n -= size_t(k);
    }
}

// Returns false on clean EOF at a frame boundary.
bool read_frame(int fd, std::vector<uint8_t>& out) {
    uint8_t header[5];
    size_t got = 0;
    while (got < 5) {
        const ssize_t k = ::read(fd, header + got, 5 - got);
        if (k == 0) {
            if (got == 0) return false;
            throw WireError("truncated frame header");
        }
        if (k < 0) {
            if (errno == EINTR) continue;
            throw ProtocolError("transport: read error");
        }
        got += size_t(k);
    }
    uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= uint32_t(header[1 + i]) << (8 * i);
    out.assign(header, header + 5);
    out.resize(size_t(5) + len);
    size_t pos = 5;
    while (pos < out.size()) {
        const ssize_t k = ::read(fd, out.data() + pos, out.size() - pos);
        if (k == 0) throw WireError("truncated frame");
        if (k < 0) {
            if (errno == EINTR) continue;
            throw ProtocolError("transport: read error");
        }
        pos += size_t(k);
    }
    return true;
}

}  // namespace

TcpRequestChannel::TcpRequestChannel(const std::string& host, uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw ProtocolError("transport: cannot create socket");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd_);
        throw ProtocolError("transport: bad address " + host);
    }
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(fd_);
        throw ProtocolError("transport: connect failed");
    }
    const int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

TcpRequestChannel::~TcpRequestChannel() {
    if (fd_ >= 0) ::close(fd_);
}

LinkMessage TcpRequestChannel::call(const LinkMessage& request) {
    const auto bytes = frame_encode(request);
    write_all(fd_, bytes.data(), bytes.size());
    std::vector<uint8_t> reply;
    if (!read_frame(fd_, reply)) throw ProtocolError("transport: peer closed mid-session");
    return frame_decode(reply);
}

TcpServer::TcpServer(uint16_t port) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw ProtocolError("transport: cannot create socket");
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
        ::listen(listen_fd_, 1) != 0) {
        ::close(listen_fd_);
        throw ProtocolError("transport: bind/listen failed");
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

TcpServer::~TcpServer() {
    if (listen_fd_ >= 0) ::close(listen_fd_);
}

void TcpServer::serve_one(MessageServer& server) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) throw ProtocolError("transport: accept failed");
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    std::vector<uint8_t> buf;
    try {
        while (read_frame(fd, buf)) {
            const LinkMessage reply = server.handle(frame_decode(buf));
            const auto bytes = frame_encode(reply);
            write_all(fd, bytes.data(), bytes.size());
        }
    } catch (...) {
        ::close(fd);
        throw;
    }
    ::close(fd);
}

}  // namespace qkd

// Copyright (C) 2026 The latcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/time.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "latcorr/error.hpp"
#include "latcorr/grid.hpp"
#include "latcorr/io.hpp"

namespace latcorr::wire {

// Frame layout on the stream:
//   u32 LE length  (bytes that follow: opcode + payload)
//   u8  opcode
//   payload
//
// Payloads (all integers u32 LE, strings = u32 LE byte count + UTF-8,
// tensors = u32 C, H, W + C*H*W f32 LE):
//   PING           request: empty           reply: u32 protocol version
//   PREDICT_EPS    request: u32 timestep, string conditioning, tensor z
//                  reply:   tensor eps (same shape as z)
//   ENCODE         request: tensor image in [-1,1]   reply: tensor latent
//   DECODE         request: tensor latent            reply: tensor image
//   SCORE_REGIONS  request: tensor image             reply: tensor 1xHxW scores
//   ERROR          u32 code, string message
inline constexpr std::uint32_t kProtocolVersion = 1;
inline constexpr std::uint32_t kMaxFrameBytes = 1u << 30;

enum class Opcode : std::uint8_t {
    Ping = 0,
    PredictEps = 1,
    Encode = 2,
    Decode = 3,
    ScoreRegions = 4,
    Error = 255,
};

enum ErrorCode : std::uint32_t {
    kMalformedFrame = 1,
    kShapeMismatch = 2,
    kModelFailure = 3,
    kUnsupportedOpcode = 4,
};

struct Frame {
    Opcode opcode = Opcode::Ping;
    std::vector<std::uint8_t> payload;

    bool operator==(const Frame&) const = default;
};

inline void put_string(std::vector<std::uint8_t>& out, std::string_view s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

inline std::string read_string(ByteReader& in) {
    const std::uint32_t n = in.u32();
    auto bytes = in.take(n);
    return {bytes.begin(), bytes.end()};
}

inline std::vector<std::uint8_t> encode_frame(const Frame& f) {
    std::vector<std::uint8_t> out;
    out.reserve(5 + f.payload.size());
    put_u32(out, static_cast<std::uint32_t>(1 + f.payload.size()));
    out.push_back(static_cast<std::uint8_t>(f.opcode));
    out.insert(out.end(), f.payload.begin(), f.payload.end());
    return out;
}

// Decodes exactly one frame occupying all of `bytes`.
inline Frame decode_frame(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes);
    const std::uint32_t len = in.u32();
    if (len == 0) throw ProtocolError("zero-length frame", kMalformedFrame);
    if (len != in.remaining()) throw ProtocolError("frame length does not match buffer", kMalformedFrame);
    Frame f;
    f.opcode = static_cast<Opcode>(in.u8());
    auto rest = in.take(len - 1);
    f.payload.assign(rest.begin(), rest.end());
    return f;
}

// --- message builders / parsers -----------------------------------------------

inline Frame ping_request() { return {Opcode::Ping, {}}; }

inline Frame pong_reply() {
    Frame f{Opcode::Ping, {}};
    put_u32(f.payload, kProtocolVersion);
    return f;
}

inline Frame tensor_frame(Opcode op, const LatentGrid& g) {
    Frame f{op, {}};
    put_tensor(f.payload, g);
    return f;
}

struct PredictEpsRequest {
    std::uint32_t timestep = 0;
    std::string conditioning;
    LatentGrid z;
};

inline Frame predict_eps_request(std::uint32_t timestep, std::string_view conditioning, const LatentGrid& z) {
    Frame f{Opcode::PredictEps, {}};
    put_u32(f.payload, timestep);
    put_string(f.payload, conditioning);
    put_tensor(f.payload, z);
    return f;
}

inline PredictEpsRequest parse_predict_eps_request(const Frame& f) {
    try {
        ByteReader in(f.payload);
        PredictEpsRequest r;
        r.timestep = in.u32();
        r.conditioning = read_string(in);
        r.z = read_tensor(in);
        if (in.remaining() != 0) throw FormatError("trailing bytes");
        return r;
    } catch (const Error& e) {
        throw ProtocolError(std::string("PREDICT_EPS: ") + e.what(), kShapeMismatch);
    }
}

inline LatentGrid parse_tensor_payload(const Frame& f) {
    try {
        ByteReader in(f.payload);
        LatentGrid g = read_tensor(in);
        if (in.remaining() != 0) throw FormatError("trailing bytes");
        return g;
    } catch (const Error& e) {
        throw ProtocolError(std::string("tensor payload: ") + e.what(), kShapeMismatch);
    }
}

inline Frame error_reply(std::uint32_t code, std::string_view message) {
    Frame f{Opcode::Error, {}};
    put_u32(f.payload, code);
    put_string(f.payload, message);
    return f;
}

struct ErrorInfo {
    std::uint32_t code = 0;
    std::string message;
};

inline ErrorInfo parse_error(const Frame& f) {
    ByteReader in(f.payload);
    ErrorInfo e;
    e.code = in.u32();
    e.message = read_string(in);
    return e;
}

// --- endpoints ----------------------------------------------------------------

struct Endpoint {
    std::string host;
    std::uint16_t port = 0;

    std::string str() const { return host + ":" + std::to_string(port); }
};

// "host:port" with a non-empty host and a port in [1, 65535].
inline std::optional<Endpoint> parse_endpoint(std::string_view s) {
    const auto colon = s.rfind(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 >= s.size()) return std::nullopt;
    unsigned port = 0;
    auto digits = s.substr(colon + 1);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || port == 0 || port > 65535) return std::nullopt;
    Endpoint e{std::string(s.substr(0, colon)), static_cast<std::uint16_t>(port)};
    for (char c : e.host)
        if (c == ' ' || c == '/' || c == ':') return std::nullopt;
    return e;
}

// --- sockets ------------------------------------------------------------------

// Owning wrapper around a connected stream socket.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
    Socket& operator=(Socket&& o) noexcept {
        if (this != &o) {
            close();
            fd_ = std::exchange(o.fd_, -1);
        }
        return *this;
    }
    ~Socket() { close(); }

    bool valid() const noexcept { return fd_ >= 0; }
    int fd() const noexcept { return fd_; }

    void close() noexcept {
        if (fd_ >= 0) {
            ::close(fd_);
            fd_ = -1;
        }
    }

    void set_timeout(std::chrono::milliseconds t) {
        timeval tv{};
        tv.tv_sec = static_cast<time_t>(t.count() / 1000);
        tv.tv_usec = static_cast<suseconds_t>((t.count() % 1000) * 1000);
        ::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
        ::setsockopt(fd_, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof tv);
    }

    // Returns false on orderly shutdown or error.
    bool send_all(std::span<const std::uint8_t> bytes) {
        std::size_t sent = 0;
        while (sent < bytes.size()) {
            const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) return false;
            sent += static_cast<std::size_t>(n);
        }
        return true;
    }

    bool recv_exact(std::uint8_t* dst, std::size_t count) {
        std::size_t got = 0;
        while (got < count) {
            const ssize_t n = ::recv(fd_, dst + got, count - got, 0);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) return false;
            got += static_cast<std::size_t>(n);
        }
        return true;
    }

private:
    int fd_ = -1;
};

inline Socket connect_to(const Endpoint& ep, std::chrono::milliseconds timeout) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string port = std::to_string(ep.port);
    if (::getaddrinfo(ep.host.c_str(), port.c_str(), &hints, &res) != 0 || res == nullptr) return {};
    Socket sock;
    for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
        Socket s(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
        if (!s.valid()) continue;
        s.set_timeout(timeout);
        if (::connect(s.fd(), ai->ai_addr, ai->ai_addrlen) == 0) {
            int one = 1;
            ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            sock = std::move(s);
            break;
        }
    }
    ::freeaddrinfo(res);
    return sock;
}

// Reads one frame. Returns nullopt if the peer closed or timed out before a
// full frame arrived; throws ProtocolError for an oversize/zero length.
inline std::optional<Frame> read_frame(Socket& s) {
    std::uint8_t hdr[4];
    if (!s.recv_exact(hdr, 4)) return std::nullopt;
    const std::uint32_t len = static_cast<std::uint32_t>(hdr[0]) | static_cast<std::uint32_t>(hdr[1]) << 8 |
                              static_cast<std::uint32_t>(hdr[2]) << 16 | static_cast<std::uint32_t>(hdr[3]) << 24;
    if (len == 0 || len > kMaxFrameBytes) throw ProtocolError("bad frame length " + std::to_string(len), kMalformedFrame);
    std::vector<std::uint8_t> body(len);
    if (!s.recv_exact(body.data(), len)) return std::nullopt;
    Frame f;
    f.opcode = static_cast<Opcode>(body[0]);
    f.payload.assign(body.begin() + 1, body.end());
    return f;
}

inline bool write_frame(Socket& s, const Frame& f) { return s.send_all(encode_frame(f)); }

// Synchronous request/response client holding one connection. A transport
// failure closes the connection and the request is retried on a fresh one
// up to `retries` more times.
class Client {
public:
    explicit Client(Endpoint ep, std::chrono::milliseconds deadline = std::chrono::seconds(120), int retries = 1)
        : ep_(std::move(ep)), deadline_(deadline), retries_(retries) {}

    const Endpoint& endpoint() const noexcept { return ep_; }

    // Sends `req` and returns the reply. ERROR replies become ProtocolError.
    Frame call(const Frame& req) {
        int attempts = 0;
        while (true) {
            ++attempts;
            if (!sock_.valid()) sock_ = connect_to(ep_, deadline_);
            if (sock_.valid() && write_frame(sock_, req)) {
                std::optional<Frame> reply;
                try {
                    reply = read_frame(sock_);
                } catch (const ProtocolError&) {
                    sock_.close();
                    throw;
                }
                if (reply) {
                    if (reply->opcode == Opcode::Error) {
                        ErrorInfo e;
                        try {
                            e = parse_error(*reply);
                        } catch (const Error&) {
                            throw ProtocolError("unparseable ERROR frame from " + ep_.str(), kMalformedFrame);
                        }
                        throw ProtocolError("remote error " + std::to_string(e.code) + ": " + e.message,
                                            static_cast<int>(e.code));
                    }
                    if (reply->opcode != req.opcode)
                        throw ProtocolError("reply opcode does not match request", kMalformedFrame);
                    return std::move(*reply);
                }
            }
            sock_.close();
            if (attempts > retries_)
                throw ConnectivityError("cannot reach " + ep_.str() + " after " + std::to_string(attempts) +
                                            " attempt(s)",
                                        attempts);
        }
    }

    std::uint32_t ping() {
        Frame r = call(ping_request());
        ByteReader in(r.payload);
        return in.u32();
    }

private:
    Endpoint ep_;
    std::chrono::milliseconds deadline_;
    int retries_;
    Socket sock_;
};

}  // namespace latcorr::wire

// Copyright (C) 2026 The latcorr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

#include "latcorr/denoiser.hpp"
#include "latcorr/schedule.hpp"
#include "latcorr/wire.hpp"

namespace latcorr {

// Protocol-level model used by the in-process mock bridge. The denoiser is
// zero or analytic over `schedule`; the VAE average-pools by `vae_factor`
// on ENCODE and nearest-upsamples on DECODE; SCORE_REGIONS maps the channel
// mean of an image in [-1,1] onto [0,1].
struct MockBackend {
    NoiseSchedule schedule = default_schedule();
    DenoiserKind kind = DenoiserKind::AnalyticGaussian;
    GaussianPrior prior;
    std::size_t vae_factor = 1;

    wire::Frame handle(const wire::Frame& req) const {
        try {
            switch (req.opcode) {
                case wire::Opcode::Ping: return wire::pong_reply();
                case wire::Opcode::PredictEps: {
                    auto r = wire::parse_predict_eps_request(req);
                    if (r.timestep == 0 || r.timestep > schedule.total_train_steps())
                        return wire::error_reply(wire::kModelFailure, "timestep out of range");
                    LatentGrid eps = kind == DenoiserKind::AnalyticGaussian
                                         ? analytic_eps(prior, r.z, schedule.alpha_bar_at(r.timestep))
                                         : LatentGrid(r.z.channels(), r.z.height(), r.z.width());
                    return wire::tensor_frame(wire::Opcode::PredictEps, eps);
                }
                case wire::Opcode::Encode:
                    return wire::tensor_frame(wire::Opcode::Encode, encode(wire::parse_tensor_payload(req)));
                case wire::Opcode::Decode:
                    return wire::tensor_frame(wire::Opcode::Decode, decode(wire::parse_tensor_payload(req)));
                case wire::Opcode::ScoreRegions:
                    return wire::tensor_frame(wire::Opcode::ScoreRegions, score(wire::parse_tensor_payload(req)));
                case wire::Opcode::Error: break;
            }
            return wire::error_reply(wire::kUnsupportedOpcode, "unsupported opcode");
        } catch (const ProtocolError& e) {
            return wire::error_reply(static_cast<std::uint32_t>(e.code()), e.what());
        } catch (const Error& e) {
            return wire::error_reply(wire::kModelFailure, e.what());
        }
    }

    LatentGrid encode(const LatentGrid& im) const {
        const std::size_t f = vae_factor;
        if (im.height() % f != 0 || im.width() % f != 0)
            throw ProtocolError("ENCODE: image size not divisible by VAE factor", wire::kShapeMismatch);
        LatentGrid out(im.channels(), im.height() / f, im.width() / f);
        for (std::size_t c = 0; c < im.channels(); ++c)
            for (std::size_t y = 0; y < out.height(); ++y)
                for (std::size_t x = 0; x < out.width(); ++x) {
                    double s = 0.0;
                    for (std::size_t dy = 0; dy < f; ++dy)
                        for (std::size_t dx = 0; dx < f; ++dx) s += im.at(c, y * f + dy, x * f + dx);
                    out.at(c, y, x) = s / static_cast<double>(f * f);
                }
        return out;
    }

    LatentGrid decode(const LatentGrid& z) const {
        const std::size_t f = vae_factor;
        LatentGrid out(z.channels(), z.height() * f, z.width() * f);
        for (std::size_t c = 0; c < out.channels(); ++c)
            for (std::size_t y = 0; y < out.height(); ++y)
                for (std::size_t x = 0; x < out.width(); ++x) out.at(c, y, x) = z.at(c, y / f, x / f);
        return out;
    }

    LatentGrid score(const LatentGrid& im) const {
        LatentGrid out(1, im.height(), im.width());
        for (std::size_t y = 0; y < im.height(); ++y)
            for (std::size_t x = 0; x < im.width(); ++x) {
                double s = 0.0;
                for (std::size_t c = 0; c < im.channels(); ++c) s += im.at(c, y, x);
                const double mean = im.channels() ? s / static_cast<double>(im.channels()) : 0.0;
                out.at(0, y, x) = std::clamp((mean + 1.0) / 2.0, 0.0, 1.0);
            }
        return out;
    }
};

// Loopback TCP server answering the bridge protocol from a handler function.
// Connections are served on their own threads, one request in flight each.
class MockServer {
public:
    using Handler = std::function<wire::Frame(const wire::Frame&)>;

    explicit MockServer(Handler handler, std::uint16_t port = 0) : handler_(std::move(handler)) {
        listener_ = wire::Socket(::socket(AF_INET, SOCK_STREAM, 0));
        if (!listener_.valid()) throw IoError("mock server: socket() failed");
        int one = 1;
        ::setsockopt(listener_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        addr.sin_port = htons(port);
        if (::bind(listener_.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
            ::listen(listener_.fd(), 16) != 0)
            throw IoError("mock server: cannot bind 127.0.0.1:" + std::to_string(port));
        socklen_t len = sizeof addr;
        ::getsockname(listener_.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
        port_ = ntohs(addr.sin_port);
        acceptor_ = std::thread([this] { accept_loop(); });
    }

    explicit MockServer(MockBackend backend, std::uint16_t port = 0)
        : MockServer(Handler([b = std::move(backend)](const wire::Frame& f) { return b.handle(f); }), port) {}

    MockServer(const MockServer&) = delete;
    MockServer& operator=(const MockServer&) = delete;

    ~MockServer() { stop(); }

    std::uint16_t port() const noexcept { return port_; }
    std::string endpoint() const { return "127.0.0.1:" + std::to_string(port_); }
    std::size_t requests_served() const noexcept { return served_.load(); }

    void stop() {
        if (stopping_.exchange(true)) return;
        if (acceptor_.joinable()) acceptor_.join();
        {
            std::lock_guard lock(mu_);
            for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
        }
        for (auto& t : workers_)
            if (t.joinable()) t.join();
        listener_.close();
    }

private:
    void accept_loop() {
        while (!stopping_.load()) {
            pollfd p{listener_.fd(), POLLIN, 0};
            if (::poll(&p, 1, 50) <= 0) continue;
            int fd = ::accept(listener_.fd(), nullptr, nullptr);
            if (fd < 0) continue;
            std::lock_guard lock(mu_);
            open_fds_.push_back(fd);
            workers_.emplace_back([this, fd] { serve(fd); });
        }
    }

    void serve(int fd) {
        wire::Socket s(fd);
        while (!stopping_.load()) {
            std::optional<wire::Frame> req;
            try {
                req = wire::read_frame(s);
            } catch (const ProtocolError& e) {
                wire::write_frame(s, wire::error_reply(wire::kMalformedFrame, e.what()));
                break;
            }
            if (!req) break;
            ++served_;
            if (!wire::write_frame(s, handler_(*req))) break;
        }
        std::lock_guard lock(mu_);
        open_fds_.erase(std::remove(open_fds_.begin(), open_fds_.end(), fd), open_fds_.end());
    }

    Handler handler_;
    wire::Socket listener_;
    std::uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::atomic<std::size_t> served_{0};
    std::thread acceptor_;
    std::mutex mu_;
    std::vector<int> open_fds_;
    std::vector<std::thread> workers_;
};

}  // namespace latcorr

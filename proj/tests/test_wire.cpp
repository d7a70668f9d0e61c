// Copyright (C) 2026 The latcorr Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "latcorr/mock_server.hpp"
#include "latcorr/rng.hpp"
#include "latcorr/wire.hpp"

namespace latcorr::wire {
namespace {

using Bytes = std::vector<std::uint8_t>;

TEST(WireVectors, PingRequestAndReply) {
    EXPECT_EQ(encode_frame(ping_request()), (Bytes{1, 0, 0, 0, 0}));
    EXPECT_EQ(encode_frame(pong_reply()), (Bytes{5, 0, 0, 0, 0, 1, 0, 0, 0}));
}

TEST(WireVectors, PredictEpsLayout) {
    LatentGrid z(1, 1, 2, std::vector<double>{1.0, -2.0});
    const Bytes expected{
        31, 0, 0, 0,               // length: opcode + 30 payload bytes
        1,                         // PREDICT_EPS
        0xe8, 0x03, 0, 0,          // timestep 1000
        2, 0, 0, 0, 'a', 'b',      // conditioning "ab"
        1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0,  // C, H, W
        0x00, 0x00, 0x80, 0x3f,    // 1.0f
        0x00, 0x00, 0x00, 0xc0,    // -2.0f
    };
    EXPECT_EQ(encode_frame(predict_eps_request(1000, "ab", z)), expected);
    auto parsed = parse_predict_eps_request(decode_frame(expected));
    EXPECT_EQ(parsed.timestep, 1000u);
    EXPECT_EQ(parsed.conditioning, "ab");
    EXPECT_EQ(parsed.z, z);
}

TEST(WireVectors, ErrorFrameLayout) {
    const Bytes expected{10, 0, 0, 0, 255, 2, 0, 0, 0, 1, 0, 0, 0, 'x'};
    EXPECT_EQ(encode_frame(error_reply(kShapeMismatch, "x")), expected);
    auto e = parse_error(decode_frame(expected));
    EXPECT_EQ(e.code, 2u);
    EXPECT_EQ(e.message, "x");
}

TEST(WireCodec, DecodeRejectsBadLengths) {
    EXPECT_THROW(decode_frame(Bytes{0, 0, 0, 0}), ProtocolError);
    EXPECT_THROW(decode_frame(Bytes{3, 0, 0, 0, 1}), ProtocolError);
    EXPECT_THROW(decode_frame(Bytes{1, 0}), FormatError);
}

TEST(WireCodec, TensorPayloadRejectsOversizeHeader) {
    Frame f{Opcode::Encode, {}};
    for (int i = 0; i < 3; ++i) put_u32(f.payload, 0xffffffffu);
    put_f32(f.payload, 1.0f);
    EXPECT_THROW(parse_tensor_payload(f), ProtocolError);
}

TEST(WireCodec, RoundTripRandomFrames) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
        Frame f{static_cast<Opcode>(rng() % 256), Bytes(rng() % 64)};
        for (auto& b : f.payload) b = static_cast<std::uint8_t>(rng());
        EXPECT_EQ(decode_frame(encode_frame(f)), f);
    }
}

TEST(Endpoint, Parsing) {
    EXPECT_EQ(parse_endpoint("localhost:8080")->port, 8080);
    EXPECT_EQ(parse_endpoint("10.0.0.1:1")->host, "10.0.0.1");
    for (const char* bad : {"", "host", ":80", "host:", "host:0", "host:65536", "host:8x", "a b:1"})
        EXPECT_FALSE(parse_endpoint(bad)) << bad;
}

// Sends raw bytes on a fresh connection and reads one reply frame.
std::optional<Frame> raw_exchange(const MockServer& server, const Bytes& bytes, Socket* keep = nullptr) {
    Socket s = connect_to(*parse_endpoint(server.endpoint()), std::chrono::seconds(5));
    EXPECT_TRUE(s.valid());
    EXPECT_TRUE(s.send_all(bytes));
    auto reply = read_frame(s);
    if (keep) *keep = std::move(s);
    return reply;
}

class MockServerTest : public ::testing::Test {
protected:
    MockServerTest() : server(MockBackend{default_schedule(), DenoiserKind::AnalyticGaussian, {{0.0}, 1.0}, 2}) {}
    MockServer server;
};

TEST_F(MockServerTest, PingReportsVersion) {
    Client c(*parse_endpoint(server.endpoint()));
    EXPECT_EQ(c.ping(), kProtocolVersion);
}

TEST_F(MockServerTest, EncodeDecodeAndScore) {
    Client c(*parse_endpoint(server.endpoint()));
    auto im = normal_grid(3, 4, 6, 1);
    for (double& v : im.data()) v = static_cast<float>(v);
    auto z = parse_tensor_payload(c.call(tensor_frame(Opcode::Encode, im)));
    ASSERT_EQ(z.shape_string(), LatentGrid(3, 2, 3).shape_string());
    EXPECT_NEAR(z.at(1, 0, 0), (im.at(1, 0, 0) + im.at(1, 0, 1) + im.at(1, 1, 0) + im.at(1, 1, 1)) / 4, 1e-6);
    auto back = parse_tensor_payload(c.call(tensor_frame(Opcode::Decode, z)));
    EXPECT_EQ(back.at(2, 3, 5), z.at(2, 1, 2));
    auto s = parse_tensor_payload(c.call(tensor_frame(Opcode::ScoreRegions, LatentGrid(3, 2, 2, 0.0))));
    EXPECT_EQ(s.at(0, 1, 1), 0.5);
}

TEST_F(MockServerTest, PredictEpsMatchesAnalytic) {
    Client c(*parse_endpoint(server.endpoint()));
    LatentGrid z(1, 1, 1, 1.0);
    auto eps = parse_tensor_payload(c.call(predict_eps_request(300, "", z)));
    const double ab = default_schedule().alpha_bar_at(300);
    EXPECT_NEAR(eps.at(0, 0, 0), analytic_eps({{0.0}, 1.0}, z, ab).at(0, 0, 0), 1e-6);
}

TEST_F(MockServerTest, ErrorCodes) {
    Client c(*parse_endpoint(server.endpoint()));
    Frame truncated{Opcode::PredictEps, {}};
    put_u32(truncated.payload, 10);
    try {
        c.call(truncated);
        FAIL();
    } catch (const ProtocolError& e) {
        EXPECT_EQ(e.code(), kShapeMismatch);
    }
    try {
        c.call(Frame{static_cast<Opcode>(9), {}});
        FAIL();
    } catch (const ProtocolError& e) {
        EXPECT_EQ(e.code(), kUnsupportedOpcode);
    }
    try {
        c.call(predict_eps_request(0, "", LatentGrid(1, 1, 1)));
        FAIL();
    } catch (const ProtocolError& e) {
        EXPECT_EQ(e.code(), kModelFailure);
    }
    EXPECT_EQ(c.ping(), kProtocolVersion);  // errors keep the connection usable
}

TEST_F(MockServerTest, MalformedFrameGetsErrorAndClose) {
    Socket s;
    auto reply = raw_exchange(server, Bytes{0, 0, 0, 0}, &s);
    ASSERT_TRUE(reply);
    EXPECT_EQ(reply->opcode, Opcode::Error);
    EXPECT_EQ(parse_error(*reply).code, kMalformedFrame);
    EXPECT_FALSE(read_frame(s));  // closed by the server
}

TEST_F(MockServerTest, FuzzedFramesAlwaysAnswered) {
    std::mt19937_64 rng(11);
    Socket s = connect_to(*parse_endpoint(server.endpoint()), std::chrono::seconds(5));
    for (int i = 0; i < 300; ++i) {
        Frame f{static_cast<Opcode>(rng() % 6 == 5 ? 255 : rng() % 5), Bytes(rng() % 48)};
        for (auto& b : f.payload) b = static_cast<std::uint8_t>(rng() % 4 == 0 ? rng() : rng() % 3);
        ASSERT_TRUE(write_frame(s, f));
        auto reply = read_frame(s);
        ASSERT_TRUE(reply) << "no reply to fuzzed frame " << i;
        if (reply->opcode == Opcode::Error) {
            const auto code = parse_error(*reply).code;
            EXPECT_GE(code, 1u);
            EXPECT_LE(code, 4u);
        } else {
            EXPECT_EQ(reply->opcode, f.opcode);
        }
    }
    Client c(*parse_endpoint(server.endpoint()));
    EXPECT_EQ(c.ping(), kProtocolVersion);
}

TEST(MockServerConcurrency, OneConnectionPerWorker) {
    MockServer server(MockBackend{});
    std::vector<std::thread> ts;
    std::atomic<int> ok{0};
    for (int w = 0; w < 4; ++w)
        ts.emplace_back([&] {
            Client c(*parse_endpoint(server.endpoint()));
            for (int i = 0; i < 10; ++i) ok += c.ping() == kProtocolVersion;
        });
    for (auto& t : ts) t.join();
    EXPECT_EQ(ok.load(), 40);
    EXPECT_EQ(server.requests_served(), 40u);
}

}  // namespace
}  // namespace latcorr::wire

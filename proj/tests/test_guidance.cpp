#include <gtest/gtest.h>

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cmath>
#include <limits>
#include <random>

#include "compc/bridge.hpp"
#include "compc/error.hpp"
#include "compc/guidance.hpp"
#include "compc/sampling.hpp"
#include "echo_server.hpp"

using namespace compc;

namespace {

PointCloud sphere_cloud(std::size_t n, double r = 0.5) {
  PointCloud c;
  for (const auto& p : fibonacci_sphere(n)) {
    c.points.push_back(r * p);
    c.normals.push_back(p);
  }
  return c;
}

CameraIntrinsics small_intr(int w = 48, int h = 40) { return CameraIntrinsics{w, h, 49.1, 0.01, 100.0}; }

GuidanceRequest random_request(std::mt19937_64& rng, int w, int h) {
  std::uniform_real_distribution<double> u(0, 1), a(-180, 180);
  GuidanceRequest r;
  r.width = w;
  r.height = h;
  r.reference_image.resize(3 * w * h);
  r.current_image.resize(3 * w * h);
  for (auto& v : r.reference_image) v = u(rng);
  for (auto& v : r.current_image) v = u(rng);
  r.relative_pose = {a(rng) / 4, a(rng), 0.0};
  r.step_fraction = u(rng);
  return r;
}

std::uint16_t closed_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
  socklen_t len = sizeof(addr);
  getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

}  // namespace

TEST(timestep_schedule, endpoints_and_monotone) {
  EXPECT_DOUBLE_EQ(timestep_schedule(0.0), 0.98);
  EXPECT_DOUBLE_EQ(timestep_schedule(1.0), 0.02);
  EXPECT_NEAR(timestep_schedule(0.5), 0.50, 1e-12);
  for (double f = 0.0; f < 1.0; f += 0.01) EXPECT_GE(timestep_schedule(f), timestep_schedule(std::min(1.0, f + 0.01)));
  EXPECT_THROW(timestep_schedule(1.5), PreconditionError);
}

TEST(oracle_provider, zero_at_truth_and_quadratic_offset) {
  OracleProvider oracle(sphere_cloud(800));
  const CameraPose vp{10, 30, 2.0};
  oracle.bind_reference(vp, small_intr());
  const RelativePose rel{5.0, -60.0, 0.0};
  const auto truth = oracle.render_truth(vp.offset(5.0, -60.0, 0.0), 48, 40);
  GuidanceRequest req;
  req.width = 48;
  req.height = 40;
  req.reference_image = truth.color;
  req.current_image = truth.color;
  req.relative_pose = rel;
  const auto zero = oracle.image_gradient(req);
  for (double v : zero.grad_image) EXPECT_EQ(v, 0.0);
  for (auto& v : req.current_image) v += 0.1;
  for (double v : oracle.image_gradient(req).grad_image) EXPECT_NEAR(v, 0.2, 1e-12);
}

TEST(oracle_provider, zero_outside_both_silhouettes) {
  OracleProvider oracle(sphere_cloud(1500));
  const CameraPose pole{90, 0, 2.0};
  oracle.bind_reference(pole, small_intr(64, 64));
  // Current state: a smaller sphere, rendered at the same pose.
  GaussianSet cur = input_gaussians(sphere_cloud(600, 0.3));
  const auto img = render(cur, pole, small_intr(64, 64));
  const auto truth = oracle.render_truth(pole, 64, 64);
  GuidanceRequest req{64, 64, truth.color, img.color, {}, 0.3};
  const auto g = oracle.image_gradient(req);
  std::size_t outside = 0;
  for (std::size_t k = 0; k < img.pixel_count(); ++k) {
    if (img.alpha[k] > 0.0 || truth.alpha[k] > 0.0) continue;
    ++outside;
    for (int c = 0; c < 3; ++c) EXPECT_EQ(g.grad_image[3 * k + c], 0.0);
  }
  EXPECT_GT(outside, 500u);
}

TEST(oracle_provider, deterministic) {
  const auto gt = sphere_cloud(500);
  OracleProvider a(gt), b(gt);
  a.bind_reference(CameraPose{0, 0, 2}, small_intr());
  b.bind_reference(CameraPose{0, 0, 2}, small_intr());
  std::mt19937_64 rng(1);
  const auto req = random_request(rng, 48, 40);
  EXPECT_EQ(a.image_gradient(req).grad_image, b.image_gradient(req).grad_image);
}

TEST(oracle_provider, gradient_is_mse_derivative_through_renderer) {
  const auto gt = sphere_cloud(400);
  OracleProvider oracle(gt);
  const CameraPose vp{20, 40, 2.0};
  const auto intr = small_intr(32, 32);
  oracle.bind_reference(vp, intr);
  GaussianSet g = input_gaussians(sphere_cloud(60, 0.4));
  g.frozen = false;
  for (auto& c : g.centers) c += Vec3(0.03, -0.02, 0.01);
  const auto truth = oracle.render_truth(vp, 32, 32).color;
  auto loss = [&](const GaussianSet& s) {
    const auto img = render(s, vp, intr);
    double l = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) l += (img.color[k] - truth[k]) * (img.color[k] - truth[k]);
    return l;
  };
  GuidanceRequest req{32, 32, truth, render(g, vp, intr).color, {}, 0.0};
  const auto resp = oracle.image_gradient(req);
  const auto grads = render_backward(std::span<const GaussianSet>(&g, 1), vp, intr, resp.grad_image)[0];
  std::size_t ok = 0, total = 0;
  const double h = 1e-4;
  for (std::size_t i = 0; i < g.size(); ++i)
    for (int c = 0; c < 3; ++c) {
      auto gp = g, gm = g;
      gp.centers[i][c] += h;
      gm.centers[i][c] -= h;
      const double fd = (loss(gp) - loss(gm)) / (2 * h);
      const double an = grads.d_centers[i][c];
      ++total;
      ok += std::abs(an - fd) <= 1e-2 * std::max({std::abs(an), std::abs(fd), 1e-6});
    }
  EXPECT_GE(ok, 0.95 * total);
}

TEST(zero_provider, returns_zeros) {
  ZeroProvider z;
  std::mt19937_64 rng(2);
  const auto req = random_request(rng, 8, 6);
  const auto resp = z.image_gradient(req);
  EXPECT_EQ(resp.grad_image, std::vector<double>(req.current_image.size(), 0.0));
  check_response(req, resp);
}

TEST(check_response, rejects_shape_and_nan) {
  std::mt19937_64 rng(3);
  const auto req = random_request(rng, 4, 4);
  GuidanceResponse bad;
  bad.grad_image.assign(5, 0.0);
  EXPECT_THROW(check_response(req, bad), GuidanceContractError);
  bad.grad_image.assign(48, 0.0);
  bad.grad_image[7] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(check_response(req, bad), GuidanceContractError);
}

TEST(wire, request_round_trip_and_layout) {
  std::mt19937_64 rng(4);
  auto req = random_request(rng, 5, 3);
  // Values exactly representable in float32 survive bit-exactly.
  for (auto& v : req.current_image) v = static_cast<float>(v);
  for (auto& v : req.reference_image) v = static_cast<float>(v);
  req.relative_pose = {12.5, -100.25, 0.0};
  req.step_fraction = 0.75;
  const auto bytes = wire::encode_request(req);
  ASSERT_EQ(bytes.size(), 16u + 16u + 2u * 4u * 45u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "CPGD");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[6], 3);  // H
  EXPECT_EQ(bytes[8], 5);  // W
  for (int i = 12; i < 16; ++i) EXPECT_EQ(bytes[i], 0);
  const auto back = wire::decode_request(bytes);
  EXPECT_EQ(back.width, 5);
  EXPECT_EQ(back.height, 3);
  EXPECT_EQ(back.current_image, req.current_image);
  EXPECT_EQ(back.reference_image, req.reference_image);
  EXPECT_EQ(back.relative_pose.d_azimuth_deg, -100.25);
  EXPECT_EQ(back.step_fraction, 0.75);
}

TEST(wire, error_ping_and_bad_frames) {
  const auto err = wire::encode_error("boom");
  EXPECT_EQ(wire::parse_header(err).flags, wire::kFlagError);
  EXPECT_EQ(wire::decode_error(err), "boom");
  EXPECT_THROW(wire::decode_response(err, 1, 1), TransportError);
  EXPECT_EQ(wire::parse_header(wire::encode_ping()).flags, wire::kFlagPing);
  auto bad = wire::encode_ping();
  bad[0] = 'X';
  EXPECT_THROW(wire::parse_header(bad), GuidanceContractError);
  EXPECT_THROW(wire::parse_header(std::vector<std::uint8_t>(7, 0)), GuidanceContractError);
}

TEST(bridge_address, parsing) {
  EXPECT_EQ(BridgeAddress::parse("example:1234").port, 1234);
  EXPECT_EQ(BridgeAddress::parse("example").port, 7631);
  EXPECT_EQ(BridgeAddress::parse(":99").host, "127.0.0.1");
  EXPECT_THROW(BridgeAddress::parse("h:notaport"), PreconditionError);
}

TEST(bridge, echo_round_trips_bit_exact) {
  mock::EchoServer server;
  BridgeProvider bridge(BridgeAddress{"127.0.0.1", server.port()}, 5000);
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const auto req = random_request(rng, 16, 12);
    const auto resp = bridge.image_gradient(req);
    ASSERT_EQ(resp.grad_image.size(), req.current_image.size());
    EXPECT_EQ(resp.weight, 1.0);
    for (std::size_t k = 0; k < resp.grad_image.size(); ++k) {
      const float expect = static_cast<float>(req.current_image[k]) - static_cast<float>(req.reference_image[k]);
      ASSERT_EQ(resp.grad_image[k], static_cast<double>(expect));
    }
  }
  EXPECT_EQ(server.requests_seen(), 100);
}

TEST(bridge, programmed_gradient_bit_exact) {
  mock::EchoServer server;
  std::vector<float> grad(3 * 8 * 8);
  for (std::size_t k = 0; k < grad.size(); ++k) grad[k] = std::ldexp(static_cast<float>(k) - 90.5f, -7);
  server.program(grad, 0.25f);
  BridgeProvider bridge(BridgeAddress{"127.0.0.1", server.port()}, 5000);
  std::mt19937_64 rng(6);
  const auto resp = bridge.image_gradient(random_request(rng, 8, 8));
  EXPECT_EQ(resp.weight, 0.25);
  for (std::size_t k = 0; k < grad.size(); ++k) EXPECT_EQ(resp.grad_image[k], static_cast<double>(grad[k]));
}

TEST(bridge, non_finite_response_is_contract_error) {
  mock::EchoServer server;
  std::vector<float> grad(3 * 4 * 4, 0.0f);
  grad[3] = std::numeric_limits<float>::infinity();
  server.program(grad, 1.0f);
  BridgeProvider bridge(BridgeAddress{"127.0.0.1", server.port()}, 5000);
  std::mt19937_64 rng(7);
  EXPECT_THROW(bridge.image_gradient(random_request(rng, 4, 4)), GuidanceContractError);
}

TEST(bridge, server_errors_and_drops_are_retryable) {
  mock::EchoServer server;
  BridgeProvider bridge(BridgeAddress{"127.0.0.1", server.port()}, 5000);
  std::mt19937_64 rng(8);
  const auto req = random_request(rng, 4, 4);
  server.fail_next(1);
  EXPECT_THROW(bridge.image_gradient(req), TransportError);
  EXPECT_NO_THROW(bridge.image_gradient(req));
  server.drop_next(1);
  EXPECT_THROW(bridge.image_gradient(req), TransportError);
  EXPECT_NO_THROW(bridge.image_gradient(req));  // reconnects
}

TEST(bridge, bad_magic_gets_error_frame_and_connection_survives) {
  mock::EchoServer server;
  auto sock = FrameSocket::connect(BridgeAddress{"127.0.0.1", server.port()}, 5000);
  std::vector<std::uint8_t> junk(20, 0x41);
  sock.send_frame(junk);
  const auto reply = sock.recv_frame();
  EXPECT_TRUE(wire::parse_header(reply).flags & wire::kFlagError);
  sock.send_frame(wire::encode_ping());
  EXPECT_TRUE(wire::parse_header(sock.recv_frame()).flags & wire::kFlagPing);
}

TEST(bridge, ping_after_request_is_answered_in_order) {
  mock::EchoServer server;
  auto sock = FrameSocket::connect(BridgeAddress{"127.0.0.1", server.port()}, 5000);
  std::mt19937_64 rng(9);
  const auto req = random_request(rng, 32, 32);
  sock.send_frame(wire::encode_request(req));
  sock.send_frame(wire::encode_ping());
  const auto first = sock.recv_frame();
  const auto second = sock.recv_frame();
  EXPECT_EQ(wire::parse_header(first).flags, 0);
  EXPECT_EQ(wire::decode_response(first, 32, 32).grad_image.size(), req.current_image.size());
  EXPECT_EQ(wire::parse_header(second).flags, wire::kFlagPing);
}

TEST(bridge, healthcheck) {
  mock::EchoServer server;
  EXPECT_TRUE(healthcheck(BridgeAddress{"127.0.0.1", server.port()}));
  EXPECT_FALSE(healthcheck(BridgeAddress{"127.0.0.1", closed_port()}, 500));
  BridgeProvider absent(BridgeAddress{"127.0.0.1", closed_port()}, 500);
  std::mt19937_64 rng(10);
  EXPECT_THROW(absent.image_gradient(random_request(rng, 2, 2)), TransportError);
}
